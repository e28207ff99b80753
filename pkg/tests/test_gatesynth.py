import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geogates import qops
from geogates.errors import (
    ConstraintViolated,
    NoCommensurateCycle,
    NoRootInBracket,
    OutOfDomain,
    UnreachablePhase,
)
from geogates.gatesynth import (
    build_controlled_u,
    constraint_lhs,
    elimination_constraint_single,
    elimination_constraint_two,
    find_cycles,
    solve_elimination_single,
    synthesize_single_qubit_phase,
)
from geogates.invariant import (
    SingleQubitDrive,
    TwoQubitDrive,
    closed_form_phases,
    drive_frame,
    phase_decomposition,
)
from geogates.propagate import sample_analytic

from conftest import EXAMPLE_J, EXAMPLE_OMEGA0


def quadrature_dynamic(drive):
    frame = drive_frame(drive)
    return phase_decomposition(drive, frame, sample_analytic(drive, frame.times)).dynamic


def brute_force_cycle(r, max_m, tol):
    for m in range(1, max_m + 1):
        x = m * (1 + r)
        if abs(x - 2 * round(x / 2)) <= tol:
            return m
    return None


class TestConstraint:
    def test_vanishes_on_circle(self):
        assert elimination_constraint_single(SingleQubitDrive(1.0, 0.5, 0.5)) == pytest.approx(0.0, abs=1e-15)

    def test_matches_dynamic_phase_formula(self):
        d = SingleQubitDrive(1.0, 1.0, 0.5)
        lhs = elimination_constraint_single(d)
        assert lhs * 2 / d.omega == pytest.approx(-closed_form_phases(1.0, 1.0, 0.5).dynamic[0] / math.pi, abs=1e-10)

    def test_transverse_only_against_quadrature(self):
        d = SingleQubitDrive(1.0, 0.0, 1.0)
        lhs = elimination_constraint_single(d)
        assert lhs == pytest.approx(1 / (2 * math.sqrt(2)), abs=1e-12)
        assert lhs * 2 * math.pi / d.omega == pytest.approx(-quadrature_dynamic(d)[0], abs=1e-8)

    @settings(max_examples=40, deadline=None)
    @given(st.floats(0.5, 2.0), st.floats(0.0, 2.0), st.floats(0.05, 2.0))
    def test_identity_with_dynamic_phase(self, omega, a, b):
        d = SingleQubitDrive(omega, a * omega, b * omega)
        lhs = elimination_constraint_single(d)
        gd = closed_form_phases(d.omega, d.omega1, d.omega2).dynamic[0]
        assert lhs * 2 * math.pi / omega == pytest.approx(-gd, abs=1e-10 * omega * 10)
        assert lhs * 2 * math.pi / omega == pytest.approx(-quadrature_dynamic(d)[0], abs=1e-6)

    def test_rejects_zero_transverse(self):
        with pytest.raises(OutOfDomain):
            elimination_constraint_single(SingleQubitDrive(1.0, 0.5, 0.0))

    def test_zero_field_limit(self):
        assert constraint_lhs(1.0, 0.5, 0.0) == pytest.approx(-0.25)
        assert constraint_lhs(1.0, 1.5, 0.0) == pytest.approx(0.75)


class TestConstraintTwo:
    def test_worked_example(self):
        d = TwoQubitDrive(1.0, EXAMPLE_J, EXAMPLE_OMEGA0)
        assert abs(elimination_constraint_two(d)) <= 1e-12

    def test_lower_block_quadrature(self):
        d = TwoQubitDrive(1.0, 0.5, 0.5)
        frame = drive_frame(d)
        rep = phase_decomposition(d, frame, sample_analytic(d, frame.times))
        i = frame.level(d.lam2 / 2)
        for m in (1, 2, 5):
            lhs = elimination_constraint_two(d, m)
            assert lhs * 2 * math.pi / d.omega == pytest.approx(-rep.dynamic[i], abs=1e-8)

    def test_vanishing_factor(self):
        assert abs(elimination_constraint_two(TwoQubitDrive(1.0, 1.0, 1e-9))) <= 1e-8

    def test_bad_m(self):
        with pytest.raises(ValueError):
            elimination_constraint_two(TwoQubitDrive(1.0, 0.5, 0.5), 0)


class TestSolve:
    @pytest.mark.parametrize("omega1, omega2", [(0.5, 0.5), (0.9, 0.3)])
    def test_circle(self, omega1, omega2):
        sol = solve_elimination_single(1.0, 0, omega1)
        assert sol.drive.omega2 == pytest.approx(omega2, abs=1e-12)
        assert max(qops.phase_distance(np.array(sol.dynamic), 0.0)) <= 1e-6

    def test_outside_circle(self):
        with pytest.raises(OutOfDomain):
            solve_elimination_single(1.0, 0, 1.2)

    def test_nonzero_k(self):
        sol = solve_elimination_single(1.0, 1, 0.5)
        assert abs(sol.residual) <= 1e-10
        np.testing.assert_allclose(sol.dynamic, [-math.pi, math.pi], atol=1e-6)
        assert qops.phase_distance(sol.dynamic[0], sol.dynamic[1]) <= 1e-6

    def test_no_root(self):
        with pytest.raises(NoRootInBracket):
            solve_elimination_single(1.0, -5, 0.5)


class TestFindCycles:
    def test_worked_example(self):
        sol = find_cycles(5 / 3)
        assert (sol.m, sol.N) == (3, 4)
        assert sol.ratio == Fraction(5, 3)

    def test_exact_fraction(self):
        sol = find_cycles(Fraction(5, 3))
        assert (sol.m, sol.N, sol.approximation_error) == (3, 4, 0.0)

    def test_unit_ratio(self):
        assert (find_cycles(1.0).m, find_cycles(1.0).N) == (1, 1)

    def test_irrational(self):
        with pytest.raises(NoCommensurateCycle):
            find_cycles(math.sqrt(2), max_m=10, tol=1e-9)

    def test_max_m_too_small(self):
        with pytest.raises(NoCommensurateCycle):
            find_cycles(Fraction(5, 3), max_m=2)

    @settings(max_examples=200, deadline=None)
    @given(st.integers(0, 60), st.integers(1, 30))
    def test_minimal_against_brute_force(self, p, q):
        r = Fraction(p, q)
        m = brute_force_cycle(float(r), 64, 1e-9)
        assert find_cycles(float(r)).m == m
        assert find_cycles(r).m == m
        sol = find_cycles(float(r))
        assert abs(sol.m * (1 + float(r)) - 2 * sol.N) <= 1e-9


class TestControlledU:
    def test_worked_example(self):
        spec = build_controlled_u(1.0, EXAMPLE_J, EXAMPLE_OMEGA0)
        assert (spec.cycles.m, spec.cycles.N) == (3, 4)
        s = math.sqrt(33) / 9
        np.testing.assert_allclose(spec.target_geometric, [3 * math.pi * (1 - s), 3 * math.pi * (1 + s)], atol=1e-12)
        np.testing.assert_allclose(spec.geometric, spec.target_geometric, atol=1e-6)
        r = math.sqrt(11 / 3)
        np.testing.assert_allclose(spec.geometric_mod, qops.wrap_phase(np.array([math.pi * (1 - r), math.pi * (1 + r)])), atol=1e-6)
        assert spec.upper_fidelity >= 1 - 1e-8
        assert spec.formula_fidelity >= 1 - 1e-8
        assert spec.gate.diagnostics["block_leakage"] <= 1e-8

    def test_constraint_violated(self):
        with pytest.raises(ConstraintViolated):
            build_controlled_u(1.0, 0.3, 0.5)


class TestSynthesis:
    @pytest.mark.parametrize(
        "gamma, omega1, omega2",
        [
            (math.pi * (1 - 1 / math.sqrt(2)), 0.5, 0.5),
            (math.pi * (1 - math.sqrt(3) / 2), 0.25, math.sqrt(3) / 4),
        ],
    )
    def test_examples(self, gamma, omega1, omega2):
        sol = synthesize_single_qubit_phase(1.0, gamma)
        assert sol.drive.omega1 == pytest.approx(omega1, abs=1e-10)
        assert sol.drive.omega2 == pytest.approx(omega2, abs=1e-10)
        assert sol.geometric[0] == pytest.approx(gamma, abs=1e-6)

    @pytest.mark.parametrize("gamma", [math.pi, 0.0, -0.5, 4.0])
    def test_unreachable(self, gamma):
        with pytest.raises(UnreachablePhase):
            synthesize_single_qubit_phase(1.0, gamma)

    @settings(max_examples=20, deadline=None)
    @given(st.floats(0.1, math.pi - 0.1), st.floats(0.5, 2.0))
    def test_round_trip_on_circle(self, gamma, omega):
        sol = synthesize_single_qubit_phase(omega, gamma, verify=False)
        d = sol.drive
        assert d.omega1**2 + d.omega2**2 == pytest.approx(omega * d.omega1, abs=1e-10)
        assert closed_form_phases(d.omega, d.omega1, d.omega2).geometric[1] == pytest.approx(2 * math.pi - gamma, abs=1e-9)
