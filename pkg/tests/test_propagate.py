import math

import numpy as np
import pytest
import scipy.linalg as sla

from geogates import qops
from geogates.errors import NonHermitianInput
from geogates.invariant import (
    SingleQubitDrive,
    TwoQubitDrive,
    closed_form_phases,
    drive_frame,
    hamiltonian,
)
from geogates.propagate import (
    analytic_propagator,
    computational_gate_formula,
    cyclic_gate,
    gate_formula,
    max_propagator_error,
    numeric_propagator,
    sample_analytic,
    simulate,
)
from geogates.qops import SIGMA_X

from conftest import EXAMPLE_J, EXAMPLE_OMEGA0, random_single_drives, random_two_drives


def rk4(H, T, steps):
    """Classical RK4 for i dU/dt = H(t) U; independent of the exponential integrator."""
    h = T / steps
    d = H(0.0).shape[-1]
    U = np.eye(d, dtype=complex)
    f = lambda t, X: -1j * H(t) @ X
    for k in range(steps):
        t = k * h
        k1 = f(t, U)
        k2 = f(t + h / 2, U + h / 2 * k1)
        k3 = f(t + h / 2, U + h / 2 * k2)
        k4 = f(t + h, U + h * k3)
        U = U + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return U


class TestAnalytic:
    def test_identity_at_zero(self, rng):
        for d in random_single_drives(rng, 5) + random_two_drives(rng, 5):
            np.testing.assert_allclose(analytic_propagator(d, 0.0), np.eye(hamiltonian(d, 0.0).shape[0]), atol=1e-15)

    @pytest.mark.parametrize(
        "drive",
        [SingleQubitDrive(1.0, 0.5, 0.5), SingleQubitDrive(1.3, 1.9, 0.2), TwoQubitDrive(1.0, EXAMPLE_J, EXAMPLE_OMEGA0)],
    )
    def test_against_rk4(self, drive):
        H = lambda t: hamiltonian(drive, t)
        np.testing.assert_allclose(analytic_propagator(drive, drive.period), rk4(H, drive.period, 4000), atol=1e-8)

    def test_one_period_eigenphases(self):
        d = SingleQubitDrive(1.0, 0.5, 0.5)
        U = analytic_propagator(d, d.period)
        phases = np.sort(qops.wrap_phase(np.angle(np.linalg.eigvals(U))))
        cf = closed_form_phases(1.0, 0.5, 0.5)
        np.testing.assert_allclose(phases, np.sort(qops.wrap_phase(np.array(cf.total))), atol=1e-12)

    def test_unitary(self, rng):
        for d in random_single_drives(rng, 5) + random_two_drives(rng, 5):
            assert qops.unitarity_defect(analytic_propagator(d, np.linspace(0, 3 * d.period, 50))) <= 1e-11


class TestNumeric:
    def test_agrees_with_analytic(self, rng):
        for d in random_single_drives(rng, 5) + random_two_drives(rng, 3):
            num = simulate(d, steps_per_cycle=64 * 1563, record_every=1563)
            ana = sample_analytic(d, num.times)
            assert max_propagator_error(num, ana) <= 1e-8
            assert num.unitarity_defect() <= 1e-10

    def test_constant_hamiltonian(self, rng):
        H = np.array([[0.3, 0.2 - 0.1j], [0.2 + 0.1j, -0.7]])
        prop = numeric_propagator(lambda t: np.broadcast_to(H, np.shape(t) + (2, 2)), 2.0, 10_000)
        np.testing.assert_allclose(prop.final, sla.expm(-2j * H), atol=1e-12)

    def test_second_order_convergence(self):
        d = SingleQubitDrive(1.0, 0.5, 0.5)
        exact = analytic_propagator(d, d.period)
        errs = [np.max(np.abs(simulate(d, steps_per_cycle=n).final - exact)) for n in (1000, 2000, 4000)]
        orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        assert np.all(orders >= 1.9)

    def test_recording(self):
        d = SingleQubitDrive(1.0, 0.5, 0.5)
        prop = simulate(d, steps_per_cycle=2000, record_every=500)
        assert prop.unitaries.shape == (5, 2, 2)
        np.testing.assert_array_equal(prop.unitaries[0], np.eye(2))
        np.testing.assert_allclose(prop.times, np.linspace(0, d.period, 5))

    @pytest.mark.parametrize("steps, every", [(999, 1), (2000, 3), (2000, 0)])
    def test_bad_steps(self, steps, every):
        with pytest.raises(ValueError):
            numeric_propagator(lambda t: np.zeros(np.shape(t) + (2, 2)), 1.0, steps, every)

    def test_non_hermitian(self):
        M = np.array([[0, 1], [0, 0]], dtype=complex)
        with pytest.raises(NonHermitianInput):
            numeric_propagator(lambda t: np.broadcast_to(M, np.shape(t) + (2, 2)), 1.0, 1000)


class TestCyclicGate:
    def test_single_spin_diagonal(self):
        d = SingleQubitDrive(1.0, 0.5, 0.5)
        frame = drive_frame(d)
        g = cyclic_gate(d, frame, 1, sample_analytic(d, frame.times))
        cf = closed_form_phases(1.0, 0.5, 0.5)
        np.testing.assert_allclose(g.invariant_basis, np.diag(np.exp(1j * np.array(cf.total))), atol=1e-12)
        assert g.diagnostics["offdiagonal_leakage"] <= 1e-12

    def test_two_cycles_square(self):
        d = SingleQubitDrive(1.0, 0.5, 0.5)
        frame = drive_frame(d)
        prop = simulate(d)
        g1, g2 = cyclic_gate(d, frame, 1, prop), cyclic_gate(d, frame, 2, prop)
        np.testing.assert_allclose(g2.computational_basis, g1.computational_basis @ g1.computational_basis, atol=1e-10)

    def test_power_matches_long_integration(self):
        d = SingleQubitDrive(1.0, 0.5, 0.5)
        frame = drive_frame(d)
        g = cyclic_gate(d, frame, 3, simulate(d))
        long = simulate(d, cycles=3)
        np.testing.assert_allclose(g.computational_basis, long.final, atol=1e-9)

    def test_worked_two_spin_example(self):
        d = TwoQubitDrive(1.0, EXAMPLE_J, EXAMPLE_OMEGA0)
        frame = drive_frame(d)
        g = cyclic_gate(d, frame, 3, sample_analytic(d, frame.times))
        assert g.diagnostics["block_leakage"] <= 1e-12
        assert g.diagnostics["offdiagonal_leakage"] <= 1e-10
        assert g.listing_order.shape == (4, 4)

    def test_default_propagator(self):
        d = SingleQubitDrive(1.0, 1.0, 1.0)
        g = cyclic_gate(d, drive_frame(d))
        assert g.diagnostics["unitarity_defect"] <= 1e-10

    def test_rejects_zero_cycles(self):
        d = SingleQubitDrive(1.0, 1.0, 1.0)
        with pytest.raises(ValueError):
            cyclic_gate(d, drive_frame(d), 0, np.eye(2))


class TestGateFormula:
    def test_pi_over_two(self):
        np.testing.assert_allclose(gate_formula(math.pi / 2, math.pi / 2), 1j * SIGMA_X, atol=1e-15)

    def test_trivial_phase(self):
        d = SingleQubitDrive(1.0, 1.0, 1.0)  # lam = omega
        np.testing.assert_allclose(computational_gate_formula(d), np.eye(2), atol=1e-15)

    def test_matches_simulation(self, rng):
        for d in random_single_drives(rng, 10):
            U = analytic_propagator(d, d.period)
            assert qops.gate_fidelity(U, computational_gate_formula(d)) >= 1 - 1e-12
            np.testing.assert_allclose(U, computational_gate_formula(d), atol=1e-11)
