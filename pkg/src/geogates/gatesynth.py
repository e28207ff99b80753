"""Dynamic-phase elimination and geometric gate synthesis.

For a rotating-field spin the one-cycle dynamic phases are
``-/+ 2*pi*C/omega`` where ``C`` is the left-hand side returned by
:func:`elimination_constraint_single`; choosing ``C = K*omega/2`` makes the
two dynamic phases differ by a multiple of ``2*pi`` so only geometric phases
act on the qubit.  ``K = 0`` is the circle ``omega1^2 + omega2^2 = omega*omega1``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Union

import numpy as np
from scipy.optimize import bisect

from . import qops
from .errors import (
    BlockLeakage,
    ConstraintViolated,
    NoCommensurateCycle,
    NoRootInBracket,
    OutOfDomain,
    UnreachablePhase,
)
from .invariant import (
    DEFAULT_GRID_POINTS,
    DEGENERACY_RTOL,
    PhaseReport,
    SingleQubitDrive,
    TwoQubitDrive,
    closed_form_phases,
    drive_frame,
    mixing_angle,
    phase_decomposition,
)
from .propagate import GateResult, cyclic_gate, gate_formula, sample_analytic, simulate

CONSTRAINT_TOL = 1e-10
PHASE_TOL = 1e-6
CYCLE_TOL = 1e-9
DEFAULT_MAX_M = 64
BISECT_MAXITER = 200
LEAKAGE_TOL = 1e-8


@dataclass(frozen=True)
class EliminationSolution:
    drive: Union[SingleQubitDrive, TwoQubitDrive]
    K: int
    m: int
    residual: float
    dynamic: Optional[tuple] = None
    geometric: Optional[tuple] = None


@dataclass(frozen=True)
class CycleSolution:
    m: int
    N: int
    ratio: Fraction
    approximation_error: float


@dataclass(frozen=True, eq=False)
class ControlledGateSpec:
    """Controlled gate acting on spin 1 when spin 2 is down, identity when up."""

    drive: TwoQubitDrive
    K: int
    cycles: CycleSolution
    gate: GateResult
    phases: PhaseReport
    constraint_residual: float
    target_geometric: tuple
    geometric: tuple
    lower_eigenphases: tuple
    upper_fidelity: float
    upper_deviation: float
    formula_fidelity: float

    @property
    def geometric_mod(self) -> tuple:
        return tuple(float(x) for x in qops.wrap_phase(np.array(self.geometric)))

    @property
    def lower_block(self) -> np.ndarray:
        return self.gate.listing_order[2:, 2:]

    @property
    def upper_block(self) -> np.ndarray:
        return self.gate.listing_order[:2, :2]


def constraint_lhs(omega: float, omega1: float, omega2: float) -> float:
    """Elimination-constraint left-hand side for raw drive parameters.

    ``omega2 = 0`` is taken as the limit ``chi in {0, pi}``.
    """
    lam = math.hypot(omega2, omega1 - omega)
    if omega2 == 0:
        chi = mixing_angle(omega, omega1, omega2)
        return 0.5 * omega1 * math.cos(chi)
    # lam + omega - omega1, rationalised when it would cancel
    if omega1 > omega:
        a = omega2**2 / (lam + omega1 - omega)
    else:
        a = lam + omega - omega1
    return a * (omega1**2 - omega * omega1 + omega2**2) / (omega2**2 + a**2)


def elimination_constraint_single(drive: SingleQubitDrive) -> float:
    """Left-hand side ``(lam+w-w1)(w1^2 - w w1 + w2^2) / (w2^2 + (lam+w-w1)^2)``.

    Equals ``(|B|/2) cos(chi - theta)``, hence ``-gamma_+^d * omega/(2 pi)``.
    """
    if not drive.omega2 > 0:
        raise OutOfDomain("elimination constraint needs omega2 > 0")
    return constraint_lhs(drive.omega, drive.omega1, drive.omega2)


def elimination_constraint_two(drive: TwoQubitDrive, m: int = 1) -> float:
    """Constraint left-hand side for the spin-2-down block (``omega1 -> J``, ``omega2 -> omega0``).

    Independent of ``m``; compare with ``K*omega/(2m)``.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    return constraint_lhs(drive.omega, drive.coupling, drive.omega0)


def _one_cycle_phases(drive: SingleQubitDrive, grid_points: int) -> PhaseReport:
    frame = drive_frame(drive, grid_points)
    return phase_decomposition(drive, frame, sample_analytic(drive, frame.times))


def _check_dynamic(report: PhaseReport, K: int) -> None:
    expected = np.array([-K * math.pi, K * math.pi])
    miss = float(np.max(qops.phase_distance(report.dynamic, expected)))
    if miss > PHASE_TOL:
        raise ConstraintViolated(f"simulated dynamic phases miss -/+K*pi by {miss:.3e} rad")


def solve_elimination_single(
    omega: float,
    K: int,
    seed_omega1: float,
    verify: bool = True,
    grid_points: int = DEFAULT_GRID_POINTS,
) -> EliminationSolution:
    """Find ``omega2`` making the one-cycle dynamic phases ``-/+ K*pi`` for fixed ``omega1``."""
    omega1 = float(seed_omega1)
    if K == 0:
        if not 0 < omega1 < omega:
            raise OutOfDomain(f"K=0 needs 0 < omega1 < omega (omega*omega1 - omega1^2 = {omega*omega1 - omega1**2:.3g})")
        omega2 = math.sqrt(omega * omega1 - omega1**2)
    else:
        target = K * omega / 2

        def f(w2):
            return constraint_lhs(omega, omega1, w2) - target

        grid = omega * np.logspace(-6, 3, 400)
        values = np.array([f(w) for w in grid])
        change = np.nonzero(np.sign(values[:-1]) != np.sign(values[1:]))[0]
        if change.size == 0:
            raise NoRootInBracket(f"no sign change of the K={K} constraint for omega1={omega1}")
        lo, hi = grid[change[0]], grid[change[0] + 1]
        omega2 = bisect(f, lo, hi, xtol=1e-15 * omega, rtol=4 * np.finfo(float).eps, maxiter=BISECT_MAXITER)

    drive = SingleQubitDrive(omega, omega1, omega2)
    residual = constraint_lhs(omega, omega1, omega2) - K * omega / 2
    if abs(residual) > CONSTRAINT_TOL * omega:
        raise NoRootInBracket(f"constraint residual {residual:.3e} after bisection")
    dynamic = geometric = None
    if verify:
        report = _one_cycle_phases(drive, grid_points)
        _check_dynamic(report, K)
        dynamic = tuple(float(x) for x in report.dynamic)
        geometric = tuple(float(x) for x in report.geometric)
    return EliminationSolution(drive, K, 1, residual, dynamic, geometric)


def find_cycles(lambda1_over_omega, max_m: int = DEFAULT_MAX_M, tol: float = CYCLE_TOL) -> CycleSolution:
    """Smallest ``m <= max_m`` with ``|m (1 + r) - 2N| <= tol`` for some integer ``N``.

    A :class:`fractions.Fraction` ratio ``p/q`` is solved exactly:
    ``m = 2q / gcd(p + q, 2q)``.
    """
    if max_m < 1 or tol < 0:
        raise ValueError("need max_m >= 1 and tol >= 0")
    if isinstance(lambda1_over_omega, Fraction):
        r = lambda1_over_omega
        m = 2 * r.denominator // math.gcd(r.numerator + r.denominator, 2 * r.denominator)
        if m > max_m:
            raise NoCommensurateCycle(f"ratio {r} needs m={m} > max_m={max_m}")
        N = int(m * (1 + r) / 2)
        return CycleSolution(m, N, r, 0.0)
    r = float(lambda1_over_omega)
    for m in range(1, max_m + 1):
        x = m * (1 + r)
        N = round(x / 2)
        err = abs(x - 2 * N)
        if err <= tol:
            return CycleSolution(m, N, Fraction(2 * N - m, m), err)
    raise NoCommensurateCycle(f"no m <= {max_m} brings m(1 + {r:.12g}) within {tol:g} of an even integer")


def build_controlled_u(
    omega: float,
    J: float,
    omega0: float,
    max_m: int = DEFAULT_MAX_M,
    K: int = 0,
    grid_points: int = DEFAULT_GRID_POINTS,
    substeps: int = 25,
) -> ControlledGateSpec:
    """Simulate the multi-cycle two-spin gate and check its controlled-U shape.

    ``m`` comes from commensurating the spin-2-up block; the constraint on
    the spin-2-down block must hold for ``K`` at that ``m``.  One period is
    integrated numerically with ``grid_points * substeps`` steps.
    """
    drive = TwoQubitDrive(omega, J, omega0)
    drive.check_nondegenerate()
    lhs = elimination_constraint_two(drive)
    if K == 0 and abs(lhs) > CONSTRAINT_TOL * omega:
        raise ConstraintViolated(f"K=0 constraint residual {lhs:.3e} (J^2 - J w + w0^2 = {J*J - J*omega + omega0**2:.3e})")
    cycles = find_cycles(drive.lam1 / omega, max_m)
    m = cycles.m
    residual = lhs - K * omega / (2 * m)
    if abs(residual) > CONSTRAINT_TOL * omega:
        raise ConstraintViolated(f"constraint residual {residual:.3e} for K={K}, m={m}")

    frame = drive_frame(drive, grid_points)
    prop = simulate(drive, steps_per_cycle=grid_points * substeps, record_every=substeps)
    gate = cyclic_gate(drive, frame, m, prop)
    if gate.diagnostics["block_leakage"] > LEAKAGE_TOL:
        raise BlockLeakage(f"cross-block leakage {gate.diagnostics['block_leakage']:.3e}")
    phases = phase_decomposition(drive, frame, prop)

    lam2 = drive.lam2
    idx = (frame.level(lam2 / 2), frame.level(-lam2 / 2))
    _, (w, a2, b2) = drive.blocks
    closed = closed_form_phases(w, a2, b2)
    target = tuple(m * g for g in closed.geometric)
    geometric = tuple(float(m * phases.geometric[i]) for i in idx)
    lower_eig = tuple(float(gate.eigenphases[i]) for i in idx)

    listed = gate.listing_order
    upper = listed[:2, :2]
    formula = gate_formula(drive.angles.chi2, m * closed.total[0])
    return ControlledGateSpec(
        drive=drive,
        K=K,
        cycles=cycles,
        gate=gate,
        phases=phases,
        constraint_residual=residual,
        target_geometric=target,
        geometric=geometric,
        lower_eigenphases=lower_eig,
        upper_fidelity=qops.gate_fidelity(upper, np.eye(2)),
        upper_deviation=float(np.max(np.abs(upper - np.eye(2)))),
        formula_fidelity=qops.gate_fidelity(listed[2:, 2:], formula),
    )


def synthesize_single_qubit_phase(
    omega: float,
    gamma_target: float,
    verify: bool = True,
    grid_points: int = DEFAULT_GRID_POINTS,
) -> EliminationSolution:
    """Drive on the K=0 circle whose upper invariant state gains ``gamma_target``.

    On the circle ``lam = sqrt(omega^2 - omega*omega1)`` and the geometric
    phase is ``pi(1 - lam/omega)``, so only ``0 < gamma < pi`` is reachable.
    """
    if not 0 < gamma_target < math.pi * (1 - DEGENERACY_RTOL):
        raise UnreachablePhase(f"gamma={gamma_target!r} outside (0, pi) for the K=0 family")

    def achieved(w1):
        return math.pi * (1 - math.sqrt(max(omega * omega - omega * w1, 0.0)) / omega)

    omega1 = bisect(
        lambda w1: achieved(w1) - gamma_target,
        0.0,
        omega,
        xtol=1e-15 * omega,
        rtol=4 * np.finfo(float).eps,
        maxiter=BISECT_MAXITER,
    )
    omega2 = math.sqrt(max(omega * omega1 - omega1**2, 0.0))
    drive = SingleQubitDrive(omega, omega1, omega2)
    gamma = math.pi * (1 - drive.lam / omega)
    if abs(gamma - gamma_target) > 1e-8:
        raise UnreachablePhase(f"bisection reached {gamma!r}, target {gamma_target!r}")
    residual = constraint_lhs(omega, omega1, omega2) if omega2 > 0 else 0.0
    dynamic = geometric = None
    if verify:
        report = _one_cycle_phases(drive, grid_points)
        _check_dynamic(report, 0)
        dynamic = tuple(float(x) for x in report.dynamic)
        geometric = tuple(float(x) for x in report.geometric)
    return EliminationSolution(drive, 0, 1, residual, dynamic, geometric)
