"""Driven spin Hamiltonians, their periodic invariants, eigenframes and phases.

Two families are supported:

* a single spin-1/2 in a field rotating about z with angular frequency
  ``omega`` (longitudinal strength ``omega1``, transverse ``omega2``);
* two Ising-coupled spins (coupling ``J``) with a rotating transverse field
  of strength ``omega0`` on the first spin only.

For both, ``I(t) = R(t) I(0) R(t)^H`` with ``R(t) = exp(-i omega t sz/2)``
(acting on spin 1) and ``I(0) = H(0) - omega sz/2`` solves
``dI/dt = i[I, H]``.  The two-spin problem splits into two independent
2x2 rotating-field problems: on ``{uu, du}`` (spin 2 up) with effective
longitudinal field ``-J`` and on ``{ud, dd}`` (spin 2 down) with ``+J``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Union

import numpy as np
from scipy.integrate import simpson

from . import qops
from .errors import (
    DegenerateInvariant,
    GaugeDiscontinuity,
    GridMismatch,
    NonUnitaryPropagator,
    OutOfDomain,
)

DEGENERACY_RTOL = 1e-9
MIN_GRID_POINTS = 64
DEFAULT_GRID_POINTS = 4096
UNITARITY_TOL = 1e-8

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class SingleQubitDrive:
    """Spin-1/2 in a rotating field; all parameters are angular frequencies."""

    omega: float
    omega1: float
    omega2: float

    def __post_init__(self):
        if not (self.omega > 0 and math.isfinite(self.omega)):
            raise OutOfDomain(f"omega must be positive and finite, got {self.omega}")
        for name in ("omega1", "omega2"):
            value = getattr(self, name)
            if not (value >= 0 and math.isfinite(value)):
                raise OutOfDomain(f"{name} must be non-negative and finite, got {value}")

    @property
    def period(self) -> float:
        return TWO_PI / self.omega

    @property
    def lam(self) -> float:
        """Level splitting of the invariant, ``sqrt(omega2^2 + (omega1 - omega)^2)``."""
        return math.hypot(self.omega2, self.omega1 - self.omega)

    @property
    def field(self) -> float:
        return math.hypot(self.omega1, self.omega2)

    @property
    def angles(self) -> "MixingAngles":
        return MixingAngles(
            chi=mixing_angle(self.omega, self.omega1, self.omega2),
            theta=field_angle(self.omega1, self.omega2),
        )

    def is_degenerate(self) -> bool:
        return self.lam <= DEGENERACY_RTOL * self.omega


@dataclass(frozen=True)
class TwoQubitDrive:
    """Ising pair ``-J/2 s1z s2z`` plus a rotating field of strength ``omega0`` on spin 1."""

    omega: float
    coupling: float
    omega0: float

    def __post_init__(self):
        if not (self.omega > 0 and math.isfinite(self.omega)):
            raise OutOfDomain(f"omega must be positive and finite, got {self.omega}")
        if not math.isfinite(self.coupling):
            raise OutOfDomain("coupling must be finite")
        if not (self.omega0 >= 0 and math.isfinite(self.omega0)):
            raise OutOfDomain(f"omega0 must be non-negative and finite, got {self.omega0}")

    @property
    def period(self) -> float:
        return TWO_PI / self.omega

    @property
    def lam1(self) -> float:
        return math.hypot(self.omega0, self.coupling + self.omega)

    @property
    def lam2(self) -> float:
        return math.hypot(self.omega0, self.coupling - self.omega)

    @property
    def blocks(self):
        """Equivalent single-spin ``(omega, omega1, omega2)`` for the spin-2-up and spin-2-down blocks."""
        return (
            (self.omega, -self.coupling, self.omega0),
            (self.omega, self.coupling, self.omega0),
        )

    @property
    def angles(self) -> "MixingAngles":
        (w, a1, b1), (_, a2, b2) = self.blocks
        return MixingAngles(
            chi=float("nan"),
            theta=float("nan"),
            chi1=mixing_angle(w, a1, b1),
            chi2=mixing_angle(w, a2, b2),
            theta1=field_angle(a1, b1),
            theta2=field_angle(a2, b2),
        )

    def check_nondegenerate(self) -> None:
        tol = DEGENERACY_RTOL * self.omega
        if self.lam1 <= tol or self.lam2 <= tol or abs(self.lam1 - self.lam2) <= tol:
            raise DegenerateInvariant(
                f"invariant levels coincide (lam1={self.lam1:.6g}, lam2={self.lam2:.6g})"
            )


Drive = Union[SingleQubitDrive, TwoQubitDrive]


class MixingAngles(NamedTuple):
    chi: float
    theta: float
    chi1: float = float("nan")
    chi2: float = float("nan")
    theta1: float = float("nan")
    theta2: float = float("nan")


def mixing_angle(omega: float, omega1: float, omega2: float) -> float:
    """Bloch polar angle of the upper invariant eigenstate.

    Equal to ``2*arctan((lam + omega - omega1)/omega2)`` for ``omega2 > 0``;
    evaluated as ``atan2(omega2, omega1 - omega)``, which is free of
    cancellation and gives the limits ``pi`` (``omega1 < omega``) and ``0``
    (``omega1 > omega``) at ``omega2 = 0``.
    """
    if math.hypot(omega2, omega1 - omega) == 0:
        raise DegenerateInvariant("mixing angle undefined for a degenerate invariant")
    return math.atan2(omega2, omega1 - omega)


def field_angle(omega1: float, omega2: float) -> float:
    """Polar angle ``theta`` of the field, ``arctan(omega2/omega1)`` on the physical quadrant."""
    return math.atan2(omega2, omega1)


# -- operators ---------------------------------------------------------------

def _rotating_block(omega, diagonal, transverse, t) -> np.ndarray:
    """``(1/2)[[d, b e^{-i w t}], [b e^{i w t}, -d]]`` for scalar or array ``t``."""
    t = np.asarray(t, dtype=float)
    rot = np.exp(1j * omega * t)
    out = np.empty(t.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = 0.5 * diagonal
    out[..., 1, 1] = -0.5 * diagonal
    out[..., 0, 1] = 0.5 * transverse * np.conj(rot)
    out[..., 1, 0] = 0.5 * transverse * rot
    return out


def hamiltonian_single(drive: SingleQubitDrive, t) -> np.ndarray:
    return _rotating_block(drive.omega, drive.omega1, drive.omega2, t)


def invariant_single(drive: SingleQubitDrive, t) -> np.ndarray:
    if drive.is_degenerate():
        raise DegenerateInvariant(f"lam={drive.lam:.3e} below threshold for omega={drive.omega}")
    return _rotating_block(drive.omega, drive.omega1 - drive.omega, drive.omega2, t)


def hamiltonian_two(drive: TwoQubitDrive, t) -> np.ndarray:
    """Two-spin Hamiltonian in the internal ``|s1 s2>`` order."""
    t = np.asarray(t, dtype=float)
    zz = qops.tensor_product(qops.SIGMA_Z, qops.SIGMA_Z)
    x1 = qops.tensor_product(qops.SIGMA_X, qops.IDENTITY2)
    y1 = qops.tensor_product(qops.SIGMA_Y, qops.IDENTITY2)
    wt = drive.omega * t[..., None, None]
    return -0.5 * drive.coupling * zz + 0.5 * drive.omega0 * (x1 * np.cos(wt) + y1 * np.sin(wt))


def invariant_two(drive: TwoQubitDrive, t) -> np.ndarray:
    drive.check_nondegenerate()
    (w, a1, b1), (_, a2, b2) = drive.blocks
    up = _rotating_block(w, a1 - w, b1, t)
    down = _rotating_block(w, a2 - w, b2, t)
    return qops.direct_sum(up, down, qops.SPIN2_BLOCKS)


def hamiltonian(drive: Drive, t) -> np.ndarray:
    if isinstance(drive, TwoQubitDrive):
        return hamiltonian_two(drive, t)
    return hamiltonian_single(drive, t)


def invariant(drive: Drive, t) -> np.ndarray:
    if isinstance(drive, TwoQubitDrive):
        return invariant_two(drive, t)
    return invariant_single(drive, t)


def invariance_residual(H: Callable, I: Callable, t: float, h: float) -> float:
    """Frobenius norm of the central-difference defect of ``dI/dt - i[I, H]``."""
    if h <= 0:
        raise ValueError("step h must be positive")
    dI = (np.asarray(I(t + h)) - np.asarray(I(t - h))) / (2 * h)
    It, Ht = np.asarray(I(t)), np.asarray(H(t))
    return float(np.linalg.norm(dI - 1j * (It @ Ht - Ht @ It)))


# -- eigenframes ---------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class InvariantFrame:
    """Gauge-fixed eigenvectors of a periodic invariant on a uniform grid.

    ``eigenvectors[k]`` holds the eigenvectors at ``times[k]`` as columns,
    ordered like ``eigenvalues`` (descending).  The gauge is single valued:
    ``eigenvectors[-1] == eigenvectors[0]``.
    """

    times: np.ndarray
    eigenvalue_track: np.ndarray
    eigenvectors: np.ndarray
    holonomy: np.ndarray

    @property
    def period(self) -> float:
        return float(self.times[-1] - self.times[0])

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.eigenvalue_track[0]

    @property
    def initial(self) -> np.ndarray:
        return self.eigenvectors[0]

    def eigenvalue_drift(self) -> float:
        return float(np.max(np.abs(self.eigenvalue_track - self.eigenvalue_track[0])))

    def periodicity_error(self) -> float:
        return float(np.max(np.abs(self.eigenvectors[-1] - self.eigenvectors[0])))

    def step_overlaps(self) -> np.ndarray:
        """``<v_n(t_k)|v_n(t_{k+1})>`` for every step and level."""
        V = self.eigenvectors
        return np.einsum("kin,kin->kn", np.conj(V[:-1]), V[1:])

    def regauged(self, alpha) -> "InvariantFrame":
        """Frame with eigenvectors multiplied by ``exp(i*alpha)``.

        ``alpha`` has shape ``(len(times),)`` or ``(len(times), dim)``.
        """
        alpha = np.asarray(alpha, dtype=float)
        if alpha.ndim == 1:
            alpha = alpha[:, None]
        phased = self.eigenvectors * np.exp(1j * alpha)[:, None, :]
        return InvariantFrame(self.times, self.eigenvalue_track, phased, self.holonomy)

    def level(self, value: float) -> int:
        """Index of the eigenvalue closest to ``value``."""
        return int(np.argmin(np.abs(self.eigenvalues - value)))


def _evaluate_on_grid(fn: Callable, times: np.ndarray) -> np.ndarray:
    out = np.asarray(fn(times))
    if out.ndim == 3 and out.shape[0] == times.size:
        return out
    return np.stack([np.asarray(fn(t)) for t in times])


def eigenframe(invariant_fn: Callable, period: float, grid_points: int = DEFAULT_GRID_POINTS) -> InvariantFrame:
    """Sample ``invariant_fn`` on ``grid_points`` uniform intervals of one period and fix the gauge.

    Gauge: at ``t=0`` the largest-modulus component of each eigenvector is
    real positive; successive eigenvectors are parallel transported
    (real positive step overlap); the holonomy ``beta`` in ``[0, 2*pi)``
    accumulated over the loop is then removed by the smooth factor
    ``exp(-i beta t/period)`` so the frame closes on itself.
    """
    if grid_points < MIN_GRID_POINTS:
        raise GridMismatch(f"grid_points must be >= {MIN_GRID_POINTS}, got {grid_points}")
    times = np.linspace(0.0, period, grid_points + 1)
    mats = _evaluate_on_grid(invariant_fn, times)
    vals, vecs = qops.eigh_hermitian(mats)

    spacing = -np.diff(vals, axis=-1)
    if spacing.size and np.min(spacing) < DEGENERACY_RTOL * TWO_PI / period:
        raise DegenerateInvariant(f"invariant level spacing {np.min(spacing):.3e} below threshold")

    first = vecs[0]
    lead = np.argmax(np.abs(first), axis=0)
    pivot = first[lead, np.arange(first.shape[1])]
    vecs = vecs * (np.conj(pivot) / np.abs(pivot))[None, None, :]

    raw = np.einsum("kin,kin->kn", np.conj(vecs[:-1]), vecs[1:])
    if np.min(np.abs(raw)) < 0.9:
        raise GaugeDiscontinuity(f"eigenvector step overlap {np.min(np.abs(raw)):.3f} < 0.9; refine the grid")
    transport = np.concatenate([np.zeros((1, raw.shape[1])), np.cumsum(np.angle(raw), axis=0)])
    vecs = vecs * np.exp(-1j * transport)[:, None, :]

    closing = np.einsum("in,in->n", np.conj(vecs[0]), vecs[-1])
    if np.max(np.abs(np.abs(closing) - 1)) > 1e-8:
        raise GaugeDiscontinuity("eigenvectors at the period do not return to t=0; invariant not periodic")
    holonomy = qops.wrap_phase(np.angle(closing))
    vecs = vecs * np.exp(-1j * np.outer(times / period, holonomy))[:, None, :]
    vecs[-1] = vecs[0]
    return InvariantFrame(times, vals, vecs, holonomy)


def drive_frame(drive: Drive, grid_points: int = DEFAULT_GRID_POINTS) -> InvariantFrame:
    return eigenframe(lambda t: invariant(drive, t), drive.period, grid_points)


# -- phases --------------------------------------------------------------------

@dataclass(frozen=True)
class PhaseReport:
    """Per-level phases over one cycle (radians, unwrapped)."""

    eigenvalues: np.ndarray
    total: np.ndarray
    dynamic: np.ndarray
    geometric: np.ndarray

    @property
    def total_mod(self) -> np.ndarray:
        return qops.wrap_phase(self.total)

    @property
    def dynamic_mod(self) -> np.ndarray:
        return qops.wrap_phase(self.dynamic)

    @property
    def geometric_mod(self) -> np.ndarray:
        return qops.wrap_phase(self.geometric)

    def split_defect(self) -> float:
        return float(np.max(np.abs(self.total - (self.dynamic + self.geometric))))


def _unitaries_on_grid(propagator, times: np.ndarray) -> np.ndarray:
    if callable(propagator):
        return _evaluate_on_grid(propagator, times)
    grid = np.asarray(propagator.times)
    if grid.shape != times.shape or np.max(np.abs(grid - times)) > 1e-12 * max(times[-1], 1.0):
        raise GridMismatch("propagator and frame are sampled on different grids")
    return np.asarray(propagator.unitaries)


def phase_decomposition(drive: Drive, frame: InvariantFrame, propagator) -> PhaseReport:
    """Lewis phase of each invariant eigenstate split into dynamic and geometric parts.

    ``propagator`` is either an object with ``times``/``unitaries`` on the
    frame grid or a callable ``t -> U(t, 0)``.  The dynamic part is the
    Simpson quadrature of ``-<n,t|H(t)|n,t>``; the total is the continuously
    unwrapped argument of ``<n,t|U(t)|n,0>``; geometric = total - dynamic.
    """
    times = frame.times
    U = _unitaries_on_grid(propagator, times)
    if qops.unitarity_defect(U) > UNITARITY_TOL:
        raise NonUnitaryPropagator(f"unitarity defect {qops.unitarity_defect(U):.3e} on the frame grid")
    V = frame.eigenvectors
    H = hamiltonian(drive, times)
    energy = np.einsum("kin,kij,kjn->kn", np.conj(V), H, V).real
    dynamic = -simpson(energy, x=times, axis=0)

    amp = np.einsum("kin,kij,jn->kn", np.conj(V), U, V[0])
    steps = np.angle(amp[1:] * np.conj(amp[:-1]))
    total = np.angle(amp[0]) + np.sum(steps, axis=0)
    return PhaseReport(frame.eigenvalues.copy(), total, dynamic, total - dynamic)


def max_transition_amplitude(frame: InvariantFrame, propagator) -> float:
    """Largest ``|<m,t|U(t)|n,0>|`` over ``m != n`` and the whole grid."""
    U = _unitaries_on_grid(propagator, frame.times)
    V = frame.eigenvectors
    amp = np.abs(np.einsum("kim,kij,jn->kmn", np.conj(V), U, V[0]))
    d = amp.shape[-1]
    return float(np.max(amp[:, ~np.eye(d, dtype=bool)]))


class ClosedFormPhases(NamedTuple):
    """Closed-form one-cycle phases of the (+lam/2, -lam/2) invariant states."""

    total: tuple
    dynamic: tuple
    geometric: tuple


def closed_form_phases(omega: float, omega1: float, omega2: float) -> ClosedFormPhases:
    """Rotating-field phases for one period ``2*pi/omega``.

    total:      pi(1 -/+ lam/omega)
    dynamic:   -/+ pi (|B|/omega) cos(chi - theta)
    geometric:  pi(1 +/- cos chi)
    """
    lam = math.hypot(omega2, omega1 - omega)
    chi = mixing_angle(omega, omega1, omega2)
    theta = field_angle(omega1, omega2)
    field = math.hypot(omega1, omega2)
    d = math.pi * field / omega * math.cos(chi - theta)
    return ClosedFormPhases(
        total=(math.pi * (1 - lam / omega), math.pi * (1 + lam / omega)),
        dynamic=(-d, d),
        geometric=(math.pi * (1 + math.cos(chi)), math.pi * (1 - math.cos(chi))),
    )


def adiabatic_gap(drive: SingleQubitDrive) -> float:
    """Opening angle ``|chi - theta|`` between invariant eigenstate and field."""
    if drive.field == 0:
        raise OutOfDomain("adiabatic_gap needs a non-zero field")
    a = drive.angles
    return abs(a.chi - a.theta)
