"""Time evolution operators and cyclic gates.

The closed-form propagator of the rotating-field problems is
``U(t) = exp(-i omega t sz/2) exp(-i H0 t)`` with ``H0 = H(0) - omega sz/2``
(``sz`` of spin 1 for the coupled pair).  :func:`numeric_propagator` is an
independent midpoint-exponential integrator used as its oracle.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import qops
from .invariant import (
    Drive,
    InvariantFrame,
    SingleQubitDrive,
    TwoQubitDrive,
    hamiltonian,
    mixing_angle,
)

DEFAULT_STEPS = 100_000


@dataclass(frozen=True, eq=False)
class Propagator:
    """``U(t, 0)`` sampled on ``times``; ``unitaries[0]`` is the identity."""

    times: np.ndarray
    unitaries: np.ndarray
    method: str

    @property
    def final(self) -> np.ndarray:
        return self.unitaries[-1]

    def unitarity_defect(self) -> float:
        return qops.unitarity_defect(self.unitaries)


def _spin1_z(drive: Drive) -> np.ndarray:
    if isinstance(drive, TwoQubitDrive):
        return qops.tensor_product(qops.SIGMA_Z, qops.IDENTITY2)
    return qops.SIGMA_Z


def analytic_propagator(drive: Drive, t) -> np.ndarray:
    """Closed-form ``U(t, 0)`` for scalar or array ``t``."""
    t = np.asarray(t, dtype=float)
    sz = _spin1_z(drive)
    H0 = hamiltonian(drive, 0.0) - 0.5 * drive.omega * sz
    frame = np.exp(-0.5j * drive.omega * t[..., None] * np.real(np.diagonal(sz)))
    return frame[..., :, None] * qops.expm_i_hermitian(H0, t)


def sample_analytic(drive: Drive, times) -> Propagator:
    times = np.asarray(times, dtype=float)
    U = analytic_propagator(drive, times)
    U[0] = np.eye(U.shape[-1])
    return Propagator(times, U, "analytic")


def _prefix_products(S: np.ndarray) -> np.ndarray:
    """``P[k] = S[k-1] ... S[0]`` for ``k = 0..n`` (``P[0]`` = identity).

    Blocked: products inside blocks of length ~sqrt(n) are formed in
    parallel across blocks, then chained by the block-start prefixes.
    """
    n, d = S.shape[0], S.shape[-1]
    b = max(1, int(math.isqrt(n)))
    nblocks = -(-n // b)
    pad = nblocks * b - n
    if pad:
        S = np.concatenate([S, np.broadcast_to(np.eye(d, dtype=complex), (pad, d, d))])
    S = S.reshape(nblocks, b, d, d)
    within = np.empty_like(S)
    within[:, 0] = S[:, 0]
    for i in range(1, b):
        within[:, i] = S[:, i] @ within[:, i - 1]
    starts = np.empty((nblocks, d, d), dtype=complex)
    starts[0] = np.eye(d)
    for j in range(1, nblocks):
        starts[j] = within[j - 1, -1] @ starts[j - 1]
    P = (within @ starts[:, None]).reshape(nblocks * b, d, d)[:n]
    return np.concatenate([np.eye(d, dtype=complex)[None], P])


def numeric_propagator(H: Callable, T: float, steps: int, record_every: int = 1) -> Propagator:
    """Integrate ``i dU/dt = H(t) U`` on ``[0, T]`` by midpoint exponentials.

    ``U_{k+1} = exp(-i H(t_k + h/2) h) U_k`` (second-order Magnus), so every
    partial product is unitary.  Global error is ``O(h^2)``.  ``H`` should
    accept an array of times; every ``record_every``-th step is kept.
    """
    if steps < 1000:
        raise ValueError(f"steps must be >= 1000, got {steps}")
    if record_every < 1 or steps % record_every:
        raise ValueError("record_every must divide steps")
    h = T / steps
    mids = (np.arange(steps) + 0.5) * h
    Hs = np.asarray(H(mids))
    if Hs.ndim != 3 or Hs.shape[0] != steps:
        Hs = np.stack([np.asarray(H(t)) for t in mids])
    step_ops = qops.expm_i_hermitian(Hs, h)
    P = _prefix_products(step_ops)[::record_every]
    times = np.linspace(0.0, T, steps // record_every + 1)
    return Propagator(times, P, "numeric")


def simulate(drive: Drive, cycles: int = 1, steps_per_cycle: int = DEFAULT_STEPS, record_every: int = 1) -> Propagator:
    return numeric_propagator(
        lambda t: hamiltonian(drive, t), cycles * drive.period, cycles * steps_per_cycle, record_every
    )


@dataclass(frozen=True, eq=False)
class GateResult:
    """Cyclic gate ``U(m*tau)`` in the invariant eigenbasis and computational basis.

    For two spins, ``computational_basis`` is in the internal ``|s1 s2>``
    order; :attr:`listing_order` gives the (uu, du, ud, dd) listing.
    """

    invariant_basis: np.ndarray
    computational_basis: np.ndarray
    cycles: int
    diagnostics: dict = field(default_factory=dict)

    @property
    def eigenphases(self) -> np.ndarray:
        return qops.wrap_phase(np.angle(np.diagonal(self.invariant_basis)))

    @property
    def listing_order(self) -> np.ndarray:
        if self.computational_basis.shape[-1] == 4:
            return qops.to_listing_order(self.computational_basis)
        return self.computational_basis


def _offdiag_max(M: np.ndarray) -> float:
    d = M.shape[-1]
    return float(np.max(np.abs(M[~np.eye(d, dtype=bool)])))


def cyclic_gate(drive: Drive, frame: InvariantFrame, cycles: int = 1, propagator=None) -> GateResult:
    """``m``-cycle gate as the ``m``-th power of the one-period propagator.

    ``propagator`` may be a :class:`Propagator` spanning one period, a
    matrix ``U(tau)``, or ``None`` (numeric integration with
    :data:`DEFAULT_STEPS` steps).
    """
    if cycles < 1:
        raise ValueError("cycles must be >= 1")
    if propagator is None:
        propagator = simulate(drive)
    U_tau = propagator.final if isinstance(propagator, Propagator) else np.asarray(propagator)
    U = np.linalg.matrix_power(U_tau, cycles)
    V = frame.initial
    U_inv = qops.dagger(V) @ U @ V
    diagnostics = {
        "unitarity_defect": qops.unitarity_defect(U),
        "offdiagonal_leakage": _offdiag_max(U_inv),
    }
    if U.shape[-1] == 4:
        diagnostics["block_leakage"] = qops.cross_block_leakage(U)
    return GateResult(U_inv, U, cycles, diagnostics)


def gate_formula(chi: float, gamma: float) -> np.ndarray:
    """``e^{i gamma}|+><+| + e^{-i gamma}|-><-|`` written out in the computational basis."""
    c2, s2 = math.cos(chi / 2) ** 2, math.sin(chi / 2) ** 2
    e = complex(math.cos(gamma), math.sin(gamma))
    off = 1j * math.sin(chi) * math.sin(gamma)
    return np.array([[e * c2 + e.conjugate() * s2, off], [off, e * s2 + e.conjugate() * c2]])


def computational_gate_formula(drive: SingleQubitDrive) -> np.ndarray:
    """One-cycle gate from the mixing angle and ``gamma = pi(1 - lam/omega)``."""
    chi = mixing_angle(drive.omega, drive.omega1, drive.omega2)
    return gate_formula(chi, math.pi * (1 - drive.lam / drive.omega))


def max_propagator_error(a: Propagator, b: Propagator) -> float:
    return float(np.max(np.abs(a.unitaries - b.unitaries)))
