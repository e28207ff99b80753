"""Dense complex linear algebra for 2x2 and 4x4 operators.

Matrices are plain ``numpy`` arrays of dtype ``complex128``.  Every routine
accepts a stack of matrices with arbitrary leading batch axes, so that whole
time grids can be processed in one call.

Two-qubit basis order
---------------------
Internally the two-qubit basis is the tensor order ``|s1 s2>``::

    0: |up,up>   1: |up,down>   2: |down,up>   3: |down,down>

The conventional listing (up-up, down-up, up-down, down-down) is reached with
:data:`LISTING_ORDER` and :func:`to_listing_order`.  In that listing the
Hamiltonian of the coupled pair is block diagonal with the blocks given by
:data:`SPIN2_BLOCKS` (internal indices).
"""
from __future__ import annotations

from typing import NamedTuple, Sequence

import numpy as np

from .errors import BadEmbedding, DimensionMismatch, NonHermitianInput

HERMITIAN_RTOL = 1e-12
JACOBI_TOL = 1e-14
JACOBI_MAX_SWEEPS = 50

IDENTITY2 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)

KET_UP = np.array([1, 0], dtype=complex)
KET_DOWN = np.array([0, 1], dtype=complex)

# listing order (uu, du, ud, dd) expressed as internal indices
LISTING_ORDER = (0, 2, 1, 3)
# {uu, du} -> qubit 2 up; {ud, dd} -> qubit 2 down
SPIN2_BLOCKS = ((0, 2), (1, 3))


class EigenDecomposition(NamedTuple):
    """Eigenvalues sorted descending, eigenvectors as matching columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        V = self.eigenvectors
        return (V * self.eigenvalues[..., None, :]) @ dagger(V)


def dagger(M: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(M, -1, -2))


def _check_square(M: np.ndarray) -> int:
    if M.ndim < 2 or M.shape[-1] != M.shape[-2]:
        raise DimensionMismatch(f"expected square matrices, got shape {M.shape}")
    return M.shape[-1]


def hermiticity_defect(M: np.ndarray) -> np.ndarray:
    """Relative Frobenius defect ``||M - M^H|| / ||M||`` (0 for the zero matrix)."""
    M = np.asarray(M, dtype=complex)
    diff = np.linalg.norm(M - dagger(M), axis=(-2, -1))
    scale = np.linalg.norm(M, axis=(-2, -1))
    return np.where(scale > 0, diff / np.where(scale > 0, scale, 1.0), diff)


def require_hermitian(M: np.ndarray, rtol: float = HERMITIAN_RTOL) -> np.ndarray:
    M = np.asarray(M, dtype=complex)
    _check_square(M)
    worst = float(np.max(hermiticity_defect(M), initial=0.0))
    if worst > rtol:
        raise NonHermitianInput(f"matrix is not Hermitian (relative defect {worst:.3e})")
    return M


def pauli_components(H: np.ndarray):
    """Split a 2x2 Hermitian ``H = c*1 + ax*sx + ay*sy + az*sz``.

    Returns ``(c, ax, ay, az)`` as real arrays with the batch shape of ``H``.
    """
    c = 0.5 * (H[..., 0, 0].real + H[..., 1, 1].real)
    az = 0.5 * (H[..., 0, 0].real - H[..., 1, 1].real)
    off = 0.5 * (H[..., 0, 1] + np.conj(H[..., 1, 0]))
    return c, off.real, -off.imag, az


def _eigh_2x2(H: np.ndarray) -> EigenDecomposition:
    c, ax, ay, az = pauli_components(H)
    r = np.sqrt(ax**2 + ay**2 + az**2)
    # Upper-hemisphere and lower-hemisphere formulas avoid cancellation.
    upper = az >= 0
    top = np.where(upper, r + az, ax - 1j * ay)
    bottom = np.where(upper, ax + 1j * ay, r - az)
    norm = np.sqrt(np.abs(top) ** 2 + np.abs(bottom) ** 2)
    degenerate = norm == 0
    safe = np.where(degenerate, 1.0, norm)
    top = np.where(degenerate, 1.0, top / safe)
    bottom = np.where(degenerate, 0.0, bottom / safe)
    vecs = np.empty(H.shape, dtype=complex)
    vecs[..., 0, 0] = top
    vecs[..., 1, 0] = bottom
    vecs[..., 0, 1] = -np.conj(bottom)
    vecs[..., 1, 1] = np.conj(top)
    vals = np.stack([c + r, c - r], axis=-1)
    return EigenDecomposition(vals, vecs)


def _jacobi_rotate(A: np.ndarray, V: np.ndarray, p: int, q: int) -> None:
    """Annihilate ``A[:, p, q]`` in place and accumulate the rotation into ``V``."""
    apq = A[:, p, q]
    mag = np.abs(apq)
    active = mag > 0
    safe_mag = np.where(active, mag, 1.0)
    phase = np.where(active, np.conj(apq) / safe_mag, 1.0)
    tau = (A[:, q, q].real - A[:, p, p].real) / (2.0 * safe_mag)
    t = np.where(tau >= 0, 1.0, -1.0) / (np.abs(tau) + np.hypot(1.0, tau))
    t = np.where(active, t, 0.0)
    cs = 1.0 / np.sqrt(1.0 + t**2)
    sn = t * cs
    # G acts on columns p, q:  G = [[cs, sn], [-sn*phase, cs*phase]]
    cs_, sn_ = cs[:, None], sn[:, None]
    g_qp = (-sn * phase)[:, None]
    g_qq = (cs * phase)[:, None]
    col_p = A[:, :, p].copy()
    col_q = A[:, :, q].copy()
    A[:, :, p] = cs_ * col_p + g_qp * col_q
    A[:, :, q] = sn_ * col_p + g_qq * col_q
    row_p = A[:, p, :].copy()
    row_q = A[:, q, :].copy()
    A[:, p, :] = cs_ * row_p + np.conj(g_qp) * row_q
    A[:, q, :] = sn_ * row_p + np.conj(g_qq) * row_q
    A[:, p, q] = 0.0
    A[:, q, p] = 0.0
    vp = V[:, :, p].copy()
    vq = V[:, :, q].copy()
    V[:, :, p] = cs_ * vp + g_qp * vq
    V[:, :, q] = sn_ * vp + g_qq * vq


def _eigh_jacobi(H: np.ndarray) -> EigenDecomposition:
    """Cyclic complex Jacobi sweeps, vectorised over the batch axes."""
    n = H.shape[-1]
    batch = H.shape[:-2]
    A = np.array(H, dtype=complex).reshape((-1, n, n))
    V = np.broadcast_to(np.eye(n, dtype=complex), A.shape).copy()
    scale = np.linalg.norm(A, axis=(-2, -1))
    off_mask = ~np.eye(n, dtype=bool)

    todo = np.arange(A.shape[0])
    for _ in range(JACOBI_MAX_SWEEPS):
        off = np.sqrt(np.sum(np.abs(A[todo][:, off_mask]) ** 2, axis=-1))
        todo = todo[off > JACOBI_TOL * scale[todo]]
        if todo.size == 0:
            break
        a, v = A[todo], V[todo]
        for p in range(n - 1):
            for q in range(p + 1, n):
                _jacobi_rotate(a, v, p, q)
        A[todo], V[todo] = a, v

    # one Newton-Schulz step: rotation round-off otherwise accumulates in long propagations
    V = 1.5 * V - 0.5 * V @ (dagger(V) @ V)
    vals = np.real(np.diagonal(A, axis1=-2, axis2=-1))
    order = np.argsort(-vals, axis=-1, kind="stable")
    vals = np.take_along_axis(vals, order, axis=-1)
    V = np.take_along_axis(V, order[:, None, :], axis=-1)
    return EigenDecomposition(vals.reshape(batch + (n,)), V.reshape(batch + (n, n)))


def eigh_hermitian(H: np.ndarray, check: bool = True) -> EigenDecomposition:
    """Eigendecomposition of Hermitian matrices, eigenvalues descending.

    2x2 inputs use the closed-form Bloch-vector solution; larger inputs use
    cyclic Jacobi rotations (off-diagonal threshold ``1e-14 * ||H||_F``).
    """
    H = require_hermitian(H) if check else np.asarray(H, dtype=complex)
    n = _check_square(H)
    if n == 2:
        return _eigh_2x2(H)
    return _eigh_jacobi(H)


def expm_i_hermitian(H: np.ndarray, t) -> np.ndarray:
    """Return ``exp(-i H t)`` for Hermitian ``H``.

    ``H`` may be a stack of matrices and ``t`` a scalar or array; the two are
    broadcast against each other over the batch axes.
    """
    H = require_hermitian(H)
    n = _check_square(H)
    t = np.asarray(t, dtype=float)
    if n == 2:
        c, ax, ay, az = pauli_components(H)
        r = np.sqrt(ax**2 + ay**2 + az**2)
        rt = r * t
        cos = np.cos(rt)
        # sin(r t)/r without dividing by zero
        sin_over_r = t * np.sinc(rt / np.pi)
        pre = np.exp(-1j * c * t)
        out = np.empty(np.broadcast(c, t).shape + (2, 2), dtype=complex)
        out[..., 0, 0] = pre * (cos - 1j * sin_over_r * az)
        out[..., 1, 1] = pre * (cos + 1j * sin_over_r * az)
        out[..., 0, 1] = pre * (-1j * sin_over_r * (ax - 1j * ay))
        out[..., 1, 0] = pre * (-1j * sin_over_r * (ax + 1j * ay))
        return out
    vals, vecs = eigh_hermitian(H, check=False)
    phases = np.exp(-1j * vals * t[..., None])
    U = (vecs * phases[..., None, :]) @ dagger(vecs)
    # Newton-Schulz polish keeps long products unitary to ~1e-11
    return 1.5 * U - 0.5 * U @ (dagger(U) @ U)


def direct_sum(A: np.ndarray, B: np.ndarray, embedding: Sequence[Sequence[int]] = ((0, 1), (2, 3))) -> np.ndarray:
    """Embed two 2x2 blocks into a 4x4 matrix.

    ``embedding = (rows_a, rows_b)`` lists the 4x4 indices occupied by ``A``
    and ``B``; together they must be a permutation of ``0..3``.  Cross-block
    entries are exactly zero.
    """
    try:
        ia = [int(i) for i in embedding[0]]
        ib = [int(i) for i in embedding[1]]
    except (TypeError, ValueError, IndexError) as exc:
        raise BadEmbedding(f"malformed embedding {embedding!r}") from exc
    if len(ia) != 2 or len(ib) != 2 or sorted(ia + ib) != [0, 1, 2, 3]:
        raise BadEmbedding(f"embedding {embedding!r} is not a permutation of 0..3")
    A = np.asarray(A, dtype=complex)
    B = np.asarray(B, dtype=complex)
    if A.shape[-2:] != (2, 2) or B.shape[-2:] != (2, 2):
        raise DimensionMismatch("direct_sum expects 2x2 blocks")
    batch = np.broadcast_shapes(A.shape[:-2], B.shape[:-2])
    out = np.zeros(batch + (4, 4), dtype=complex)
    out[..., np.ix_(ia, ia)[0], np.ix_(ia, ia)[1]] = A
    out[..., np.ix_(ib, ib)[0], np.ix_(ib, ib)[1]] = B
    return out


def block(M: np.ndarray, indices: Sequence[int]) -> np.ndarray:
    """Restriction of a 4x4 (stack) to the given index subset."""
    idx = np.asarray(indices)
    return M[..., idx[:, None], idx[None, :]]


def cross_block_leakage(M: np.ndarray, blocks=SPIN2_BLOCKS) -> float:
    """Largest modulus of entries coupling the two blocks."""
    a, b = (np.asarray(x) for x in blocks)
    upper = np.abs(M[..., a[:, None], b[None, :]])
    lower = np.abs(M[..., b[:, None], a[None, :]])
    return float(max(upper.max(initial=0.0), lower.max(initial=0.0)))


def tensor_product(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    return np.kron(np.asarray(A, dtype=complex), np.asarray(B, dtype=complex))


def to_listing_order(M: np.ndarray) -> np.ndarray:
    """Reorder a 4x4 matrix (or 4-vector) into the up-up, down-up, up-down, down-down listing."""
    p = np.asarray(LISTING_ORDER)
    M = np.asarray(M)
    if M.ndim == 1:
        return M[p]
    return M[..., p[:, None], p[None, :]]


def from_listing_order(M: np.ndarray) -> np.ndarray:
    # LISTING_ORDER is an involution
    return to_listing_order(M)


def unitarity_defect(U: np.ndarray) -> float:
    """``||U^H U - 1||_F``; the maximum over a stack."""
    U = np.asarray(U, dtype=complex)
    n = _check_square(U)
    defect = np.linalg.norm(dagger(U) @ U - np.eye(n), axis=(-2, -1))
    return float(np.max(defect))


def gate_fidelity(U: np.ndarray, V: np.ndarray) -> float:
    """Phase-insensitive overlap ``|tr(U^H V)| / d``."""
    U = np.asarray(U, dtype=complex)
    V = np.asarray(V, dtype=complex)
    if U.shape != V.shape or U.ndim != 2:
        raise DimensionMismatch(f"cannot compare gates of shapes {U.shape} and {V.shape}")
    d = U.shape[0]
    return float(min(1.0, abs(np.trace(dagger(U) @ V)) / d))


def wrap_phase(phi):
    """Map angles into ``[0, 2*pi)``."""
    out = np.mod(phi, 2 * np.pi)
    # mod can return exactly 2*pi for tiny negative inputs
    return np.where(out >= 2 * np.pi, 0.0, out)


def phase_distance(a, b):
    """Circular distance between angles, in ``[0, pi]``."""
    d = np.mod(np.asarray(a) - np.asarray(b) + np.pi, 2 * np.pi) - np.pi
    return np.abs(d)
