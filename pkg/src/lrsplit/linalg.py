"""Dense kernels and matrix-exponential actions.

Everything here works on real ``numpy`` arrays. Operators passed to
:func:`expm_action` may be dense arrays, ``scipy.sparse`` matrices,
:class:`MatrixOperator` instances, or anything exposing ``matvec`` and
``shape`` (the Krylov path only needs matvecs).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse

from .errors import KrylovStagnation, NoConvergence, Overflow, RankDeficient

DENSE_CAP = 2048
KRYLOV_TOL = 1e-10
KRYLOV_MAX_BASIS = 60
# smallest admissible Krylov substep, as a fraction of the requested time
KRYLOV_MIN_FRACTION = 2.0**-40


@dataclass(frozen=True)
class QRPair:
    Q: np.ndarray
    R: np.ndarray


def qr_thin(M, strict=True):
    """Thin QR with nonnegative diagonal of ``R``.

    With ``strict`` a diagonal entry of ``R`` below ``1e-14 * ||M||_F``
    raises :class:`RankDeficient`. Householder QR still returns orthonormal
    columns for rank-deficient input, so callers that tolerate tiny
    singular values (the projector-splitting substeps) pass ``strict=False``.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] < M.shape[1]:
        raise ValueError(f"qr_thin needs a tall matrix, got shape {M.shape}")
    Q, R = np.linalg.qr(M, mode="reduced")
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    Q = Q * signs
    R = np.triu(signs[:, None] * R)
    if strict:
        scale = np.linalg.norm(M)
        if scale == 0.0 or np.min(np.diag(R)) < 1e-14 * scale:
            raise RankDeficient(
                f"R diagonal min {np.min(np.diag(R)):.3e} below 1e-14*||M||_F={scale:.3e}"
            )
    return QRPair(Q, R)


def svd_full(M):
    """Return ``(U, sigma, V)`` with ``M = U @ diag(sigma) @ V.T``."""
    try:
        U, sigma, Vt = np.linalg.svd(np.asarray(M, dtype=float), full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NoConvergence(str(exc)) from exc
    return U, sigma, Vt.T


def expm_dense(A, cap=DENSE_CAP):
    A = np.asarray(A, dtype=float)
    if A.shape[0] > cap:
        raise ValueError(f"dense exponential requested for n={A.shape[0]} > cap {cap}")
    if not np.all(np.isfinite(A)):
        raise Overflow("non-finite entries in exponent")
    with np.errstate(over="ignore", invalid="ignore"):
        E = scipy.linalg.expm(A)
    if not np.all(np.isfinite(E)):
        raise Overflow("matrix exponential overflowed")
    return E


class MatrixOperator:
    """A square matrix (dense or sparse) with a per-step-size exponential cache.

    The cache makes repeated ``exp(tau*A) @ B`` products cheap during
    fixed-step integration, where only one or two distinct ``tau`` occur.
    """

    def __init__(self, matrix):
        if scipy.sparse.issparse(matrix):
            self.matrix = scipy.sparse.csr_matrix(matrix, dtype=float)
        else:
            self.matrix = np.asarray(matrix, dtype=float)
        if self.matrix.ndim != 2 or self.matrix.shape[0] != self.matrix.shape[1]:
            raise ValueError(f"operator must be square, got {self.matrix.shape}")
        self._exp_cache = {}

    @property
    def shape(self):
        return self.matrix.shape

    @property
    def n(self):
        return self.matrix.shape[0]

    def matvec(self, x):
        return self.matrix @ x

    def __matmul__(self, other):
        return self.matrix @ other

    def toarray(self):
        if scipy.sparse.issparse(self.matrix):
            return self.matrix.toarray()
        return self.matrix

    def expm(self, tau):
        key = float(tau)
        E = self._exp_cache.get(key)
        if E is None:
            E = expm_dense(key * self.toarray())
            if len(self._exp_cache) > 8:
                self._exp_cache.clear()
            self._exp_cache[key] = E
        return E


def as_operator(A):
    if isinstance(A, MatrixOperator):
        return A
    if isinstance(A, np.ndarray) or scipy.sparse.issparse(A):
        return MatrixOperator(A)
    if hasattr(A, "matvec") and hasattr(A, "shape"):
        return A
    return MatrixOperator(np.asarray(A, dtype=float))


def expm_action(A, tau, B, method="dense", tol=KRYLOV_TOL, max_basis=KRYLOV_MAX_BASIS):
    """Compute ``exp(tau*A) @ B`` for a tall block ``B``."""
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    B = np.asarray(B, dtype=float)
    if tau == 0:
        return B.copy()
    op = as_operator(A)
    if method == "dense":
        if not isinstance(op, MatrixOperator):
            raise ValueError("dense exponential needs an explicit matrix")
        return op.expm(tau) @ B
    if method == "krylov":
        vec = B.ndim == 1
        cols = B[:, None] if vec else B
        out = np.column_stack(
            [_krylov_expv(op.matvec, tau, cols[:, j], tol, max_basis) for j in range(cols.shape[1])]
        ) if cols.shape[1] else cols.copy()
        return out[:, 0] if vec else out
    raise ValueError(f"unknown exponential method {method!r}")


def _krylov_error(H, k, dt):
    """Exponential coefficients and error estimate for a basis of size ``k``.

    Builds ``expm([[dt*H_k, e1], [0, 0]])``; its last column holds
    ``phi1(dt*H_k) e1`` so the integrated residual
    ``h_{k+1,k} * dt * |e_k^T phi1(dt*H_k) e1|`` comes from one exponential.
    """
    aug = np.zeros((k + 1, k + 1))
    aug[:k, :k] = dt * H[:k, :k]
    aug[0, k] = 1.0
    E = scipy.linalg.expm(aug)
    coeffs = E[:k, 0]
    err = H[k, k - 1] * dt * abs(E[k - 1, k])
    return coeffs, err


def _arnoldi_expv(matvec, w, dt, tol, max_basis):
    """One Krylov substep of length at most ``dt`` from ``w``.

    Returns ``(new_w, dt_used, err)``. The basis grows until the error
    estimate for ``dt`` drops below ``tol``; at the size cap ``dt`` is halved
    on the existing basis instead.
    """
    n = w.shape[0]
    kmax = min(max_basis, n)
    beta = np.linalg.norm(w)
    V = np.zeros((n, kmax + 1))
    H = np.zeros((kmax + 1, kmax))
    V[:, 0] = w / beta
    for k in range(kmax):
        u = np.asarray(matvec(V[:, k]), dtype=float).ravel()
        # two passes of modified Gram-Schmidt
        for _ in range(2):
            for i in range(k + 1):
                hik = V[:, i] @ u
                H[i, k] += hik
                u -= hik * V[:, i]
        h = np.linalg.norm(u)
        H[k + 1, k] = h
        size = k + 1
        if h <= 1e-14 * max(1.0, np.abs(H[:size, k]).max()):
            # invariant subspace: the projection is exact for any time
            H[k + 1, k] = 0.0
            coeffs, _ = _krylov_error(H, size, dt)
            return beta * (V[:, :size] @ coeffs), dt, 0.0
        V[:, k + 1] = u / h
        if size % 5 == 0 or size == kmax:
            coeffs, err = _krylov_error(H, size, dt)
            if err <= tol:
                return beta * (V[:, :size] @ coeffs), dt, err
    return None, dt, err


def _krylov_expv(matvec, tau, b, tol, max_basis):
    w = b.astype(float, copy=True)
    t_done = 0.0
    dt = tau
    floor = tau * KRYLOV_MIN_FRACTION
    while t_done < tau:
        dt = min(dt, tau - t_done)
        if not np.any(w):
            return w
        new_w, dt, err = _arnoldi_expv(matvec, w, dt, tol, max_basis)
        if new_w is None:
            dt *= 0.5
            if dt < floor:
                raise KrylovStagnation(
                    f"Krylov error {err:.2e} > {tol:.1e} at basis size {max_basis} "
                    f"with substep {dt:.2e}"
                )
            continue
        w = new_w
        t_done += dt
        if err < 1e-2 * tol:
            dt *= 2.0
    return w
