"""Factored rank-r states ``Y = U @ S @ V.T`` and the tangent-space projection."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .linalg import qr_thin, svd_full


@dataclass(frozen=True)
class LowRankState:
    """Rank-r matrix in factored form.

    ``U`` and ``V`` have orthonormal columns, ``S`` is square and need not be
    diagonal. ``S`` may be numerically singular; nothing here inverts it.
    """

    U: np.ndarray
    S: np.ndarray
    V: np.ndarray
    t: float = 0.0

    @property
    def rank(self):
        return self.S.shape[0]

    @property
    def shape(self):
        return (self.U.shape[0], self.V.shape[0])

    def to_dense(self):
        return to_dense(self)

    def at_time(self, t):
        return replace(self, t=t)

    def orthonormality_defect(self):
        r = self.rank
        eye = np.eye(r)
        return max(
            np.linalg.norm(self.U.T @ self.U - eye),
            np.linalg.norm(self.V.T @ self.V - eye),
        )

    def check(self, tol=1e-10):
        if self.U.shape[1] != self.rank or self.V.shape[1] != self.rank:
            raise ValueError("factor shapes disagree with core size")
        defect = self.orthonormality_defect()
        if defect > tol * np.sqrt(self.rank):
            raise ValueError(f"factors lost orthonormality (defect {defect:.2e})")


def to_dense(Y):
    return (Y.U @ Y.S) @ Y.V.T


def truncate_to_rank(X, r, t=0.0, return_delta=False):
    """Best rank-``r`` approximation of ``X`` in the Frobenius norm.

    ``S`` is diagonal with the leading singular values; trailing near-zero
    values are kept when ``r`` exceeds the numerical rank. With
    ``return_delta`` the discarded tail norm is returned as well.
    """
    X = np.asarray(X, dtype=float)
    if not 1 <= r <= min(X.shape):
        raise ValueError(f"rank {r} outside [1, {min(X.shape)}]")
    U, sigma, V = svd_full(X)
    Y = LowRankState(U[:, :r].copy(), np.diag(sigma[:r]), V[:, :r].copy(), t)
    if return_delta:
        return Y, float(np.linalg.norm(sigma[r:]))
    return Y


def reorthonormalize(Uraw, S, Vraw, t=0.0, strict=True):
    """Restore orthonormal factors without changing ``Uraw @ S @ Vraw.T``.

    ``strict=False`` accepts numerically rank-deficient factors, which
    happens legitimately when a stiff exponential damps some columns of
    ``U`` to roundoff level.
    """
    qu = qr_thin(Uraw, strict)
    qv = qr_thin(Vraw, strict)
    return LowRankState(qu.Q, qu.R @ S @ qv.R.T, qv.Q, t)


def project_tangent(Y, B):
    """Orthogonal projection of ``B`` onto the tangent space at ``Y``.

    ``P(Y)B = U U^T B - U U^T B V V^T + B V V^T``.
    """
    U, V = Y.U, Y.V
    UtB = U.T @ B
    BV = B @ V
    return U @ UtB - U @ (UtB @ V) @ V.T + BV @ V.T


def tangent_residual(Y, B):
    """Frobenius norm of the component of ``B`` normal to the tangent space."""
    return float(np.linalg.norm(B - project_tangent(Y, B)))


def random_state(rng, m, r, n=None, sigma=None, t=0.0):
    """Random rank-``r`` state; ``sigma`` fixes the singular values of ``S``."""
    n = m if n is None else n
    U = qr_thin(rng.standard_normal((m, r))).Q
    V = qr_thin(rng.standard_normal((n, r))).Q
    if sigma is None:
        S = rng.standard_normal((r, r))
    else:
        a = qr_thin(rng.standard_normal((r, r))).Q
        b = qr_thin(rng.standard_normal((r, r))).Q
        S = a @ np.diag(sigma) @ b.T
    return LowRankState(U, S, V, t)
