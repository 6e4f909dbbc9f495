"""First-order projector-splitting (KSL) step for ``Y' = P(Y) G(t, Y)``."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonFiniteEvaluation
from .linalg import qr_thin
from .lowrank import LowRankState

SOLVER_KINDS = ("explicit-euler", "rk4")


@dataclass(frozen=True)
class SubstepSolver:
    kind: str = "rk4"
    substeps: int = 1

    def __post_init__(self):
        if self.kind not in SOLVER_KINDS:
            raise ValueError(f"unknown substep solver {self.kind!r}; expected one of {SOLVER_KINDS}")
        if self.substeps < 1:
            raise ValueError("substeps must be >= 1")

    @property
    def order(self):
        return 1 if self.kind == "explicit-euler" else 4


def solve_fixed(f, y0, t0, tau, solver):
    """Integrate ``y' = f(t, y)`` over ``[t0, t0+tau]`` with uniform substeps."""
    n = solver.substeps
    h = tau / n
    y = y0
    t = t0
    if solver.kind == "explicit-euler":
        for _ in range(n):
            y = y + h * f(t, y)
            t += h
        return y
    for _ in range(n):
        k1 = f(t, y)
        k2 = f(t + 0.5 * h, y + 0.5 * h * k1)
        k3 = f(t + 0.5 * h, y + 0.5 * h * k2)
        k4 = f(t + h, y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t += h
    return y


def _checked(G):
    def g(t, X):
        out = G(t, X)
        if not np.all(np.isfinite(out)):
            raise NonFiniteEvaluation(f"G returned non-finite entries at t={t:.6g}")
        return out

    return g


def ksl_step(Y, G, t0, tau, solver=SubstepSolver()):
    """One K-S-L sweep from ``t0`` to ``t0 + tau``.

    The S-step runs with a minus sign, undoing the part of the tangent
    update counted twice by the K- and L-steps.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    g = _checked(G)
    U0, S0, V0 = Y.U, Y.S, Y.V

    K = solve_fixed(lambda t, K: g(t, K @ V0.T) @ V0, U0 @ S0, t0, tau, solver)
    qk = qr_thin(K, strict=False)
    U1 = qk.Q

    S = solve_fixed(lambda t, S: -(U1.T @ g(t, U1 @ S @ V0.T) @ V0), qk.R, t0, tau, solver)

    L = solve_fixed(lambda t, L: g(t, U1 @ L.T).T @ U1, V0 @ S.T, t0, tau, solver)
    ql = qr_thin(L, strict=False)
    return LowRankState(U1, ql.R.T, ql.Q, t0 + tau)


def ksl_multi(Y, G, t0, T, tau, solver=SubstepSolver()):
    n = round((T - t0) / tau)
    if n < 1 or not np.isclose(n * tau, T - t0, rtol=1e-10, atol=0.0):
        raise ValueError(f"(T - t0)/tau = {(T - t0) / tau} is not a positive integer")
    for k in range(n):
        Y = ksl_step(Y, G, t0 + k * tau, tau, solver)
    return Y
