"""Outer splitting flows: exact linear flow, low-rank Lie/Strang, full-rank Lie."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .dlr import SubstepSolver, ksl_step, solve_fixed
from .errors import StepCountOverflow
from .linalg import expm_action
from .lowrank import LowRankState, reorthonormalize, tangent_residual, to_dense, truncate_to_rank
from .reference import ToleranceSpec, dopri5

SCHEMES = ("lowrank-lie", "lowrank-strang", "fullrank-lie", "reference")
MAX_STEPS = 10**7


@dataclass(frozen=True)
class SchemeConfig:
    scheme: str = "lowrank-lie"
    rank: int = 1
    tau: float = 1e-2
    expm_method: str = "dense"
    substep: SubstepSolver = field(default_factory=SubstepSolver)
    # "nonlinear-first" is the Lie order used throughout; the adjoint is kept for experimentation
    lie_order: str = "nonlinear-first"

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if self.scheme.startswith("lowrank") and self.rank < 1:
            raise ValueError("rank must be >= 1 for low-rank schemes")
        if self.expm_method not in ("dense", "krylov"):
            raise ValueError(f"unknown expm_method {self.expm_method!r}")
        if self.lie_order not in ("nonlinear-first", "linear-first"):
            raise ValueError(f"unknown lie_order {self.lie_order!r}")

    @property
    def is_lowrank(self):
        return self.scheme.startswith("lowrank")


def phi_A(Y, A, tau, method="dense", A_right=None):
    """Exact flow of ``Y' = A Y + Y A_right^T`` on a factored state.

    ``exp(tau A) U S V^T exp(tau A_right^T)`` only needs the two tall
    products ``exp(tau A) U`` and ``exp(tau A_right) V``.
    """
    A_right = A if A_right is None else A_right
    Uraw = expm_action(A, tau, Y.U, method)
    Vraw = expm_action(A_right, tau, Y.V, method)
    return reorthonormalize(Uraw, Y.S, Vraw, Y.t + tau, strict=False)


def sandwich(X, A, tau, method="dense", A_right=None):
    """Dense exact linear flow ``exp(tau A) X exp(tau A_right)^T``."""
    A_right = A if A_right is None else A_right
    left = expm_action(A, tau, X, method)
    return expm_action(A_right, tau, left.T, method).T


def _phi(problem, Y, tau, cfg):
    return phi_A(Y, problem.A, tau, cfg.expm_method, problem.A_right)


def lie_lowrank_step(Y, problem, tau, cfg):
    if cfg.lie_order == "linear-first":
        Z = _phi(problem, Y, tau, cfg)
        return ksl_step(Z.at_time(Y.t), problem.G, Y.t, tau, cfg.substep)
    Z = ksl_step(Y, problem.G, Y.t, tau, cfg.substep)
    return _phi(problem, Z.at_time(Y.t), tau, cfg)


def strang_lowrank_step(Y, problem, tau, cfg):
    half = 0.5 * tau
    Z = _phi(problem, Y, half, cfg).at_time(Y.t)
    Z = ksl_step(Z, problem.G, Y.t, tau, cfg.substep).at_time(Y.t + half)
    return _phi(problem, Z, half, cfg)


def lie_fullrank_step(X, problem, tau, cfg, t=0.0):
    """Full-rank Lie step: RK4 on ``X' = G(t, X)`` then the dense sandwich."""
    solver = SubstepSolver("rk4", cfg.substep.substeps)
    if cfg.lie_order == "linear-first":
        X = sandwich(X, problem.A, tau, cfg.expm_method, problem.A_right)
        return solve_fixed(problem.G, X, t, tau, solver)
    X2 = solve_fixed(problem.G, X, t, tau, solver)
    return sandwich(X2, problem.A, tau, cfg.expm_method, problem.A_right)


def step_count(t0, T, tau):
    n = round((T - t0) / tau)
    if n < 1 or not np.isclose(n * tau, T - t0, rtol=1e-10, atol=0.0):
        raise ValueError(f"(T - t0)/tau = {(T - t0) / tau:.12g} is not a positive integer")
    if n > MAX_STEPS:
        raise StepCountOverflow(f"{n} steps exceed the cap {MAX_STEPS}")
    return n


@dataclass
class StepDiagnostics:
    t: float
    eps_hat: float
    singular_values: np.ndarray


@dataclass
class Trajectory:
    """Result of :func:`integrate`.

    ``final`` is a :class:`LowRankState` for low-rank schemes and a dense
    array otherwise. ``delta`` is the initial truncation error.
    """

    final: object
    steps: List[StepDiagnostics]
    delta: float
    n_steps: int

    @property
    def dense(self):
        return to_dense(self.final) if isinstance(self.final, LowRankState) else self.final

    @property
    def eps_hat_max(self):
        return max((s.eps_hat for s in self.steps), default=0.0)


def integrate(problem, cfg, t0=None, T=None, Y0=None, diagnostics=True, tol=ToleranceSpec()):
    """Run ``cfg.scheme`` from ``t0`` to ``T`` with ``n = (T - t0)/tau`` steps.

    Low-rank schemes start from the rank-``r`` truncation of ``problem.X0``
    unless ``Y0`` is given. Per-step diagnostics record the tangent residual
    ``||G(t,Y) - P(Y) G(t,Y)||_F`` before each step and the singular values
    of ``S`` after it.
    """
    t0 = problem.t0 if t0 is None else t0
    T = problem.T if T is None else T
    if cfg.scheme == "reference":
        return Trajectory(dopri5(problem, t0, T, tol), [], 0.0, 0)
    n = step_count(t0, T, cfg.tau)
    tau = cfg.tau
    steps = []
    if not cfg.is_lowrank:
        X = np.array(problem.X0 if Y0 is None else Y0, dtype=float)
        for k in range(n):
            X = lie_fullrank_step(X, problem, tau, cfg, t0 + k * tau)
        return Trajectory(X, steps, 0.0, n)

    if Y0 is None:
        Y, delta = truncate_to_rank(problem.X0, cfg.rank, t=t0, return_delta=True)
    else:
        Y = Y0.at_time(t0)
        delta = float(np.linalg.norm(problem.X0 - to_dense(Y)))
    step = lie_lowrank_step if cfg.scheme == "lowrank-lie" else strang_lowrank_step
    for k in range(n):
        t = t0 + k * tau
        eps = tangent_residual(Y, problem.G(t, to_dense(Y))) if diagnostics else float("nan")
        Y = step(Y.at_time(t), problem, tau, cfg)
        if diagnostics:
            steps.append(StepDiagnostics(t, eps, np.linalg.svd(Y.S, compute_uv=False)))
    return Trajectory(Y.at_time(t0 + n * tau), steps, delta, n)


@dataclass(frozen=True)
class ErrorDecomposition:
    """Frobenius norms of the three global error contributions.

    ``splitting``: exact vs full-rank Lie from ``X0``;
    ``initial``: full-rank Lie from ``X0`` vs from ``Y0``;
    ``lowrank``: full-rank Lie from ``Y0`` vs low-rank Lie from ``Y0``.
    """

    E_sp: float
    E_delta: float
    E_lr: float
    total: float
    delta: float

    @property
    def triangle_ok(self):
        return self.total <= self.E_sp + self.E_delta + self.E_lr


def error_decomposition(problem, cfg, t0=None, T=None, reference=None, tol=ToleranceSpec()):
    t0 = problem.t0 if t0 is None else t0
    T = problem.T if T is None else T
    if not cfg.is_lowrank:
        raise ValueError("error decomposition needs a low-rank scheme")
    X_T = dopri5(problem, t0, T, tol) if reference is None else reference
    full_cfg = SchemeConfig("fullrank-lie", cfg.rank, cfg.tau, cfg.expm_method, cfg.substep, cfg.lie_order)
    Y0, delta = truncate_to_rank(problem.X0, cfg.rank, t=t0, return_delta=True)
    lie_X0 = integrate(problem, full_cfg, t0, T).dense
    lie_Y0 = integrate(problem, full_cfg, t0, T, Y0=to_dense(Y0)).dense
    lr = integrate(problem, cfg, t0, T, Y0=Y0, diagnostics=False).dense
    return ErrorDecomposition(
        E_sp=float(np.linalg.norm(X_T - lie_X0)),
        E_delta=float(np.linalg.norm(lie_X0 - lie_Y0)),
        E_lr=float(np.linalg.norm(lie_Y0 - lr)),
        total=float(np.linalg.norm(X_T - lr)),
        delta=delta,
    )
