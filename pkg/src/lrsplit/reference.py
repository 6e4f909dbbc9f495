"""Ground-truth solvers: adaptive Dormand-Prince 5(4) and fixed-step RK4."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import MaxStepsExceeded, StepUnderflow

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 5.0


@dataclass(frozen=True)
class ToleranceSpec:
    rtol: float = 1e-10
    atol: float = 1e-10
    max_steps: int = 1_000_000

    def __post_init__(self):
        if self.rtol <= 0 or self.atol <= 0:
            raise ValueError("rtol and atol must be positive")


def _error_norm(err, y, y_new, tol):
    scale = tol.atol + tol.rtol * np.maximum(np.abs(y), np.abs(y_new))
    return float(np.sqrt(np.mean((err / scale) ** 2)))


def _initial_step(f, t0, y0, f0, tol, span):
    scale = tol.atol + tol.rtol * np.abs(y0)
    d0 = np.sqrt(np.mean((y0 / scale) ** 2))
    d1 = np.sqrt(np.mean((f0 / scale) ** 2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, span)
    f1 = f(t0 + h0, y0 + h0 * f0)
    d2 = np.sqrt(np.mean(((f1 - f0) / scale) ** 2)) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1, span)


def dopri5_solve(f, y0, t0, T, tol=ToleranceSpec(), t_eval=None):
    """Integrate ``y' = f(t, y)`` (any array shape) from ``t0`` to ``T``.

    Returns ``y(T)``, or a list of states at the increasing times
    ``t_eval`` when given. Steps are shortened to hit output times exactly.
    """
    y = np.array(y0, dtype=float)
    span = T - t0
    if span < 0:
        raise ValueError("T must be >= t0")
    outputs = [] if t_eval is None else list(t_eval)
    out = []
    while outputs and outputs[0] <= t0:
        out.append(y.copy())
        outputs.pop(0)
    if span == 0:
        return out if t_eval is not None else y
    floor = 1e-14 * span
    t = t0
    k1 = f(t, y)
    h = _initial_step(f, t0, y, k1, tol, span)
    steps = 0
    while t < T:
        if steps >= tol.max_steps:
            raise MaxStepsExceeded(f"{tol.max_steps} steps taken, reached t={t:.6g} of {T:.6g}")
        target = outputs[0] if outputs else T
        proposal = h
        last = False
        if t + h >= target - floor:
            h = target - t
            last = True
        ks = [k1]
        for i in range(1, 7):
            yi = y + h * sum(a * k for a, k in zip(_A[i], ks) if a != 0.0)
            ks.append(f(t + _C[i] * h, yi))
        y_new = y + h * sum(b * k for b, k in zip(_B5, ks) if b != 0.0)
        err = h * sum(e * k for e, k in zip(_E, ks) if e != 0.0)
        if not np.all(np.isfinite(y_new)):
            en = np.inf
        else:
            en = _error_norm(err, y, y_new, tol)
        steps += 1
        if en <= 1.0:
            t = target if last else t + h
            y = y_new
            k1 = ks[6]  # first-same-as-last
            if last and outputs and t == outputs[0]:
                out.append(y.copy())
                outputs.pop(0)
            factor = MAX_FACTOR if en == 0.0 else min(MAX_FACTOR, max(MIN_FACTOR, SAFETY * en ** -0.2))
            h = h * factor
            if last:
                # a step shortened to land on an output time says little about the next one
                h = max(h, proposal)
        else:
            factor = MIN_FACTOR if not np.isfinite(en) else max(MIN_FACTOR, SAFETY * en ** -0.2)
            h = h * factor
        if h < floor:
            raise StepUnderflow(f"step {h:.3e} below {floor:.3e} at t={t:.6g}")
    return out if t_eval is not None else y


def dopri5(problem, t0=None, T=None, tol=ToleranceSpec(), t_eval=None):
    """Dense reference solution of ``problem`` directly on the matrix."""
    t0 = problem.t0 if t0 is None else t0
    T = problem.T if T is None else T
    return dopri5_solve(problem.rhs, problem.X0, t0, T, tol, t_eval)


def rk4_fixed(f, X0, t0, T, n_steps):
    """Classical RK4 with ``n_steps`` uniform steps."""
    h = (T - t0) / n_steps
    X = np.array(X0, dtype=float)
    t = t0
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(n_steps):
            k1 = f(t, X)
            k2 = f(t + 0.5 * h, X + 0.5 * h * k1)
            k3 = f(t + 0.5 * h, X + 0.5 * h * k2)
            k4 = f(t + h, X + h * k3)
            X = X + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            t += h
    return X
