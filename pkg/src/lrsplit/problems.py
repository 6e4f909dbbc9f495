"""Problem presets ``X' = A X + X A_r^T + G(t, X)`` and operator builders."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse

from .errors import DimensionMismatch, ParseError
from .linalg import MatrixOperator, as_operator


@dataclass
class ProblemSpec:
    """Semilinear matrix ODE with stiff linear part ``A X + X A_right^T``.

    ``A_right`` defaults to ``A``. ``Q``, ``K`` and ``C`` are informational
    for the Lyapunov/Riccati presets; ``G`` is always the authority.
    """

    A: MatrixOperator
    G: Callable[[float, np.ndarray], np.ndarray]
    X0: np.ndarray
    T: float
    label: str = "custom"
    t0: float = 0.0
    A_right: Optional[MatrixOperator] = None
    Q: Optional[np.ndarray] = None
    K: Optional[np.ndarray] = None
    C: Optional[np.ndarray] = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.A = as_operator(self.A)
        if self.A_right is not None:
            self.A_right = as_operator(self.A_right)
        self.X0 = np.asarray(self.X0, dtype=float)
        m = self.A.shape[0]
        if self.X0.shape != (m, self.right.shape[0]):
            raise DimensionMismatch(f"X0 has shape {self.X0.shape}, operators need {(m, self.right.shape[0])}")
        g0 = np.asarray(self.G(self.t0, self.X0))
        if g0.shape != self.X0.shape:
            raise DimensionMismatch(f"G returns shape {g0.shape}, expected {self.X0.shape}")

    @property
    def right(self):
        return self.A if self.A_right is None else self.A_right

    @property
    def m(self):
        return self.A.shape[0]

    def linear(self, X):
        return self.A @ X + (self.right @ X.T).T

    def rhs(self, t, X):
        return self.linear(X) + self.G(t, X)


@dataclass(frozen=True)
class GridSpec:
    m: int

    @property
    def h(self):
        return 1.0 / (self.m + 1)

    @property
    def points(self):
        return np.arange(1, self.m + 1) * self.h


def build_laplacian_1d(m, h=None, bc="dirichlet"):
    """Second-order FD Laplacian ``tridiag(1, -2, 1) / h^2`` on interior nodes."""
    if bc != "dirichlet":
        raise ValueError("only homogeneous Dirichlet boundaries are supported")
    if m < 2:
        raise ValueError("m must be >= 2")
    h = 1.0 / (m + 1) if h is None else h
    off = np.full(m - 1, 1.0 / h**2)
    return np.diag(np.full(m, -2.0 / h**2)) + np.diag(off, 1) + np.diag(off, -1)


def diffusion_coefficient(x):
    return 2.0 + np.cos(2.0 * np.pi * x)


def build_variable_diffusion(m, alpha=diffusion_coefficient, lam=1.0):
    """Conservative FD for ``d/dx(alpha(x) d/dx) - lam`` with Dirichlet boundaries.

    ``alpha`` is sampled at half-grid points, which keeps the matrix symmetric.
    """
    h = 1.0 / (m + 1)
    half = (np.arange(m + 1) + 0.5) * h
    a = np.broadcast_to(np.asarray(alpha(half), dtype=float), half.shape)
    diag = -(a[:-1] + a[1:]) / h**2 - lam
    off = a[1:-1] / h**2
    return np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)


def build_periodic_laplacian(m):
    """Circulant ``tridiag(1, -2, 1) / h^2`` with ``h = 1/m``."""
    h = 1.0 / m
    L = np.diag(np.full(m, -2.0)) + np.diag(np.ones(m - 1), 1) + np.diag(np.ones(m - 1), -1)
    L[0, -1] = L[-1, 0] = 1.0
    return L / h**2


def build_C(q, m):
    """Rows ``1, e_1..e_p, f_1..f_p`` (``p = (q-1)/2``) sampled at ``j/(m+1)``."""
    if q % 2 != 1:
        raise ValueError("q must be odd")
    if q > m:
        raise ValueError("q must not exceed m")
    x = np.arange(1, m + 1) / (m + 1)
    k = np.arange(1, (q - 1) // 2 + 1)[:, None]
    rows = [np.ones((1, m))]
    rows.append(np.sqrt(2.0) * np.cos(2.0 * np.pi * k * x))
    rows.append(np.sqrt(2.0) * np.sin(2.0 * np.pi * k * x))
    return np.vstack(rows)


def preset_reaction_diffusion(m=64, T=0.5, alpha=1.0 / 50.0):
    """``v_t = alpha * Lap(v) + v^3`` on the unit square, Dirichlet boundaries."""
    if m < 4:
        raise ValueError("m must be >= 4")
    grid = GridSpec(m)
    A = MatrixOperator(alpha * build_laplacian_1d(m))
    x = grid.points
    f = 4.0 * x * (1.0 - x)
    X0 = np.outer(f, f)

    def G(t, X):
        return X * X * X

    return ProblemSpec(A, G, X0, T, label="reaction_diffusion",
                       params={"m": m, "alpha": alpha})


def preset_dle(m=64, q=9, T=0.1):
    """Lyapunov equation ``X' = A X + X A + C^T C`` with ``X(0) = 0``."""
    A = MatrixOperator(build_variable_diffusion(m))
    C = build_C(q, m)
    Q = C.T @ C

    def G(t, X):
        return Q

    return ProblemSpec(A, G, np.zeros((m, m)), T, label="dle", Q=Q, C=C,
                       params={"m": m, "q": q})


def preset_dre(m=64, q=9, T=0.1):
    """Riccati equation ``X' = A X + X A + C^T C - X X`` with ``X(0) = 0``."""
    A = MatrixOperator(build_variable_diffusion(m))
    C = build_C(q, m)
    Q = C.T @ C

    def G(t, X):
        return Q - X @ X

    return ProblemSpec(A, G, np.zeros((m, m)), T, label="dre", Q=Q,
                       K=np.eye(m), C=C, params={"m": m, "q": q})


def preset_periodic_smooth(m=32, T=1.0, nu=0.1):
    """Periodic diffusion with a smooth decaying source and a quadratic sink.

    Data lives in the span of the first cosine/sine modes, which the
    periodic Laplacian leaves invariant, so the exact solution has rank <= 2
    and a rank-2 integrator carries no projection error.
    """
    x = np.arange(m) / m
    c = np.sqrt(2.0 / m) * np.cos(2.0 * np.pi * x)
    s = np.sqrt(2.0 / m) * np.sin(2.0 * np.pi * x)
    X0 = np.outer(c, c) + 0.5 * np.outer(s, s)
    Q0 = np.outer(c, s) + np.outer(s, c)
    A = MatrixOperator(nu * build_periodic_laplacian(m))

    def G(t, X):
        return np.exp(-t) * Q0 - X @ X

    return ProblemSpec(A, G, X0, T, label="periodic_smooth", Q=Q0,
                       params={"m": m, "nu": nu})


PRESETS = {
    "reaction_diffusion": preset_reaction_diffusion,
    "dle": preset_dle,
    "dre": preset_dre,
    "periodic_smooth": preset_periodic_smooth,
}


def load_matrix_market(path, m=None):
    """Read a real Matrix Market file.

    Coordinate files come back as ``scipy.sparse.csr_matrix``, array files as
    dense arrays. Symmetric and skew-symmetric storage is expanded.
    """
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParseError("empty file", 1)
    header = lines[0].split()
    if len(header) != 5 or header[0].lower() != "%%matrixmarket" or header[1].lower() != "matrix":
        raise ParseError("expected '%%MatrixMarket matrix <format> <field> <symmetry>'", 1)
    fmt, fld, sym = (h.lower() for h in header[2:])
    if fmt not in ("coordinate", "array"):
        raise ParseError(f"unsupported format {fmt!r}", 1)
    if fld not in ("real", "integer", "double"):
        raise ParseError(f"unsupported field {fld!r}", 1)
    if sym not in ("general", "symmetric", "skew-symmetric"):
        raise ParseError(f"unsupported symmetry {sym!r}", 1)

    body = [(i + 1, ln.strip()) for i, ln in enumerate(lines[1:], start=1)
            if ln.strip() and not ln.lstrip().startswith("%")]
    if not body:
        raise ParseError("missing size line", len(lines))
    size_no, size_line = body[0]
    try:
        dims = [int(v) for v in size_line.split()]
    except ValueError:
        raise ParseError(f"bad size line {size_line!r}", size_no) from None

    def number(tok, no):
        try:
            return float(tok)
        except ValueError:
            raise ParseError(f"bad numeric value {tok!r}", no) from None

    if fmt == "coordinate":
        if len(dims) != 3:
            raise ParseError("coordinate size line needs rows cols nnz", size_no)
        nr, nc, nnz = dims
        if len(body) - 1 != nnz:
            raise ParseError(f"expected {nnz} entries, found {len(body) - 1}", body[-1][0])
        rows, cols, vals = [], [], []
        for no, ln in body[1:]:
            tok = ln.split()
            if len(tok) != 3:
                raise ParseError(f"expected 'i j value', got {ln!r}", no)
            try:
                i, j = int(tok[0]) - 1, int(tok[1]) - 1
            except ValueError:
                raise ParseError(f"bad index in {ln!r}", no) from None
            if not (0 <= i < nr and 0 <= j < nc):
                raise ParseError(f"index ({i + 1}, {j + 1}) out of range", no)
            v = number(tok[2], no)
            rows.append(i)
            cols.append(j)
            vals.append(v)
            if sym != "general" and i != j:
                rows.append(j)
                cols.append(i)
                vals.append(v if sym == "symmetric" else -v)
        M = scipy.sparse.csr_matrix((vals, (rows, cols)), shape=(nr, nc))
    else:
        if len(dims) != 2:
            raise ParseError("array size line needs rows cols", size_no)
        nr, nc = dims
        vals = [(no, number(tok, no)) for no, ln in body[1:] for tok in ln.split()]
        M = np.zeros((nr, nc))
        if sym == "general":
            expected = nr * nc
            slots = [(i, j) for j in range(nc) for i in range(nr)]
        else:
            # column-major lower triangle (strict for skew-symmetric)
            lo = 0 if sym == "symmetric" else 1
            slots = [(i, j) for j in range(nc) for i in range(j + lo, nr)]
            expected = len(slots)
        if len(vals) != expected:
            raise ParseError(f"expected {expected} values, found {len(vals)}", body[-1][0])
        sign = 1.0 if sym != "skew-symmetric" else -1.0
        for (i, j), (_, v) in zip(slots, vals):
            M[i, j] = v
            if sym != "general" and i != j:
                M[j, i] = sign * v
    if m is not None and M.shape != (m, m):
        raise DimensionMismatch(f"{path}: matrix is {M.shape[0]}x{M.shape[1]}, config declares m={m}")
    return M


def write_matrix_market(path, M, symmetric=False):
    """Write ``M`` in coordinate format with round-trip exact values."""
    S = scipy.sparse.coo_matrix(M)
    sym = "symmetric" if symmetric else "general"
    entries = [(i, j, v) for i, j, v in zip(S.row, S.col, S.data)
               if not symmetric or i >= j]
    entries.sort(key=lambda e: (e[1], e[0]))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"%%MatrixMarket matrix coordinate real {sym}\n")
        fh.write(f"{S.shape[0]} {S.shape[1]} {len(entries)}\n")
        for i, j, v in entries:
            fh.write(f"{i + 1} {j + 1} {float(v)!r}\n")


def problem_from_files(a_path, m, T, q_path=None, x0_path=None, label="custom"):
    """Lyapunov-type problem from Matrix Market files: ``G(t, X) = Q``.

    ``A`` is used exactly as stored (``X' = A X + X A^T + Q``); a file
    holding the transpose must be transposed by the user.
    """
    A = load_matrix_market(a_path, m)
    Q = np.zeros((m, m)) if q_path is None else _dense(load_matrix_market(q_path, m))
    X0 = np.zeros((m, m)) if x0_path is None else _dense(load_matrix_market(x0_path, m))

    def G(t, X):
        return Q

    return ProblemSpec(A, G, X0, T, label=label, Q=Q)


def _dense(M):
    return M.toarray() if scipy.sparse.issparse(M) else np.asarray(M)
