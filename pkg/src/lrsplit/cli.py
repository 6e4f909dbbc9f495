"""Experiment harness: convergence sweeps, singular values, error decomposition, plots.

Usage::

    python -m lrsplit convergence --config configs/reaction_diffusion.ini --out out/
    python -m lrsplit singvals    --config configs/dre.ini --out out/
    python -m lrsplit decompose   --config configs/reaction_diffusion.ini --out out/
    python -m lrsplit plots       --out out/ [--csv out/convergence.csv]

Exit codes: 0 success, 1 configuration error, 2 every sweep point failed,
3 some sweep points failed.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import datetime
import hashlib
import io
import json
import logging
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np

from .dlr import SOLVER_KINDS, SubstepSolver
from .errors import ConfigError, DimensionMismatch, LrsplitError, ParseError, SchemaError
from .problems import PRESETS, problem_from_files
from .reference import ToleranceSpec, dopri5
from .splitting import SCHEMES, SchemeConfig, error_decomposition, integrate, step_count

log = logging.getLogger("lrsplit")

EXIT_OK, EXIT_CONFIG, EXIT_ALL_FAILED, EXIT_PARTIAL = 0, 1, 2, 3

SECTION = "experiment"


@dataclass
class ExperimentConfig:
    problem: str = "reaction_diffusion"
    m: int = 64
    q: int = 9
    T: float = 0.5
    t0: float = 0.0
    ranks: List[int] = field(default_factory=lambda: [1])
    taus: List[float] = field(default_factory=list)
    schemes: List[str] = field(default_factory=lambda: ["lowrank-lie"])
    expm_method: str = "dense"
    substep_solver: str = "rk4"
    substeps: int = 1
    rtol: float = 1e-10
    atol: float = 1e-10
    rank_threshold: float = 1e-8
    n_times: int = 11
    output_dir: str = "out"
    seed: int = 0
    a_path: Optional[str] = None
    q_path: Optional[str] = None
    x0_path: Optional[str] = None

    def validate(self):
        if self.problem not in PRESETS and self.problem != "matrix_market":
            raise ConfigError("problem", f"unknown problem {self.problem!r}; expected one of "
                              f"{sorted(PRESETS) + ['matrix_market']}")
        if self.problem == "matrix_market" and not self.a_path:
            raise ConfigError("a_path", "required for problem = matrix_market")
        if self.m < 4:
            raise ConfigError("m", "must be >= 4")
        if not self.T > self.t0:
            raise ConfigError("T", "must exceed t0")
        if not self.ranks:
            raise ConfigError("ranks", "list must not be empty")
        if any(r < 1 or r > self.m for r in self.ranks):
            raise ConfigError("ranks", f"every rank must lie in [1, m={self.m}]")
        if not self.taus:
            raise ConfigError("taus", "list must not be empty")
        for tau in self.taus:
            if not tau > 0:
                raise ConfigError("taus", f"{tau} is not positive")
            try:
                step_count(self.t0, self.T, tau)
            except (ValueError, LrsplitError) as exc:
                raise ConfigError("taus", str(exc)) from None
        if not self.schemes:
            raise ConfigError("schemes", "list must not be empty")
        for s in self.schemes:
            if s not in SCHEMES:
                raise ConfigError("schemes", f"unknown scheme {s!r}; expected one of {SCHEMES}")
        if self.expm_method not in ("dense", "krylov"):
            raise ConfigError("expm_method", "must be dense or krylov")
        if self.substep_solver not in SOLVER_KINDS:
            raise ConfigError("substep_solver", f"must be one of {SOLVER_KINDS}")
        if self.substeps < 1:
            raise ConfigError("substeps", "must be >= 1")
        if self.rtol <= 0 or self.atol <= 0:
            raise ConfigError("rtol", "tolerances must be positive")
        if self.n_times < 2:
            raise ConfigError("n_times", "must be >= 2")
        if self.problem == "dre" or self.problem == "dle":
            if self.q % 2 != 1 or self.q > self.m:
                raise ConfigError("q", "must be odd and <= m")
        return self

    def digest(self):
        payload = json.dumps(asdict(self), sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()

    @property
    def substep(self):
        return SubstepSolver(self.substep_solver, self.substeps)

    @property
    def tolerance(self):
        return ToleranceSpec(self.rtol, self.atol)

    def build_problem(self):
        if self.problem == "matrix_market":
            return problem_from_files(self.a_path, self.m, self.T, self.q_path, self.x0_path)
        builder = PRESETS[self.problem]
        if self.problem in ("dle", "dre"):
            p = builder(self.m, self.q, self.T)
        else:
            p = builder(self.m, self.T)
        p.t0 = self.t0
        return p


_INT = ("m", "q", "substeps", "n_times", "seed")
_FLOAT = ("T", "t0", "rtol", "atol", "rank_threshold")
_STR = ("problem", "expm_method", "substep_solver", "output_dir", "a_path", "q_path", "x0_path")


def _split_list(text):
    return [tok.strip() for tok in text.replace(";", ",").split(",") if tok.strip()]


def _parse_int_range(field_name, text):
    """``"1, 2, 5"`` or ``"3-9"`` (inclusive)."""
    out = []
    for tok in _split_list(text):
        try:
            if "-" in tok.lstrip("-"):
                lo, hi = tok.split("-")
                out.extend(range(int(lo), int(hi) + 1))
            else:
                out.append(int(tok))
        except ValueError:
            raise ConfigError(field_name, f"cannot parse {tok!r} as integer or range") from None
    return out


def parse_config(text):
    """Parse the INI-style experiment document (one ``[experiment]`` section).

    ``taus`` lists step sizes explicitly; alternatively ``tau_halvings = 3-9``
    yields ``tau = (T - t0) * 2**-k``. Unknown keys are rejected.
    """
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("<document>", str(exc).splitlines()[0]) from None
    if not cp.has_section(SECTION):
        raise ConfigError("<document>", f"missing [{SECTION}] section")
    raw = dict(cp[SECTION])
    cfg = ExperimentConfig()
    known = set(_INT) | set(_FLOAT) | set(_STR) | {"ranks", "taus", "tau_halvings", "schemes"}
    for key in raw:
        if key not in known:
            raise ConfigError(key, "unknown key")
    for key in _INT:
        if key in raw:
            try:
                setattr(cfg, key, int(raw[key]))
            except ValueError:
                raise ConfigError(key, f"expected an integer, got {raw[key]!r}") from None
    for key in _FLOAT:
        if key in raw:
            try:
                setattr(cfg, key, float(raw[key]))
            except ValueError:
                raise ConfigError(key, f"expected a number, got {raw[key]!r}") from None
    for key in _STR:
        if key in raw:
            setattr(cfg, key, raw[key].strip() or None)
    if "ranks" in raw:
        cfg.ranks = _parse_int_range("ranks", raw["ranks"])
    if "schemes" in raw:
        cfg.schemes = _split_list(raw["schemes"])
    if "taus" in raw and "tau_halvings" in raw:
        raise ConfigError("taus", "give either taus or tau_halvings, not both")
    if "taus" in raw:
        try:
            cfg.taus = [float(v) for v in _split_list(raw["taus"])]
        except ValueError:
            raise ConfigError("taus", f"cannot parse {raw['taus']!r}") from None
    elif "tau_halvings" in raw:
        span = cfg.T - cfg.t0
        cfg.taus = [span * 2.0**-k for k in _parse_int_range("tau_halvings", raw["tau_halvings"])]
    return cfg.validate()


def load_config(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError("--config", str(exc)) from None
    return parse_config(text)


@dataclass
class ConvergenceRecord:
    scheme: str
    rank: int
    tau: float
    n_steps: int
    error_frobenius: float
    delta: float
    eps_hat_max: float
    wall_time: float
    status: str = "ok"


CONVERGENCE_COLUMNS = ["index", "scheme", "rank", "tau", "n_steps", "error_frobenius",
                       "delta", "eps_hat_max", "status", "config_hash"]
DECOMPOSE_COLUMNS = ["index", "rank", "tau", "E_sp", "E_delta", "E_lr", "total",
                     "triangle_ok", "config_hash"]
SINGVAL_COLUMNS = ["k", "sigma", "config_hash"]
RANK_COLUMNS = ["t", "effective_rank", "sigma_1", "config_hash"]


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(path, columns, rows, comments=(), trailer=()):
    """Write a header-led CSV; ``#`` comment lines hold non-deterministic data."""
    buf = io.StringIO()
    for c in comments:
        buf.write(f"# {c}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row[c]) for c in columns])
    for c in trailer:
        buf.write(f"# {c}\n")
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def read_csv(path):
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh.read().splitlines() if ln and not ln.startswith("#")]
    reader = csv.DictReader(lines)
    return reader.fieldnames or [], list(reader)


def _header_comments(cfg, command):
    stamp = datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")
    return [f"lrsplit {command} generated {stamp} config_hash={cfg.digest()}"]


def _sweep_points(cfg, m):
    points = []
    for scheme in cfg.schemes:
        ranks = cfg.ranks if scheme.startswith("lowrank") else [m]
        for r in ranks:
            for tau in cfg.taus:
                points.append((scheme, r, tau))
    return points


def _run_point(problem, cfg, reference, scheme, rank, tau):
    start = time.perf_counter()
    n = step_count(cfg.t0, cfg.T, tau)
    try:
        sc = SchemeConfig(scheme, rank, tau, cfg.expm_method, cfg.substep)
        traj = integrate(problem, sc, cfg.t0, cfg.T, tol=cfg.tolerance)
        X = traj.dense
        if not np.all(np.isfinite(X)):
            raise FloatingPointError("non-finite entries in the final state")
        err = float(np.linalg.norm(X - reference))
        return ConvergenceRecord(scheme, rank, tau, n, err, traj.delta, traj.eps_hat_max,
                                 time.perf_counter() - start)
    except (LrsplitError, FloatingPointError, np.linalg.LinAlgError, ValueError) as exc:
        log.warning("point %s r=%d tau=%g failed: %s", scheme, rank, tau, exc)
        return ConvergenceRecord(scheme, rank, tau, n, float("nan"), float("nan"), float("nan"),
                                 time.perf_counter() - start, f"failed:{type(exc).__name__}")


def _map(fn, items, threads):
    if threads <= 1:
        return [fn(*it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(fn, *it) for it in items]
        return [f.result() for f in futures]


def cmd_convergence(cfg, out_dir, threads=1):
    """Sweep (scheme, rank, tau); one reference solve; returns records and CSV path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    problem = cfg.build_problem()
    reference = dopri5(problem, cfg.t0, cfg.T, cfg.tolerance)
    points = _sweep_points(cfg, problem.m)
    records = _map(lambda s, r, tau: _run_point(problem, cfg, reference, s, r, tau), points, threads)
    digest = cfg.digest()
    rows = []
    for i, rec in enumerate(records):
        row = asdict(rec)
        row.update(index=i, config_hash=digest)
        rows.append(row)
    trailer = [f"wall_time index={i} seconds={rec.wall_time:.6f}" for i, rec in enumerate(records)]
    path = out_dir / "convergence.csv"
    write_csv(path, CONVERGENCE_COLUMNS, rows, _header_comments(cfg, "convergence"), trailer)
    return records, path


def cmd_singular_values(cfg, out_dir, threads=1):
    """Reference singular values at ``T`` and effective rank on a uniform time grid."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    problem = cfg.build_problem()
    times = list(np.linspace(cfg.t0, cfg.T, cfg.n_times))
    states = dopri5(problem, cfg.t0, cfg.T, cfg.tolerance, t_eval=times)
    digest = cfg.digest()
    sv_rows, rank_rows = [], []
    for t, X in zip(times, states):
        sigma = np.linalg.svd(X, compute_uv=False)
        eff = int(np.sum(sigma > cfg.rank_threshold * sigma[0])) if sigma[0] > 0 else 0
        rank_rows.append(dict(t=float(t), effective_rank=eff, sigma_1=float(sigma[0]),
                              config_hash=digest))
    for k, s in enumerate(sigma, start=1):
        sv_rows.append(dict(k=k, sigma=float(s), config_hash=digest))
    comments = _header_comments(cfg, "singvals")
    sv_path = out_dir / "singular_values.csv"
    rank_path = out_dir / "effective_rank.csv"
    write_csv(sv_path, SINGVAL_COLUMNS, sv_rows, comments)
    write_csv(rank_path, RANK_COLUMNS, rank_rows, comments)
    return sv_rows, rank_rows, (sv_path, rank_path)


def cmd_decompose(cfg, out_dir, threads=1):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    problem = cfg.build_problem()
    reference = dopri5(problem, cfg.t0, cfg.T, cfg.tolerance)
    points = [(r, tau) for r in cfg.ranks for tau in cfg.taus]

    def run(r, tau):
        sc = SchemeConfig("lowrank-lie", r, tau, cfg.expm_method, cfg.substep)
        return error_decomposition(problem, sc, cfg.t0, cfg.T, reference=reference)

    parts = _map(run, points, threads)
    digest = cfg.digest()
    rows = [dict(index=i, rank=r, tau=tau, E_sp=d.E_sp, E_delta=d.E_delta, E_lr=d.E_lr,
                 total=d.total, triangle_ok=int(d.triangle_ok), config_hash=digest)
            for i, ((r, tau), d) in enumerate(zip(points, parts))]
    path = out_dir / "decompose.csv"
    write_csv(path, DECOMPOSE_COLUMNS, rows, _header_comments(cfg, "decompose"))
    return rows, path


_PLOT_SCHEMAS = {
    "convergence": ["scheme", "rank", "tau", "error_frobenius"],
    "decompose": ["tau", "E_sp", "E_delta", "E_lr", "total"],
    "singular_values": ["k", "sigma"],
    "effective_rank": ["t", "effective_rank"],
}


def _detect_schema(columns, path):
    best, missing_best = None, None
    for name, needed in _PLOT_SCHEMAS.items():
        missing = [c for c in needed if c not in columns]
        if not missing:
            return name
        overlap = len(needed) - len(missing)
        if overlap and (missing_best is None or len(missing) < len(missing_best)):
            best, missing_best = name, missing
    if best is None:
        raise SchemaError(f"{path}: header {columns} matches no known table")
    raise SchemaError(f"{path}: looks like a {best} table but is missing column(s) "
                      f"{', '.join(missing_best)}")


def cmd_emit_plots(csv_path):
    """Write a gnuplot script next to ``csv_path`` and return its path."""
    csv_path = Path(csv_path)
    columns, rows = read_csv(csv_path)
    kind = _detect_schema(columns, csv_path)
    name = csv_path.name
    col = {c: i + 1 for i, c in enumerate(columns)}
    lines = [
        f"# gnuplot script for {name}",
        "set datafile separator ','",
        "set datafile commentschars '#'",
        "set key left top",
        "set terminal pngcairo size 800,600",
        f"set output '{csv_path.stem}.png'",
    ]
    if kind == "convergence":
        lines += ["set logscale xy", "set xlabel 'step size tau'",
                  "set ylabel 'error (Frobenius)'", "set format xy '%.0e'"]
        groups = sorted({(r["scheme"], r["rank"]) for r in rows}, key=lambda g: (g[0], int(g[1])))
        plots = []
        for scheme, rank in groups:
            sel = (f"(strcol({col['scheme']}) eq '{scheme}' && column({col['rank']}) == {rank} "
                   f"? column({col['error_frobenius']}) : 1/0)")
            plots.append(f"'{name}' every ::1 using {col['tau']}:{sel} with linespoints "
                         f"title '{scheme} r={rank}'")
        plots.append(f"'{name}' every ::1 using {col['tau']}:(column({col['tau']})) "
                     f"with lines dashtype 2 title 'slope 1'")
        lines.append("plot " + ", \\\n     ".join(plots))
    elif kind == "decompose":
        lines += ["set logscale xy", "set xlabel 'step size tau'", "set ylabel 'error contribution'"]
        plots = [f"'{name}' every ::1 using {col['tau']}:{col[c]} with linespoints title '{c}'"
                 for c in ("E_sp", "E_delta", "E_lr", "total")]
        lines.append("plot " + ", \\\n     ".join(plots))
    elif kind == "singular_values":
        lines += ["set logscale y", "set xlabel 'k'", "set ylabel 'sigma_k'", "set format y '%.0e'"]
        lines.append(f"plot '{name}' every ::1 using {col['k']}:{col['sigma']} "
                     f"with points pt 7 title 'singular values'")
    else:
        lines += ["set xlabel 't'", "set ylabel 'effective rank'"]
        lines.append(f"plot '{name}' every ::1 using {col['t']}:{col['effective_rank']} "
                     f"with linespoints title 'effective rank'")
    script = csv_path.with_suffix(".gp")
    script.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return script


def _exit_code(statuses):
    failed = sum(s != "ok" for s in statuses)
    if failed == 0:
        return EXIT_OK
    return EXIT_ALL_FAILED if failed == len(statuses) else EXIT_PARTIAL


def build_parser():
    parser = argparse.ArgumentParser(prog="lrsplit", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("convergence", "singvals", "decompose", "plots"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=name != "plots")
        p.add_argument("--out", default=None, help="output directory (overrides output_dir)")
        p.add_argument("--threads", type=int, default=1)
        if name == "plots":
            p.add_argument("--csv", action="append", default=[],
                           help="CSV to plot (repeatable); default: every CSV in --out")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config) if args.config else None
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = args.out or (cfg.output_dir if cfg else None)
    if out is None:
        print("config error: --out: required when no --config is given", file=sys.stderr)
        return EXIT_CONFIG
    threads = max(1, args.threads)

    if args.command == "plots":
        paths = [Path(p) for p in args.csv] or sorted(Path(out).glob("*.csv"))
        if not paths:
            print(f"no CSV files found in {out}", file=sys.stderr)
            return EXIT_CONFIG
        code = EXIT_OK
        for p in paths:
            try:
                print(cmd_emit_plots(p))
            except (SchemaError, OSError) as exc:
                print(f"schema error: {exc}", file=sys.stderr)
                code = EXIT_CONFIG
        return code

    try:
        cfg.build_problem()
    except (DimensionMismatch, ParseError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if args.command == "convergence":
            records, path = cmd_convergence(cfg, out, threads)
            print(path)
            return _exit_code([r.status for r in records])
        if args.command == "singvals":
            *_, paths = cmd_singular_values(cfg, out, threads)
            for p in paths:
                print(p)
            return EXIT_OK
        rows, path = cmd_decompose(cfg, out, threads)
        print(path)
        return EXIT_OK
    except (LrsplitError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_ALL_FAILED


if __name__ == "__main__":
    sys.exit(main())
