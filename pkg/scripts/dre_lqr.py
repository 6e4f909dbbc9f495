"""Differential Riccati equation of the LQR problem: rank sweep and reference spectrum.

    python scripts/dre_lqr.py [--m 64] [--ranks 4,20] [--out out/dre]
"""
import argparse
from pathlib import Path

import numpy as np

from lrsplit.cli import cmd_convergence, cmd_emit_plots, cmd_singular_values, load_config

ROOT = Path(__file__).resolve().parents[1]


def fit_slope(taus, errs):
    return np.polyfit(np.log(taus), np.log(errs), 1)[0]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--config", default=ROOT / "configs" / "dre.ini")
    ap.add_argument("--m", type=int)
    ap.add_argument("--ranks")
    ap.add_argument("--out", default="out/dre")
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()

    cfg = load_config(args.config)
    if args.m:
        cfg.m = args.m
    if args.ranks:
        cfg.ranks = [int(r) for r in args.ranks.split(",")]
    cfg.validate()

    records, conv = cmd_convergence(cfg, args.out, args.threads)
    sv, ranks_t, paths = cmd_singular_values(cfg, args.out)
    for p in (conv, *paths):
        cmd_emit_plots(p)

    for r in cfg.ranks:
        rows = [rec for rec in records if rec.rank == r]
        taus = [rec.tau for rec in rows]
        errs = [rec.error_frobenius for rec in rows]
        print(f"r={r:<3d} slope={fit_slope(taus, errs):.3f}  errors=" + " ".join(f"{e:.3e}" for e in errs))
    sigma = np.array([s["sigma"] for s in sv])
    print(f"sigma_k/sigma_1 at T for k=10,20,30: "
          + " ".join(f"{sigma[k - 1] / sigma[0]:.1e}" for k in (10, 20, 30) if k <= len(sigma)))
    print("effective rank over time:", [r["effective_rank"] for r in ranks_t])


if __name__ == "__main__":
    main()
