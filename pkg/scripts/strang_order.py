"""Lie vs Strang on the smooth periodic preset.

    python scripts/strang_order.py [--m 32] [--rank 2]
"""
import argparse

import numpy as np

from lrsplit.problems import preset_periodic_smooth
from lrsplit.reference import dopri5
from lrsplit.splitting import SchemeConfig, integrate


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--m", type=int, default=32)
    ap.add_argument("--rank", type=int, default=2)
    ap.add_argument("--halvings", default="3-8")
    args = ap.parse_args()

    lo, hi = (int(k) for k in args.halvings.split("-"))
    p = preset_periodic_smooth(args.m)
    ref = dopri5(p)
    taus = [(p.T - p.t0) * 2.0**-k for k in range(lo, hi + 1)]
    errs = {}
    for scheme in ("lowrank-lie", "lowrank-strang"):
        errs[scheme] = [np.linalg.norm(integrate(p, SchemeConfig(scheme, args.rank, tau)).dense - ref)
                        for tau in taus]
    print(f"{'tau':<10}{'lie':<12}{'strang':<12}")
    for i, tau in enumerate(taus):
        print(f"{tau:<10.4g}{errs['lowrank-lie'][i]:<12.3e}{errs['lowrank-strang'][i]:<12.3e}")
    for scheme, e in errs.items():
        print(f"{scheme}: observed order {np.polyfit(np.log(taus), np.log(e), 1)[0]:.3f}")


if __name__ == "__main__":
    main()
