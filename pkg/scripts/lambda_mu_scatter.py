"""lambda versus mu on the regularized crossings of two pendulum runs.

Runs q0=0 with p0=3 (rotation) and p0=2.2 (near the separatrix), writes one CSV
per run with the (k, lambda, mu, psi_mid) of every regularized step and prints
a short summary.  Feed the CSVs to any plotter for the scatter.

    python3 scripts/lambda_mu_scatter.py --steps 2000 --out-dir out/
"""

import argparse
import csv
from pathlib import Path

import numpy as np

from dthsem import Branch, SolverConfig, integrate, lift, pendulum


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=2000)
    ap.add_argument("--h0-offset", type=float, default=1e-3)
    ap.add_argument("--out-dir", type=Path, default=Path("."))
    args = ap.parse_args()
    args.out_dir.mkdir(parents=True, exist_ok=True)
    sys = pendulum()
    cfg = SolverConfig(h0_offset=args.h0_offset)
    for p0 in (3.0, 2.2):
        tr = integrate(sys, lift(sys, [0.0], [p0]), args.steps, cfg)
        rows = [(k, s.lam, s.mu, s.psi_mid) for k, s in enumerate(tr.steps) if s.branch is Branch.REGULARIZED]
        path = args.out_dir / f"lambda_mu_p0_{p0:g}.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k", "lambda", "mu", "psi_mid"])
            w.writerows([k, repr(a), repr(b), repr(c)] for k, a, b, c in rows)
        lam = np.array([r[1] for r in rows])
        mu = np.array([r[2] for r in rows])
        neg = sum(s.lam < 0 for s in tr.steps)
        print(f"p0={p0:g}: {len(rows)} regularized crossings, {neg} negative steps, "
              f"lambda in [{lam.min():.3g}, {lam.max():.3g}], mu in [{mu.min():.3g}, {mu.max():.3g}] -> {path}")


if __name__ == "__main__":
    main()
