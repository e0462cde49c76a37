"""Global error of a pendulum libration over one period against the exact solution.

Each row quarters the initial energy offset, which halves the mean step; a
second-order method shows an error ratio near 4.

    python3 scripts/convergence.py --q0 1.0 --levels 5
"""

import argparse

import numpy as np
from scipy.special import ellipj, ellipk

from dthsem import SolverConfig, integrate, lift, pendulum


def exact_q(t, q0):
    k = np.sin(0.5 * q0)
    sn, cn, dn, _ = ellipj(t, k * k)
    return 2 * np.arcsin(k * cn / dn)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--q0", type=float, default=1.0)
    ap.add_argument("--h0", type=float, default=4e-3)
    ap.add_argument("--levels", type=int, default=5)
    args = ap.parse_args()
    sys = pendulum()
    period = 4 * ellipk(np.sin(0.5 * args.q0) ** 2)
    prev = None
    print(f"{'h0_offset':>10} {'steps':>6} {'mean lambda':>12} {'max |q err|':>12} {'ratio':>7}")
    for i in range(args.levels):
        h0 = args.h0 / 4**i
        lam = np.sqrt(8 * h0 / np.sin(args.q0) ** 2)
        N = int(np.ceil(period / lam)) + 2
        tr = integrate(sys, lift(sys, [args.q0], [0.0]), N, SolverConfig(h0_offset=h0))
        V = tr.vertices()
        keep = V[:, 1] <= period
        err = float(np.max(np.abs(V[keep, 0] - exact_q(V[keep, 1], args.q0))))
        mean_lam = float(np.mean([s.lam for s in tr.steps]))
        ratio = f"{prev / err:7.3f}" if prev else f"{'':>7}"
        print(f"{h0:10.3e} {N:6d} {mean_lam:12.5f} {err:12.3e} {ratio}")
        prev = err


if __name__ == "__main__":
    main()
