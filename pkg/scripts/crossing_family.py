"""A one-parameter family of psi = 0 crossings of the pendulum.

Sweeping the initial momentum moves the vertex sequence relative to the
v-shaped curve, so the first crossing runs through its different shapes:
positive or negative lambda, small or large mu, with or without a bracketed
step in front.  For each member the regularized crossing is reported next to
the ghost step the ForceGhost mode would draw from the vertex before it.

    python3 scripts/crossing_family.py --count 21
"""

import argparse

import numpy as np

from dthsem import Branch, IntegrationError, SolverConfig, integrate, lift, pendulum, psi
from dthsem.stepper import step_ghost
from dthsem.systems import extended_H

CROSSING = (Branch.BRACKETED, Branch.REGULARIZED)


def first_crossing(sys, p0, cfg, steps):
    """Branch pattern around the first crossing, its regularized step and the
    ghost step the ForceGhost mode would draw instead (None when it would not)."""
    tr = integrate(sys, lift(sys, [0.0], [p0]), steps, cfg)
    k = next((i for i, s in enumerate(tr.steps) if s.branch in CROSSING), None)
    if k is None:
        return None
    pattern = "".join(t.branch.value[0] for t in tr.steps[max(k - 1, 0):k + 4])
    reg = next(t for t in tr.steps[k:] if t.branch is Branch.REGULARIZED)
    ghost = None
    if k:
        prev = tr.steps[k - 1]
        # same guard as the state machine: rewind one vertex only when the
        # last two vertex energies share a sign
        if extended_H(sys, prev.z_start.z) * extended_H(sys, prev.z_end.z) > 0:
            ghost = step_ghost(sys, prev.z_start.z, cfg, 1, abs(prev.lam))
    return pattern, reg, ghost


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--count", type=int, default=21)
    ap.add_argument("--p-min", type=float, default=2.8)
    ap.add_argument("--p-max", type=float, default=3.2)
    ap.add_argument("--h0-offset", type=float, default=1e-3)
    ap.add_argument("--steps", type=int, default=40)
    args = ap.parse_args()
    sys = pendulum()
    cfg = SolverConfig(h0_offset=args.h0_offset)
    print(f"{'p0':>8} {'pattern':>8} {'lambda':>10} {'mu':>11} {'ghost lambda':>13} {'ghost psi(zbar)':>16}")
    for p0 in np.linspace(args.p_min, args.p_max, args.count):
        try:
            found = first_crossing(sys, p0, cfg, args.steps)
        except IntegrationError as exc:
            print(f"{p0:8.4f} failed: {exc}")
            continue
        if found is None:
            print(f"{p0:8.4f} no crossing within {args.steps} steps")
            continue
        pattern, r, g = found
        ghost = f"{g.lam:13.6f} {psi(sys, 0.5 * (g.z_start.z + g.z_end.z)):16.4f}" if g else f"{'-':>13} {'-':>16}"
        print(f"{p0:8.4f} {pattern:>8} {r.lam:10.6f} {r.mu:11.3e} {ghost}")


if __name__ == "__main__":
    main()
