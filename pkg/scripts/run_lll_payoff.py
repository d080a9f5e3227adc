#!/usr/bin/env python3
"""Measure how much LLL reduction improves the greedy solver.

For random instances this reports: how often the post-reduction error is
no worse, the mean error ratio, the effect on the absolute error bound
sum(L_ii^2), and how the worst diagonal-ratio profile responds to delta.

Usage:
    python scripts/run_lll_payoff.py --instances 500 --max-n 8
"""

import argparse

import numpy as np

from latquant.lattice import LatticeBasis, babai_from_target, babai_nearest_plane
from latquant.linalg import ql_decompose
from latquant.reduction import lll_reduce


def profile(diag: np.ndarray) -> float:
    return float(np.max(diag / np.minimum.accumulate(diag)))


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--instances", type=int, default=500)
    ap.add_argument("--max-n", type=int, default=8)
    ap.add_argument("--delta", type=float, default=0.99)
    ap.add_argument("--delta-sweep", nargs="*", type=float,
                    default=[0.5, 0.75, 0.99])
    ap.add_argument("--seed", type=int, default=70_000)
    args = ap.parse_args()

    improved = bound_improved = 0
    ratios = []
    sweeps = {d: [] for d in args.delta_sweep}
    for i in range(args.instances):
        rng = np.random.default_rng(args.seed + i)
        n = int(rng.integers(2, args.max_n + 1))
        k = n + int(rng.integers(0, n + 1))
        x = rng.uniform(-1.0, 1.0, (k, n))
        w = rng.uniform(-2.0, 2.0, n)

        basis = LatticeBasis(x)
        before = babai_nearest_plane(basis, w)
        red = lll_reduce(x, args.delta)
        lat = LatticeBasis(red.basis_red)
        after = babai_from_target(lat, x @ w)

        if after.error_l2 <= before.error_l2 + 1e-12:
            improved += 1
        if np.sum(lat.factors.diag ** 2) <= np.sum(basis.factors.diag ** 2) + 1e-12:
            bound_improved += 1
        ratios.append(after.error_l2 / before.error_l2 if before.error_l2 else 1.0)
        for d in args.delta_sweep:
            sweeps[d].append(profile(ql_decompose(lll_reduce(x, d).basis_red).diag))

    total = args.instances
    print(f"instances: {total}  (n <= {args.max_n}, delta = {args.delta})")
    print(f"greedy error improved or equal: {improved / total:6.1%}")
    print(f"mean post/pre error ratio:      {np.mean(ratios):.4f}")
    print(f"sum L_ii^2 improved or equal:   {bound_improved / total:6.1%}")
    print("delta sweep (mean / max of worst diagonal-ratio profile):")
    for d in args.delta_sweep:
        print(f"  delta={d:<5} {np.mean(sweeps[d]):7.4f} / {np.max(sweeps[d]):7.4f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
