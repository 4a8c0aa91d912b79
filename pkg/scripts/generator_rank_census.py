"""Maximum sampled operator rank of one generator, per dimension.

One A_Psi never exceeds rank 2.  One A_{1,Psi,Psi1} reaches rank 4 from m = 4 on,
which is why the covariant-derivative lower bound divides the rank by 4.
"""
import argparse

import numpy as np

from algcurv.operators import covderiv_operator, curvature_operator
from algcurv.tensor_core import Space, build_A1, build_A_Psi, random_sym2, random_sym3


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--dims", type=int, nargs="+", default=[2, 3, 4, 5, 6])
    ap.add_argument("--tensors", type=int, default=5)
    ap.add_argument("--tuples", type=int, default=64)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    print(f"{'m':>2} {'max rank A_Psi':>15} {'max rank A1':>12} {'min sigma_4/sigma_1':>20}")
    for m in args.dims:
        sp = Space.riemannian(m)
        r0 = r1 = 0
        gap = np.inf
        for _ in range(args.tensors):
            P, T = random_sym2(m, rng), random_sym3(m, rng)
            A, A1 = build_A_Psi(P), build_A1(P, T)
            for _ in range(args.tuples):
                xs = rng.standard_normal((3, m))
                r0 = max(r0, curvature_operator(sp, A, xs[0], xs[1]).numerical_rank)
                rep = covderiv_operator(sp, A1, *xs)
                r1 = max(r1, rep.numerical_rank)
                if m >= 4:
                    gap = min(gap, rep.singular_values[3] / rep.singular_values[0])
        print(f"{m:>2} {r0:>15} {r1:>12} {gap if m >= 4 else float('nan'):>20.3e}")


if __name__ == "__main__":
    main()
