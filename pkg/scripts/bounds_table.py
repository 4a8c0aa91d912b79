"""Bracket the generator counts of random tensors: operator-rank lower bound vs solver witness."""
import argparse
import time

from algcurv.decomposition import SolverConfig, certify_bounds
from algcurv.tensor_core import COVDERIV, CURV, random_element


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dims", type=int, nargs="+", default=[2, 3, 4])
    ap.add_argument("--trials", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--samples", type=int, default=64)
    ap.add_argument("--no-covderiv", action="store_true")
    args = ap.parse_args()

    print(f"{'m':>2} {'trial':>5} {'lower':>5} {'upper':>5} {'lower1':>6} {'upper1':>6} {'sec':>6}")
    for m in args.dims:
        for t in range(args.trials):
            seed = args.seed + 100 * m + t
            A = random_element(m, CURV, seed)
            A1 = None if args.no_covderiv else random_element(m, COVDERIV, seed)
            t0 = time.perf_counter()
            b = certify_bounds(A, A1, SolverConfig(seed=seed), args.samples)
            print(f"{m:>2} {t:>5} {b.lower:>5} {str(b.upper):>5} {str(b.lower1):>6} {str(b.upper1):>6} "
                  f"{time.perf_counter() - t0:6.1f}")


if __name__ == "__main__":
    main()
