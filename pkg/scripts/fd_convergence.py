"""Error of the finite-difference curvature oracle against exact jets as h shrinks."""
import argparse

import numpy as np

from algcurv.realization import build_realizing_germ, covderiv_at_origin, curvature_at_origin, curvature_fd_oracle
from algcurv.tensor_core import COVDERIV, CURV, Space, random_element


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--m", type=int, default=3)
    ap.add_argument("--signature", default=None, help="p,q")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--richardson", action="store_true")
    args = ap.parse_args()

    sig = tuple(int(s) for s in args.signature.split(",")) if args.signature else (0, args.m)
    germ = build_realizing_germ(Space.from_signature(args.m, sig),
                                random_element(args.m, CURV, args.seed),
                                random_element(args.m, COVDERIV, args.seed + 1))
    R0, R1 = curvature_at_origin(germ).components, covderiv_at_origin(germ).components
    prev = None
    print(f"{'h':>9} {'err R':>10} {'err nablaR':>11} {'order':>6}")
    for h in 0.08 / 2 ** np.arange(10):
        R, nR = curvature_fd_oracle(germ, None, h, args.richardson)
        eR = np.max(np.abs(R.components - R0))
        e1 = np.max(np.abs(nR.components - R1))
        order = "" if prev is None else f"{np.log2(prev / e1):6.2f}"
        print(f"{h:9.2e} {eR:10.2e} {e1:11.2e} {order}")
        prev = e1


if __name__ == "__main__":
    main()
