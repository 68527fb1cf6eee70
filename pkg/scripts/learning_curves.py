"""LMS and RLS learning curves against the MMSE floor on the same draws."""

import argparse
import os

import numpy as np

from detlab.adapt import AdaptParams, learning_curve


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results/learn")
    ap.add_argument("--links", default="1x1,2x2,4x4", help="comma separated MxN")
    ap.add_argument("--snr", type=float, default=20.0)
    ap.add_argument("--n-train", type=int, default=1000)
    ap.add_argument("--n-ensemble", type=int, default=500)
    ap.add_argument("--seed", type=int, default=5)
    args = ap.parse_args()

    os.makedirs(args.out, exist_ok=True)
    params = AdaptParams()
    for link in args.links.split(","):
        m, n = (int(v) for v in link.split("x"))
        curves = {algo: learning_curve(m, n, args.snr, algo, params, args.n_train, args.n_ensemble,
                                       np.random.default_rng(args.seed))
                  for algo in ("lms", "rls")}
        path = os.path.join(args.out, f"learn_{link}.csv")
        with open(path, "w") as fh:
            fh.write("iteration,lms,rls,mmse\n")
            mmse = curves["rls"].mmse_ber
            for i, (a, b) in enumerate(zip(curves["lms"].ber, curves["rls"].ber)):
                fh.write(f"{i + 1},{a!r},{b!r},{mmse!r}\n")
        final = curves["rls"].ber[-args.n_train // 2:].mean()
        print(f"{link}: RLS final {final:.4g}, LMS final {curves['lms'].ber[-1]:.4g}, MMSE {mmse:.4g}")


if __name__ == "__main__":
    main()
