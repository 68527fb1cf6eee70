"""BER versus SNR for the 2x2 detector family plus the 1x2 / 2x1 references.

Writes one CSV per detector into ``--out`` and prints the SNR gaps at
``--target``.
"""

import argparse
import os

from detlab.errors import TargetNotBracketed
from detlab.simkit import SweepSpec, run_ber_sweep, snr_gap_at_ber

DETECTORS = ("ml", "zf", "mmse", "zf-sic", "zf-sic-ordered", "mmse-sic-ordered",
             "sic-ml-first", "sic-mrc-first")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results/ber")
    ap.add_argument("--constellation", default="bpsk")
    ap.add_argument("--snr", default="0:31:2", help="start:stop:step in dB")
    ap.add_argument("--max-trials", type=int, default=2_000_000)
    ap.add_argument("--target-errors", type=int, default=200)
    ap.add_argument("--target", type=float, default=1e-3)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    start, stop, step = (float(v) for v in args.snr.split(":"))
    grid = tuple(start + i * step for i in range(int((stop - start) / step + 0.5)))
    os.makedirs(args.out, exist_ok=True)
    links = [(d, 2, 2) for d in DETECTORS] + [("mrc", 1, 2), ("stbc", 2, 1)]
    results = {}
    for det, m, n in links:
        spec = SweepSpec(det, m, n, grid, constellation=args.constellation, max_trials=args.max_trials,
                         target_errors=args.target_errors, seed=args.seed)
        res = results[det] = run_ber_sweep(spec, workers=args.workers)
        res.write_csv(os.path.join(args.out, f"{det}_{m}x{n}.csv"))
        print(f"{det:18s} {m}x{n} done")

    for a, b in [("zf-sic", "zf-sic-ordered"), ("mmse", "zf-sic-ordered"), ("sic-ml-first", "ml"),
                 ("zf-sic-ordered", "sic-mrc-first"), ("zf", "mmse")]:
        try:
            gap = snr_gap_at_ber(results[a], results[b], args.target)
            print(f"{a} minus {b} at {args.target:g}: {gap:.2f} dB")
        except TargetNotBracketed:
            print(f"{a} / {b}: target not bracketed")


if __name__ == "__main__":
    main()
