"""Run the whole law registry against one form and print the slack table.

Every registered law samples its own trials from a shared seed; a slack is
the signed margin to the law's inequality (negative = violation), already
normalised by the trial's energy scale.
"""

import argparse
import time

from penergy.forms import PLIntervalForm
from penergy.laws import ALL_LAWS
from penergy.sampler import PLSampler


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--p", type=float, default=3.0)
    ap.add_argument("--trials", type=int, default=12)
    args = ap.parse_args()

    form = PLIntervalForm(args.p, weight=[(0.0, 0.5, 1.0), (0.5, 1.0, 2.5)])
    sampler = PLSampler(seed=args.seed)
    print(f"p = {args.p}, two-cell weight, {args.trials} trials per law\n")
    print(f"{'law':22} {'worst slack':>13} {'tolerance':>11}   status")

    failures = 0
    for name in sorted(ALL_LAWS):
        t0 = time.monotonic()
        rep = ALL_LAWS[name](form, sampler, args.trials)
        status = "ok" if rep.passed else "VIOLATED"
        failures += not rep.passed
        print(f"{name:22} {rep.worst_slack:>13.3e} {rep.tolerance:>11.0e}"
              f"   {status}  ({time.monotonic() - t0:.2f}s)")

    print(f"\n{len(ALL_LAWS) - failures}/{len(ALL_LAWS)} laws hold")


if __name__ == "__main__":
    main()
