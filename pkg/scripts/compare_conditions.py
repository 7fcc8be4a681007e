"""Per-target policies under the original, random-blanket and random-body
conditions.

Models are read from ``<models>/<target>.json``; targets without a file are
skipped.

    python scripts/compare_conditions.py --models runs/models --trials 100
"""

import argparse
from pathlib import Path

from bedcover.eval import CONDITIONS, compare_conditions, results_csv, results_markdown
from bedcover.human import TARGETS
from bedcover.policy import PolicyModel


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--models", required=True)
    ap.add_argument("--trials", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default="generalization")
    args = ap.parse_args()

    policies = {t: PolicyModel.load(p) for t in TARGETS
                if (p := Path(args.models) / f"{t}.json").exists()}
    if not policies:
        raise SystemExit(f"no <target>.json models under {args.models}")
    rows = compare_conditions(policies, list(policies), CONDITIONS, args.trials, args.seed,
                              workers=args.workers)
    Path(args.out + ".csv").write_text(results_csv(rows))
    md = results_markdown(rows)
    Path(args.out + ".md").write_text(md)
    print(md)


if __name__ == "__main__":
    main()
