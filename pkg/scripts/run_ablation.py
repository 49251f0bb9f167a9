"""Train every variant over several seeds on the planted dataset and tabulate test R@10.

    python scripts/run_ablation.py --config configs/planted.json --seeds 5 --out ablation.json
"""
import argparse
import json
import logging
from dataclasses import asdict

from chet.experiments import ablation_study


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default="configs/planted.json")
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--variants", default="full,no_transition,no_dynamic")
    ap.add_argument("--epochs", type=int)
    ap.add_argument("--out")
    args = ap.parse_args()
    logging.basicConfig(level="INFO", format="%(message)s")

    overrides = {"epochs": args.epochs} if args.epochs else {}
    variants = tuple(args.variants.split(","))
    study = ablation_study(args.config, seeds=range(args.seeds), variants=variants, **overrides)

    print(f"{'variant':<20}{'median R@10':>12}{'median emerging':>17}")
    print(f"{'frequency_baseline':<20}{study.baseline_r10:>12.4f}{study.baseline_emerging_r10:>17.4f}")
    for v in variants:
        print(f"{v:<20}{study.median(v):>12.4f}{study.median(v, 'emerging_r10'):>17.4f}")
    if args.out:
        with open(args.out, "w") as fh:
            json.dump({"baseline_r10": study.baseline_r10,
                       "baseline_emerging_r10": study.baseline_emerging_r10,
                       "runs": [asdict(r) for r in study.runs]}, fh, indent=2)


if __name__ == "__main__":
    main()
