"""Self-supervised pipeline in one process: CMA-ES collection, filtering,
supervised distillation and evaluation.

    python scripts/collect_and_distill.py --budget 1500 --outdir runs/upper_body
"""

import argparse
import time
from pathlib import Path

import numpy as np

from bedcover.env import EnvConfig, pose_task_factory
from bedcover.eval import evaluate
from bedcover.optimizer import CollectConfig, collect_dataset, filter_dataset
from bedcover.policy import TrainConfig, train_supervised


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--target", default="upper_body")
    ap.add_argument("--budget", type=int, default=1500)
    ap.add_argument("--threshold", type=float, default=90.0)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--eval-trials", type=int, default=50)
    ap.add_argument("--outdir", default="run")
    args = ap.parse_args()

    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = EnvConfig(target=args.target)
    t0 = time.time()
    ds, logs = collect_dataset(
        pose_task_factory(cfg), args.target,
        CollectConfig(total_rollouts=args.budget, seed=args.seed, workers=args.workers))
    ds.write(out / "dataset.csv")
    for log in logs:
        print(f"pose {log.pose_seed}: {log.rollouts} rollouts, best {log.best_reward:.1f}")
    kept = filter_dataset(ds, args.threshold)
    kept.write(out / "dataset_filtered.csv")
    print(f"{len(kept)}/{len(ds)} rows above {args.threshold}, {time.time() - t0:.0f} s")
    if len(kept) == 0:
        return

    res = train_supervised(kept.obs, kept.act, TrainConfig(seed=args.seed))
    res.model.save(out / "model.json")
    print(f"final training MSE {res.history[-1]:.2e}")
    m = evaluate(res.model, cfg, args.eval_trials, seed=args.seed + 1, workers=args.workers)
    print(f"eval: F1 {m.f1:.3f}, reward {m.mean_reward:.1f} ± {m.std_reward:.1f}, "
          f"{time.time() - t0:.0f} s total")
    np.savetxt(out / "eval_rewards.txt", [t.reward for t in m.trials])


if __name__ == "__main__":
    main()
