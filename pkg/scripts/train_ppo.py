"""One-step PPO on a single target, followed by a deterministic evaluation.

    python scripts/train_ppo.py --target upper_body --rollouts 2000 --lr 1e-3 --out ppo.json
"""

import argparse
import time

import numpy as np

from bedcover.env import EnvConfig, EnvEpisode
from bedcover.eval import evaluate
from bedcover.policy import TrainConfig, ppo_train


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--target", default="upper_body")
    ap.add_argument("--rollouts", type=int, default=2000)
    ap.add_argument("--lr", type=float, default=None, help="default: 5e-5")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--eval-trials", type=int, default=50)
    ap.add_argument("--eval-seed", type=int, default=1)
    ap.add_argument("--out", default="ppo.json")
    args = ap.parse_args()

    cfg = EnvConfig(target=args.target)
    t0 = time.time()
    res = ppo_train(EnvEpisode(cfg),
                    TrainConfig(rollouts=args.rollouts, lr=args.lr, seed=args.seed,
                                workers=args.workers),
                    progress=lambda n, r: print(f"{n:5d} rollouts  batch mean {r:6.1f}  "
                                                f"{time.time() - t0:6.0f} s", flush=True))
    res.model.save(args.out)
    b = res.batch_rewards
    print(f"first 10 batches {np.mean(b[:10]):.1f}, last 10 batches {np.mean(b[-10:]):.1f}")
    if args.eval_trials:
        m = evaluate(res.model, cfg, args.eval_trials, seed=args.eval_seed, workers=args.workers)
        print(f"eval over {args.eval_trials}: F1 {m.f1:.3f} (per-trial {m.f1_trial_mean:.3f}), "
              f"reward {m.mean_reward:.1f} ± {m.std_reward:.1f}")


if __name__ == "__main__":
    main()
