"""Reset-contract statistics over many sampled start states.

    python scripts/check_reset.py --poses 50 --vary-blanket
"""

import argparse
import time

import numpy as np

from bedcover.env import EnvConfig, ResetError, derive_seed, reset


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--poses", type=int, default=50)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--target", default="upper_body")
    ap.add_argument("--vary-blanket", action="store_true")
    ap.add_argument("--vary-body", action="store_true")
    args = ap.parse_args()

    cfg = EnvConfig(target=args.target, vary_blanket=args.vary_blanket, vary_body=args.vary_body)
    cov, head, attempts, steps, failed = [], [], [], [], 0
    t0 = time.time()
    for i in range(args.poses):
        try:
            state, _ = reset(cfg, derive_seed(args.seed, i))
        except ResetError as e:
            failed += 1
            print(f"pose {i}: {e}")
            continue
        info = state.info
        cov.append(info["covered_fraction"])
        head.append(info["head_exposed_fraction"])
        attempts.append(info["attempts"])
        steps.append(info["settle_steps"])
    cov, head = np.array(cov), np.array(head)
    print(f"{len(cov)} resets in {time.time() - t0:.1f} s, {failed} gave up")
    print(f"covered fraction: min {cov.min():.4f} mean {cov.mean():.4f}")
    print(f"head exposed:     min {head.min():.4f} mean {head.mean():.4f}")
    print(f"contract held:    {np.mean((cov >= cfg.min_covered) & (head >= cfg.min_head_exposed)):.2%}")
    print(f"attempts: {np.bincount(attempts)[1:].tolist()}  settle steps: mean {np.mean(steps):.0f}")


if __name__ == "__main__":
    main()
