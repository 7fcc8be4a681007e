"""How high can the reward go on a single pose?

Runs CMA-ES on the action for a few fixed start states and reports the best
reward found, plus the reward of one shared constant action.  Useful when
changing body geometry or cloth constants: if the best single-pose reward
sits below the dataset filter threshold, collection yields nothing.
"""

import argparse

import numpy as np

from bedcover.env import EnvConfig, EnvPoseTask, derive_seed
from bedcover.optimizer import cma_ask, cma_init, cma_tell, to_action


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--target", default="upper_body")
    ap.add_argument("--poses", type=int, default=3)
    ap.add_argument("--evals", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--action", type=float, nargs=4, default=None,
                    help="also score this fixed action on every pose")
    args = ap.parse_args()

    cfg = EnvConfig(target=args.target)
    for i in range(args.poses):
        seed = derive_seed(args.seed, i)
        task = EnvPoseTask(cfg, seed)
        rng = np.random.default_rng(seed)
        st = cma_init(np.zeros(4), 0.3)
        best, best_a = -np.inf, None
        while st.evaluations + st.popsize <= args.evals:
            zs = cma_ask(st, rng)
            acts = [to_action(z) for z in zs]
            rs = np.array([task.rollout(a) for a in acts])
            k = int(np.argmax(rs))
            if rs[k] > best:
                best, best_a = rs[k], acts[k]
            cma_tell(st, zs, -rs)
        line = f"pose {seed}: best {best:.1f} at {np.round(best_a, 3).tolist()}"
        if args.action is not None:
            line += f", fixed action {task.rollout(np.array(args.action)):.1f}"
        print(line, flush=True)


if __name__ == "__main__":
    main()
