"""Every run-configuration default in one place.

``DEFAULTS`` is the schema: the CLI rejects keys that do not appear here.
``ORIGIN`` tags each value as ``published`` (taken from the reference
method's description) or ``chosen`` (picked here where no value was given).
"""

from __future__ import annotations

import copy
import math

SCHEMA_VERSION = 1

DEFAULTS: dict = {
    "schema_version": SCHEMA_VERSION,
    "seed": 0,
    "workers": 1,
    "env": {
        "target": "upper_body",
        "lam": 0.028,
        "pose_variation": 0.2,
        "vary_pose": True,
        "vary_blanket": False,
        "vary_body": False,
        "blanket_pose": [0.0, 0.22, 0.0],
        "drop_clearance": 0.02,
        "lift_height": 0.40,
        "speed": 0.2,
        "settle_speed": 0.01,
        "reset_max_steps": 2400,
        "settle_max_steps": 1600,
        "max_retries": 10,
        "min_covered": 0.99,
        "min_head_exposed": 0.90,
        "cloth": {
            "total_mass": 2.0,
            "stiffness_structural": 40.0,
            "stiffness_shear": 12.0,
            "stiffness_bend": 4.0,
            "damping": 0.03,
            "friction_coeff": 0.5,
            "gravity": 9.81,
            "dt": 0.0025,
            "collision_margin": 0.005,
            "max_speed": 5.0,
            "velocity_damping": 2.0,
        },
    },
    "collect": {
        "total_rollouts": 5000,
        "per_pose_cap": 300,
        "success_reward": 95.0,
        "threshold": 90.0,
        "sigma0": 0.3,
        "popsize": 8,
        "output": "dataset.csv",
        "filtered_output": "dataset_filtered.csv",
    },
    "train": {
        "mode": "supervised",
        "dataset": "dataset_filtered.csv",
        "output": "model.json",
        "history": "history.csv",
        "epochs": 100,
        "batch_size": 8,
        "lr": None,
        "optimizer": "adam",
        "clip": 0.2,
        "value_coef": 0.5,
        "entropy_coef": 0.0,
        "init_log_std": math.log(0.3),
        "rollouts": 5000,
        "ppo_batch": 32,
        "ppo_updates": 50,
    },
    "eval": {
        "model": "model.json",
        "models": {},
        "targets": [],
        "conditions": ["original"],
        "trials": 100,
        "output_csv": "results.csv",
        "output_md": "results.md",
        "trials_csv": "trials.csv",
        "episode_log": "episodes.jsonl",
    },
    "replay": {
        "log": "episodes.jsonl",
        "episode": 0,
        "output_dir": "frames",
        "stride": 10,
    },
}

ORIGIN: dict[str, str] = {
    "env.lam": "published",
    "env.pose_variation": "published",
    "env.lift_height": "published",
    "env.settle_speed": "published",
    "env.cloth.gravity": "published",
    "collect.total_rollouts": "published",
    "collect.per_pose_cap": "published",
    "collect.success_reward": "published",
    "collect.threshold": "published",
    "train.epochs": "published",
    "train.batch_size": "published",
    "train.rollouts": "published",
    "train.ppo_batch": "published",
    "train.ppo_updates": "published",
    "eval.trials": "published",
}

# learning rates depend on the training mode; ``train.lr = None`` picks these
MODE_LR = {"supervised": 1e-3, "ppo": 5e-5}


def origin(key: str) -> str:
    return ORIGIN.get(key, "chosen")


def defaults() -> dict:
    return copy.deepcopy(DEFAULTS)
