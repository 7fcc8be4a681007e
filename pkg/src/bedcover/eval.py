"""F-score and reward metrics over batches of seeded episodes."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Mapping, Protocol, Sequence

import numpy as np

from .env import CoverageReport, EnvConfig, EnvEpisode, derive_seed
from .parallel import parallel_map

CONDITIONS = ("original", "random_blanket", "random_body")
RESULTS_HEADER = ["target", "condition", "trials", "TP", "FP", "FN", "F1", "mean_reward",
                  "std_reward"]


def metrics_from_report(report: CoverageReport) -> tuple[int, int, int]:
    """(TP, FP, FN): target points uncovered, non-target points uncovered,
    target points left covered."""
    return report.rho_t, report.rho_n, report.n_t - report.rho_t


def f1_score(tp: float, fp: float, fn: float) -> float:
    if tp <= 0:
        return 0.0
    return tp / (tp + 0.5 * (fp + fn))


@dataclass(frozen=True)
class TrialRecord:
    seed: int
    tp: int
    fp: int
    fn: int
    reward: float
    log: dict | None = field(default=None, compare=False, repr=False)

    @property
    def f1(self) -> float:
        return f1_score(self.tp, self.fp, self.fn)


@dataclass
class Metrics:
    tp: int
    fp: int
    fn: int
    f1: float  # from pooled counts
    f1_trial_mean: float
    mean_reward: float
    std_reward: float
    trials: list[TrialRecord] = field(default_factory=list)

    @classmethod
    def from_trials(cls, trials: Sequence[TrialRecord]) -> "Metrics":
        if not trials:
            raise ValueError("no trials")
        tp = sum(t.tp for t in trials)
        fp = sum(t.fp for t in trials)
        fn = sum(t.fn for t in trials)
        rewards = np.array([t.reward for t in trials])
        return cls(tp, fp, fn, f1_score(tp, fp, fn), float(np.mean([t.f1 for t in trials])),
                   float(rewards.mean()), float(rewards.std()), list(trials))


class TrialEnv(Protocol):
    def trial(self, seed: int, policy: Callable[[np.ndarray], np.ndarray]) -> TrialRecord: ...


class EnvTrials(EnvEpisode):
    """Simulator-backed trials."""

    def trial(self, seed: int, policy) -> TrialRecord:
        from .env import episode_record, execute, reset

        state, obs = reset(self.config, seed)
        raw = np.asarray(policy(obs), dtype=float)
        res = execute(state, raw)
        tp, fp, fn = metrics_from_report(res.report)
        return TrialRecord(int(seed), tp, fp, fn, res.reward.total,
                           episode_record(seed, state, res, raw))


class ModelPolicy:
    """Deterministic wrapper so a PolicyModel can be shipped to workers."""

    def __init__(self, model):
        self.model = model

    def __call__(self, obs):
        from .policy import act

        return act(self.model, obs, deterministic=True)


def _as_policy(policy):
    from .policy import PolicyModel

    return ModelPolicy(policy) if isinstance(policy, PolicyModel) else policy


def _run_trial(args):
    env, seed, policy = args
    return env.trial(seed, policy)


def evaluate(policy, config: EnvConfig | None = None, n_trials: int = 100, seed: int = 0,
             env: TrialEnv | None = None, workers: int = 1) -> Metrics:
    """Run ``n_trials`` episodes with seeds derived from ``seed``."""
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    env = env if env is not None else EnvTrials(config or EnvConfig())
    pol = _as_policy(policy)
    jobs = [(env, derive_seed(seed, i), pol) for i in range(n_trials)]
    return Metrics.from_trials(parallel_map(_run_trial, jobs, workers))


def condition_config(base: EnvConfig, target: str, condition: str) -> EnvConfig:
    if condition not in CONDITIONS:
        raise ValueError(f"condition must be one of {CONDITIONS}")
    return replace(base, target=target, vary_blanket=condition == "random_blanket",
                   vary_body=condition == "random_body")


@dataclass
class ResultRow:
    target: str
    condition: str
    metrics: Metrics

    def csv_fields(self) -> list[str]:
        m = self.metrics
        return [self.target, self.condition, str(len(m.trials)), str(m.tp), str(m.fp), str(m.fn),
                f"{m.f1:.6f}", f"{m.mean_reward:.6f}", f"{m.std_reward:.6f}"]


def compare_conditions(policies: Mapping[str, object], targets: Sequence[str] | None = None,
                       conditions: Sequence[str] = CONDITIONS, n_trials: int = 100,
                       seed: int = 0, base: EnvConfig | None = None, workers: int = 1,
                       env_factory: Callable[[EnvConfig], TrialEnv] | None = None
                       ) -> list[ResultRow]:
    """One ``evaluate`` per (target, condition); every cell uses ``seed``."""
    base = base or EnvConfig()
    targets = list(targets if targets is not None else policies)
    make = env_factory or EnvTrials
    rows = []
    for target in targets:
        for cond in conditions:
            cfg = condition_config(base, target, cond)
            m = evaluate(policies[target], cfg, n_trials, seed, env=make(cfg), workers=workers)
            rows.append(ResultRow(target, cond, m))
    return rows


def results_csv(rows: Iterable[ResultRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RESULTS_HEADER)
    for r in rows:
        w.writerow(r.csv_fields())
    return buf.getvalue()


def results_markdown(rows: Sequence[ResultRow]) -> str:
    """Targets down the side; F-score and mean reward (± std) per condition."""
    conds = list(dict.fromkeys(r.condition for r in rows))
    targets = list(dict.fromkeys(r.target for r in rows))
    cell = {(r.target, r.condition): r.metrics for r in rows}
    head = ["Target"]
    for c in conds:
        head += [f"F1 ({c})", f"Reward ({c})"]
    lines = ["| " + " | ".join(head) + " |", "|" + "---|" * len(head)]
    for t in targets:
        vals = [t]
        for c in conds:
            m = cell.get((t, c))
            if m is None:
                vals += ["", ""]
            else:
                vals += [f"{m.f1:.2f}", f"{m.mean_reward:.1f} (±{m.std_reward:.1f})"]
        lines.append("| " + " | ".join(vals) + " |")
    return "\n".join(lines) + "\n"


def trials_csv(metrics: Metrics) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["trial", "seed", "TP", "FP", "FN", "F1", "reward"])
    for i, t in enumerate(metrics.trials):
        w.writerow([i, t.seed, t.tp, t.fp, t.fn, f"{t.f1:.6f}", repr(float(t.reward))])
    return buf.getvalue()
