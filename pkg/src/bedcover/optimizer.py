"""CMA-ES and the per-pose action search used to build the training set."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Protocol, Sequence

import numpy as np

from .env import ACT_DIM, ACTION_HIGH, ACTION_LOW, OBS_DIM, derive_seed
from .parallel import parallel_map


class InvalidStateError(RuntimeError):
    """Raised on ask/tell misuse."""


EIG_FLOOR = 1e-12


def default_popsize(n: int) -> int:
    return 4 + int(math.floor(3 * math.log(n)))


@dataclass
class CmaState:
    n: int
    mean: np.ndarray
    sigma: float
    cov: np.ndarray
    p_sigma: np.ndarray
    p_c: np.ndarray
    popsize: int
    weights: np.ndarray
    mu_eff: float
    c_sigma: float
    d_sigma: float
    c_c: float
    c_1: float
    c_mu: float
    chi_n: float
    generation: int = 0
    evaluations: int = 0
    repairs: int = 0
    pending: np.ndarray | None = field(default=None, repr=False)

    @property
    def mu(self) -> int:
        return len(self.weights)

    def copy(self) -> "CmaState":
        out = CmaState(**{k: getattr(self, k) for k in self.__dataclass_fields__})
        for k in ("mean", "cov", "p_sigma", "p_c", "weights"):
            setattr(out, k, getattr(self, k).copy())
        if self.pending is not None:
            out.pending = self.pending.copy()
        return out


def cma_init(mean, sigma0: float, popsize: int | None = None) -> CmaState:
    m = np.array(mean, dtype=float).reshape(-1)
    n = m.size
    if n < 1:
        raise ValueError("dimension must be >= 1")
    if not (sigma0 > 0 and math.isfinite(sigma0)):
        raise ValueError("sigma0 must be positive")
    lam = default_popsize(n) if popsize is None else int(popsize)
    if lam < 2:
        raise ValueError("popsize must be >= 2")
    mu = lam // 2
    w = math.log((lam + 1) / 2) - np.log(np.arange(1, mu + 1))
    w = w / w.sum()
    mu_eff = 1.0 / float(np.sum(w ** 2))
    c_sigma = (mu_eff + 2) / (n + mu_eff + 5)
    d_sigma = 1 + 2 * max(0.0, math.sqrt((mu_eff - 1) / (n + 1)) - 1) + c_sigma
    c_c = (4 + mu_eff / n) / (n + 4 + 2 * mu_eff / n)
    c_1 = 2 / ((n + 1.3) ** 2 + mu_eff)
    c_mu = min(1 - c_1, 2 * (mu_eff - 2 + 1 / mu_eff) / ((n + 2) ** 2 + mu_eff))
    chi_n = math.sqrt(n) * (1 - 1 / (4 * n) + 1 / (21 * n * n))
    return CmaState(n, m, float(sigma0), np.eye(n), np.zeros(n), np.zeros(n), lam, w, mu_eff,
                    c_sigma, d_sigma, c_c, c_1, c_mu, chi_n)


def _eig(state: CmaState) -> tuple[np.ndarray, np.ndarray]:
    vals, vecs = np.linalg.eigh(state.cov)
    return vals, vecs


def _repair(state: CmaState) -> None:
    c = 0.5 * (state.cov + state.cov.T)
    vals, vecs = np.linalg.eigh(c)
    if np.any(vals <= EIG_FLOOR) or not np.all(np.isfinite(vals)):
        vals = np.maximum(np.nan_to_num(vals, nan=EIG_FLOOR), EIG_FLOOR)
        c = (vecs * vals) @ vecs.T
        c = 0.5 * (c + c.T)
        state.repairs += 1
    state.cov = c


def cma_ask(state: CmaState, rng: np.random.Generator) -> np.ndarray:
    if state.pending is not None:
        raise InvalidStateError("ask called twice without tell")
    vals, vecs = _eig(state)
    z = rng.standard_normal((state.popsize, state.n))
    y = (z * np.sqrt(vals)) @ vecs.T
    x = state.mean + state.sigma * y
    state.pending = x.copy()
    return x


def cma_tell(state: CmaState, candidates, fitnesses) -> CmaState:
    """Rank-mu update from fitness values (lower is better)."""
    if state.pending is None:
        raise InvalidStateError("tell without a matching ask")
    x = np.asarray(candidates, dtype=float)
    f = np.asarray(fitnesses, dtype=float).reshape(-1)
    if x.shape != (state.popsize, state.n) or f.size != state.popsize:
        raise ValueError(f"expected {state.popsize} candidates of dimension {state.n}")
    if not np.all(np.isfinite(f)):
        raise ValueError("fitness values must be finite")
    n = state.n
    order = np.argsort(f, kind="stable")[: state.mu]
    y = (x[order] - state.mean) / state.sigma
    y_w = state.weights @ y
    state.mean = state.mean + state.sigma * y_w

    vals, vecs = _eig(state)
    inv_sqrt = (vecs / np.sqrt(vals)) @ vecs.T
    cs = state.c_sigma
    state.p_sigma = (1 - cs) * state.p_sigma + math.sqrt(cs * (2 - cs) * state.mu_eff) * (
        inv_sqrt @ y_w)
    g = state.generation + 1
    ps_norm = float(np.linalg.norm(state.p_sigma))
    h_sigma = ps_norm / math.sqrt(1 - (1 - cs) ** (2 * g)) < (1.4 + 2 / (n + 1)) * state.chi_n
    cc = state.c_c
    state.p_c = (1 - cc) * state.p_c + h_sigma * math.sqrt(cc * (2 - cc) * state.mu_eff) * y_w
    rank_mu = (y.T * state.weights) @ y
    delta_h = (1 - h_sigma) * cc * (2 - cc)
    state.cov = ((1 - state.c_1 - state.c_mu + state.c_1 * delta_h) * state.cov
                 + state.c_1 * np.outer(state.p_c, state.p_c) + state.c_mu * rank_mu)
    _repair(state)
    state.sigma = state.sigma * math.exp(cs / state.d_sigma * (ps_norm / state.chi_n - 1))
    state.generation = g
    state.evaluations += state.popsize
    state.pending = None
    return state


def cma_minimize(f: Callable[[np.ndarray], float], x0, sigma0: float, max_evals: int,
                 rng: np.random.Generator, popsize: int | None = None, tol: float = 0.0):
    """Plain minimisation loop; returns (state, best_x, best_f)."""
    st = cma_init(x0, sigma0, popsize)
    best_x, best_f = st.mean.copy(), math.inf
    while st.evaluations + st.popsize <= max_evals:
        xs = cma_ask(st, rng)
        fs = np.array([f(x) for x in xs])
        i = int(np.argmin(fs))
        if fs[i] < best_f:
            best_x, best_f = xs[i].copy(), float(fs[i])
        cma_tell(st, xs, fs)
        if best_f <= tol:
            break
    return st, best_x, best_f


# search space <-> action box

def to_action(z) -> np.ndarray:
    center = 0.5 * (ACTION_HIGH + ACTION_LOW)
    half = 0.5 * (ACTION_HIGH - ACTION_LOW)
    return center + half * np.tanh(np.asarray(z, dtype=float))


# dataset

CSV_HEADER = ([f"obs_{i}" for i in range(OBS_DIM)] + [f"act_{i}" for i in range(ACT_DIM)]
              + ["reward", "target", "pose_seed"])


@dataclass
class Dataset:
    obs: np.ndarray
    act: np.ndarray
    reward: np.ndarray
    target: list[str]
    pose_seed: np.ndarray

    def __post_init__(self):
        self.obs = np.asarray(self.obs, dtype=float).reshape(-1, OBS_DIM)
        self.act = np.asarray(self.act, dtype=float).reshape(-1, ACT_DIM)
        self.reward = np.asarray(self.reward, dtype=float).reshape(-1)
        self.pose_seed = np.asarray(self.pose_seed, dtype=np.int64).reshape(-1)
        self.target = list(self.target)
        k = len(self.reward)
        if not (len(self.obs) == len(self.act) == len(self.target) == len(self.pose_seed) == k):
            raise ValueError("dataset columns have different lengths")
        if not np.all(np.isfinite(self.reward)):
            raise ValueError("rewards must be finite")

    def __len__(self) -> int:
        return len(self.reward)

    @classmethod
    def empty(cls) -> "Dataset":
        return cls(np.zeros((0, OBS_DIM)), np.zeros((0, ACT_DIM)), np.zeros(0), [], np.zeros(0))

    def subset(self, mask) -> "Dataset":
        idx = np.flatnonzero(np.asarray(mask))
        return Dataset(self.obs[idx], self.act[idx], self.reward[idx],
                       [self.target[i] for i in idx], self.pose_seed[idx])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for i in range(len(self)):
            w.writerow([repr(float(v)) for v in self.obs[i]] + [repr(float(v)) for v in self.act[i]]
                       + [repr(float(self.reward[i])), self.target[i], str(int(self.pose_seed[i]))])
        return buf.getvalue()

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.to_csv())

    @classmethod
    def read(cls, path) -> "Dataset":
        with open(path, encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or rows[0] != CSV_HEADER:
            raise ValueError(f"{path}: unexpected dataset header")
        body = rows[1:]
        if any(len(r) != len(CSV_HEADER) for r in body):
            raise ValueError(f"{path}: wrong number of columns")
        if not body:
            return cls.empty()
        num = np.array([[float(v) for v in r[:OBS_DIM + ACT_DIM + 1]] for r in body])
        return cls(num[:, :OBS_DIM], num[:, OBS_DIM:OBS_DIM + ACT_DIM], num[:, -1],
                   [r[-2] for r in body], [int(r[-1]) for r in body])


def filter_dataset(ds: Dataset, threshold: float = 90.0) -> Dataset:
    return ds.subset(ds.reward > threshold)


class PoseTask(Protocol):
    observation: np.ndarray

    def rollout(self, action: np.ndarray) -> float: ...


@dataclass
class CollectConfig:
    total_rollouts: int = 5000
    per_pose_cap: int = 300
    success_reward: float = 95.0
    sigma0: float = 0.3
    popsize: int | None = None
    seed: int = 0
    workers: int = 1


@dataclass
class PoseLog:
    pose_seed: int
    rollouts: int
    best_reward: float
    best_action: np.ndarray


def _rollout(args):
    task, action = args
    return float(task.rollout(action))


def collect_dataset(env_factory: Callable[[int], PoseTask], target: str, cfg: CollectConfig,
                    progress: Callable[[int, float], None] | None = None
                    ) -> tuple[Dataset, list[PoseLog]]:
    """Per pose, run CMA-ES on the action until a rollout reaches
    ``success_reward`` or the pose has used ``per_pose_cap`` rollouts.

    Every evaluated rollout becomes a row.  The final generation of a pose or
    of the whole budget is truncated so both caps are met exactly.
    """
    if cfg.total_rollouts <= 0:
        raise ValueError("total_rollouts must be positive")
    obs, act, rew, seeds, logs = [], [], [], [], []
    used = 0
    pose_index = 0
    while used < cfg.total_rollouts:
        pose_seed = derive_seed(cfg.seed, pose_index)
        pose_index += 1
        task = env_factory(pose_seed)
        rng = np.random.default_rng(pose_seed)
        st = cma_init(np.zeros(ACT_DIM), cfg.sigma0, cfg.popsize)
        n_pose, best, best_a = 0, -math.inf, None
        while n_pose < cfg.per_pose_cap and used < cfg.total_rollouts and best < cfg.success_reward:
            zs = cma_ask(st, rng)
            k = min(len(zs), cfg.per_pose_cap - n_pose, cfg.total_rollouts - used)
            actions = [to_action(z) for z in zs[:k]]
            rewards = parallel_map(_rollout, [(task, a) for a in actions], cfg.workers)
            for a, r in zip(actions, rewards):
                obs.append(task.observation)
                act.append(a)
                rew.append(r)
                seeds.append(pose_seed)
                if r > best:
                    best, best_a = r, a
            n_pose += k
            used += k
            if progress is not None:
                progress(used, best)
            if k == len(zs):
                cma_tell(st, zs, -np.asarray(rewards))
            else:
                st.pending = None
        logs.append(PoseLog(pose_seed, n_pose, best, best_a))
    ds = Dataset(np.array(obs).reshape(-1, OBS_DIM), np.array(act).reshape(-1, ACT_DIM), rew,
                 [target] * len(rew), seeds)
    return ds, logs
