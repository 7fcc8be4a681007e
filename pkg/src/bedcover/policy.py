"""Small numpy MLP policies: supervised distillation and one-step PPO.

Actions live in the box ``[ACTION_LOW, ACTION_HIGH]``.  Internally the network
works in normalised units, ``u = (a - centre) / half_range`` in [-1, 1]; the
output layer is a tanh, so the mean action is always inside the box.

The PPO policy is Gaussian in normalised units around the tanh mean with a
state-independent log standard deviation.  Samples are clipped to [-1, 1]
before being sent to the environment; log-probabilities use the unclipped
sample.  Every episode is one observation, one action and one reward, so the
advantage is just ``reward / 100 - V(s)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol

import numpy as np

from .defaults import MODE_LR
from .env import ACT_DIM, ACTION_HIGH, ACTION_LOW, OBS_DIM, derive_seed
from .parallel import parallel_map

MODEL_FORMAT = "bedcover-policy"
MODEL_VERSION = 1

CENTER = 0.5 * (ACTION_HIGH + ACTION_LOW)
HALF = 0.5 * (ACTION_HIGH - ACTION_LOW)

ARCHITECTURES = {
    "supervised": ((OBS_DIM, 32, 32, ACT_DIM), "relu"),
    "ppo": ((OBS_DIM, 50, 50, ACT_DIM), "tanh"),
}
DEFAULT_LR = MODE_LR
LOG_2PI = math.log(2 * math.pi)


def to_normalized(action) -> np.ndarray:
    return (np.asarray(action, dtype=float) - CENTER) / HALF


def from_normalized(u) -> np.ndarray:
    return CENTER + HALF * np.asarray(u, dtype=float)


@dataclass
class TrainConfig:
    epochs: int = 100
    batch_size: int = 8
    lr: float | None = None  # None: 1e-3 supervised, 5e-5 ppo
    optimizer: str = "adam"
    clip: float = 0.2
    value_coef: float = 0.5
    entropy_coef: float = 0.0
    init_log_std: float = math.log(0.3)
    rollouts: int = 5000
    ppo_batch: int = 32
    ppo_updates: int = 50
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        for name in ("epochs", "batch_size", "rollouts", "ppo_batch", "ppo_updates"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.lr is not None and not self.lr > 0:
            raise ValueError("lr must be positive")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError("optimizer must be 'adam' or 'sgd'")
        if not 0 < self.clip < 1:
            raise ValueError("clip must be in (0, 1)")

    def learning_rate(self, mode: str) -> float:
        return DEFAULT_LR[mode] if self.lr is None else self.lr


class PolicyModel:
    """Fully connected network; parameters live in one flat vector.

    Layout of ``params``: W1, b1, ..., WL, bL for the action head, then (ppo
    only) the value head Wv, bv on the last hidden layer and the log-std.
    """

    def __init__(self, mode: str, params: np.ndarray | None = None,
                 rng: np.random.Generator | None = None, init_log_std: float = math.log(0.3)):
        if mode not in ARCHITECTURES:
            raise ValueError(f"mode must be one of {sorted(ARCHITECTURES)}")
        self.mode = mode
        self.sizes, self.hidden = ARCHITECTURES[mode]
        self._layout()
        if params is None:
            rng = np.random.default_rng(0) if rng is None else rng
            params = self._init(rng, init_log_std)
        params = np.array(params, dtype=float).reshape(-1)
        if params.size != self.n_params:
            raise ValueError(f"expected {self.n_params} parameters, got {params.size}")
        self.params = params

    def _layout(self):
        shapes = [(a, b) for a, b in zip(self.sizes[:-1], self.sizes[1:])]
        slots = []
        for fan_in, fan_out in shapes:
            slots += [("W", (fan_in, fan_out)), ("b", (fan_out,))]
        if self.mode == "ppo":
            slots += [("Wv", (self.sizes[-2], 1)), ("bv", (1,)), ("log_std", (ACT_DIM,))]
        self._slots = []
        off = 0
        for name, shape in slots:
            n = int(np.prod(shape))
            self._slots.append((name, shape, off, n))
            off += n
        self.n_params = off

    def _init(self, rng, init_log_std):
        p = np.zeros(self.n_params)
        for name, shape, off, n in self._slots:
            if name in ("W", "Wv"):
                bound = 1.0 / math.sqrt(shape[0])
                p[off:off + n] = rng.uniform(-bound, bound, n)
            elif name == "log_std":
                p[off:off + n] = init_log_std
        return p

    def _views(self, vec):
        out = [vec[off:off + n].reshape(shape) for _, shape, off, n in self._slots]
        n_layers = len(self.sizes) - 1
        layers = [(out[2 * i], out[2 * i + 1]) for i in range(n_layers)]
        extra = out[2 * n_layers:]
        return layers, extra

    @property
    def log_std(self) -> np.ndarray | None:
        if self.mode != "ppo":
            return None
        return self._views(self.params)[1][2]

    def copy(self) -> "PolicyModel":
        return PolicyModel(self.mode, self.params.copy())

    # forward / backward

    def _act(self, z):
        return np.maximum(z, 0.0) if self.hidden == "relu" else np.tanh(z)

    def _act_grad(self, z, h):
        return (z > 0).astype(float) if self.hidden == "relu" else 1.0 - h * h

    def _forward(self, X):
        layers, extra = self._views(self.params)
        hs, zs = [X], []
        h = X
        for W, b in layers[:-1]:
            z = h @ W + b
            h = self._act(z)
            zs.append(z)
            hs.append(h)
        W, b = layers[-1]
        mean = np.tanh(h @ W + b)
        value = None
        if self.mode == "ppo":
            Wv, bv, _ = extra
            value = (h @ Wv + bv)[:, 0]
        return mean, value, (hs, zs)

    def _backward(self, cache, mean, d_mean, d_value=None, d_log_std=None) -> np.ndarray:
        layers, _ = self._views(self.params)
        grad = np.zeros(self.n_params)
        g_layers, g_extra = self._views(grad)
        hs, zs = cache
        delta = d_mean * (1.0 - mean * mean)
        W, _ = layers[-1]
        g_layers[-1][0][...] = hs[-1].T @ delta
        g_layers[-1][1][...] = delta.sum(0)
        dh = delta @ W.T
        if self.mode == "ppo":
            Wv = self._views(self.params)[1][0]
            if d_value is not None:
                dv = d_value[:, None]
                g_extra[0][...] = hs[-1].T @ dv
                g_extra[1][...] = dv.sum(0)
                dh = dh + dv @ Wv.T
            if d_log_std is not None:
                g_extra[2][...] = d_log_std
        for i in range(len(layers) - 2, -1, -1):
            dz = dh * self._act_grad(zs[i], hs[i + 1])
            g_layers[i][0][...] = hs[i].T @ dz
            g_layers[i][1][...] = dz.sum(0)
            if i > 0:
                dh = dz @ layers[i][0].T
        return grad

    def mean_normalized(self, obs) -> np.ndarray:
        X = _as_batch(obs)
        return self._forward(X)[0]

    # serialisation

    def to_record(self) -> dict:
        layers, extra = self._views(self.params)
        rec = {
            "format": MODEL_FORMAT, "version": MODEL_VERSION, "mode": self.mode,
            "layer_sizes": list(self.sizes), "hidden_activation": self.hidden,
            "output_activation": "tanh",
            "action_low": ACTION_LOW.tolist(), "action_high": ACTION_HIGH.tolist(),
            "weights": [W.tolist() for W, _ in layers],
            "biases": [b.tolist() for _, b in layers],
        }
        if self.mode == "ppo":
            rec["value_weights"] = extra[0][:, 0].tolist()
            rec["value_bias"] = float(extra[1][0])
            rec["log_std"] = extra[2].tolist()
        return rec

    @classmethod
    def from_record(cls, rec: dict) -> "PolicyModel":
        if rec.get("format") != MODEL_FORMAT:
            raise ValueError("not a policy model file")
        if rec.get("version") != MODEL_VERSION:
            raise ValueError(f"unsupported model version {rec.get('version')}")
        model = cls(rec["mode"], rng=np.random.default_rng(0))
        if list(rec["layer_sizes"]) != list(model.sizes):
            raise ValueError("layer sizes do not match the mode's architecture")
        layers, extra = model._views(model.params)
        for (W, b), Wr, br in zip(layers, rec["weights"], rec["biases"]):
            W[...] = np.array(Wr, dtype=float)
            b[...] = np.array(br, dtype=float)
        if model.mode == "ppo":
            extra[0][:, 0] = rec["value_weights"]
            extra[1][0] = rec["value_bias"]
            extra[2][...] = rec["log_std"]
        return model

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_record()) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "PolicyModel":
        return cls.from_record(json.loads(Path(path).read_text(encoding="utf-8")))


def _as_batch(obs) -> np.ndarray:
    X = np.asarray(obs, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != OBS_DIM:
        raise ValueError(f"observation must have {OBS_DIM} entries, got shape {X.shape}")
    return X


def forward(model: PolicyModel, obs):
    """Mean action in bounds and, for ppo models, the value estimate.

    Single observations give a 4-vector and a float; batches give arrays.
    """
    X = _as_batch(obs)
    mean, value, _ = model._forward(X)
    act = from_normalized(mean)
    if np.asarray(obs).ndim == 1:
        return act[0], (None if value is None else float(value[0]))
    return act, value


def act(model: PolicyModel, obs, deterministic: bool = True,
        rng: np.random.Generator | None = None, noise=None) -> np.ndarray:
    """Deterministic: the mean action.  Stochastic: a Gaussian sample around
    it in normalised units, clipped to the box."""
    mean = model.mean_normalized(obs)[0]
    if deterministic or model.mode != "ppo":
        return from_normalized(mean)
    eps = rng.standard_normal(ACT_DIM) if noise is None else np.asarray(noise, dtype=float)
    u = mean + np.exp(model.log_std) * eps
    return from_normalized(np.clip(u, -1.0, 1.0))


# losses

def mse_loss(model: PolicyModel, X, Y) -> tuple[float, np.ndarray]:
    """Mean squared error in normalised action units, with its gradient."""
    X = _as_batch(X)
    Y = np.asarray(Y, dtype=float).reshape(-1, ACT_DIM)
    mean, _, cache = model._forward(X)
    diff = mean - Y
    loss = float(np.mean(diff * diff))
    d_mean = 2.0 * diff / diff.size
    return loss, model._backward(cache, mean, d_mean)


@dataclass
class PPOBatch:
    obs: np.ndarray
    u: np.ndarray  # unclipped normalised samples
    logp_old: np.ndarray
    adv: np.ndarray
    ret: np.ndarray


def log_prob(mean, log_std, u) -> np.ndarray:
    z = (u - mean) / np.exp(log_std)
    return np.sum(-0.5 * z * z - log_std - 0.5 * LOG_2PI, axis=-1)


def ppo_loss(model: PolicyModel, batch: PPOBatch, clip: float = 0.2, value_coef: float = 0.5,
             entropy_coef: float = 0.0, parts: bool = False):
    """Clipped surrogate plus value regression, with its gradient."""
    if model.mode != "ppo":
        raise ValueError("ppo_loss needs a ppo model")
    X = _as_batch(batch.obs)
    n = len(X)
    mean, value, cache = model._forward(X)
    ls = model.log_std
    sigma = np.exp(ls)
    logp = log_prob(mean, ls, batch.u)
    ratio = np.exp(logp - batch.logp_old)
    A = batch.adv
    s1 = ratio * A
    clipped = np.clip(ratio, 1 - clip, 1 + clip)
    s2 = clipped * A
    surrogate = -float(np.mean(np.minimum(s1, s2)))
    v_err = value - batch.ret
    v_loss = value_coef * float(np.mean(v_err * v_err))
    entropy = float(np.sum(ls + 0.5 * (LOG_2PI + 1)))
    loss = surrogate + v_loss - entropy_coef * entropy

    inside = (ratio > 1 - clip) & (ratio < 1 + clip)
    d_ratio = np.where(s1 <= s2, A, np.where(inside, A, 0.0))
    d_logp = -d_ratio * ratio / n
    z = (batch.u - mean) / sigma
    d_mean = d_logp[:, None] * z / sigma
    d_ls = np.sum(d_logp[:, None] * (z * z - 1.0), axis=0) - entropy_coef
    d_value = 2.0 * value_coef * v_err / n
    grad = model._backward(cache, mean, d_mean, d_value, d_ls)
    if parts:
        return loss, grad, {"surrogate": surrogate, "value": v_loss, "entropy": entropy}
    return loss, grad


def _loss_fn(kind: str, batch, **kw) -> Callable[[PolicyModel], tuple[float, np.ndarray]]:
    if kind == "mse":
        X, Y = batch
        return lambda m: mse_loss(m, X, Y)
    if kind == "ppo":
        return lambda m: ppo_loss(m, batch, **kw)
    raise ValueError("kind must be 'mse' or 'ppo'")


def finite_difference(model: PolicyModel, kind: str, batch, index: int, h: float = 1e-5,
                      **kw) -> float:
    f = _loss_fn(kind, batch, **kw)
    m = model.copy()
    m.params[index] += h
    up = f(m)[0]
    m.params[index] -= 2 * h
    down = f(m)[0]
    return (up - down) / (2 * h)


def grad_check(model: PolicyModel, batch, kind: str | None = None, h: float = 1e-5,
               floor: float = 1e-6, **kw) -> float:
    """Largest relative difference between the analytic gradient and central
    differences, ``|g - g_fd| / max(|g|, |g_fd|, floor)`` over all parameters."""
    kind = kind or ("ppo" if isinstance(batch, PPOBatch) else "mse")
    if kind == "mse" and len(batch[0]) == 0:
        raise ValueError("batch is empty")
    _, g = _loss_fn(kind, batch, **kw)(model)
    worst = 0.0
    for i in range(model.n_params):
        fd = finite_difference(model, kind, batch, i, h, **kw)
        rel = abs(g[i] - fd) / max(abs(g[i]), abs(fd), floor)
        worst = max(worst, rel)
    return worst


# optimisers

class Adam:
    def __init__(self, n: int, lr: float, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, beta1, beta2, eps
        self.m = np.zeros(n)
        self.v = np.zeros(n)
        self.t = 0

    def step(self, params: np.ndarray, grad: np.ndarray) -> None:
        self.t += 1
        self.m = self.b1 * self.m + (1 - self.b1) * grad
        self.v = self.b2 * self.v + (1 - self.b2) * grad * grad
        m_hat = self.m / (1 - self.b1 ** self.t)
        v_hat = self.v / (1 - self.b2 ** self.t)
        params -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


class SGD:
    def __init__(self, n: int, lr: float):
        self.lr = lr

    def step(self, params: np.ndarray, grad: np.ndarray) -> None:
        params -= self.lr * grad


def make_optimizer(cfg: TrainConfig, mode: str, n: int):
    lr = cfg.learning_rate(mode)
    return Adam(n, lr) if cfg.optimizer == "adam" else SGD(n, lr)


# supervised training

@dataclass
class TrainResult:
    model: PolicyModel
    history: list[float] = field(default_factory=list)


def train_supervised(obs, actions, cfg: TrainConfig | None = None) -> TrainResult:
    """Regress actions on observations; ``history`` holds the full-data MSE
    after each epoch."""
    cfg = cfg or TrainConfig()
    X = np.asarray(obs, dtype=float).reshape(-1, OBS_DIM)
    Y = to_normalized(np.asarray(actions, dtype=float).reshape(-1, ACT_DIM))
    if len(X) == 0:
        raise ValueError("training set is empty")
    seq = np.random.SeedSequence(cfg.seed)
    init_seq, order_seq = seq.spawn(2)
    model = PolicyModel("supervised", rng=np.random.default_rng(init_seq))
    opt = make_optimizer(cfg, "supervised", model.n_params)
    rng = np.random.default_rng(order_seq)
    history = []
    for _ in range(cfg.epochs):
        order = rng.permutation(len(X))
        for start in range(0, len(X), cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            _, g = mse_loss(model, X[idx], Y[idx])
            opt.step(model.params, g)
        history.append(mse_loss(model, X, Y)[0])
    return TrainResult(model, history)


# one-step PPO

class Episodic(Protocol):
    """Runs one episode: ``env(seed, policy)`` returns (observation, reward).

    ``policy`` maps the observation to the action that is executed.
    """

    def __call__(self, seed: int, policy: Callable[[np.ndarray], np.ndarray]
                 ) -> tuple[np.ndarray, float]: ...


class _Sampler:
    """Picklable stochastic policy with pre-drawn noise."""

    def __init__(self, model: PolicyModel, noise: np.ndarray):
        self.model = model
        self.noise = noise

    def __call__(self, obs) -> np.ndarray:
        return act(self.model, obs, deterministic=False, noise=self.noise)


def _episode(args):
    env, seed, sampler = args
    obs, reward = env(seed, sampler)
    return np.asarray(obs, dtype=float), float(reward)


@dataclass
class PPOResult:
    model: PolicyModel
    batch_rewards: list[float] = field(default_factory=list)
    rewards: list[float] = field(default_factory=list)


def ppo_train(env: Episodic, cfg: TrainConfig | None = None,
              progress: Callable[[int, float], None] | None = None) -> PPOResult:
    """Collect ``ppo_batch`` episodes with the current policy, then take
    ``ppo_updates`` full-batch gradient steps; repeat until ``rollouts``
    episodes have been used.  A final partial batch is still trained on."""
    cfg = cfg or TrainConfig()
    init_seq, noise_seq = np.random.SeedSequence(cfg.seed).spawn(2)
    model = PolicyModel("ppo", rng=np.random.default_rng(init_seq),
                        init_log_std=cfg.init_log_std)
    opt = make_optimizer(cfg, "ppo", model.n_params)
    noise_rng = np.random.default_rng(noise_seq)
    out = PPOResult(model)
    done = 0
    while done < cfg.rollouts:
        k = min(cfg.ppo_batch, cfg.rollouts - done)
        noise = noise_rng.standard_normal((k, ACT_DIM))
        snapshot = model.copy()
        jobs = [(env, derive_seed(cfg.seed, done + i), _Sampler(snapshot, noise[i]))
                for i in range(k)]
        results = parallel_map(_episode, jobs, cfg.workers)
        obs = np.array([r[0] for r in results])
        rew = np.array([r[1] for r in results])
        mean, value, _ = snapshot._forward(obs)
        u = mean + np.exp(snapshot.log_std) * noise
        ret = rew / 100.0
        batch = PPOBatch(obs, u, log_prob(mean, snapshot.log_std, u), ret - value, ret)
        for _ in range(cfg.ppo_updates):
            _, g = ppo_loss(model, batch, cfg.clip, cfg.value_coef, cfg.entropy_coef)
            opt.step(model.params, g)
        done += k
        out.rewards.extend(rew.tolist())
        out.batch_rewards.append(float(rew.mean()))
        if progress is not None:
            progress(done, float(rew.mean()))
    return out
