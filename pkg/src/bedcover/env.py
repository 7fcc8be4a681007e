"""One grasp-and-release blanket episode around a person in bed.

``reset`` lays out a person, drops the blanket on them and lets it settle;
``execute`` grasps the cloth vertex nearest the grasp point, lifts it, drags
it horizontally to the release point, lets go, and scores which body points
ended up covered.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.spatial import cKDTree

from . import physics
from .human import (
    BodyPointCloud, BodyShape, HumanModel, OutOfBedError, TargetSpec, discretize,
    label_points, place_on_bed, sample_pose, vary_body_shape,
)
from .physics import ClothMesh, ClothParams, ColliderSet

# action box in the bed frame, metres
ACTION_LOW = np.array([-0.44, -1.05, -0.44, -1.05])
ACTION_HIGH = np.array([0.44, 1.05, 0.44, 1.05])

OBS_LIMBS = ("right_leg", "left_leg", "right_arm", "left_arm")
OBS_DIM = 12
ACT_DIM = 4

CLOTH_SIZE = (1.25, 1.7)
CLOTH_RESOLUTION = (51, 41)

# blanket centre so the top edge sits just above the shoulder line
DEFAULT_BLANKET_POSE = (0.0, 0.22, 0.0)

# randomised blanket offsets: x, y in metres and yaw in radians
BLANKET_X_RANGE = (-0.02, 0.02)
BLANKET_Y_RANGE = (-0.25, 0.05)
BLANKET_YAW_RANGE = (-math.radians(45), math.radians(45))


class ResetError(RuntimeError):
    """Could not produce a valid start state within the retry budget."""


@dataclass
class EnvConfig:
    target: str = "upper_body"
    lam: float = 0.028
    pose_variation: float = 0.2
    vary_pose: bool = True
    vary_blanket: bool = False
    vary_body: bool = False
    blanket_pose: tuple[float, float, float] = DEFAULT_BLANKET_POSE
    cloth: ClothParams = field(default_factory=ClothParams)
    drop_clearance: float = 0.02
    lift_height: float = 0.40
    speed: float = 0.2
    settle_speed: float = 0.01
    reset_max_steps: int = 2400
    settle_max_steps: int = 1600
    max_retries: int = 10
    min_covered: float = 0.99
    min_head_exposed: float = 0.90

    def __post_init__(self):
        TargetSpec(self.target)
        if not self.lam > 0:
            raise ValueError("lam must be positive")
        if isinstance(self.cloth, dict):
            self.cloth = ClothParams(**self.cloth)
        self.blanket_pose = tuple(float(v) for v in self.blanket_pose)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["blanket_pose"] = list(self.blanket_pose)
        return d


@dataclass
class CoverageReport:
    covered: np.ndarray  # bool per body point
    rho_t: int
    rho_n: int
    rho_h: int
    n_t: int
    n_n: int
    n_h: int

    def counts(self) -> dict:
        return {"rho_t": self.rho_t, "rho_n": self.rho_n, "rho_h": self.rho_h,
                "n_t": self.n_t, "n_n": self.n_n, "n_h": self.n_h}


@dataclass(frozen=True)
class RewardBreakdown:
    r_t: float
    r_n: float
    r_h: float
    r_d: float

    @property
    def total(self) -> float:
        return self.r_t + self.r_n + self.r_h + self.r_d

    def to_dict(self) -> dict:
        return {"r_t": self.r_t, "r_n": self.r_n, "r_h": self.r_h, "r_d": self.r_d,
                "total": self.total}


@dataclass
class EnvState:
    config: EnvConfig
    human: HumanModel
    cloud: BodyPointCloud
    partition: tuple[np.ndarray, np.ndarray, np.ndarray]
    colliders: ColliderSet
    cloth: ClothMesh
    blanket_pose: tuple[float, float, float]
    observation: np.ndarray
    info: dict = field(default_factory=dict)


@dataclass
class StepResult:
    report: CoverageReport
    reward: RewardBreakdown
    state: EnvState
    action: np.ndarray
    flags: dict


def covered(points_2d, cloth_2d, lam: float) -> np.ndarray:
    """True where some projected cloth vertex is strictly closer than ``lam``.

    A k-d tree picks each point's nearest vertex; the distance to that vertex
    is then recomputed directly so the comparison matches a plain scan.
    """
    if not lam > 0:
        raise ValueError("lam must be positive")
    pts = np.atleast_2d(np.asarray(points_2d, dtype=float))
    verts = np.asarray(cloth_2d, dtype=float)[:, :2]
    _, idx = cKDTree(verts).query(pts[:, :2])
    diff = verts[idx] - pts[:, :2]
    return np.sqrt(np.sum(diff * diff, axis=1)) < lam


def coverage_report(p_t, p_n, p_h, cloud: BodyPointCloud | np.ndarray, cloth, lam: float
                    ) -> CoverageReport:
    points = cloud.points if isinstance(cloud, BodyPointCloud) else np.asarray(cloud)
    cloth_xy = cloth.positions[:, :2] if isinstance(cloth, ClothMesh) else np.asarray(cloth)
    cov = covered(points[:, :2], cloth_xy, lam)
    return CoverageReport(
        covered=cov,
        rho_t=int(len(p_t) - cov[p_t].sum()),
        rho_n=int(len(p_n) - cov[p_n].sum()),
        rho_h=int(cov[p_h].sum()),
        n_t=len(p_t), n_n=len(p_n), n_h=len(p_h),
    )


def reward(report: CoverageReport, action) -> RewardBreakdown:
    """Uncover-target bonus, uncover-non-target and cover-head penalties, and a
    flat penalty when grasp and release are 1.5 m or more apart."""
    if report.n_t == 0:
        raise ValueError("target set is empty")
    a = np.asarray(action, dtype=float)
    r_t = 100.0 * report.rho_t / report.n_t
    r_n = -100.0 * report.rho_n / report.n_n if report.n_n else 0.0
    r_h = -200.0 * report.rho_h / report.n_h if report.n_h else 0.0
    r_d = -150.0 if math.hypot(a[2] - a[0], a[3] - a[1]) >= 1.5 else 0.0
    return RewardBreakdown(r_t, r_n, r_h, r_d)


def _wrap_angle(theta: float) -> float:
    """Map to (-pi, pi]."""
    t = math.atan2(math.sin(theta), math.cos(theta))
    return math.pi if t == -math.pi else t


def observe(state_or_human) -> np.ndarray:
    """Knee/elbow (x, y) and shin/forearm yaw for RL, LL, RA, LA."""
    human = state_or_human.human if isinstance(state_or_human, EnvState) else state_or_human
    sk = human.skeleton
    out = []
    for side, joint, direction in (("right", "knee", "shin_dir"), ("left", "knee", "shin_dir"),
                                   ("right", "elbow", "forearm_dir"),
                                   ("left", "elbow", "forearm_dir")):
        p = sk[f"{side}_{joint}"]
        d = sk[f"{side}_{direction}"]
        out += [float(p[0]), float(p[1]), _wrap_angle(math.atan2(d[1], d[0]))]
    return np.array(out)


def clamp_action(action) -> tuple[np.ndarray, bool]:
    a = np.asarray(action, dtype=float).reshape(ACT_DIM)
    clamped = np.clip(a, ACTION_LOW, ACTION_HIGH)
    return clamped, bool(np.any(clamped != a))


def randomize_blanket(config: EnvConfig, rng: np.random.Generator
                      ) -> tuple[float, float, float]:
    x, y, yaw = config.blanket_pose
    if not config.vary_blanket:
        return (x, y, yaw)
    return (x + float(rng.uniform(*BLANKET_X_RANGE)), y + float(rng.uniform(*BLANKET_Y_RANGE)),
            yaw + float(rng.uniform(*BLANKET_YAW_RANGE)))


def _body_top(colliders: ColliderSet) -> float:
    return max(max(c.endpoint_a[2], c.endpoint_b[2]) + c.radius for c in colliders.capsules)


def drop_blanket(config: EnvConfig, colliders: ColliderSet, pose) -> tuple[ClothMesh, int, bool]:
    x, y, yaw = pose
    z = colliders.bed_height + _body_top(colliders) + config.drop_clearance
    cloth = physics.build_cloth(config.cloth, *CLOTH_SIZE, resolution=CLOTH_RESOLUTION,
                                origin=(x, y, z), yaw=yaw)
    return physics.settle(cloth, colliders, config.cloth, config.settle_speed,
                          config.reset_max_steps)


def _sample_body(config: EnvConfig, rng: np.random.Generator) -> tuple[HumanModel, int]:
    rejected = 0
    while True:
        shape = vary_body_shape(rng) if config.vary_body else BodyShape()
        human = sample_pose(rng, config.pose_variation if config.vary_pose else 0.0, shape)
        try:
            return place_on_bed(human), rejected
        except OutOfBedError:
            if rejected > 1000:
                raise ResetError("could not fit a sampled body on the bed")
            rejected += 1


def reset(config: EnvConfig, rng: np.random.Generator | int) -> tuple[EnvState, np.ndarray]:
    """Sample a person, settle the blanket on them and return the start state.

    A draw is retried when the drape fails to settle or, with a fixed blanket,
    when the start state is not "body covered, head exposed".  With blanket
    randomisation the coverage check is reported but not enforced.
    """
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    target = TargetSpec(config.target)
    rejected_total = 0
    for attempt in range(1, config.max_retries + 1):
        human, rejected = _sample_body(config, rng)
        rejected_total += rejected
        pose = randomize_blanket(config, rng)
        colliders = ColliderSet(capsules=list(human.capsules.values()))
        cloth, steps, settled = drop_blanket(config, colliders, pose)
        cloud = discretize(human)
        p_t, p_n, p_h = label_points(cloud, target)
        rep = coverage_report(p_t, p_n, p_h, cloud, cloth, config.lam)
        body = np.concatenate([p_t, p_n])
        frac_cov = float(rep.covered[body].mean())
        frac_head = 1.0 - float(rep.covered[p_h].mean()) if len(p_h) else 1.0
        contract = frac_cov >= config.min_covered and frac_head >= config.min_head_exposed
        if settled and (contract or config.vary_blanket):
            cloth.velocities[:] = 0.0
            info = {"attempts": attempt, "rejected_poses": rejected_total,
                    "settle_steps": steps, "covered_fraction": frac_cov,
                    "head_exposed_fraction": frac_head, "contract": contract}
            state = EnvState(config, human, cloud, (p_t, p_n, p_h), colliders, cloth, pose,
                             observe(human), info)
            return state, state.observation
    raise ResetError(f"no valid start state after {config.max_retries} attempts")


def nearest_vertex(cloth: ClothMesh, point_2d) -> int:
    """Index of the projected vertex closest to ``point_2d``; ties go to the
    lowest index."""
    d = np.sum((cloth.positions[:, :2] - np.asarray(point_2d, dtype=float)) ** 2, axis=1)
    return int(np.argmin(d))


def execute(state: EnvState, action, on_step: Callable[[ClothMesh], None] | None = None
            ) -> StepResult:
    """Grasp, lift, drag, release, settle, then score the final cloth."""
    cfg = state.config
    act, was_clamped = clamp_action(action)
    cloth = state.cloth.copy()
    vid = nearest_vertex(cloth, act[:2])
    physics.anchor(cloth, vid)
    start = cloth.positions[vid]
    z = state.colliders.bed_height + cfg.lift_height
    waypoints = [(start[0], start[1], z), (act[2], act[3], z)]
    physics.transport_anchor(cloth, state.colliders, cfg.cloth, waypoints, cfg.speed, on_step)
    physics.release_anchors(cloth)
    cloth, steps, settled = physics.settle(cloth, state.colliders, cfg.cloth, cfg.settle_speed,
                                           cfg.settle_max_steps, on_step=on_step)
    p_t, p_n, p_h = state.partition
    rep = coverage_report(p_t, p_n, p_h, state.cloud, cloth, cfg.lam)
    rew = reward(rep, act)
    flags = {"clamped": was_clamped, "settled": settled, "settle_steps": steps,
             "grasp_vertex": vid}
    return StepResult(rep, rew, replace(state, cloth=cloth), act, flags)


def episode_record(seed: int, state: EnvState, result: StepResult, raw_action=None) -> dict:
    """One JSON-ready line for the episode log."""
    return {
        "seed": int(seed),
        "target": state.config.target,
        "observation": [float(v) for v in state.observation],
        "action": [float(v) for v in result.action],
        "raw_action": None if raw_action is None else [float(v) for v in raw_action],
        **result.report.counts(),
        **result.reward.to_dict(),
        "flags": {**result.flags, **state.info},
        "human": state.human.to_record(),
        "blanket_pose": list(state.blanket_pose),
        "config": state.config.to_dict(),
    }


def derive_seed(master: int, index: int) -> int:
    """Independent per-episode seed, identical however episodes are scheduled."""
    return int(np.random.SeedSequence([int(master), int(index)]).generate_state(1)[0])


def run_episode(config: EnvConfig, seed: int, policy: Callable[[np.ndarray], np.ndarray]):
    state, obs = reset(config, seed)
    raw = np.asarray(policy(obs), dtype=float)
    result = execute(state, raw)
    return state, result, raw


class EnvPoseTask:
    """A reset environment that can be rolled out repeatedly from the same
    start state."""

    def __init__(self, config: EnvConfig, seed: int):
        self.seed = int(seed)
        self.state, self.observation = reset(config, seed)

    def rollout(self, action) -> float:
        return execute(self.state, action).reward.total


def pose_task_factory(config: EnvConfig) -> Callable[[int], EnvPoseTask]:
    return lambda seed: EnvPoseTask(config, seed)


class EnvEpisode:
    """Callable running one full episode (reset, act, execute) per seed."""

    def __init__(self, config: EnvConfig):
        self.config = config

    def __call__(self, seed: int, policy: Callable[[np.ndarray], np.ndarray]):
        state, obs = reset(self.config, seed)
        return obs, execute(state, policy(obs)).reward.total
