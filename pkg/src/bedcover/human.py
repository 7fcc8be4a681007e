"""Capsule human lying supine on the bed.

Bed frame: origin at the centre of the mattress top, +z up, the head points
toward -y, and the person's right side is +x.  Every capsule rests with its
lowest surface point on the mattress (axis height = radius); feet point up.

Only the in-plane limb joints articulate: shoulder and hip abduction, elbow and
knee bend.  Positive angles move the distal segment away from the midline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial import cKDTree

from .physics import Capsule

SIDES = ("right", "left")

# (radius, length) in metres for the default body
SEGMENT_DIMS: dict[str, tuple[float, float]] = {
    "head": (0.09, 0.04),
    "neck": (0.05, 0.06),
    "chest": (0.135, 0.15),
    "waist": (0.10, 0.08),
    "upper_arm": (0.046, 0.26),
    "forearm": (0.04, 0.20),
    "hand": (0.038, 0.06),
    "thigh": (0.077, 0.41),
    "shin": (0.055, 0.40),
    "foot": (0.045, 0.13),
}
BILATERAL = ("upper_arm", "forearm", "hand", "thigh", "shin", "foot")

SEGMENTS = (
    "head", "neck", "chest", "waist",
    *(f"{side}_{seg}" for seg in BILATERAL for side in SIDES),
)

JOINTS = tuple(f"{side}_{j}" for j in ("shoulder", "elbow", "hip", "knee") for side in SIDES)

# resting supine pose: arms out 20 degrees, legs out 10 degrees
BASE_POSE = {
    "right_shoulder": math.radians(20), "left_shoulder": math.radians(20),
    "right_elbow": 0.0, "left_elbow": 0.0,
    "right_hip": math.radians(10), "left_hip": math.radians(10),
    "right_knee": 0.0, "left_knee": 0.0,
}

# (lower, upper) radians, in-plane
JOINT_LIMITS = {
    "shoulder": (0.0, 1.2),
    "elbow": (-0.6, 0.6),
    "hip": (-0.1, 0.6),
    "knee": (-0.4, 0.4),
}

SHOULDER_Y = -0.62  # bed-frame y of the shoulder line (top of the chest)
FOOT_TILT = math.radians(65)  # feet point mostly upward

TARGETS: dict[str, tuple[str, ...]] = {
    "right_lower_leg": ("right_shin", "right_foot"),
    "left_arm": ("left_upper_arm", "left_forearm", "left_hand"),
    "both_lower_legs": ("right_shin", "right_foot", "left_shin", "left_foot"),
    "upper_body": ("chest", "right_upper_arm", "left_upper_arm", "right_forearm",
                   "left_forearm", "right_hand", "left_hand"),
    "lower_body": ("waist", "right_thigh", "left_thigh", "right_shin", "left_shin",
                   "right_foot", "left_foot"),
    "entire_body": tuple(s for s in SEGMENTS if s not in ("head", "neck")),
}
HEAD_SEGMENTS = ("head", "neck")


class OutOfBedError(ValueError):
    """Placed body does not fit inside the mattress rectangle."""


def joint_kind(joint: str) -> str:
    return joint.split("_", 1)[1]


def segment_kind(segment: str) -> str:
    for side in SIDES:
        if segment.startswith(side + "_"):
            return segment[len(side) + 1:]
    return segment


@dataclass(frozen=True)
class BodyShape:
    """Per-segment (length, radius) multipliers; left and right share values."""

    length: dict[str, float] = field(default_factory=lambda: dict.fromkeys(SEGMENT_DIMS, 1.0))
    radius: dict[str, float] = field(default_factory=lambda: dict.fromkeys(SEGMENT_DIMS, 1.0))

    def dims(self, segment_kind_: str) -> tuple[float, float]:
        r, length = SEGMENT_DIMS[segment_kind_]
        return r * self.radius[segment_kind_], length * self.length[segment_kind_]

    def scaled(self, factor: float) -> "BodyShape":
        return BodyShape({k: v * factor for k, v in self.length.items()},
                         {k: v * factor for k, v in self.radius.items()})

    def to_dict(self) -> dict:
        return {"length": dict(self.length), "radius": dict(self.radius)}

    @classmethod
    def from_dict(cls, data: dict) -> "BodyShape":
        return cls(dict(data["length"]), dict(data["radius"]))


@dataclass(frozen=True)
class HumanModel:
    joint_angles: dict[str, float]
    shape: BodyShape = field(default_factory=BodyShape)
    offset: tuple[float, float] = (0.0, 0.0)
    placed: bool = False

    def __post_init__(self):
        missing = set(JOINTS) - set(self.joint_angles)
        if missing:
            raise ValueError(f"missing joint angles: {sorted(missing)}")
        for j, a in self.joint_angles.items():
            lo, hi = JOINT_LIMITS[joint_kind(j)]
            if not lo - 1e-12 <= a <= hi + 1e-12:
                raise ValueError(f"joint {j}={a:.3f} outside limits [{lo}, {hi}]")

    @property
    def skeleton(self) -> dict[str, np.ndarray]:
        return _skeleton(self.joint_angles, self.shape, self.offset)

    @property
    def capsules(self) -> dict[str, Capsule]:
        return _capsules(self.joint_angles, self.shape, self.offset)

    def to_record(self) -> dict:
        return {"joint_angles": dict(self.joint_angles), "shape": self.shape.to_dict(),
                "offset": list(self.offset), "placed": self.placed}

    @classmethod
    def from_record(cls, rec: dict) -> "HumanModel":
        return cls(dict(rec["joint_angles"]), BodyShape.from_dict(rec["shape"]),
                   tuple(rec["offset"]), rec.get("placed", False))


def _unit(angle: float) -> np.ndarray:
    """In-plane direction measured from the +y (toward the feet) axis."""
    return np.array([math.sin(angle), math.cos(angle)])


def _skeleton(angles, shape: BodyShape, offset) -> dict[str, np.ndarray]:
    """2D joint centres in the bed frame."""
    r_chest, l_chest = shape.dims("chest")
    r_waist, _ = shape.dims("waist")
    r_neck, l_neck = shape.dims("neck")
    r_head, l_head = shape.dims("head")
    _, l_upper = shape.dims("upper_arm")
    _, l_fore = shape.dims("forearm")
    _, l_hand = shape.dims("hand")
    _, l_thigh = shape.dims("thigh")
    _, l_shin = shape.dims("shin")

    ox, oy = offset
    y0 = SHOULDER_Y + oy
    pts: dict[str, np.ndarray] = {}
    pts["chest"] = np.array([ox, y0 + r_chest])
    pts["waist"] = np.array([ox, y0 + 2 * r_chest + 0.8 * r_waist])
    pts["neck_base"] = np.array([ox, y0 - r_neck - 0.02])
    pts["neck_top"] = pts["neck_base"] - [0.0, l_neck]
    pts["head_base"] = pts["neck_top"] - [0.0, 0.7 * r_head]
    pts["head_top"] = pts["head_base"] - [0.0, l_head]
    hip_y = pts["waist"][1] + 0.55 * r_waist
    for side, sgn in (("right", 1.0), ("left", -1.0)):
        sh = np.array([ox + sgn * (0.5 * l_chest + 0.3 * r_chest), y0 + 0.15 * r_chest])
        a_sh = angles[f"{side}_shoulder"]
        elbow = sh + l_upper * _unit(sgn * a_sh)
        a_el = a_sh + angles[f"{side}_elbow"]
        wrist = elbow + l_fore * _unit(sgn * a_el)
        hand_tip = wrist + l_hand * _unit(sgn * a_el)
        hip = np.array([ox + sgn * 0.55 * (0.5 * shape.dims("waist")[1] + r_waist), hip_y])
        a_hip = angles[f"{side}_hip"]
        knee = hip + l_thigh * _unit(sgn * a_hip)
        a_kn = a_hip + angles[f"{side}_knee"]
        ankle = knee + l_shin * _unit(sgn * a_kn)
        pts.update({f"{side}_shoulder": sh, f"{side}_elbow": elbow, f"{side}_wrist": wrist,
                    f"{side}_hand_tip": hand_tip, f"{side}_hip": hip, f"{side}_knee": knee,
                    f"{side}_ankle": ankle, f"{side}_shin_dir": _unit(sgn * a_kn),
                    f"{side}_forearm_dir": _unit(sgn * a_el)})
    return pts


def _lying(p2, r) -> np.ndarray:
    return np.array([p2[0], p2[1], r])


def _capsules(angles, shape: BodyShape, offset) -> dict[str, Capsule]:
    sk = _skeleton(angles, shape, offset)
    caps: dict[str, Capsule] = {}
    r, length = shape.dims("head")
    caps["head"] = Capsule(_lying(sk["head_base"], r), _lying(sk["head_top"], r), r, "head")
    r, _ = shape.dims("neck")
    caps["neck"] = Capsule(_lying(sk["neck_base"], r), _lying(sk["neck_top"], r), r, "neck")
    for name in ("chest", "waist"):
        r, length = shape.dims(name)
        c = sk[name]
        caps[name] = Capsule(_lying(c - [length / 2, 0.0], r), _lying(c + [length / 2, 0.0], r),
                             r, name)
    for side in SIDES:
        for seg, a, b in (("upper_arm", "shoulder", "elbow"), ("forearm", "elbow", "wrist"),
                          ("hand", "wrist", "hand_tip"), ("thigh", "hip", "knee"),
                          ("shin", "knee", "ankle")):
            r, _ = shape.dims(seg)
            caps[f"{side}_{seg}"] = Capsule(_lying(sk[f"{side}_{a}"], r),
                                            _lying(sk[f"{side}_{b}"], r), r, f"{side}_{seg}")
        r, length = shape.dims("foot")
        d = sk[f"{side}_shin_dir"]
        base = _lying(sk[f"{side}_ankle"], r)
        tip = base + length * np.array([d[0] * math.cos(FOOT_TILT), d[1] * math.cos(FOOT_TILT),
                                        math.sin(FOOT_TILT)])
        caps[f"{side}_foot"] = Capsule(base, tip, r, f"{side}_foot")
    return {name: caps[name] for name in SEGMENTS}


def base_pose() -> dict[str, float]:
    return dict(BASE_POSE)


def clip_to_limits(angles: dict[str, float]) -> dict[str, float]:
    out = {}
    for j, a in angles.items():
        lo, hi = JOINT_LIMITS[joint_kind(j)]
        out[j] = float(min(max(a, lo), hi))
    return out


def sample_pose(rng: np.random.Generator, variation_rad: float = 0.2,
                shape: BodyShape | None = None) -> HumanModel:
    """Base pose with every articulated joint offset by U(-variation, +variation)."""
    if variation_rad < 0:
        raise ValueError("variation_rad must be >= 0")
    offsets = rng.uniform(-variation_rad, variation_rad, size=len(JOINTS))
    angles = {j: BASE_POSE[j] + float(d) for j, d in zip(JOINTS, offsets)}
    return HumanModel(clip_to_limits(angles), shape or BodyShape())


def projected_bounds(human: HumanModel) -> tuple[float, float, float, float]:
    """(xmin, xmax, ymin, ymax) of the body's footprint on the bed plane."""
    xs, ys = [], []
    for c in human.capsules.values():
        for p in (c.endpoint_a, c.endpoint_b):
            xs += [p[0] - c.radius, p[0] + c.radius]
            ys += [p[1] - c.radius, p[1] + c.radius]
    return min(xs), max(xs), min(ys), max(ys)


def place_on_bed(human: HumanModel, bed_extent=(0.88, 2.1)) -> HumanModel:
    """Lay the body on the mattress, torso along the bed's long axis.

    The shoulder line sits at a fixed ``SHOULDER_Y`` and the torso is centred
    laterally, so placing an already placed body is a no-op.  Raises
    :class:`OutOfBedError` when any part overhangs the mattress.
    """
    placed = replace(human, offset=(0.0, 0.0), placed=True)
    hx, hy = bed_extent[0] / 2, bed_extent[1] / 2
    xmin, xmax, ymin, ymax = projected_bounds(placed)
    if xmin < -hx or xmax > hx or ymin < -hy or ymax > hy:
        raise OutOfBedError(
            f"body footprint x[{xmin:.3f}, {xmax:.3f}] y[{ymin:.3f}, {ymax:.3f}] "
            f"exceeds bed +-{hx:.2f} x +-{hy:.2f}")
    return placed


def stature(shape: BodyShape | None = None) -> float:
    """Head-to-heel length with straight legs, in metres."""
    straight = dict.fromkeys(JOINTS, 0.0)
    caps = _capsules(straight, shape or BodyShape(), (0.0, 0.0))
    top = caps["head"].endpoint_b[1] - caps["head"].radius
    heel = max(max(c.endpoint_a[1], c.endpoint_b[1]) + c.radius
               for name, c in caps.items() if segment_kind(name) in ("shin", "foot"))
    return float(heel - top)


STATURE_RANGE = (1.60, 1.85)


def vary_body_shape(rng: np.random.Generator, stature_range=STATURE_RANGE,
                    jitter: float = 0.04) -> BodyShape:
    """Random per-segment multipliers whose stature is uniform in ``stature_range``.

    Segment lengths and radii are jittered independently by up to ``jitter``
    (radii twice as much), then the whole body is rescaled so its stature hits
    the drawn target exactly.
    """
    target = rng.uniform(*stature_range)
    kinds = list(SEGMENT_DIMS)
    lj = rng.uniform(1 - jitter, 1 + jitter, size=len(kinds))
    rj = rng.uniform(1 - 2 * jitter, 1 + 2 * jitter, size=len(kinds))
    shape = BodyShape(dict(zip(kinds, map(float, lj))), dict(zip(kinds, map(float, rj))))
    return shape.scaled(target / stature(shape))


@dataclass
class BodyPointCloud:
    points: np.ndarray  # (N, 3)
    labels: np.ndarray  # (N,) segment names

    def __len__(self) -> int:
        return len(self.points)

    def projected(self) -> np.ndarray:
        return self.points[:, :2]


def _orthonormal(axis: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    helper = np.array([0.0, 0.0, 1.0]) if abs(axis[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    u = np.cross(axis, helper)
    u /= np.linalg.norm(u)
    return u, np.cross(axis, u)


def capsule_surface_points(capsule: Capsule, spacing: float) -> np.ndarray:
    """Rings of points around the capsule axis roughly ``spacing`` apart.

    Cylinder rings sit at evenly spaced stations along the axis; each
    hemispherical cap is cut into latitude rings ``spacing`` apart in arc
    length, ending in a single pole point.
    """
    a, b, r = capsule.endpoint_a, capsule.endpoint_b, capsule.radius
    axis = b - a
    length = float(np.linalg.norm(axis))
    axis = axis / length if length > 0 else np.array([0.0, 1.0, 0.0])
    u, v = _orthonormal(axis)

    def ring(center, radius, offset):
        n = max(1, int(round(2 * math.pi * radius / spacing)))
        th = offset + 2 * math.pi * np.arange(n) / n
        return center + radius * (np.cos(th)[:, None] * u + np.sin(th)[:, None] * v)

    pts = []
    n_st = max(1, int(round(length / spacing)))
    for k in range(n_st + 1):
        pts.append(ring(a + axis * (length * k / n_st), r, 0.5 * (k % 2)))
    n_lat = max(1, int(round(0.5 * math.pi * r / spacing)))
    for end, sign in ((a, -1.0), (b, 1.0)):
        for k in range(1, n_lat + 1):
            phi = 0.5 * math.pi * k / n_lat
            center = end + sign * axis * r * math.sin(phi)
            rr = r * math.cos(phi)
            if rr < 1e-9:
                pts.append(center[None, :])
            else:
                pts.append(ring(center, rr, 0.5 * ((n_st + k) % 2)))
    return np.concatenate(pts)


def discretize(human: HumanModel, spacing: float = 0.03) -> BodyPointCloud:
    """Points on the outer body surface.

    Samples buried inside another segment are dropped, and so are samples
    closer than ``0.8 * spacing`` to a point already kept on an earlier
    segment, which thins the seams where capsules meet.
    """
    if not spacing > 0:
        raise ValueError("spacing must be positive")
    caps = human.capsules
    all_pts, all_labels = [], []
    for name, cap in caps.items():
        pts = capsule_surface_points(cap, spacing)
        keep = np.ones(len(pts), dtype=bool)
        for other_name, other in caps.items():
            if other_name != name:
                keep &= other.distance(pts) > -1e-9
        pts = pts[keep]
        if all_pts and len(pts):
            d, _ = cKDTree(np.concatenate(all_pts)).query(pts)
            pts = pts[d >= 0.8 * spacing]
        all_pts.append(pts)
        all_labels.append(np.full(len(pts), name, dtype=object))
    return BodyPointCloud(np.concatenate(all_pts), np.concatenate(all_labels))


@dataclass(frozen=True)
class TargetSpec:
    name: str

    def __post_init__(self):
        if self.name not in TARGETS:
            raise ValueError(f"unknown target {self.name!r}; choose from {sorted(TARGETS)}")

    @property
    def segments(self) -> tuple[str, ...]:
        return TARGETS[self.name]


def label_points(cloud: BodyPointCloud, target: TargetSpec | str):
    """Index arrays (P_t, P_n, P_h): target, non-target and head/neck points."""
    spec = target if isinstance(target, TargetSpec) else TargetSpec(target)
    labels = cloud.labels
    head = np.isin(labels, HEAD_SEGMENTS)
    tgt = np.isin(labels, spec.segments) & ~head
    idx = np.arange(len(labels))
    return idx[tgt], idx[~tgt & ~head], idx[head]
