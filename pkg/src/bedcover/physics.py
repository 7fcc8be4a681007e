"""Mass-spring blanket simulation with bed and capsule colliders.

The cloth is a regular grid of point masses joined by structural (4-neighbour),
shear (diagonal) and bend (2-step) springs.  Integration is semi-implicit
Euler; contacts are resolved by projecting penetrating vertices back onto the
collider surface (plus a margin) and scaling their tangential velocity with a
Coulomb-style friction factor.  The hot loops are compiled with numba.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numba
import numpy as np

STRUCTURAL, SHEAR, BEND = 0, 1, 2
SPRING_CLASSES = ("structural", "shear", "bend")

FRAME_FORMAT = "bedcover-frame"
FRAME_VERSION = 1


class InvalidStateError(RuntimeError):
    """Operation is not valid for the current simulation state."""


@dataclass
class ClothParams:
    total_mass: float = 2.0
    stiffness_structural: float = 40.0
    stiffness_shear: float = 12.0
    stiffness_bend: float = 4.0
    damping: float = 0.03
    friction_coeff: float = 0.5
    gravity: float = 9.81
    dt: float = 0.0025
    collision_margin: float = 0.005
    max_speed: float = 5.0
    velocity_damping: float = 2.0

    def __post_init__(self):
        for name in ("total_mass", "stiffness_structural", "stiffness_shear",
                     "stiffness_bend", "damping", "dt", "max_speed"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.velocity_damping < 0:
            raise ValueError("velocity_damping must be >= 0")
        if self.collision_margin < 0:
            raise ValueError("collision_margin must be >= 0")
        if self.friction_coeff < 0:
            raise ValueError("friction_coeff must be >= 0")

    def stiffness_table(self) -> np.ndarray:
        return np.array([self.stiffness_structural, self.stiffness_shear,
                         self.stiffness_bend])


@dataclass
class Capsule:
    endpoint_a: np.ndarray
    endpoint_b: np.ndarray
    radius: float
    label: str = ""

    def __post_init__(self):
        self.endpoint_a = np.asarray(self.endpoint_a, dtype=float)
        self.endpoint_b = np.asarray(self.endpoint_b, dtype=float)
        if not self.radius > 0:
            raise ValueError(f"capsule radius must be positive, got {self.radius}")

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.endpoint_b - self.endpoint_a))

    def distance(self, points: np.ndarray) -> np.ndarray:
        """Signed distance from ``points`` (…, 3) to the capsule surface."""
        return segment_distance(points, self.endpoint_a, self.endpoint_b) - self.radius


def segment_distance(points, a, b) -> np.ndarray:
    points = np.asarray(points, dtype=float)
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0.0:
        t = np.zeros(points.shape[:-1])
    else:
        t = np.clip((points - a) @ ab / denom, 0.0, 1.0)
    closest = a + t[..., None] * ab
    return np.linalg.norm(points - closest, axis=-1)


@dataclass
class ColliderSet:
    """Mattress box (top face at ``bed_height``, edges rounded), a floor, and
    body capsules."""

    bed_height: float = 0.0
    bed_extent: tuple[float, float] = (0.88, 2.1)
    bed_depth: float = 0.58
    edge_rounding: float = 0.02
    capsules: list[Capsule] = field(default_factory=list)

    @property
    def floor_height(self) -> float:
        return self.bed_height - self.bed_depth

    def capsule_arrays(self):
        n = len(self.capsules)
        a = np.zeros((n, 3))
        b = np.zeros((n, 3))
        r = np.zeros(n)
        for i, c in enumerate(self.capsules):
            a[i], b[i], r[i] = c.endpoint_a, c.endpoint_b, c.radius
        return a, b, r


@dataclass
class ClothMesh:
    rows: int
    cols: int
    positions: np.ndarray
    velocities: np.ndarray
    springs: np.ndarray  # (S, 2) int64 vertex pairs
    rest_lengths: np.ndarray
    spring_class: np.ndarray  # int8 codes: STRUCTURAL / SHEAR / BEND
    per_vertex_mass: float
    anchors: dict[int, np.ndarray] = field(default_factory=dict)
    time: float = 0.0

    @property
    def n_vertices(self) -> int:
        return self.rows * self.cols

    def copy(self) -> "ClothMesh":
        return ClothMesh(
            rows=self.rows, cols=self.cols,
            positions=self.positions.copy(), velocities=self.velocities.copy(),
            springs=self.springs, rest_lengths=self.rest_lengths,
            spring_class=self.spring_class, per_vertex_mass=self.per_vertex_mass,
            anchors={k: v.copy() for k, v in self.anchors.items()}, time=self.time,
        )

    def projected(self) -> np.ndarray:
        return self.positions[:, :2]

    def kinetic_energy(self) -> float:
        return 0.5 * self.per_vertex_mass * float(np.sum(self.velocities ** 2))

    def max_speed(self) -> float:
        return float(_max_speed(self.velocities))


def grid_springs(rows: int, cols: int):
    """Spring topology for a rows x cols grid, vertex id = r * cols + c."""
    pairs, classes = [], []

    def add(r0, c0, r1, c1, cls):
        if 0 <= r1 < rows and 0 <= c1 < cols:
            pairs.append((r0 * cols + c0, r1 * cols + c1))
            classes.append(cls)

    for r in range(rows):
        for c in range(cols):
            add(r, c, r, c + 1, STRUCTURAL)
            add(r, c, r + 1, c, STRUCTURAL)
            add(r, c, r + 1, c + 1, SHEAR)
            add(r, c, r + 1, c - 1, SHEAR)
            add(r, c, r, c + 2, BEND)
            add(r, c, r + 2, c, BEND)
    return np.array(pairs, dtype=np.int64).reshape(-1, 2), np.array(classes, dtype=np.int8)


def build_cloth(params: ClothParams, width: float = 1.25, height: float = 1.7,
                resolution: tuple[int, int] = (51, 41),
                origin: Sequence[float] = (0.0, 0.0, 0.0), yaw: float = 0.0) -> ClothMesh:
    """Flat grid centred at ``origin``.

    ``resolution`` is (rows, cols); rows run along the local y axis (``height``)
    and cols along local x (``width``).  ``yaw`` rotates the sheet about the
    vertical axis through ``origin``.
    """
    rows, cols = resolution
    if not (width > 0 and height > 0):
        raise ValueError("cloth width and height must be positive")
    if rows < 2 or cols < 2:
        raise ValueError("cloth needs at least 2 rows and 2 cols")
    xs = np.linspace(-width / 2, width / 2, cols)
    ys = np.linspace(-height / 2, height / 2, rows)
    gx, gy = np.meshgrid(xs, ys)  # row-major: row index follows y
    local = np.stack([gx.ravel(), gy.ravel()], axis=1)
    cy, sy = math.cos(yaw), math.sin(yaw)
    rot = np.array([[cy, -sy], [sy, cy]])
    xy = local @ rot.T
    ox, oy, oz = origin
    pos = np.column_stack([xy[:, 0] + ox, xy[:, 1] + oy, np.full(len(xy), float(oz))])

    springs, classes = grid_springs(rows, cols)
    rest = np.linalg.norm(pos[springs[:, 1]] - pos[springs[:, 0]], axis=1)
    return ClothMesh(
        rows=rows, cols=cols, positions=pos, velocities=np.zeros_like(pos),
        springs=springs, rest_lengths=rest, spring_class=classes,
        per_vertex_mass=params.total_mass / (rows * cols),
    )


@numba.njit(cache=True)
def _spring_forces(pos, vel, springs, rest, cls, ktab, damping, out):
    out[:] = 0.0
    for s in range(springs.shape[0]):
        a = springs[s, 0]
        b = springs[s, 1]
        dx = pos[b, 0] - pos[a, 0]
        dy = pos[b, 1] - pos[a, 1]
        dz = pos[b, 2] - pos[a, 2]
        length = math.sqrt(dx * dx + dy * dy + dz * dz)
        if length < 1e-12:
            continue
        ux = dx / length
        uy = dy / length
        uz = dz / length
        rel = ((vel[b, 0] - vel[a, 0]) * ux + (vel[b, 1] - vel[a, 1]) * uy
               + (vel[b, 2] - vel[a, 2]) * uz)
        mag = ktab[cls[s]] * (length - rest[s]) + damping * rel
        fx = mag * ux
        fy = mag * uy
        fz = mag * uz
        out[a, 0] += fx
        out[a, 1] += fy
        out[a, 2] += fz
        out[b, 0] -= fx
        out[b, 1] -= fy
        out[b, 2] -= fz


@numba.njit(cache=True)
def _apply_friction(pos, vel, i, nx, ny, nz, mu, dt):
    """Drop the approaching normal velocity and shrink the tangential part by
    ``mu * |v_n| / |v_t|``.  The tangential slide already taken this step is
    rolled back by the same amount so that sticking contacts do not creep."""
    vn = vel[i, 0] * nx + vel[i, 1] * ny + vel[i, 2] * nz
    if vn >= 0.0:
        return
    tx = vel[i, 0] - vn * nx
    ty = vel[i, 1] - vn * ny
    tz = vel[i, 2] - vn * nz
    vt = math.sqrt(tx * tx + ty * ty + tz * tz)
    scale = 0.0
    if vt > 1e-12:
        scale = 1.0 - mu * (-vn) / vt
        if scale < 0.0:
            scale = 0.0
        elif scale > 1.0:
            scale = 1.0
    vel[i, 0] = tx * scale
    vel[i, 1] = ty * scale
    vel[i, 2] = tz * scale
    back = (scale - 1.0) * dt
    pos[i, 0] += tx * back
    pos[i, 1] += ty * back
    pos[i, 2] += tz * back


@numba.njit(cache=True)
def _resolve_collisions(pos, vel, cap_a, cap_b, cap_r, cap_lo, cap_hi,
                        half_x, half_y, bed_z, floor_z, rounding, margin, mu, dt, passes):
    n = pos.shape[0]
    for i in range(n):
        for _ in range(passes):
            hit = False
            for c in range(cap_r.shape[0]):
                px = pos[i, 0]
                py = pos[i, 1]
                pz = pos[i, 2]
                if (px < cap_lo[c, 0] or px > cap_hi[c, 0] or py < cap_lo[c, 1]
                        or py > cap_hi[c, 1] or pz < cap_lo[c, 2] or pz > cap_hi[c, 2]):
                    continue
                ax = cap_a[c, 0]
                ay = cap_a[c, 1]
                az = cap_a[c, 2]
                abx = cap_b[c, 0] - ax
                aby = cap_b[c, 1] - ay
                abz = cap_b[c, 2] - az
                denom = abx * abx + aby * aby + abz * abz
                t = 0.0
                if denom > 0.0:
                    t = ((px - ax) * abx + (py - ay) * aby + (pz - az) * abz) / denom
                    if t < 0.0:
                        t = 0.0
                    elif t > 1.0:
                        t = 1.0
                qx = ax + t * abx
                qy = ay + t * aby
                qz = az + t * abz
                dx = px - qx
                dy = py - qy
                dz = pz - qz
                dist = math.sqrt(dx * dx + dy * dy + dz * dz)
                target = cap_r[c] + margin
                if dist >= target:
                    continue
                if dist < 1e-12:
                    nx, ny, nz = 0.0, 0.0, 1.0
                else:
                    nx = dx / dist
                    ny = dy / dist
                    nz = dz / dist
                pos[i, 0] = qx + nx * target
                pos[i, 1] = qy + ny * target
                pos[i, 2] = qz + nz * target
                _apply_friction(pos, vel, i, nx, ny, nz, mu, dt)
                hit = True

            # mattress: box with edges rounded by ``rounding``, inflated by the margin
            px = pos[i, 0]
            py = pos[i, 1]
            pz = pos[i, 2]
            reach = rounding + margin
            if pz < bed_z + margin and pz > floor_z and abs(px) < half_x + margin \
                    and abs(py) < half_y + margin:
                ix = half_x - rounding
                iy = half_y - rounding
                iz = bed_z - rounding
                qx = min(max(px, -ix), ix)
                qy = min(max(py, -iy), iy)
                qz = min(pz, iz)
                dx = px - qx
                dy = py - qy
                dz = pz - qz
                dist = math.sqrt(dx * dx + dy * dy + dz * dz)
                if dist < reach:
                    if dist > 1e-12:
                        nx = dx / dist
                        ny = dy / dist
                        nz = dz / dist
                        pos[i, 0] = qx + nx * reach
                        pos[i, 1] = qy + ny * reach
                        pos[i, 2] = qz + nz * reach
                    else:
                        # inside the core box: leave through the nearest face
                        pen_top = iz - pz
                        pen_x = ix - abs(px)
                        pen_y = iy - abs(py)
                        nx, ny, nz = 0.0, 0.0, 0.0
                        if pen_top <= pen_x and pen_top <= pen_y:
                            nz = 1.0
                            pos[i, 2] = bed_z + margin
                        elif pen_x <= pen_y:
                            nx = 1.0 if px >= 0.0 else -1.0
                            pos[i, 0] = nx * (half_x + margin)
                        else:
                            ny = 1.0 if py >= 0.0 else -1.0
                            pos[i, 1] = ny * (half_y + margin)
                    _apply_friction(pos, vel, i, nx, ny, nz, mu, dt)
                    hit = True
            if pos[i, 2] < floor_z + margin:
                pos[i, 2] = floor_z + margin
                _apply_friction(pos, vel, i, 0.0, 0.0, 1.0, mu, dt)
                hit = True
            if not hit:
                break


@numba.njit(cache=True)
def _integrate(pos, vel, forces, inv_mass, gz, dt, vmax, drag):
    vmax2 = vmax * vmax
    keep = 1.0 / (1.0 + drag * dt)
    for i in range(pos.shape[0]):
        vx = (vel[i, 0] + dt * forces[i, 0] * inv_mass) * keep
        vy = (vel[i, 1] + dt * forces[i, 1] * inv_mass) * keep
        vz = (vel[i, 2] + dt * (forces[i, 2] * inv_mass - gz)) * keep
        s2 = vx * vx + vy * vy + vz * vz
        if s2 > vmax2:
            f = vmax / math.sqrt(s2)
            vx *= f
            vy *= f
            vz *= f
        vel[i, 0] = vx
        vel[i, 1] = vy
        vel[i, 2] = vz
        pos[i, 0] += dt * vx
        pos[i, 1] += dt * vy
        pos[i, 2] += dt * vz


def internal_forces(cloth: ClothMesh, params: ClothParams) -> np.ndarray:
    """Spring plus spring-damping force on every vertex, shape (N, 3)."""
    out = np.empty_like(cloth.positions)
    _spring_forces(cloth.positions, cloth.velocities, cloth.springs, cloth.rest_lengths,
                   cloth.spring_class, params.stiffness_table(), params.damping, out)
    return out


@numba.njit(cache=True)
def _step_kernel(pos, vel, forces, sim, anchor_ids, anchor_pos):
    (springs, rest, cls, ktab, damping, inv_mass, gz, dt, vmax, drag, cap_a, cap_b, cap_r,
     cap_lo, cap_hi, collide, half_x, half_y, bed_z, floor_z, rounding, margin, mu) = sim
    _spring_forces(pos, vel, springs, rest, cls, ktab, damping, forces)
    _integrate(pos, vel, forces, inv_mass, gz, dt, vmax, drag)
    if collide:
        _resolve_collisions(pos, vel, cap_a, cap_b, cap_r, cap_lo, cap_hi, half_x, half_y,
                            bed_z, floor_z, rounding, margin, mu, dt, 4)
    for k in range(anchor_ids.shape[0]):
        v = anchor_ids[k]
        for d in range(3):
            pos[v, d] = anchor_pos[k, d]
            vel[v, d] = 0.0


@numba.njit(cache=True)
def _max_speed(vel):
    m = 0.0
    for i in range(vel.shape[0]):
        s2 = vel[i, 0] * vel[i, 0] + vel[i, 1] * vel[i, 1] + vel[i, 2] * vel[i, 2]
        if s2 > m:
            m = s2
    return math.sqrt(m)


@numba.njit(cache=True)
def _settle_kernel(pos, vel, forces, sim, anchor_ids, anchor_pos, v_thresh, max_steps, confirm):
    quiet = 0
    for k in range(1, max_steps + 1):
        _step_kernel(pos, vel, forces, sim, anchor_ids, anchor_pos)
        if _max_speed(vel) < v_thresh:
            quiet += 1
            if quiet >= confirm:
                return k, True
        else:
            quiet = 0
    return max_steps, False


@numba.njit(cache=True)
def _transport_kernel(pos, vel, forces, sim, anchor_ids, anchor_pos, offsets, path):
    for j in range(path.shape[0]):
        for k in range(anchor_ids.shape[0]):
            for d in range(3):
                anchor_pos[k, d] = path[j, d] + offsets[k, d]
        _step_kernel(pos, vel, forces, sim, anchor_ids, anchor_pos)


class _ColliderCache:
    """Packed collider arrays, keyed on the capsule geometry itself.

    Object ids are not usable as keys: a freed ColliderSet's id can be handed
    to the next one, which would silently reuse the old body.
    """

    def __init__(self):
        self.key = None
        self.arrays = None

    def get(self, colliders: ColliderSet, margin: float):
        a, b, r = colliders.capsule_arrays()
        key = (a.tobytes(), b.tobytes(), r.tobytes(), margin)
        if key != self.key:
            pad = (r + margin)[:, None] + 1e-9
            lo = np.minimum(a, b) - pad
            hi = np.maximum(a, b) + pad
            self.arrays = (a, b, r, lo, hi)
            self.key = key
        return self.arrays


_collider_cache = _ColliderCache()
_NO_CAPS = (np.zeros((0, 3)), np.zeros((0, 3)), np.zeros(0), np.zeros((0, 3)), np.zeros((0, 3)))


def _pack(cloth: ClothMesh, colliders: ColliderSet | None, params: ClothParams) -> tuple:
    if colliders is None:
        caps, collide, geom = _NO_CAPS, False, (0.0, 0.0, 0.0, 0.0, 0.0)
    else:
        caps, collide = _collider_cache.get(colliders, params.collision_margin), True
        geom = (colliders.bed_extent[0] / 2, colliders.bed_extent[1] / 2,
                float(colliders.bed_height), float(colliders.floor_height),
                float(colliders.edge_rounding))
    return (cloth.springs, cloth.rest_lengths, cloth.spring_class, params.stiffness_table(),
            float(params.damping), 1.0 / cloth.per_vertex_mass, float(params.gravity),
            float(params.dt), float(params.max_speed), float(params.velocity_damping),
            *caps, collide, *geom, float(params.collision_margin),
            float(params.friction_coeff))


def _anchor_arrays(cloth: ClothMesh) -> tuple[np.ndarray, np.ndarray]:
    ids = np.array(list(cloth.anchors), dtype=np.int64)
    pos = (np.array([cloth.anchors[v] for v in cloth.anchors], dtype=float).reshape(-1, 3))
    return ids, pos


def _advance_time(cloth: ClothMesh, dt: float, steps: int) -> None:
    t = cloth.time
    for _ in range(steps):
        t += dt
    cloth.time = t


def step(cloth: ClothMesh, colliders: ColliderSet | None, params: ClothParams,
         _forces: np.ndarray | None = None) -> ClothMesh:
    """Advance ``cloth`` by one time step ``params.dt`` (in place) and return it."""
    forces = np.empty_like(cloth.positions) if _forces is None else _forces
    ids, apos = _anchor_arrays(cloth)
    _step_kernel(cloth.positions, cloth.velocities, forces, _pack(cloth, colliders, params),
                 ids, apos)
    cloth.time += params.dt
    return cloth


def settle(cloth: ClothMesh, colliders: ColliderSet | None, params: ClothParams,
           v_thresh: float = 0.01, max_steps: int = 2000, confirm_steps: int = 3,
           on_step: Callable[[ClothMesh], None] | None = None):
    """Step until every vertex is slower than ``v_thresh`` for ``confirm_steps``
    consecutive steps.

    Returns ``(cloth, steps_taken, settled)``; running out of ``max_steps`` is
    reported through ``settled=False`` rather than raised.
    """
    if not v_thresh > 0:
        raise ValueError("v_thresh must be positive")
    if max_steps < 1:
        raise ValueError("max_steps must be >= 1")
    forces = np.empty_like(cloth.positions)
    sim = _pack(cloth, colliders, params)
    ids, apos = _anchor_arrays(cloth)
    if on_step is None:
        steps, ok = _settle_kernel(cloth.positions, cloth.velocities, forces, sim, ids, apos,
                                   float(v_thresh), int(max_steps), int(confirm_steps))
        _advance_time(cloth, params.dt, steps)
        return cloth, int(steps), bool(ok)
    quiet = 0
    for k in range(1, max_steps + 1):
        _step_kernel(cloth.positions, cloth.velocities, forces, sim, ids, apos)
        cloth.time += params.dt
        on_step(cloth)
        if _max_speed(cloth.velocities) < v_thresh:
            quiet += 1
            if quiet >= confirm_steps:
                return cloth, k, True
        else:
            quiet = 0
    return cloth, max_steps, False


def anchor(cloth: ClothMesh, vertex_id: int, target=None) -> ClothMesh:
    if not 0 <= vertex_id < cloth.n_vertices:
        raise ValueError(f"vertex id {vertex_id} out of range [0, {cloth.n_vertices})")
    vid = int(vertex_id)
    if target is None:
        target = cloth.positions[vid] if vid not in cloth.anchors else cloth.anchors[vid]
    cloth.anchors[vid] = np.array(target, dtype=float)
    cloth.positions[vid] = cloth.anchors[vid]
    cloth.velocities[vid] = 0.0
    return cloth


def release_anchors(cloth: ClothMesh) -> ClothMesh:
    cloth.anchors.clear()
    return cloth


def transport_increments(start, waypoints, increment: float) -> list[np.ndarray]:
    """Positions visited when moving from ``start`` through ``waypoints`` in
    steps no longer than ``increment``; each segment ends exactly on its waypoint."""
    out = []
    cur = np.asarray(start, dtype=float)
    for wp in waypoints:
        wp = np.asarray(wp, dtype=float)
        length = float(np.linalg.norm(wp - cur))
        n = int(math.ceil(length / increment - 1e-9)) if length > 0 else 0
        for k in range(1, n + 1):
            out.append(cur + (wp - cur) * (k / n))
        cur = wp
    return out


def transport_anchor(cloth: ClothMesh, colliders: ColliderSet | None, params: ClothParams,
                     waypoints, speed: float = 0.2,
                     on_step: Callable[[ClothMesh], None] | None = None) -> ClothMesh:
    """Drag every anchor rigidly along a piecewise-linear path.

    The path is traced by the first anchor; other anchors keep their offsets.
    One physics step is taken per increment of length ``speed * dt``.
    """
    if not cloth.anchors:
        raise InvalidStateError("transport_anchor needs at least one anchor")
    if not speed > 0:
        raise ValueError("speed must be positive")
    ids, apos = _anchor_arrays(cloth)
    offsets = apos - apos[0]
    path = np.array(transport_increments(apos[0], waypoints, speed * params.dt)).reshape(-1, 3)
    forces = np.empty_like(cloth.positions)
    sim = _pack(cloth, colliders, params)
    if on_step is None:
        _transport_kernel(cloth.positions, cloth.velocities, forces, sim, ids, apos, offsets,
                          path)
        _advance_time(cloth, params.dt, len(path))
    else:
        for j in range(len(path)):
            _transport_kernel(cloth.positions, cloth.velocities, forces, sim, ids, apos,
                              offsets, path[j:j + 1])
            cloth.time += params.dt
            for k, vid in enumerate(ids):
                cloth.anchors[int(vid)] = apos[k].copy()
            on_step(cloth)
    if len(path):
        for k, vid in enumerate(ids):
            cloth.anchors[int(vid)] = apos[k].copy()
    return cloth


def frame_record(cloth: ClothMesh, index: int) -> dict:
    """JSON-ready frame: row-major vertex positions, anchors and timestamp."""
    return {
        "format": FRAME_FORMAT,
        "version": FRAME_VERSION,
        "index": index,
        "time": round(cloth.time, 9),
        "rows": cloth.rows,
        "cols": cloth.cols,
        "positions": cloth.positions.tolist(),
        "anchors": {str(k): v.tolist() for k, v in sorted(cloth.anchors.items())},
    }


def write_frame(path: Path | str, cloth: ClothMesh, index: int) -> None:
    Path(path).write_text(json.dumps(frame_record(cloth, index)))


def read_frame(path: Path | str) -> dict:
    data = json.loads(Path(path).read_text())
    if data.get("format") != FRAME_FORMAT:
        raise ValueError(f"{path}: not a {FRAME_FORMAT} document")
    return data
