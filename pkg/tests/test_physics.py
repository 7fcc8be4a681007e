import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bedcover import physics as P
from bedcover.physics import Capsule, ClothParams, ColliderSet

FREE = ClothParams(velocity_damping=0.0)


def small_cloth(rows=5, cols=4, params=FREE, **kw):
    return P.build_cloth(params, 0.3, 0.4, resolution=(rows, cols), **kw)


def test_default_grid_matches_vertex_budget():
    cloth = P.build_cloth(ClothParams())
    assert cloth.n_vertices == 2091
    assert abs(cloth.n_vertices - 2089) / 2089 < 0.03
    assert len(cloth.positions) == len(cloth.velocities) == cloth.rows * cloth.cols


def test_default_footprint():
    cloth = P.build_cloth(ClothParams())
    xy = cloth.projected()
    assert np.ptp(xy[:, 0]) == pytest.approx(1.25)
    assert np.ptp(xy[:, 1]) == pytest.approx(1.7)


def test_two_by_two_grid():
    cloth = P.build_cloth(ClothParams(), 1.0, 1.0, resolution=(2, 2))
    counts = np.bincount(cloth.spring_class, minlength=3)
    assert cloth.n_vertices == 4
    assert counts.tolist() == [4, 2, 0]


@given(rows=st.integers(2, 12), cols=st.integers(2, 12),
       width=st.floats(0.1, 3.0), height=st.floats(0.1, 3.0))
@settings(max_examples=40, deadline=None)
def test_spring_topology(rows, cols, width, height):
    cloth = P.build_cloth(ClothParams(), width, height, resolution=(rows, cols))
    s = cloth.springs
    assert np.all(s[:, 0] != s[:, 1])
    pairs = {tuple(sorted(p)) for p in s.tolist()}
    assert len(pairs) == len(s)
    assert np.all(cloth.rest_lengths > 0)
    structural = cloth.spring_class == P.STRUCTURAL
    horizontal = structural & (s[:, 1] - s[:, 0] == 1)
    vertical = structural & (s[:, 1] - s[:, 0] == cols)
    # rest lengths are measured, so they equal the grid spacing up to rounding
    np.testing.assert_allclose(cloth.rest_lengths[horizontal], width / (cols - 1), rtol=1e-12)
    np.testing.assert_allclose(cloth.rest_lengths[vertical], height / (rows - 1), rtol=1e-12)
    assert cloth.per_vertex_mass == pytest.approx(ClothParams().total_mass / (rows * cols))


@pytest.mark.parametrize("kw", [dict(width=0.0), dict(height=-1.0), dict(resolution=(1, 5))])
def test_build_cloth_rejects_bad_dimensions(kw):
    args = dict(width=1.0, height=1.0, resolution=(3, 3))
    args.update(kw)
    with pytest.raises(ValueError):
        P.build_cloth(ClothParams(), **args)


@pytest.mark.parametrize("field", ["total_mass", "stiffness_structural", "damping", "dt"])
def test_params_must_be_positive(field):
    with pytest.raises(ValueError):
        ClothParams(**{field: 0.0})
    with pytest.raises(ValueError):
        ClothParams(collision_margin=-0.001)


def test_free_particle_feels_gravity_exactly():
    cloth = small_cloth()
    cloth.springs = cloth.springs[:0]
    cloth.rest_lengths = cloth.rest_lengths[:0]
    cloth.spring_class = cloth.spring_class[:0]
    P.step(cloth, None, FREE)
    np.testing.assert_array_equal(cloth.velocities[:, 2], np.full(cloth.n_vertices, -9.81 * FREE.dt))
    np.testing.assert_array_equal(cloth.velocities[:, :2], 0.0)


def test_stretched_spring_forces_are_equal_and_opposite():
    params = ClothParams(damping=1e-9)
    cloth = P.build_cloth(params, 0.1, 0.1, resolution=(2, 2))
    keep = np.flatnonzero((cloth.springs[:, 0] == 0) & (cloth.springs[:, 1] == 1))
    cloth.springs, cloth.rest_lengths = cloth.springs[keep], cloth.rest_lengths[keep]
    cloth.spring_class = cloth.spring_class[keep]
    delta = 0.02
    cloth.positions[1, 0] += delta
    f = P.internal_forces(cloth, params)
    k = params.stiffness_structural
    np.testing.assert_allclose(f[0], [k * delta, 0, 0], rtol=1e-12)
    np.testing.assert_allclose(f[1], [-k * delta, 0, 0], rtol=1e-12)


@given(seed=st.integers(0, 2**31 - 1), scale=st.floats(0.0, 0.2))
@settings(max_examples=30, deadline=None)
def test_internal_forces_sum_to_zero(seed, scale):
    rng = np.random.default_rng(seed)
    cloth = small_cloth(7, 6)
    cloth.positions += rng.normal(0, scale, cloth.positions.shape)
    cloth.velocities = rng.normal(0, 1, cloth.velocities.shape)
    total = P.internal_forces(cloth, ClothParams()).sum(axis=0)
    assert np.abs(total).max() < 1e-9


def test_vertex_below_bed_is_pushed_up():
    cloth = small_cloth(origin=(0, 0, -0.01))
    P.step(cloth, ColliderSet(), ClothParams())
    assert cloth.positions[:, 2].min() >= 0.0


def test_velocity_clamp():
    params = ClothParams(max_speed=1.0)
    cloth = small_cloth(params=params)
    cloth.velocities[:] = [30.0, 0.0, 0.0]
    P.step(cloth, None, params)
    assert cloth.max_speed() <= 1.0 + 1e-12


def test_settle_returns_quickly_when_at_rest():
    params = ClothParams()
    cloth = small_cloth(params=params, origin=(0, 0, params.collision_margin))
    cloth, steps, ok = P.settle(cloth, ColliderSet(), params)
    assert ok and steps <= 5


def test_settle_reports_exhaustion():
    cloth = small_cloth(origin=(0, 0, 1.0))
    cloth, steps, ok = P.settle(cloth, ColliderSet(), ClothParams(), max_steps=10)
    assert not ok and steps == 10
    with pytest.raises(ValueError):
        P.settle(cloth, ColliderSet(), ClothParams(), v_thresh=0.0)


def test_flat_drop_on_empty_bed():
    # bed larger than the sheet so no vertex hangs over an edge
    params = ClothParams()
    bed = ColliderSet(bed_extent=(2.0, 2.5))
    cloth = P.build_cloth(params, origin=(0, 0, 0.10))
    cloth, _, ok = P.settle(cloth, bed, params, max_steps=4000)
    assert ok
    z = cloth.positions[:, 2]
    assert np.all(np.abs(z - bed.bed_height) <= params.collision_margin + 1e-3)
    assert cloth.kinetic_energy() < 0.5 * params.total_mass * 0.01 ** 2


def test_anchored_vertex_holds_under_gravity():
    cloth = small_cloth()
    start = cloth.positions[0].copy()
    P.anchor(cloth, 0)
    for _ in range(20):
        P.step(cloth, None, FREE)
    np.testing.assert_array_equal(cloth.positions[0], start)
    assert cloth.positions[1:, 2].max() < start[2]


def test_anchor_twice_is_idempotent():
    a, b = small_cloth(), small_cloth()
    P.anchor(a, 3)
    P.anchor(b, 3)
    P.anchor(b, 3)
    assert a.anchors.keys() == b.anchors.keys()
    np.testing.assert_array_equal(a.anchors[3], b.anchors[3])


def test_anchor_out_of_range():
    cloth = small_cloth()
    for bad in (-1, cloth.n_vertices):
        with pytest.raises(ValueError):
            P.anchor(cloth, bad)


def test_release_then_fall():
    cloth = small_cloth(origin=(0, 0, 0.5))
    P.anchor(cloth, 0)
    P.release_anchors(cloth)
    z0 = cloth.positions[:, 2].copy()
    P.settle(cloth, ColliderSet(), ClothParams(), max_steps=50)
    assert np.all(cloth.positions[:, 2] < z0)


def test_transport_to_current_position_takes_no_steps():
    cloth = small_cloth()
    P.anchor(cloth, 0)
    t0 = cloth.time
    P.transport_anchor(cloth, None, FREE, [cloth.positions[0].copy()])
    assert cloth.time == t0


def test_transport_increment_count():
    assert len(P.transport_increments([0, 0, 0], [[1, 0, 0]], 0.1 * 0.01)) == 1000


def test_lift_by_forty_centimetres():
    params = ClothParams()
    cloth = small_cloth(params=params)
    vid = 7
    start = cloth.positions[vid].copy()
    P.anchor(cloth, vid)
    seen = []
    P.transport_anchor(cloth, None, params, [start + [0, 0, 0.4]], 0.2,
                       on_step=lambda c: seen.append(np.abs(c.positions[vid] - c.anchors[vid]).max()))
    np.testing.assert_allclose(cloth.positions[vid], start + [0, 0, 0.4], atol=1e-12)
    assert max(seen) <= 1e-9
    assert len(seen) == math.ceil(0.4 / (0.2 * params.dt) - 1e-9)


def test_transport_without_anchor():
    with pytest.raises(P.InvalidStateError):
        P.transport_anchor(small_cloth(), None, FREE, [[0, 0, 1]])


def test_secondary_anchors_keep_offsets():
    cloth = small_cloth()
    P.anchor(cloth, 0)
    P.anchor(cloth, 5)
    offset = cloth.positions[5] - cloth.positions[0]
    P.transport_anchor(cloth, None, FREE, [cloth.positions[0] + [0.1, 0, 0.1]])
    np.testing.assert_allclose(cloth.positions[5] - cloth.positions[0], offset, atol=1e-12)


def test_collisions_keep_cloth_out_of_body_and_mattress():
    params = ClothParams()
    caps = [Capsule([-0.2, 0, 0.1], [0.2, 0, 0.1], 0.1, "a"),
            Capsule([0, -0.3, 0.06], [0, 0.3, 0.06], 0.06, "b")]
    bed = ColliderSet(capsules=caps)
    cloth = P.build_cloth(params, 0.8, 0.9, resolution=(19, 17), origin=(0, 0, 0.25))
    worst = {"cap": 0.0, "bed": 0.0}

    def check(c):
        for cap in caps:
            worst["cap"] = min(worst["cap"], cap.distance(c.positions).min())
        over = (np.abs(c.positions[:, 0]) < 0.44) & (np.abs(c.positions[:, 1]) < 1.05)
        worst["bed"] = min(worst["bed"], (c.positions[over, 2] - bed.bed_height).min())

    P.settle(cloth, bed, params, max_steps=600, on_step=check)
    assert worst["cap"] >= -1e-6
    assert worst["bed"] >= -1e-9


def test_fused_and_stepwise_paths_agree():
    params = ClothParams()
    bed = ColliderSet(capsules=[Capsule([-0.2, 0, 0.1], [0.2, 0, 0.1], 0.1)])
    a = small_cloth(9, 9, params=params, origin=(0, 0, 0.3))
    b = a.copy()
    P.settle(a, bed, params, max_steps=300)
    P.settle(b, bed, params, max_steps=300, on_step=lambda c: None)
    np.testing.assert_array_equal(a.positions, b.positions)
    np.testing.assert_array_equal(a.velocities, b.velocities)
    assert a.time == b.time


def test_determinism():
    params = ClothParams()
    runs = []
    for _ in range(2):
        cloth = small_cloth(9, 9, params=params, origin=(0, 0, 0.3))
        P.anchor(cloth, 4)
        P.transport_anchor(cloth, ColliderSet(), params, [[0.1, 0.1, 0.5]])
        runs.append(cloth.positions.copy())
    assert runs[0].tobytes() == runs[1].tobytes()


def test_frame_round_trip(tmp_path):
    cloth = small_cloth()
    P.anchor(cloth, 2)
    path = tmp_path / "f.json"
    P.write_frame(path, cloth, 3)
    rec = P.read_frame(path)
    assert rec["index"] == 3 and rec["rows"] == 5 and rec["cols"] == 4
    np.testing.assert_array_equal(np.array(rec["positions"]), cloth.positions)
    assert list(rec["anchors"]) == ["2"]
    (tmp_path / "bad.json").write_text('{"format": "other"}')
    with pytest.raises(ValueError):
        P.read_frame(tmp_path / "bad.json")


def test_collider_change_is_picked_up():
    # same ColliderSet object, capsule moved in place: the next step must see it
    params = ClothParams()
    cap = Capsule([-0.3, 0.0, 1.0], [0.3, 0.0, 1.0], 0.05)
    bed = ColliderSet(capsules=[cap])
    a = small_cloth(origin=(0, 0, 0.06))
    P.step(a, bed, params)
    cap.endpoint_a[2] = cap.endpoint_b[2] = 0.06
    P.step(a, bed, params)
    b = small_cloth(origin=(0, 0, 0.06))
    P.step(b, ColliderSet(capsules=[Capsule([-0.3, 0.0, 1.0], [0.3, 0.0, 1.0], 0.05)]), params)
    P.step(b, ColliderSet(capsules=[Capsule([-0.3, 0.0, 0.06], [0.3, 0.0, 0.06], 0.05)]), params)
    np.testing.assert_array_equal(a.positions, b.positions)
    # the capsule really pushed some vertices
    c = small_cloth(origin=(0, 0, 0.06))
    P.step(c, ColliderSet(capsules=[Capsule([-0.3, 0.0, 1.0], [0.3, 0.0, 1.0], 0.05)]), params)
    P.step(c, ColliderSet(capsules=[Capsule([-0.3, 0.0, 1.0], [0.3, 0.0, 1.0], 0.05)]), params)
    assert not np.array_equal(a.positions, c.positions)
