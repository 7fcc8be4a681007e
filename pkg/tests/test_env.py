import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from bedcover import env, human as h
from bedcover.env import CoverageReport


def _report(rho_t, rho_n, rho_h, n_t, n_n, n_h):
    return CoverageReport(np.zeros(n_t + n_n + n_h, bool), rho_t, rho_n, rho_h, n_t, n_n, n_h)


def brute_covered(points, verts, lam):
    d = np.linalg.norm(points[:, None, :2] - verts[None, :, :2], axis=2)
    return (d < lam).any(axis=1)


# --- coverage -----------------------------------------------------------------

def test_point_on_vertex_is_covered(reset_state):
    v = reset_state.cloth.positions[123, :2]
    assert env.covered(v[None], reset_state.cloth.positions, 0.028)[0]


def test_point_5cm_away_is_uncovered():
    verts = np.array([[0.0, 0.0, 0.0], [1.0, 1.0, 0.0]])
    assert not env.covered(np.array([[0.05, 0.0]]), verts, 0.028)[0]
    # boundary is strict
    assert not env.covered(np.array([[0.028, 0.0]]), verts, 0.028)[0]
    assert env.covered(np.array([[0.0279, 0.0]]), verts, 0.028)[0]


def test_covered_rejects_bad_lambda():
    with pytest.raises(ValueError):
        env.covered(np.zeros((1, 2)), np.zeros((1, 3)), 0.0)


def test_covered_matches_brute_force(reset_state, rng):
    cloth = reset_state.cloth.positions
    pts = np.column_stack([rng.uniform(-0.6, 0.6, 1000), rng.uniform(-1.2, 1.2, 1000)])
    # put a share of points right at the threshold to stress ties
    k = rng.integers(0, len(cloth), 200)
    ang = rng.uniform(0, 2 * np.pi, 200)
    pts[:200] = cloth[k, :2] + 0.028 * np.column_stack([np.cos(ang), np.sin(ang)]) * rng.uniform(
        0.99, 1.01, (200, 1))
    np.testing.assert_array_equal(env.covered(pts, cloth, 0.028), brute_covered(pts, cloth, 0.028))


def test_cloth_off_bed_uncovers_everything(reset_state):
    p_t, p_n, p_h = reset_state.partition
    far = reset_state.cloth.positions + np.array([10.0, 10.0, 0.0])
    rep = env.coverage_report(p_t, p_n, p_h, reset_state.cloud, far, 0.028)
    assert (rep.rho_t, rep.rho_n, rep.rho_h) == (len(p_t), len(p_n), 0)


def test_reset_state_fully_covered(reset_state):
    p_t, p_n, p_h = reset_state.partition
    rep = env.coverage_report(p_t, p_n, p_h, reset_state.cloud, reset_state.cloth, 0.028)
    assert rep.rho_t <= 0.01 * len(p_t) + 1
    assert rep.rho_n <= 0.01 * len(p_n) + 1
    assert rep.rho_h <= 0.1 * len(p_h)


def test_half_cover_counts(reset_state):
    cloud = reset_state.cloud
    p_t, p_n, p_h = reset_state.partition
    # a dense sheet over the bed's foot half only
    xs, ys = np.meshgrid(np.arange(-0.6, 0.6, 0.01), np.arange(0.0, 1.2, 0.01))
    sheet = np.column_stack([xs.ravel(), ys.ravel()])
    rep = env.coverage_report(p_t, p_n, p_h, cloud, sheet, 0.028)
    cov = brute_covered(cloud.points, sheet, 0.028)
    assert rep.rho_t == int((~cov[p_t]).sum())
    assert rep.rho_n == int((~cov[p_n]).sum())
    assert rep.rho_h == int(cov[p_h].sum()) == 0
    # points well inside the sheet are covered, points well outside are not
    y = cloud.points[:, 1]
    assert cov[y > 0.02].all() and not cov[y < -0.03].any()


# --- reward -------------------------------------------------------------------

def test_perfect_reward_is_100():
    r = env.reward(_report(50, 0, 0, 50, 80, 20), [0.0, 0.0, 0.0, 0.5])
    assert r.total == 100.0


def test_head_covered_only_is_minus_200():
    r = env.reward(_report(0, 0, 20, 50, 80, 20), [0.0, 0.0, 0.3, 0.0])
    assert r.total == -200.0


def test_long_move_penalty():
    r = env.reward(_report(0, 0, 0, 50, 80, 20), [0.0, -0.8, 0.0, 0.8])
    assert r.r_d == -150.0 and r.total == -150.0
    assert env.reward(_report(0, 0, 0, 50, 80, 20), [0.0, -0.74, 0.0, 0.75]).r_d == 0.0
    assert env.reward(_report(0, 0, 0, 50, 80, 20), [0.0, -0.75, 0.0, 0.75]).r_d == -150.0


def test_empty_non_target_set():
    r = env.reward(_report(10, 0, 0, 10, 0, 5), [0, 0, 0, 0])
    assert r.r_n == 0.0 and r.total == 100.0


def test_empty_target_set_rejected():
    with pytest.raises(ValueError):
        env.reward(_report(0, 0, 0, 0, 10, 5), [0, 0, 0, 0])


@st.composite
def reports(draw):
    n_t = draw(st.integers(1, 500))
    n_n = draw(st.integers(0, 1500))
    n_h = draw(st.integers(1, 100))
    return _report(draw(st.integers(0, n_t)), draw(st.integers(0, n_n)),
                   draw(st.integers(0, n_h)), n_t, n_n, n_h)


actions = st.lists(st.floats(-1.05, 1.05), min_size=4, max_size=4)


@settings(max_examples=300, deadline=None)
@given(reports(), actions)
def test_reward_identity_and_bound(rep, a):
    r = env.reward(rep, a)
    assert r.total == r.r_t + r.r_n + r.r_h + r.r_d
    assert r.total <= 100.0
    if r.total == 100.0:
        assert rep.rho_t == rep.n_t and rep.rho_n == 0 and rep.rho_h == 0 and r.r_d == 0


@settings(max_examples=200, deadline=None)
@given(reports(), actions)
def test_reward_monotone(rep, a):
    base = env.reward(rep, a).total
    if rep.rho_t < rep.n_t:
        assert env.reward(replace(rep, rho_t=rep.rho_t + 1), a).total >= base
    if rep.rho_n < rep.n_n:
        assert env.reward(replace(rep, rho_n=rep.rho_n + 1), a).total <= base
    if rep.rho_h < rep.n_h:
        assert env.reward(replace(rep, rho_h=rep.rho_h + 1), a).total <= base


# --- observation / action -----------------------------------------------------

def test_observation_left_knee_slot():
    m = h.place_on_bed(h.HumanModel(h.base_pose()))
    obs = env.observe(m)
    knee = m.skeleton["left_knee"]
    assert obs[3] == knee[0] and obs[4] == knee[1]
    assert obs.shape == (env.OBS_DIM,)


@pytest.mark.parametrize("delta", [0.1, -0.3, 0.5])
def test_forearm_rotation_shifts_yaw(delta):
    base = h.base_pose()
    turned = dict(base, right_elbow=base["right_elbow"] + delta)
    a = env.observe(h.HumanModel(base))[8]
    b = env.observe(h.HumanModel(turned))[8]
    diff = math.remainder(b - a, 2 * math.pi)
    assert abs(abs(diff) - abs(delta)) < 1e-12


def test_observation_ignores_blanket(reset_state):
    moved = replace(reset_state, cloth=reset_state.cloth.copy())
    moved.cloth.positions[:] += 0.3
    np.testing.assert_array_equal(env.observe(moved), env.observe(reset_state))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_observation_ranges(seed):
    try:
        m = h.place_on_bed(h.sample_pose(np.random.default_rng(seed), 0.2))
    except h.OutOfBedError:
        assume(False)
    obs = env.observe(m).reshape(4, 3)
    assert np.all(np.abs(obs[:, 0]) <= 0.44 + 0.1)
    assert np.all(np.abs(obs[:, 1]) <= 1.05 + 0.1)
    assert np.all((obs[:, 2] > -math.pi) & (obs[:, 2] <= math.pi))


def test_wrap_angle_half_open():
    assert env._wrap_angle(-math.pi) == math.pi
    assert env._wrap_angle(3 * math.pi) == pytest.approx(math.pi)


def test_clamp_action_flags():
    a, flag = env.clamp_action([0.0, 0.0, 0.1, 0.2])
    assert not flag
    a, flag = env.clamp_action([1.0, -2.0, 0.0, 0.0])
    assert flag and a[0] == 0.44 and a[1] == -1.05


# --- blanket randomisation ----------------------------------------------------

def test_blanket_draws_inside_boxes(rng):
    cfg = env.EnvConfig(vary_blanket=True)
    x0, y0, t0 = cfg.blanket_pose
    for _ in range(1000):
        x, y, t = env.randomize_blanket(cfg, rng)
        assert -0.02 <= x - x0 <= 0.02
        assert -0.25 <= y - y0 <= 0.05
        assert -math.pi / 4 <= t - t0 <= math.pi / 4


def test_blanket_fixed_when_disabled(rng):
    cfg = env.EnvConfig()
    assert env.randomize_blanket(cfg, rng) == cfg.blanket_pose


# --- reset --------------------------------------------------------------------

def test_reset_contract_default(reset_state):
    info = reset_state.info
    assert info["covered_fraction"] >= 0.99
    assert info["head_exposed_fraction"] >= 0.90
    assert info["contract"]


def test_reset_same_seed_same_observation(default_config, reset_state):
    _, obs = env.reset(default_config, 0)
    np.testing.assert_array_equal(obs, reset_state.observation)


def test_reset_blanket_pose_constant(default_config):
    poses = {env.reset(default_config, s)[0].blanket_pose for s in (1, 2)}
    assert poses == {default_config.blanket_pose}


def test_reset_with_random_blanket_terminates():
    cfg = env.EnvConfig(vary_blanket=True)
    state, _ = env.reset(cfg, 5)
    assert state.info["attempts"] <= cfg.max_retries
    assert state.blanket_pose != cfg.blanket_pose


def test_reset_retry_budget_exhausted():
    cfg = env.EnvConfig(min_covered=1.01, max_retries=2)
    with pytest.raises(env.ResetError):
        env.reset(cfg, 0)


def test_config_validation():
    with pytest.raises(ValueError):
        env.EnvConfig(lam=0.0)
    with pytest.raises(ValueError):
        env.EnvConfig(target="tail")


# --- execute ------------------------------------------------------------------

def test_nearest_vertex_exact_and_ties(reset_state):
    cloth = reset_state.cloth
    assert env.nearest_vertex(cloth, cloth.positions[777, :2]) == 777
    c = cloth.copy()
    c.positions[10, :2] = c.positions[5, :2]
    assert env.nearest_vertex(c, c.positions[5, :2]) == 5


def test_grasp_at_vertex_anchors_it(reset_state):
    vid = env.nearest_vertex(reset_state.cloth, [0.1, 0.2])
    g = reset_state.cloth.positions[vid, :2]
    res = env.execute(reset_state, [g[0], g[1], g[0], g[1]])
    assert res.flags["grasp_vertex"] == vid


def test_drop_in_place_keeps_head_clear(reset_state):
    g = reset_state.cloth.positions[1500, :2]
    res = env.execute(reset_state, [g[0], g[1], g[0], g[1]])
    assert res.report.rho_h == 0
    assert res.reward.r_d == 0.0


def test_long_pull_penalised(reset_state):
    res = env.execute(reset_state, [0.0, 0.9, 0.0, -0.7])
    assert res.reward.r_d == -150.0
    assert res.reward.total == pytest.approx(
        res.reward.r_t + res.reward.r_n + res.reward.r_h - 150.0)


def test_execute_is_deterministic_and_pure(reset_state):
    before = reset_state.cloth.positions.copy()
    a = [0.1, -0.3, 0.3, 0.2]
    r1 = env.execute(reset_state, a)
    r2 = env.execute(reset_state, a)
    np.testing.assert_array_equal(reset_state.cloth.positions, before)
    np.testing.assert_array_equal(r1.report.covered, r2.report.covered)
    assert r1.reward == r2.reward
    np.testing.assert_array_equal(r1.state.cloth.positions, r2.state.cloth.positions)


def test_execute_clamps_out_of_range(reset_state):
    res = env.execute(reset_state, [2.0, 0.0, 0.0, 0.0])
    assert res.flags["clamped"] and res.action[0] == 0.44


def test_derive_seed_stable():
    assert env.derive_seed(0, 3) == env.derive_seed(0, 3)
    assert len({env.derive_seed(0, i) for i in range(100)}) == 100
    assert env.derive_seed(1, 0) != env.derive_seed(0, 1)


def test_episode_record_fields(reset_state):
    res = env.execute(reset_state, [0.0, -0.3, 0.0, 0.3])
    rec = env.episode_record(0, reset_state, res)
    assert rec["total"] == res.reward.total
    assert rec["config"]["target"] == "upper_body"
    assert h.HumanModel.from_record(rec["human"]) == reset_state.human
