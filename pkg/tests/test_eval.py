import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bedcover import eval as ev
from bedcover.env import CoverageReport, EnvConfig
from bedcover.policy import PolicyModel


class StubTrials:
    """Outcome depends on the seed and on which randomisations are enabled."""

    def __init__(self, config=None, perfect=False):
        self.config = config or EnvConfig()
        self.perfect = perfect

    def trial(self, seed, policy):
        a = np.asarray(policy(np.zeros(12)))
        if self.perfect:
            return ev.TrialRecord(seed, 40, 0, 0, 100.0)
        r = np.random.default_rng(seed)
        tp = int(r.integers(0, 41))
        fp = int(r.integers(0, 20)) + (10 if self.config.vary_blanket else 0)
        reward = 100.0 * tp / 40 - 100.0 * fp / 200 + float(a[0])
        return ev.TrialRecord(seed, tp, fp, 40 - tp, reward)


def zero_policy(obs):
    return np.zeros(4)


def _rep(rho_t, rho_n, n_t=40, n_n=100):
    return CoverageReport(np.zeros(1, bool), rho_t, rho_n, 0, n_t, n_n, 10)


def test_perfect_report_metrics():
    tp, fp, fn = ev.metrics_from_report(_rep(40, 0))
    assert fn == 0 and ev.f1_score(tp, fp, fn) == 1.0


def test_nothing_uncovered_is_zero():
    assert ev.f1_score(*ev.metrics_from_report(_rep(0, 7))) == 0.0


def test_f1_arithmetic():
    assert ev.f1_score(30, 10, 10) == 0.75


@settings(max_examples=300, deadline=None)
@given(st.integers(1, 500), st.integers(0, 1500), st.data())
def test_metric_identities(n_t, n_n, data):
    rho_t = data.draw(st.integers(0, n_t))
    rho_n = data.draw(st.integers(0, n_n))
    tp, fp, fn = ev.metrics_from_report(_rep(rho_t, rho_n, n_t, n_n))
    assert (tp, fp, fn) == (rho_t, rho_n, n_t - rho_t)
    assert tp + fn == n_t
    f1 = ev.f1_score(tp, fp, fn)
    assert 0.0 <= f1 <= 1.0
    if tp > 0:
        assert f1 == tp / (tp + 0.5 * (fp + fn))
    else:
        assert f1 == 0.0


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 50), st.integers(0, 50), st.integers(0, 50)),
                min_size=1, max_size=20))
def test_pooled_f1_uses_summed_counts(counts):
    trials = [ev.TrialRecord(i, tp, fp, fn, 0.0) for i, (tp, fp, fn) in enumerate(counts)]
    m = ev.Metrics.from_trials(trials)
    tp, fp, fn = (sum(c[k] for c in counts) for k in range(3))
    assert (m.tp, m.fp, m.fn) == (tp, fp, fn)
    assert m.f1 == ev.f1_score(tp, fp, fn)
    assert m.f1_trial_mean == pytest.approx(np.mean([ev.f1_score(*c) for c in counts]))


def test_pooled_differs_from_per_trial_mean():
    trials = [ev.TrialRecord(0, 1, 0, 0, 0.0), ev.TrialRecord(1, 0, 0, 99, 0.0)]
    m = ev.Metrics.from_trials(trials)
    assert m.f1_trial_mean == 0.5
    assert m.f1 == pytest.approx(1 / 50.5)


def test_empty_trials_rejected():
    with pytest.raises(ValueError):
        ev.Metrics.from_trials([])


def test_perfect_stub_evaluation():
    m = ev.evaluate(zero_policy, n_trials=20, env=StubTrials(perfect=True))
    assert m.f1 == 1.0 and m.mean_reward == 100.0 and m.std_reward == 0.0
    assert len(m.trials) == 20


def test_evaluate_deterministic():
    a = ev.evaluate(zero_policy, n_trials=30, seed=5, env=StubTrials())
    b = ev.evaluate(zero_policy, n_trials=30, seed=5, env=StubTrials())
    assert a.trials == b.trials and a.f1 == b.f1
    c = ev.evaluate(zero_policy, n_trials=30, seed=6, env=StubTrials())
    assert c.trials != a.trials


def test_evaluate_population_std():
    m = ev.evaluate(zero_policy, n_trials=25, env=StubTrials())
    rewards = [t.reward for t in m.trials]
    assert m.std_reward == pytest.approx(np.std(rewards, ddof=0))


def test_evaluate_rejects_zero_trials():
    with pytest.raises(ValueError):
        ev.evaluate(zero_policy, n_trials=0, env=StubTrials())


def test_model_policy_is_deterministic():
    m = PolicyModel("ppo", rng=np.random.default_rng(1))
    p = ev.ModelPolicy(m)
    obs = np.linspace(-1, 1, 12)
    np.testing.assert_array_equal(p(obs), p(obs))


def test_original_only_matches_evaluate():
    policies = {"upper_body": zero_policy, "left_arm": zero_policy}
    rows = ev.compare_conditions(policies, conditions=["original"], n_trials=10, seed=2,
                                 env_factory=StubTrials)
    for r in rows:
        direct = ev.evaluate(zero_policy, n_trials=10, seed=2,
                             env=StubTrials(ev.condition_config(EnvConfig(), r.target, "original")))
        assert r.metrics.trials == direct.trials


def test_table_shape_and_order():
    targets = ["right_lower_leg", "left_arm", "both_lower_legs", "upper_body", "lower_body",
               "entire_body"]
    rows = ev.compare_conditions({t: zero_policy for t in targets}, n_trials=3,
                                 env_factory=StubTrials)
    assert [(r.target, r.condition) for r in rows] == [(t, c) for t in targets
                                                       for c in ev.CONDITIONS]
    csv_lines = ev.results_csv(rows).splitlines()
    assert csv_lines[0] == ",".join(ev.RESULTS_HEADER)
    assert len(csv_lines) == 1 + 18
    md = ev.results_markdown(rows).splitlines()
    assert len(md) == 2 + 6


def test_random_blanket_reported_separately():
    rows = ev.compare_conditions({"upper_body": zero_policy}, n_trials=20, env_factory=StubTrials)
    by = {r.condition: r.metrics for r in rows}
    assert by["random_blanket"].fp > by["original"].fp
    assert by["random_blanket"].f1 != by["original"].f1


def test_condition_config_flags():
    base = EnvConfig()
    c = ev.condition_config(base, "left_arm", "random_body")
    assert c.target == "left_arm" and c.vary_body and not c.vary_blanket
    with pytest.raises(ValueError):
        ev.condition_config(base, "left_arm", "upside_down")


def test_trials_csv_rows():
    m = ev.evaluate(zero_policy, n_trials=5, env=StubTrials())
    lines = ev.trials_csv(m).splitlines()
    assert lines[0] == "trial,seed,TP,FP,FN,F1,reward" and len(lines) == 6


def test_real_env_trial(default_config):
    m = ev.evaluate(lambda obs: np.array([0.0, -0.35, 0.0, 0.35]), default_config, n_trials=2,
                    seed=1)
    for t in m.trials:
        assert t.log["seed"] == t.seed and t.log["total"] == t.reward
        assert t.tp + t.fn == t.log["n_t"]
