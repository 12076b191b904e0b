import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mccb.errors import ConfigError
from mccb.planner import backward_plan, brute_force_value, oracle_policy_value, plan_batch, sequence_values
from mccb.validate import is_unimodal

probs_st = st.floats(0.05, 0.95)
rewards_st = st.floats(0.1, 3.0)


@st.composite
def instances(draw, ordered=False):
    K = draw(st.integers(1, 4))
    H = draw(st.integers(1, 6))
    f = np.array(draw(st.lists(probs_st, min_size=K, max_size=K)))
    e = np.array(draw(st.lists(rewards_st, min_size=K, max_size=K)))
    if ordered:
        f, e = np.sort(f)[::-1], np.sort(e)
    return f, e, H


def test_terminal_step():
    plan = backward_plan([0.9, 0.5], [1.0, 2.0], 1)
    assert np.allclose(plan.q[0], [0.9, 1.0])
    assert plan.v[0] == pytest.approx(1.0)
    assert plan.best_arm.tolist() == [1]


def test_two_step_recursion():
    plan = backward_plan([0.9, 0.5], [1.0, 2.0], 2)
    assert plan.v[1] == pytest.approx(1.0)
    assert np.allclose(plan.q[0], [1.0, 1.5])
    assert plan.v[0] == pytest.approx(1.5)
    assert brute_force_value([0.9, 0.5], [1.0, 2.0], 2)[0] == pytest.approx(1.5, abs=1e-12)


def test_high_reward_first_high_probability_last():
    plan = backward_plan([0.9, 0.2], [1.0, 3.0], 2)
    assert np.allclose(plan.q[1], [0.9, 0.6])
    assert np.allclose(plan.q[0], [0.99, 1.32])
    assert plan.best_arm.tolist() == [1, 0]
    value, seq = brute_force_value([0.9, 0.2], [1.0, 3.0], 2)
    assert value == pytest.approx(plan.v[0], abs=1e-12)
    assert seq.tolist() == [1, 0]


def test_ties_break_to_lowest_index():
    plan = backward_plan([0.5, 0.5, 0.5], [1.0, 1.0, 1.0], 3)
    assert plan.best_arm.tolist() == [0, 0, 0]


@pytest.mark.parametrize("probs", [[0.0, 0.5], [0.5, 1.0], [1.2, 0.3]])
def test_rejects_boundary_probabilities(probs):
    with pytest.raises(ConfigError):
        backward_plan(probs, [1.0, 1.0], 2)


def test_rejects_zero_horizon():
    with pytest.raises(ConfigError):
        backward_plan([0.5], [1.0], 0)


@given(f=probs_st, e=rewards_st, H=st.integers(1, 8))
def test_single_arm_geometric(f, e, H):
    value, _ = brute_force_value([f], [e], H)
    assert value == pytest.approx(e * (1 - (1 - f) ** H), rel=1e-12)
    assert backward_plan([f], [e], H).v[0] == pytest.approx(value, rel=1e-12)


def test_one_shot():
    f, e = np.array([0.3, 0.8, 0.5]), np.array([2.0, 0.5, 1.0])
    assert brute_force_value(f, e, 1)[0] == pytest.approx(np.max(f * e))


def test_brute_force_guard():
    with pytest.raises(ConfigError):
        brute_force_value([0.5] * 11, [1.0] * 11, 6)


def test_oracle_policy_value_half_probabilities():
    assert oracle_policy_value([0, 1], [0.5, 0.5], [1.0, 1.0]) == pytest.approx(0.75)
    assert oracle_policy_value([1, 1], [0.5, 0.5], [1.0, 1.0]) == pytest.approx(0.75)


def test_oracle_policy_value_certain_click():
    f = np.array([1 - 1e-12, 1 - 1e-12])
    assert oracle_policy_value([1, 0, 0], f, [1.0, 2.5]) == pytest.approx(2.5, abs=1e-9)


@settings(max_examples=200, deadline=None)
@given(instances())
def test_oracle_equivalence(inst):
    f, e, H = inst
    plan = backward_plan(f, e, H)
    value, seq = brute_force_value(f, e, H)
    assert abs(plan.v[0] - value) < 1e-10
    assert abs(oracle_policy_value(plan.best_arm, f, e) - value) < 1e-10
    assert abs(oracle_policy_value(seq, f, e) - value) < 1e-10
    assert plan.v[-1] == 0.0
    assert np.allclose(plan.v[:-1], plan.q.max(axis=1), atol=0, rtol=0)
    assert np.all(plan.v[:-1] >= plan.v[1:] - 1e-12)


@settings(max_examples=200, deadline=None)
@given(instances(ordered=True))
def test_arm_switch_prose_direction(inst):
    f, e, H = inst
    plan = backward_plan(f, e, H)
    # earlier positions take weakly larger indices (high reward, low probability)
    assert np.all(np.diff(plan.best_arm) <= 0)


def test_unimodality_counterexample():
    # opposite-ordered arms whose Q row dips in the middle
    plan = backward_plan([0.9, 0.5, 0.45], [1.0, 1.0, 2.0], 1)
    assert np.allclose(plan.q[0], [0.9, 0.5, 0.9])
    assert not is_unimodal(plan.q[0])


def test_unimodal_helper():
    assert is_unimodal([1, 2, 3, 2, 1])
    assert is_unimodal([3, 2, 1])
    assert is_unimodal([1, 1, 1])
    assert not is_unimodal([2, 1, 2])
    assert not is_unimodal([3, 1, 1, 2])


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), N=st.integers(1, 6), K=st.integers(1, 4), H=st.integers(1, 5))
def test_plan_batch_matches_single(seed, N, K, H):
    rng = np.random.default_rng(seed)
    probs = rng.uniform(0.05, 0.95, (N, K))
    rewards = rng.uniform(0.1, 3.0, K)
    q, v, best = plan_batch(probs, rewards, H)
    for n in range(N):
        plan = backward_plan(probs[n], rewards, H)
        assert np.array_equal(plan.q, q[:, n, :])
        assert np.array_equal(plan.best_arm, best[:, n])
    vals = sequence_values(best.T, probs, rewards)
    assert np.allclose(vals, v[0], atol=1e-12)
