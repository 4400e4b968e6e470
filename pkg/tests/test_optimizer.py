import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mnemo.errors import EmptySequence, LengthMismatch, OutOfRange
from mnemo.fixtures import load_fixture
from mnemo.optimizer import (
    ClipSchedule,
    OptimizationBatch,
    SequenceLogProbs,
    adaptive_epsilon,
    clipped_ratio,
    group_advantages,
    grpo_logp_gradient,
    grpo_objective,
    kl_per_token,
    sft_loss,
)
from mnemo.toy import ToyProblem, ToySequence, ToySoftmaxPolicy, random_problem, toy_policy_gradient_check

from .oracles import scalar_advantages, scalar_grpo_objective, scalar_sft_loss


def seq(logp, old=None, ref=None, reward=0.0):
    return SequenceLogProbs(logp, logp if old is None else old, logp if ref is None else ref, reward)


def test_sft_loss_examples():
    assert abs(sft_loss([[math.log(0.5)] * 2]) - math.log(2)) < 1e-15
    assert sft_loss([[0.0, 0.0]]) == 0.0
    data = [[-0.3], [-1.0, -0.5, -2.25]]
    assert abs(sft_loss(data) - scalar_sft_loss(data)) < 1e-15
    with pytest.raises(EmptySequence):
        sft_loss([])
    with pytest.raises(EmptySequence):
        sft_loss([[]])


def test_advantage_examples():
    assert group_advantages([1, 0]).tolist() == [1.0, -1.0]
    assert group_advantages([0.5, 0.5, 0.5]).tolist() == [0, 0, 0]
    assert group_advantages([3.0]).tolist() == [0.0]
    np.testing.assert_allclose(group_advantages([2, 4, 6, 8]), [-1.341641, -0.447214, 0.447214, 1.341641], atol=1e-6)
    np.testing.assert_allclose(group_advantages([2, 4, 6, 8]), scalar_advantages([2, 4, 6, 8]), atol=1e-15)


@given(st.lists(st.floats(-100, 100), min_size=2, max_size=64), st.floats(-50, 50))
def test_advantages_shift_invariant(rewards, c):
    a = group_advantages(rewards)
    b = group_advantages([r + c for r in rewards])
    if np.std(rewards) > 1e-6:
        np.testing.assert_allclose(a, b, atol=1e-9)


def test_epsilon_schedule_examples():
    assert adaptive_epsilon(0, 100, 0.4, 0.2) == 0.4
    assert adaptive_epsilon(100, 100, 0.4, 0.2) == 0.2
    assert abs(adaptive_epsilon(50, 100, 0.4, 0.2) - 0.3) < 1e-12
    with pytest.raises(OutOfRange):
        adaptive_epsilon(101, 100, 0.4, 0.2)
    with pytest.raises(OutOfRange):
        adaptive_epsilon(-1, 100, 0.4, 0.2)


@given(st.floats(0, 1), st.floats(0, 1), st.floats(0.01, 0.5), st.floats(0, 0.5))
def test_epsilon_monotone_and_bounded(u, v, end, extra):
    lo, hi = sorted([u, v])
    a, b = adaptive_epsilon(lo * 10, 10, end + extra, end), adaptive_epsilon(hi * 10, 10, end + extra, end)
    assert a >= b
    assert end - 1e-15 <= b <= end + extra + 1e-15


def test_clipped_ratio_examples():
    assert clipped_ratio(1.0, 0.2, 0.3) == 1.0
    assert abs(clipped_ratio(1.5, 0.2, 0.3) - 1.3) < 1e-15
    assert abs(clipped_ratio(0.5, 0.2, 0.3) - 0.8) < 1e-15


def test_kl_examples():
    assert kl_per_token(-1.0, -1.0) == 0.0
    assert abs(kl_per_token(-1.0, -1.0 + math.log(2)) - (2 - math.log(2) - 1)) < 1e-12
    assert abs(kl_per_token(-1.0, -1.0 + math.log(2)) - 0.306853) < 1e-6


@given(st.floats(-30, 0), st.floats(-30, 0))
def test_kl_non_negative(a, b):
    v = kl_per_token(a, b)
    assert v >= 0
    if a == b:
        assert v == 0


def test_objective_examples():
    same = OptimizationBatch(((seq([-1.0, -2.0], reward=1.0), seq([-0.5], reward=1.0)),))
    assert grpo_objective(same).objective == 0.0
    single = OptimizationBatch(((seq([-1.0, -2.0], ref=[-1.5, -1.0], reward=3.0),),), beta=0.04)
    expected = -0.04 * (kl_per_token(-1.0, -1.5) + kl_per_token(-2.0, -1.0)) / 2
    assert abs(grpo_objective(single).objective - expected) < 1e-15


def test_objective_two_by_two_matches_scalar_reference():
    d = {
        "groups": [[
            {"logp": [-0.5, -1.25], "logp_old": [-0.75, -1.0], "logp_ref": [-0.5, -1.5], "reward": 1.0},
            {"logp": [-2.0, -0.25], "logp_old": [-1.5, -0.5], "logp_ref": [-2.25, -0.25], "reward": 0.0},
        ]],
        "beta": 0.04, "eps_low": 0.2, "eps_init": 0.4, "eps_end": 0.2, "k": 30, "K": 100,
    }
    g = tuple(SequenceLogProbs(s["logp"], s["logp_old"], s["logp_ref"], s["reward"]) for s in d["groups"][0])
    batch = OptimizationBatch((g,), 0.04, ClipSchedule(0.2, 0.4, 0.2, 100), 30)
    assert abs(grpo_objective(batch).objective - scalar_grpo_objective(d)) < 1e-12


def test_objective_reduces_to_advantage_mean_without_kl():
    g = (seq([-1.0, -2.0, -0.5], reward=1.0), seq([-0.1], reward=0.0), seq([-3.0, -1.0], reward=0.25))
    res = grpo_objective(OptimizationBatch((g,), beta=0.0))
    adv = group_advantages([1.0, 0.0, 0.25])
    expected = float(np.sum(np.array([3, 1, 2]) * adv)) / 6
    assert res.objective == pytest.approx(expected, abs=1e-15)
    for terms, a in zip(res.groups[0].token_terms, adv):
        assert np.all(terms == a)


def test_sequence_validation():
    with pytest.raises(LengthMismatch):
        SequenceLogProbs([-1.0], [-1.0, -2.0], [-1.0])
    with pytest.raises(ValueError):
        SequenceLogProbs([0.5], [-1.0], [-1.0])
    with pytest.raises(EmptySequence):
        SequenceLogProbs([], [], [])
    with pytest.raises(OutOfRange):
        OptimizationBatch(((seq([-1.0]),),), k=101)


def test_fixture_batches_match_scalar_reference():
    cases = load_fixture("optimizer-batches")
    assert len(cases) == 20
    for case in cases:
        assert abs(case.expected_objective - scalar_grpo_objective(case.raw)) < 1e-15
        assert abs(grpo_objective(case.batch).objective - case.expected_objective) < 1e-9


def test_gradient_checks_small():
    rng = np.random.default_rng(0)
    for _ in range(5):
        p = random_problem(rng)
        assert toy_policy_gradient_check(p, 1e-5, "sft") < 1e-4
        assert toy_policy_gradient_check(p, 1e-5, "grpo") < 1e-4


def test_clipped_branch_has_zero_surrogate_gradient():
    # current policy far above the old one: ratio > 1 + eps for every token, positive advantage
    g = (SequenceLogProbs([-0.1, -0.2], [-2.0, -2.0], [-0.1, -0.2], 1.0), SequenceLogProbs([-0.1], [-0.1], [-0.1], 0.0))
    grads = grpo_logp_gradient(OptimizationBatch((g,), beta=0.0))
    assert np.all(grads[0][0] == 0.0)
    # negative advantage with ratio below 1 - eps_low: also clipped and flat
    g = (SequenceLogProbs([-3.0], [-0.5], [-3.0], 0.0), SequenceLogProbs([-0.1], [-0.1], [-0.1], 1.0))
    grads = grpo_logp_gradient(OptimizationBatch((g,), beta=0.0))
    assert grads[0][0][0] == 0.0
