import dataclasses
import inspect

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from fedwtp.attacks import (
    AttackConfigError,
    BaselineAttackConfig,
    CompromisedKnowledge,
    FtiConfig,
    GlobalKnowledge,
    fti_craft,
    history_attack,
    mpaf_attack,
    random_attack,
    trim_attack,
    zheng_attack,
)

vectors = hnp.arrays(np.float64, 6, elements=st.floats(-10, 10, allow_nan=False))


def reference_fti(theta, base, eta, rounds):
    """Line-by-line transcription of the fake-model search, in plain Python."""
    step = eta
    pre_dist = -1
    trace = []
    model = None
    for _ in range(rounds):
        model = [eta * b - (eta - 1) * t for b, t in zip(base, theta)]
        dist = sum((m - t) ** 2 for m, t in zip(model, theta)) ** 0.5
        trace.append((eta, dist))
        if pre_dist < dist:
            eta = eta + step / 2
        else:
            eta = eta - step / 2
        step = step / 2
        pre_dist = dist
    return model, eta, trace


# ----------------------------------------------------------------- FTI


def test_fti_hand_trace_r5_eta10():
    res = fti_craft(np.array([1.0]), FtiConfig(np.zeros(1), eta0=10.0, iterations=5))
    assert [eta for eta, _ in res.trace] == [10.0, 15.0, 17.5, 18.75, 19.375]
    # the distance to theta is eta*|theta - base| = eta here
    assert [d for _, d in res.trace] == [10.0, 15.0, 17.5, 18.75, 19.375]
    assert res.eta_final == 19.6875
    assert res.params.tolist() == [-18.375]


def test_fti_first_iteration_raises_eta_by_half_step():
    res = fti_craft(np.array([0.3, -2.0]), FtiConfig(np.zeros(2), eta0=10.0, iterations=1))
    assert res.eta_final == 15.0 and res.step_final == 5.0


@settings(max_examples=60)
@given(vectors, vectors, st.floats(0.5, 50), st.integers(1, 12))
def test_fti_matches_reference_transcription(theta, base, eta0, rounds):
    res = fti_craft(theta, FtiConfig(base, eta0=eta0, iterations=rounds))
    model, eta, trace = reference_fti(theta.tolist(), base.tolist(), eta0, rounds)
    assert res.eta_final == pytest.approx(eta, rel=1e-12)
    assert np.allclose(res.params, model, rtol=1e-12, atol=1e-9)
    assert [e for e, _ in res.trace] == pytest.approx([e for e, _ in trace], rel=1e-12)


@given(st.integers(0, 40), st.sampled_from([10.0, 1.0, 3.0, 0.7]))
def test_fti_step_halves_exactly(rounds, eta0):
    res = fti_craft(np.array([1.0, 2.0]), FtiConfig(np.zeros(2), eta0=eta0, iterations=rounds))
    assert res.step_final == eta0 * 2.0**-rounds
    if rounds:
        assert abs(res.eta_final - eta0) < eta0


def test_fti_fixed_points():
    theta = np.array([1.0, -2.0, 3.0])
    assert np.array_equal(fti_craft(theta, FtiConfig(theta.copy(), 10.0, 5)).params, theta)
    base = np.array([4.0, 5.0, 6.0])
    assert np.array_equal(fti_craft(theta, FtiConfig(base, eta0=1.0, iterations=0)).params, base)
    assert np.array_equal(fti_craft(theta, FtiConfig(base, eta0=0.0, iterations=0)).params, theta)
    assert np.array_equal(fti_craft(theta, FtiConfig(base, eta0=0.0, iterations=5)).params, theta)


def test_fti_requires_base_model():
    with pytest.raises(AttackConfigError):
        fti_craft(np.zeros(2), FtiConfig(None))
    with pytest.raises(AttackConfigError):
        FtiConfig(np.zeros(2), eta0=-1.0)


# ----------------------------------------------------------- baselines


def test_trim_direction_examples():
    cfg = BaselineAttackConfig(trim_jitter=0.0)
    (out,) = trim_attack([np.array([1.0]), np.array([3.0])], np.array([0.0]), cfg)
    assert out[0] < 1.0
    (out,) = trim_attack([np.array([-1.0]), np.array([-3.0])], np.array([0.0]), cfg)
    assert out[0] > -1.0
    # no movement counts as positive
    (out,) = trim_attack([np.array([2.0])], np.array([2.0]), cfg)
    assert out[0] == 1.0


def test_trim_single_compromised_opposes_itself():
    cfg = BaselineAttackConfig(trim_jitter=0.0)
    own = np.array([0.5, -0.5])
    (out,) = trim_attack([own], np.zeros(2), cfg)
    assert out[0] < own[0] and out[1] > own[1]


def test_trim_copies_are_jittered_not_identical():
    cfg = BaselineAttackConfig()
    known = [np.array([1.0, 2.0]), np.array([1.5, 2.5])]
    copies = trim_attack(known, np.zeros(2), cfg, count=3, rng=np.random.default_rng(0))
    assert len({c.tobytes() for c in copies}) == 3
    target = np.array([0.5, 1.0])  # min - 0.5*|min|
    for c in copies:
        assert np.all(np.abs(c - target) <= 0.01 * 0.5 * np.array([1.0, 2.0]) + 1e-15)


def test_history_examples():
    hist = (np.array([0.0]), np.array([1.0]))
    k = GlobalKnowledge(round=1, initial=hist[0], current=hist[1], history=hist)
    assert history_attack(k, BaselineAttackConfig(scaling_factor=1.0)).tolist() == [0.0]
    assert history_attack(k, BaselineAttackConfig(scaling_factor=1000.0)).tolist() == [-999.0]
    flat = GlobalKnowledge(round=1, initial=np.ones(1), current=np.ones(1), history=(np.ones(1), np.ones(1)))
    assert history_attack(flat, BaselineAttackConfig()).tolist() == [1.0]


def test_history_before_lag_uses_initial():
    k = GlobalKnowledge(round=1, initial=np.array([5.0]), current=np.array([1.0]), history=(np.array([5.0]), np.array([1.0])))
    cfg = BaselineAttackConfig(scaling_factor=1.0, history_lag=3)
    assert history_attack(k, cfg).tolist() == [5.0]


def test_random_attack():
    cfg = BaselineAttackConfig(scaling_factor=1000.0, gaussian_std=0.0)
    assert not random_attack(5, cfg, 1).any()
    cfg = BaselineAttackConfig(scaling_factor=1000.0, gaussian_std=1.5)
    assert np.array_equal(random_attack(5, cfg, 7), random_attack(5, cfg, 7))
    draws = random_attack(100_000, cfg, 3)
    assert abs(draws.std() / 1500.0 - 1) < 0.02


def test_mpaf_examples():
    cfg = BaselineAttackConfig(scaling_factor=1000.0)
    assert mpaf_attack(np.array([0.0]), np.array([2.0]), cfg).tolist() == [-1998.0]
    assert mpaf_attack(np.array([3.0]), np.array([3.0]), cfg).tolist() == [3.0]
    assert mpaf_attack(np.array([0.5]), np.array([9.0]), BaselineAttackConfig(scaling_factor=1.0)).tolist() == [0.5]


def test_zheng_examples():
    cfg = BaselineAttackConfig(zheng_scale=1.0)
    (out,) = zheng_attack([lambda th: th + 0.2], np.array([1.0]), np.array([0.5]), cfg)
    assert out[0] == pytest.approx(0.3, abs=1e-15)
    (out,) = zheng_attack([lambda th: th + 0.2], np.array([1.0]), np.array([0.5]), BaselineAttackConfig(zheng_scale=0.0))
    assert out.tolist() == [1.0]
    (out,) = zheng_attack([lambda th: th.copy()], np.array([1.0]), None, cfg)
    assert out.tolist() == [1.0]


def test_global_only_attacks_cannot_see_benign_updates():
    fields = {f.name for f in dataclasses.fields(GlobalKnowledge)}
    assert not fields & {"own_updates", "own_trainers", "updates", "datasets"}
    assert {"own_updates", "own_trainers"} <= {f.name for f in dataclasses.fields(CompromisedKnowledge)}
    for fn in (history_attack, random_attack, mpaf_attack, fti_craft):
        params = set(inspect.signature(fn).parameters)
        assert not params & {"known_updates", "own_trainers", "updates", "data"}


def test_baseline_config_validation():
    with pytest.raises(AttackConfigError):
        BaselineAttackConfig(scaling_factor=0.0)
    with pytest.raises(AttackConfigError):
        BaselineAttackConfig(history_lag=0)
