import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from fedwtp.aggregators import (
    AggContext,
    AggregationError,
    Aggregator,
    AggregatorConfig,
    agg_faba,
    agg_flair,
    agg_fltrust,
    agg_foolsgold,
    agg_krum,
    agg_mean,
    agg_median,
    agg_trimmed_mean,
    aggregate,
    foolsgold_weights,
)
from fedwtp.aggregators.classic import krum_scores

matrices = hnp.arrays(
    np.float64,
    st.tuples(st.integers(1, 12), st.integers(1, 6)),
    elements=st.floats(-100, 100, allow_nan=False),
)


# ------------------------------------------------------------- oracles


def mean_oracle(mat):
    return [math.fsum(mat[:, d]) / mat.shape[0] for d in range(mat.shape[1])]


def median_oracle(mat):
    out = []
    for d in range(mat.shape[1]):
        col = sorted(mat[:, d])
        n = len(col)
        out.append(col[n // 2] if n % 2 else (col[n // 2 - 1] + col[n // 2]) / 2)
    return out


def trim_oracle(mat, beta):
    cut = math.floor(beta * mat.shape[0])
    out = []
    for d in range(mat.shape[1]):
        kept = sorted(mat[:, d])[cut : mat.shape[0] - cut]
        out.append(math.fsum(kept) / len(kept))
    return out


def random_instances(count, seed=0):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        k, d = int(rng.integers(1, 65)), int(rng.integers(1, 33))
        scale = 10.0 ** rng.uniform(-3, 3)
        mat = rng.normal(0, scale, (k, d))
        if rng.random() < 0.3:  # inject ties
            mat = np.round(mat / scale, 1) * scale
        yield mat


def test_coordinate_rules_match_oracles_exactly():
    for mat in random_instances(200, seed=1):
        assert agg_mean(mat).global_model.tolist() == mean_oracle(mat)
        assert agg_median(mat).global_model.tolist() == median_oracle(mat)
        beta = 0.2 if mat.shape[0] > 2 else 0.0
        assert agg_trimmed_mean(mat, beta).global_model.tolist() == trim_oracle(mat, beta)


# ---------------------------------------------------------------- mean


def test_mean_examples():
    assert agg_mean(np.array([[1.0], [3.0]])).global_model.tolist() == [2.0]
    assert agg_mean(np.array([[4.0, 5.0]])).global_model.tolist() == [4.0, 5.0]
    assert not agg_mean(np.ones((3, 2))).flags.any()


def test_median_examples():
    assert agg_median(np.array([[1.0], [2.0], [9.0]])).global_model.tolist() == [2.0]
    assert agg_median(np.array([[1.0], [3.0]])).global_model.tolist() == [2.0]


def test_trimmed_mean_examples():
    mat = np.array([[0.0], [1.0], [2.0], [3.0], [100.0]])
    out = agg_trimmed_mean(mat, 0.2)
    assert out.global_model.tolist() == [2.0]
    assert out.flags[0].tolist() == [True, False, False, False, True]
    assert agg_trimmed_mean(mat, 0.0).global_model.tolist() == agg_mean(mat).global_model.tolist()
    assert agg_trimmed_mean(np.full((7, 2), 3.5), 0.4).global_model.tolist() == [3.5, 3.5]
    with pytest.raises(AggregationError):
        agg_trimmed_mean(np.zeros((4, 1)), 0.5)


# ---------------------------------------------------------------- krum


def brute_krum_scores(mat, f):
    n = mat.shape[0]
    scores = []
    for i in range(n):
        d = sorted(float(np.sum((mat[i] - mat[j]) ** 2)) for j in range(n) if j != i)
        scores.append(sum(d[: n - f - 2]))
    return scores


def test_krum_picks_cluster_member():
    mat = np.array([[0.0, 0.0], [0.1, 0.0], [0.0, 0.1], [0.1, 0.1], [50.0, 50.0]])
    assert np.allclose(krum_scores(mat, 1), brute_krum_scores(mat, 1))
    out = agg_krum(mat, f=1)
    assert out.global_model.tolist() != [50.0, 50.0]
    assert out.flags[:, 4].all()


def test_krum_identical_and_boundary():
    mat = np.ones((4, 3))
    out = agg_krum(mat, f=1, bs_ids=[7, 3, 9, 5])
    assert out.global_model.tolist() == [1.0, 1.0, 1.0]
    assert out.weights[0, 1] == 1.0  # bs_id 3 wins the tie
    agg_krum(np.zeros((3, 1)), f=0)
    with pytest.raises(AggregationError):
        agg_krum(np.zeros((3, 1)), f=1)


# ----------------------------------------------------------- foolsgold


def test_foolsgold_sybils_get_zero_weight():
    hist = np.array([[1.0, 2.0, 0.0], [1.0, 2.0, 0.0], [0.0, 0.0, 1.0]])
    w = foolsgold_weights(hist)
    assert w[0] == 0 and w[1] == 0 and w[2] > 0


def test_foolsgold_orthogonal_equal_and_single():
    w = foolsgold_weights(np.eye(4))
    assert np.all(w == w[0]) and w[0] > 0
    out = agg_foolsgold(np.array([[3.0, 4.0]]), np.array([[1.0, 1.0]]))
    assert out.global_model.tolist() == [3.0, 4.0]


# ---------------------------------------------------------------- faba


def test_faba_examples():
    mat = np.array([[0.0], [0.0], [0.1], [100.0]])
    assert agg_faba(mat, 0.25).global_model == pytest.approx([0.1 / 3])
    assert agg_faba(mat, 0.0).global_model.tolist() == agg_mean(mat).global_model.tolist()
    tie = np.array([[-1.0], [1.0], [0.0]])
    out = agg_faba(tie, 0.34, bs_ids=[5, 2, 9])
    assert out.global_model.tolist() == [-0.5]  # bs 2 (value 1) removed first


# ------------------------------------------------------------- fltrust


def test_fltrust_examples():
    theta = np.zeros(2)
    server = np.array([1.0, 0.0])
    out = agg_fltrust(np.array([[1.0, 0.0]]), theta, server)
    assert out.global_model.tolist() == [1.0, 0.0]
    out = agg_fltrust(np.array([[2.0, 0.0], [-3.0, 0.0]]), theta, server)
    assert out.weights[0].tolist() == [1.0, 0.0]
    assert out.global_model.tolist() == [1.0, 0.0]  # rescaled to the server norm
    out = agg_fltrust(np.array([[-1.0, 0.0]]), theta, server)
    assert out.global_model.tolist() == [1.0, 0.0] and out.flags.all()


# --------------------------------------------------------------- flair


def test_flair_bootstrap_equals_mean():
    mat = np.array([[1.0, 2.0], [3.0, 6.0]])
    out, susp = agg_flair(mat, np.zeros(2), np.zeros(2), None)
    assert out.global_model.tolist() == agg_mean(mat).global_model.tolist()
    assert susp.tolist() == [0.0, 0.0]


def test_flair_persistent_opposer_decays():
    theta, prev = np.array([1.0, 1.0]), np.array([0.0, 0.0])
    mat = np.array([[2.0, 2.0], [2.0, 2.0], [0.0, 0.0]])
    susp = np.zeros(3)
    for t in range(40):
        out, susp = agg_flair(mat, susp, theta, prev)
    expected = 1 - 0.9**40
    assert susp[2] == pytest.approx(expected)
    w = out.weights[0]
    assert w[2] / w[0] == pytest.approx(np.exp(-5 * expected))


def test_flair_identical_updates():
    mat = np.full((3, 2), 0.7)
    out, _ = agg_flair(mat, np.zeros(3), np.zeros(2), np.ones(2))
    assert out.global_model == pytest.approx([0.7, 0.7])


# ------------------------------------------------------ shared contract


RULE_OPTIONS = {"krum": {"krum_f": 1}}


@pytest.mark.parametrize("rule", ["mean", "median", "trim", "krum", "foolsgold", "faba", "fltrust", "flair", "glid"])
def test_outcome_contract(rule, rng):
    mat = rng.normal(0, 1, (8, 5))
    theta = rng.normal(0, 1, 5)
    ctx = AggContext(np.arange(8), 1, theta, theta - 0.1, theta + rng.normal(0, 1, 5))
    out = aggregate(rule, mat, ctx, **RULE_OPTIONS.get(rule, {}))
    assert out.global_model.shape == (5,)
    assert out.flags.shape == out.weights.shape == (5, 8)
    assert np.all(out.weights[out.flags] == 0)
    assert np.all(out.weights.sum(axis=1) > 0)
    assert np.all(out.weights >= 0)


@settings(max_examples=60, deadline=None)
@given(matrices, st.randoms(use_true_random=False))
def test_order_invariance(mat, random):
    if mat.shape[0] < 3:
        mat = np.vstack([mat, mat + 1.0, mat - 2.0])
    perm = list(range(mat.shape[0]))
    random.shuffle(perm)
    for rule in ("mean", "median", "trim", "faba", "glid"):
        a = aggregate(rule, mat).global_model
        b = aggregate(rule, mat[perm]).global_model
        assert a.tobytes() == b.tobytes(), rule


@pytest.mark.parametrize("rule", ["median", "trim", "krum", "faba", "glid", "foolsgold", "flair"])
def test_unanimity(rule):
    u = np.array([0.25, -1.5, 3.0])
    ctx = AggContext(np.arange(3), 0, np.zeros(3), None, None, 0)
    out = aggregate(rule, np.tile(u, (3, 1)), ctx, **({"krum_f": 0} if rule == "krum" else {}))
    assert out.global_model == pytest.approx(u, abs=1e-15)


def test_aggregator_rejects_bad_input():
    agg = Aggregator(AggregatorConfig(kind="mean"))
    with pytest.raises(AggregationError):
        agg(np.array([[np.nan]]), AggContext(np.arange(1)))
    with pytest.raises(AggregationError):
        AggregatorConfig(kind="bogus")
    with pytest.raises(AggregationError):
        aggregate("glid", np.ones((1, 2)))


def test_foolsgold_history_is_keyed_by_bs_id(rng):
    agg = Aggregator(AggregatorConfig(kind="foolsgold"))
    theta = np.zeros(3)
    mat = rng.normal(0, 1, (4, 3))
    agg(mat, AggContext(np.array([0, 1, 2, 3]), 0, theta))
    agg(mat[::-1], AggContext(np.array([3, 2, 1, 0]), 1, theta))
    assert np.allclose(agg.histories[0], 2 * mat[0])
