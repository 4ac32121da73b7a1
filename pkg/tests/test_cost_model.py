import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semcache.cost_model import (
    CostField,
    MismatchFn,
    NoiseSpec,
    SYNTHETIC_RKHS,
    TOKEN_LENGTH,
    make_rkhs_cost_field,
    mismatch,
    sample_cost,
    true_cost,
    true_cost_many,
)
from semcache.geometry import normalize


@pytest.fixture
def token_field():
    universe = np.eye(4)
    lens = np.array([3, 10, 25, 40])
    return CostField(mode=TOKEN_LENGTH, universe=universe, token_lengths=lens)


def test_max_token_length_costs_one(token_field):
    assert true_cost(token_field, np.eye(4)[3]) == pytest.approx(1.0)


def test_min_token_length_costs_floor(token_field):
    assert true_cost(token_field, np.eye(4)[0]) == pytest.approx(token_field.c_min)


def test_jittered_query_inherits_nearest_universe_cost(token_field):
    x = normalize(np.array([0.95, 0.05, 0.0, 0.0]))
    assert true_cost(token_field, x) == true_cost(token_field, np.eye(4)[0])


def test_golden_cost_vector(token_field):
    got = true_cost_many(token_field, np.eye(4))
    # (len - 3) / 37 clamped below at 0.01
    expect = np.array([0.01, 7 / 37, 22 / 37, 1.0])
    assert np.allclose(got, expect)


def test_degenerate_minmax_gives_half(caplog):
    field = CostField(mode=TOKEN_LENGTH, universe=np.eye(2), token_lengths=[5, 5])
    assert true_cost(field, np.eye(2)[0]) == 0.5


def test_sample_cost_zero_noise_is_exact(token_field):
    rng = np.random.default_rng(0)
    x = np.eye(4)[2]
    assert sample_cost(token_field, NoiseSpec(0.0), x, rng) == true_cost(token_field, x)


def test_sample_cost_mean_concentrates(token_field):
    rng = np.random.default_rng(1)
    x = np.eye(4)[2]  # c = 22/37, away from the clip boundaries
    draws = np.array(
        [sample_cost(token_field, NoiseSpec(0.1, clip=False), x, rng) for _ in range(10_000)]
    )
    assert abs(draws.mean() - true_cost(token_field, x)) < 3 * 0.1 / 100


def test_sample_cost_clipped_stays_in_unit(token_field):
    rng = np.random.default_rng(2)
    x = np.eye(4)[3]  # c = 1.0 (near the upper clip)
    draws = [sample_cost(token_field, NoiseSpec(0.5, clip=True), x, rng) for _ in range(500)]
    assert max(draws) <= 1.0 and min(draws) >= 0.0


def test_clip_bias_small_at_moderate_noise(token_field):
    # documented clipping-bias check: R <= 0.1 with c in the interior
    rng = np.random.default_rng(3)
    x = np.eye(4)[2]  # c ~ 0.595
    c = true_cost(token_field, x)
    draws = np.array(
        [sample_cost(token_field, NoiseSpec(0.1, clip=True), x, rng) for _ in range(100_000)]
    )
    assert abs(draws.mean() - c) < 1e-3


def test_mismatch_values():
    fn = MismatchFn(zeta=2.0)
    assert mismatch(fn, 0.0) == 0.0
    assert mismatch(fn, 0.6) == 1.0
    assert mismatch(fn, 0.3) == pytest.approx(0.6)


def test_mismatch_rejects_negative_distance():
    with pytest.raises(ValueError):
        mismatch(MismatchFn(1.0), -0.1)


@settings(max_examples=100, deadline=None)
@given(
    st.floats(0.1, 5.0),
    st.floats(0.0, 1.0),
    st.floats(0.0, 1.0),
)
def test_mismatch_monotone_and_lipschitz(zeta, d1, d2):
    fn = MismatchFn(zeta)
    lo, hi = sorted((d1, d2))
    assert fn(lo) <= fn(hi) + 1e-15
    assert abs(fn(d1) - fn(d2)) <= zeta * abs(d1 - d2) + 1e-12


def test_rkhs_field_positive_bounded_and_norm_within_budget():
    rng = np.random.default_rng(7)
    field, norm = make_rkhs_cost_field(dim=8, rng=rng, rkhs_norm_budget=0.9)
    assert field.mode == SYNTHETIC_RKHS
    assert norm <= 0.9 + 1e-9
    xs = normalize(rng.standard_normal((200, 8)))
    c = true_cost_many(field, xs)
    assert (c > 0.0).all() and (c <= 1.0).all()
