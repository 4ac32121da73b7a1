import math

import numpy as np
import pytest

from semcache.cost_model import make_rkhs_cost_field, true_cost_many
from semcache.geometry import normalize
from semcache.krr import (
    JITTER,
    ConfidenceSpec,
    KernelSpec,
    KrrModel,
    KrrNumericError,
    OFFLINE_PESSIMISTIC,
    ONLINE_OPTIMISTIC,
    optimism_multiplier,
    optimistic_cost,
    pessimistic_cost,
    pessimistic_costs_many,
)


def batch_posterior(kernel, ridge, X, y, probes):
    """Independent oracle: direct dense solve of the Gram system."""
    K = kernel.cross(X, X)
    A = K + (ridge + JITTER) * np.eye(X.shape[0])
    kp = kernel.cross(probes, X)
    means = kp @ np.linalg.solve(A, y)
    var = 1.0 - np.einsum("ij,ji->i", kp, np.linalg.solve(A, kp.T))
    return means, np.sqrt(np.clip(var, 0.0, None))


def random_model(rng, n_obs=25, dim=6, ridge=1.0, length_scale=0.5):
    kernel = KernelSpec(length_scale, 1.0)
    model = KrrModel(kernel, ridge=ridge)
    X = normalize(rng.standard_normal((n_obs, dim)))
    y = rng.random(n_obs)
    for i in range(n_obs):
        model.append_observation(X[i], y[i])
    return model, kernel, X, y


def test_empty_model_returns_prior():
    model = KrrModel(KernelSpec(0.5, 1.0))
    mean, sigma = model.posterior(np.array([1.0, 0.0]))
    assert (mean, sigma) == (0.0, 1.0)


def test_single_observation_hand_solved():
    # one observation (z, y) queried at x = z with lambda = 1: the 1x1 system
    # (K + I) = 2 gives mean y/2 and variance 1 - 1/2
    model = KrrModel(KernelSpec(0.5, 1.0), ridge=1.0)
    z = np.array([1.0, 0.0])
    model.append_observation(z, 0.8)
    mean, sigma = model.posterior(z)
    assert mean == pytest.approx(0.4, abs=1e-9)
    assert sigma == pytest.approx(math.sqrt(0.5), abs=1e-9)


def test_far_query_returns_prior():
    model = KrrModel(KernelSpec(0.05, 1.0), ridge=1.0)
    model.append_observation(np.array([1.0, 0.0]), 0.5)
    mean, sigma = model.posterior(np.array([-1.0, 0.0]))  # kappa ~ exp(-800)
    assert mean == pytest.approx(0.0, abs=1e-12)
    assert sigma == pytest.approx(1.0, abs=1e-12)


def test_incremental_matches_batch_everywhere():
    rng = np.random.default_rng(0)
    model, kernel, X, y = random_model(rng, n_obs=40)
    probes = normalize(rng.standard_normal((10, 6)))
    bm, bs = batch_posterior(kernel, model.ridge, X, y, probes)
    im, isg = model.posterior_many(probes)
    assert np.abs(bm - im).max() < 1e-8
    assert np.abs(bs - isg).max() < 1e-8


def test_tracked_points_match_fresh_posterior():
    rng = np.random.default_rng(1)
    kernel = KernelSpec(0.5, 1.0)
    model = KrrModel(kernel, ridge=1.0)
    probes = normalize(rng.standard_normal((7, 5)))
    for p in probes[:4]:
        model.track_point(p)
    X = normalize(rng.standard_normal((30, 5)))
    y = rng.random(30)
    for i in range(20):
        model.append_observation(X[i], y[i])
    for p in probes[4:]:
        model.track_point(p)  # added mid-stream
    for i in range(20, 30):
        model.append_observation(X[i], y[i])
    tm, ts = model.tracked_posterior()
    fm, fs = model.posterior_many(probes)
    assert np.abs(tm - fm).max() < 1e-8
    assert np.abs(ts - fs).max() < 1e-8


def test_variance_contraction_on_every_append():
    rng = np.random.default_rng(2)
    kernel = KernelSpec(0.5, 1.0)
    model = KrrModel(kernel, ridge=1.0)
    probes = normalize(rng.standard_normal((8, 4)))
    X = normalize(rng.standard_normal((25, 4)))
    prev = np.ones(8)
    for i in range(25):
        model.append_observation(X[i], float(rng.random()))
        _, sig = model.posterior_many(probes)
        assert (sig <= prev + 1e-10).all()
        prev = sig


def test_duplicate_appends_strictly_shrink_sigma():
    model = KrrModel(KernelSpec(0.5, 1.0), ridge=1.0)
    z = np.array([0.0, 1.0])
    model.append_observation(z, 0.3)
    _, s1 = model.posterior(z)
    model.append_observation(z, 0.35)
    _, s2 = model.posterior(z)
    assert s2 < s1 < 1.0


def test_info_gain_first_observation():
    model = KrrModel(KernelSpec(0.5, 1.0), ridge=1.0)
    model.append_observation(np.array([1.0, 0.0]), 0.2)
    assert model.info_gain == pytest.approx(0.5 * math.log(2.0), abs=1e-12)


def test_info_gain_matches_logdet_recomputation():
    rng = np.random.default_rng(3)
    model, *_ = random_model(rng, n_obs=35)
    assert model.info_gain == pytest.approx(model.info_gain_from_scratch(), abs=1e-6)


def test_interpolation_limit_small_ridge():
    rng = np.random.default_rng(4)
    kernel = KernelSpec(0.5, 1.0)
    model = KrrModel(kernel, ridge=1e-8)
    X = normalize(rng.standard_normal((12, 6)))
    field, _ = make_rkhs_cost_field(6, rng)
    y = true_cost_many(field, X)  # noiseless smooth target
    for i in range(12):
        model.append_observation(X[i], y[i])
    means, _ = model.posterior_many(X)
    assert np.abs(means - y).max() < 1e-4


def test_geometric_width_bound_at_negligible_ridge():
    # projection bound sigma <= min(sqrt(2), sqrt(2) r / ell_k): valid in the
    # ridge-free limit (any positive ridge adds +ridge to sigma^2, e.g.
    # sigma(z) = sqrt(ridge/(1+ridge)) > 0 at r = 0), so check near zero ridge
    rng = np.random.default_rng(5)
    checked = 0
    for trial in range(40):
        dim = int(rng.integers(2, 8))
        lk = float(rng.uniform(0.2, 1.5))
        kernel = KernelSpec(lk, 1.0)
        model = KrrModel(kernel, ridge=1e-9)
        X = normalize(rng.standard_normal((int(rng.integers(1, 12)), dim)))
        for row in X:
            model.append_observation(row, float(rng.random()))
        probes = normalize(rng.standard_normal((25, dim)))
        _, sig = model.posterior_many(probes)
        # r is the raw Euclidean distance to the nearest observation
        diff = probes[:, None, :] - X[None, :, :]
        r = np.sqrt((diff**2).sum(-1)).min(axis=1)
        bound = np.minimum(math.sqrt(2.0), math.sqrt(2.0) * r / lk)
        assert (sig <= bound + 1e-6).all()
        checked += probes.shape[0]
    assert checked == 1000


def test_non_finite_observation_rejected():
    model = KrrModel(KernelSpec(0.5, 1.0))
    with pytest.raises(KrrNumericError):
        model.append_observation(np.array([1.0, 0.0]), float("nan"))


# ---------- confidence-adjusted costs ----------


def test_pessimistic_cost_with_zero_sigma_is_mean():
    rng = np.random.default_rng(6)
    model, kernel, X, y = random_model(rng, n_obs=5, ridge=1e-9)
    conf = ConfidenceSpec(1.0, 0.1, 0.1, OFFLINE_PESSIMISTIC)
    x = X[0]  # observed point at negligible ridge: sigma ~ 0
    mean, sigma = model.posterior(x)
    assert sigma < 1e-4
    assert pessimistic_cost(model, conf, x, m=5) == pytest.approx(mean, abs=1e-3)


def test_pessimistic_cost_empty_model_is_clamped_bound():
    model = KrrModel(KernelSpec(0.5, 1.0))
    conf = ConfidenceSpec(2.0, 0.1, 0.1, OFFLINE_PESSIMISTIC)
    assert pessimistic_cost(model, conf, np.array([1.0, 0.0]), m=3) == 1.0


def test_pessimistic_radius_hand_computed():
    # ell = 1, lambda = 1, B = 1, m = 2, delta = 0.1:
    # Delta = (1 + sqrt(log 40)) * sigma with sigma = sqrt(1/2)
    model = KrrModel(KernelSpec(0.5, 1.0), ridge=1.0)
    z = np.array([1.0, 0.0])
    model.append_observation(z, 0.4)
    conf = ConfidenceSpec(1.0, 0.1, 0.1, OFFLINE_PESSIMISTIC)
    got = pessimistic_cost(model, conf, z, m=2)
    sigma = math.sqrt(0.5)
    expect = 0.2 + (1.0 + math.sqrt(math.log(40.0))) * sigma
    assert got == pytest.approx(expect, abs=1e-9)


def test_pessimistic_many_matches_scalar():
    rng = np.random.default_rng(8)
    model, kernel, X, y = random_model(rng, n_obs=15)
    conf = ConfidenceSpec(1.0, 0.1, 0.05, OFFLINE_PESSIMISTIC)
    probes = normalize(rng.standard_normal((6, 6)))
    batch = pessimistic_costs_many(model, conf, probes, m=10)
    single = [pessimistic_cost(model, conf, p, m=10) for p in probes]
    assert np.allclose(batch, single)


def test_optimistic_cost_no_data_is_minus_bound():
    model = KrrModel(KernelSpec(0.5, 1.0))
    conf = ConfidenceSpec(1.5, 0.1, 0.05, ONLINE_OPTIMISTIC)
    assert optimistic_cost(model, conf, np.array([0.0, 1.0])) == pytest.approx(-1.5)


def test_optimistic_cost_zero_sigma_is_mean():
    rng = np.random.default_rng(9)
    model, kernel, X, y = random_model(rng, n_obs=5, ridge=1e-9)
    conf = ConfidenceSpec(1.0, 0.1, 0.05, ONLINE_OPTIMISTIC)
    mean, sigma = model.posterior(X[0])
    assert optimistic_cost(model, conf, X[0]) == pytest.approx(mean, abs=1e-3)


def test_mode_enforcement():
    model = KrrModel(KernelSpec(0.5, 1.0))
    off = ConfidenceSpec(1.0, 0.1, 0.05, OFFLINE_PESSIMISTIC)
    on = ConfidenceSpec(1.0, 0.1, 0.05, ONLINE_OPTIMISTIC)
    with pytest.raises(ValueError):
        optimistic_cost(model, off, np.array([1.0, 0.0]))
    with pytest.raises(ValueError):
        pessimistic_cost(model, on, np.array([1.0, 0.0]), m=1)


def test_optimism_multiplier_growth():
    conf = ConfidenceSpec(1.0, 0.1, 0.05, ONLINE_OPTIMISTIC)
    assert optimism_multiplier(conf, 0.0, 0) == 1.0  # bare B before any data
    b1 = optimism_multiplier(conf, 1.0, 5)
    b2 = optimism_multiplier(conf, 4.0, 9)
    assert 1.0 < b1 < b2


def test_diagnostic_snapshot_fields():
    rng = np.random.default_rng(10)
    model, *_ = random_model(rng, n_obs=8)
    snap = model.diagnostic_snapshot(normalize(rng.standard_normal((3, 6))))
    assert snap["count"] == 8
    assert len(snap["probe_sigmas"]) == 3
