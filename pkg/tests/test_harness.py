import numpy as np
import pytest

from semcache import harness
from semcache.cache_core import DiscreteInstance, brute_force_oracle
from semcache.cost_model import MismatchFn
from semcache.geometry import normalize
from semcache.harness import (
    ExperimentSpec,
    SpecError,
    comparator_cache,
    compute_regret_series,
    compute_suboptimality,
    run_experiment,
)
from semcache.workload import ArrivalTruth, SyntheticSpec

FN = MismatchFn(1.0)


def small_workload(stream_seed=900):
    return SyntheticSpec(
        universe_size_m=12, d_e=16, jitter_sigma=0.03, universe_seed=4, stream_seed=stream_seed
    )


def make_truth(m, rng):
    w = rng.dirichlet(np.ones(m))
    return ArrivalTruth("SYNTHETIC_ANALYTIC", w, np.zeros(m), 10_000)


def test_suboptimality_zero_for_identical_caches():
    rng = np.random.default_rng(0)
    centers = normalize(rng.standard_normal((6, 8)))
    truth = make_truth(6, rng)
    costs = rng.uniform(0.1, 1.0, 6)
    cache = centers[:2]
    assert compute_suboptimality(cache, cache, centers, truth, costs, FN, alpha=1.0) == 0.0


def test_suboptimality_nonnegative_against_brute_force():
    rng = np.random.default_rng(1)
    for _ in range(20):
        centers = normalize(rng.standard_normal((7, 6)))
        truth = make_truth(7, rng)
        costs = rng.uniform(0.05, 1.0, 7)
        comp_pts, _ = comparator_cache(centers, truth, costs, FN, k=2)
        # any other cache drawn from the same candidates cannot beat it
        pick = rng.choice(7, size=2, replace=False)
        gap = compute_suboptimality(centers[pick], comp_pts, centers, truth, costs, FN, 1.0)
        assert gap >= -1e-12


def test_comparator_uses_brute_force_when_small():
    rng = np.random.default_rng(2)
    centers = normalize(rng.standard_normal((6, 5)))
    truth = make_truth(6, rng)
    costs = rng.uniform(0.05, 1.0, 6)
    pts, loss = comparator_cache(centers, truth, costs, FN, k=2)
    inst = DiscreteInstance(centers, truth.weights, costs, FN)
    bf = brute_force_oracle(inst, 2)
    assert loss == pytest.approx(bf.loss)


def test_regret_series_flattens_after_convergence():
    # policy that sits on the comparator cache and never switches again:
    # regret reduces to the one-off switching payment
    T = 50
    losses = np.full(T, 0.3)
    payments = np.zeros(T)
    payments[0] = 0.7
    cum, avg = compute_regret_series(losses, payments, comparator_loss=0.3, alpha=1.0)
    assert cum[0] == pytest.approx(0.7)
    assert cum[-1] == pytest.approx(0.7)
    assert avg[-1] == pytest.approx(0.7 / T)


def test_regret_series_length_mismatch():
    with pytest.raises(SpecError):
        compute_regret_series(np.zeros(5), np.zeros(4), 0.1)


def test_spec_validation_errors():
    with pytest.raises(SpecError):
        ExperimentSpec(setting="BOTH", policies=["lfu"], seeds=[0], workload=small_workload())
    with pytest.raises(SpecError):
        ExperimentSpec(setting="ONLINE", policies=["lfu"], seeds=[], workload=small_workload())
    with pytest.raises(SpecError):
        ExperimentSpec(setting="OFFLINE", policies=["clcb_ls_cont"], seeds=[0],
                       workload=small_workload())
    with pytest.raises(SpecError):
        ExperimentSpec(setting="ONLINE", policies=["lfu"], seeds=[0])  # no workload


def _tiny_online_spec(**kw):
    base = dict(
        setting="ONLINE",
        policies=["clcb_ls_cont", "lfu"],
        seeds=[0, 1],
        workload=small_workload(),
        eps_grid=[0.4],
        k_grid=[2, 3],
        horizon_T=80,
        weight_samples=4000,
    )
    base.update(kw)
    return ExperimentSpec(**base)


def test_run_experiment_row_counts(tmp_path):
    spec = _tiny_online_spec()
    records, failures = run_experiment(spec, tmp_path, seed_offset=0)
    assert failures == []
    # 2 cells x 2 seeds x 2 policies
    assert len(records) == 8
    results = (tmp_path / "results.csv").read_text().strip().splitlines()
    assert len(results) == 1 + 8
    aggregates = (tmp_path / "aggregates.csv").read_text().strip().splitlines()
    assert len(aggregates) == 1 + 4  # 2 cells x 2 policies
    assert (tmp_path / "manifest.json").exists()
    assert (tmp_path / "timings.csv").exists()


def test_paired_streams_share_arrival_checksum(tmp_path):
    spec = _tiny_online_spec()
    records, _ = run_experiment(spec, tmp_path, seed_offset=0)
    by_cell_seed = {}
    for r in records:
        key = (tuple(sorted(r.cell.items())), r.seed)
        by_cell_seed.setdefault(key, set()).add(r.extra["arrival_checksum"])
    for checks in by_cell_seed.values():
        assert len(checks) == 1


def test_rerun_is_byte_identical(tmp_path):
    spec = _tiny_online_spec()
    run_experiment(spec, tmp_path / "a", seed_offset=0)
    run_experiment(spec, tmp_path / "b", seed_offset=0)
    for name in ("results.csv", "aggregates.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_seed_offset_changes_streams(tmp_path):
    spec = _tiny_online_spec(seeds=[0])
    run_experiment(spec, tmp_path / "a", seed_offset=0)
    run_experiment(spec, tmp_path / "b", seed_offset=17)
    assert (tmp_path / "a" / "results.csv").read_bytes() != (tmp_path / "b" / "results.csv").read_bytes()


def test_offline_cell_runs_all_policies(tmp_path):
    spec = ExperimentSpec(
        setting="OFFLINE",
        policies=["cucb_cont", "lfu", "greedy", "eps_greedy", "discrete_cucb"],
        seeds=[0],
        workload=small_workload(),
        eps_grid=[0.4],
        n_grid=[120],
        k_grid=[3],
        weight_samples=4000,
    )
    records, failures = run_experiment(spec, tmp_path, seed_offset=0)
    assert failures == []
    assert {r.policy for r in records} == set(spec.policies)
    comp = {r.comparator_loss for r in records}
    assert len(comp) == 1  # one shared comparator per cell x seed


def test_frozen_policy_in_online_cell(tmp_path):
    spec = _tiny_online_spec(policies=["clcb_frozen_cont"], k_grid=[2], seeds=[0])
    records, failures = run_experiment(spec, tmp_path, seed_offset=0)
    assert failures == []
    assert records[0].extra["stages"] >= 2
    stage_files = list(tmp_path.glob("stages_*.csv"))
    assert stage_files, "per-stage records should be emitted"


def test_aggregates_recomputable_from_run_rows(tmp_path):
    import csv as csvmod

    spec = _tiny_online_spec()
    run_experiment(spec, tmp_path, seed_offset=0)
    with open(tmp_path / "results.csv") as f:
        rows = list(csvmod.DictReader(f))
    with open(tmp_path / "aggregates.csv") as f:
        aggs = list(csvmod.DictReader(f))
    for agg in aggs:
        vals = [float(r["metric"]) for r in rows
                if r["cell"] == agg["cell"] and r["policy"] == agg["policy"]]
        assert len(vals) == int(agg["n_seeds"])
        assert float(agg["metric_mean"]) == pytest.approx(np.mean(vals), rel=1e-9)


def test_failed_cell_is_reported_not_fatal(tmp_path, monkeypatch):
    spec = _tiny_online_spec(seeds=[0])

    def boom(*a, **kw):
        raise RuntimeError("injected")

    monkeypatch.setattr(harness, "run_online_cell", boom)
    records, failures = run_experiment(spec, tmp_path, seed_offset=0)
    assert records == []
    assert len(failures) == 2  # both cells fail, sweep continues
