"""Experiment orchestration: paired seeded runs, suboptimality/regret metrics,
ablation grids, and deterministic CSV/JSON emission.

Within one experiment cell every policy consumes the identical arrival
sequence and the identical per-round serve-time noise; policy-private
randomness (exploration coins, fetch-cost draws) comes from per-policy
sub-streams. All caches in a cell are scored on one shared evaluation net
with ground-truth weights (Monte-Carlo for synthetic streams, exact for
traces) and costs, against a reverse-greedy (brute-force when small)
comparator on true parameters. Offline cells evaluate on a grid-independent
`eps_eval` net over the logged arrivals so the epsilon ablation stays
comparable; online cells evaluate on the final run-eps net over the whole
stream, which is exactly the net the dynamic construction ends with.

CSV outputs are byte-deterministic for a fixed spec; wall-clock timings land
in a separate timings file excluded from that guarantee.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import time
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path

import numpy as np

from . import baselines as bl
from .cache_core import (
    BRUTE_FORCE_GUARD,
    DiscreteInstance,
    brute_force_oracle,
    loss_against_points,
    reverse_greedy,
)
from .cost_model import CostField, MismatchFn, NoiseSpec, TOKEN_LENGTH, true_cost_many
from .frozen_learner import CLCBFrozenCont, FrozenConfig
from .geometry import build_static_net
from .krr import ConfidenceSpec, KernelSpec, OFFLINE_PESSIMISTIC, ONLINE_OPTIMISTIC
from .offline_learner import run_offline, simulate_logged_dataset
from .online_ls import CLCBLSCont, CostEnv, OnlineConfig, SERVED_LLM
from .workload import (
    ArrivalTruth,
    SyntheticSpec,
    TraceSpec,
    gen_synthetic_universe,
    synthetic_stream,
    trace_stream,
    true_weights_synthetic,
    true_weights_trace,
)

OFFLINE = "OFFLINE"
ONLINE = "ONLINE"

OFFLINE_POLICIES = ("cucb_cont", "lfu", "greedy", "eps_greedy", "discrete_cucb")
ONLINE_POLICIES = (
    "clcb_ls_cont",
    "clcb_frozen_cont",
    "lfu",
    "greedy",
    "eps_greedy",
    "discrete_clcb_ls",
)


class SpecError(ValueError):
    """Configuration problem in an experiment spec."""


@dataclass
class ExperimentSpec:
    setting: str
    policies: list[str]
    seeds: list[int]
    workload: SyntheticSpec | None = None
    trace: TraceSpec | None = None
    eps_grid: list[float] = field(default_factory=lambda: [0.4])
    n_grid: list[int] = field(default_factory=lambda: [1000])      # offline stream lengths
    k_grid: list[int] = field(default_factory=lambda: [5])
    horizon_T: int = 5000
    alpha: float = 1.0
    zeta: float = 1.0
    noise_r: float = 0.1
    noise_clip: bool = True
    kernel_length_scale: float = 0.5
    ridge_lambda: float = 1.0
    rkhs_bound: float = 1.0
    delta: float | None = None          # offline default 0.05; online default 1/T
    nu_propensity: float = 0.5
    # logging policy for offline datasets. "bernoulli": every arrival's cost
    # is recorded with probability nu. "production_cache": the logging system
    # itself runs a frequency-cost cache; arrivals inside its serve radius are
    # served from cache so their costs never reach the log (reverse feedback).
    logging_policy: str = "bernoulli"
    logging_cache_size: int = 25
    logging_serve_radius: float | None = None   # defaults to the cell's eps
    eps_eval: float = 0.15
    weight_samples: int = 100_000
    epsilon_explore: float = 0.1
    recompute_period: int = 1
    frozen_Lg: float = 1.0
    frozen_Cp: float = 1.0
    write_series: bool = False
    write_traces: bool = False

    def __post_init__(self):
        if self.setting not in (OFFLINE, ONLINE):
            raise SpecError(f"setting must be OFFLINE or ONLINE, got {self.setting!r}")
        if not self.seeds:
            raise SpecError("need at least one seed")
        if not self.policies:
            raise SpecError("need at least one policy")
        allowed = OFFLINE_POLICIES if self.setting == OFFLINE else ONLINE_POLICIES
        for p in self.policies:
            if p not in allowed:
                raise SpecError(f"policy {p!r} not valid for {self.setting}")
        if self.workload is None and self.trace is None:
            raise SpecError("spec needs a synthetic workload or a trace workload")

    def cells(self) -> list[dict]:
        if self.setting == OFFLINE:
            axes = [("eps", self.eps_grid), ("n", self.n_grid), ("k", self.k_grid)]
        else:
            axes = [("eps", self.eps_grid), ("k", self.k_grid), ("T", [self.horizon_T])]
        names = [a for a, _ in axes]
        out = []
        for combo in product(*[v for _, v in axes]):
            out.append(dict(zip(names, combo)))
        return out


@dataclass
class MetricsRecord:
    cell: dict
    policy: str
    seed: int
    metric: float                 # suboptimality gap (offline) or final avg regret (online)
    switch_count: int
    llm_fraction: float
    comparator_loss: float
    comparator_se: float
    runtime_s: float
    extra: dict = field(default_factory=dict)


# ---------- metric computations ----------


def compute_suboptimality(
    learner_cache_points: np.ndarray,
    comparator_cache_points: np.ndarray,
    eval_centers: np.ndarray,
    truth: ArrivalTruth,
    true_costs: np.ndarray,
    fn: MismatchFn,
    alpha: float = 1.0,
) -> float:
    """Discretized true loss of the learner cache minus alpha times the
    comparator's, both on the shared evaluation net."""
    l_learn = loss_against_points(eval_centers, truth.weights, true_costs, fn, learner_cache_points)
    l_comp = loss_against_points(eval_centers, truth.weights, true_costs, fn, comparator_cache_points)
    return l_learn - alpha * l_comp


def compute_regret_series(
    per_round_losses: np.ndarray,
    switch_payments: np.ndarray,
    comparator_loss: float,
    alpha: float = 1.0,
) -> tuple[np.ndarray, np.ndarray]:
    """(cumulative regret with switching, running average regret)."""
    per_round_losses = np.asarray(per_round_losses, dtype=np.float64)
    switch_payments = np.asarray(switch_payments, dtype=np.float64)
    if per_round_losses.shape != switch_payments.shape:
        raise SpecError("loss and payment series must have equal length")
    inst = per_round_losses - alpha * comparator_loss + switch_payments
    cum = np.cumsum(inst)
    avg = cum / np.arange(1, cum.shape[0] + 1)
    return cum, avg


def comparator_cache(
    eval_centers: np.ndarray,
    truth: ArrivalTruth,
    true_costs: np.ndarray,
    fn: MismatchFn,
    k: int,
) -> tuple[np.ndarray, float]:
    """Reverse greedy on true parameters; brute force when the guard allows."""
    inst = DiscreteInstance(eval_centers, truth.weights, true_costs, fn)
    m = eval_centers.shape[0]
    total = sum(math.comb(m, r) for r in range(min(k, m) + 1))
    if total <= BRUTE_FORCE_GUARD:
        bf = brute_force_oracle(inst, k)
        idx, loss = bf.cache, bf.loss
    else:
        rg = reverse_greedy(inst, k)
        idx, loss = rg.cache, rg.loss
    pts = eval_centers[idx] if idx else np.zeros((0, eval_centers.shape[1]))
    return pts, loss


def comparator_loss_se(
    eval_centers: np.ndarray,
    truth: ArrivalTruth,
    true_costs: np.ndarray,
    fn: MismatchFn,
    comp_pts: np.ndarray,
) -> float:
    """MC standard error of the comparator loss (its own per-cell g values)."""
    from .geometry import cross_distances

    cc = np.clip(true_costs, 0.0, 1.0)
    if np.atleast_2d(comp_pts).shape[0] == 0 or comp_pts.size == 0:
        g = np.minimum(cc, 1.0)
    else:
        g = np.minimum(cc, fn(cross_distances(eval_centers, comp_pts).min(axis=1)))
    return truth.loss_std_error(g)


# ---------- seeded sub-streams ----------


def _child_rngs(universe_seed: int, stream_seed: int, names: list[str]) -> dict[str, np.random.Generator]:
    out = {}
    for i, name in enumerate(names):
        ss = np.random.SeedSequence(entropy=(universe_seed, stream_seed, i))
        out[name] = np.random.default_rng(ss)
    return out


def _token_cost_field(universe: np.ndarray, token_lengths: np.ndarray) -> CostField:
    return CostField(mode=TOKEN_LENGTH, universe=universe, token_lengths=token_lengths)


# ---------- per-cell runners ----------


def _build_truth(
    spec: ExperimentSpec,
    universe: np.ndarray,
    eval_centers: np.ndarray,
    stream_seed: int,
) -> ArrivalTruth:
    if spec.trace is not None:
        return true_weights_trace(spec.trace, eval_centers)
    wspec = SyntheticSpec(
        **{**spec.workload.__dict__, "stream_seed": stream_seed}
    )
    return true_weights_synthetic(
        wspec, universe, eval_centers, n_samples=spec.weight_samples,
        weight_seed=stream_seed + 0x5EED,
    )


def run_offline_cell(
    spec: ExperimentSpec,
    cell: dict,
    seed: int,
    universe: np.ndarray,
    token_lengths: np.ndarray,
    out_dir: Path | None = None,
) -> list[MetricsRecord]:
    eps, n, k = cell["eps"], cell["n"], cell["k"]
    fn = MismatchFn(spec.zeta)
    field_ = _token_cost_field(universe, token_lengths)
    noise = NoiseSpec(spec.noise_r, clip=spec.noise_clip)
    stream_seed = spec.workload.stream_seed + seed
    rngs = _child_rngs(spec.workload.universe_seed, stream_seed, ["dataset", "policy", "fetch"])
    wspec = SyntheticSpec(**{**spec.workload.__dict__, "stream_seed": stream_seed})
    nu_per_universe = None
    if spec.logging_policy == "production_cache":
        # the logging system already caches its most valuable cells (arrivals
        # are uniform, so value ranks by cost); queries landing within its
        # serve radius are answered from cache and leave no cost in the log
        from .geometry import cross_distances

        value = true_cost_many(field_, universe)
        held = np.argsort(-value, kind="stable")[: min(spec.logging_cache_size, universe.shape[0])]
        radius = spec.logging_serve_radius if spec.logging_serve_radius is not None else eps
        d_to_logcache = cross_distances(universe, universe[held]).min(axis=1)
        nu_per_universe = np.where(d_to_logcache <= radius, 0.0, spec.nu_propensity)
    elif spec.logging_policy != "bernoulli":
        raise SpecError(f"unknown logging policy {spec.logging_policy!r}")
    data = simulate_logged_dataset(
        wspec, universe, field_, noise, n, rngs["dataset"],
        nu=spec.nu_propensity, nu_per_universe=nu_per_universe,
    )
    # offline evaluation basis: epsilon-net over the logged arrivals at the
    # grid-independent eps_eval, shared by every policy in the cell
    eval_centers = build_static_net(data.queries, spec.eps_eval).centers
    truth = _build_truth(spec, universe, eval_centers, stream_seed)
    true_costs = true_cost_many(field_, eval_centers)
    comp_pts, comp_loss = comparator_cache(eval_centers, truth, true_costs, fn, k)
    comp_se = comparator_loss_se(eval_centers, truth, true_costs, fn, comp_pts)
    delta = spec.delta if spec.delta is not None else 0.05
    records = []
    for policy in spec.policies:
        t0 = time.perf_counter()
        if policy == "cucb_cont":
            kernel = KernelSpec(spec.kernel_length_scale, spec.ridge_lambda)
            conf = ConfidenceSpec(spec.rkhs_bound, spec.noise_r, delta, OFFLINE_PESSIMISTIC)
            result = run_offline(data, eps, k, kernel, conf, fn,
                                 fetch_env=(field_, noise, rngs["fetch"]))
            cache_pts = result.cache.points
            extra = {
                "net_size": result.net.size,
                "n_cost_obs": result.n_cost_observations,
                "build_cost": result.build_cost,
            }
            switches = 1
            llm_frac = result.n_cost_observations / max(1, n)
            if out_dir is not None:
                p = out_dir / f"offline_{_cell_id(cell)}_s{seed}.json"
                with open(p, "w") as f:
                    json.dump(result.to_json_dict(), f, indent=2, sort_keys=True)
        else:
            kind = policy.upper()
            idx = bl.offline_baseline_cache(
                kind, data, universe, k, fn,
                rng=rngs["policy"], epsilon_explore=spec.epsilon_explore,
            )
            cache_pts = universe[idx] if idx else np.zeros((0, universe.shape[1]))
            extra = {"cache_indices": idx}
            switches = 1
            obs = int(np.isfinite(data.served_costs).sum())
            llm_frac = obs / max(1, n)
        gap = compute_suboptimality(
            cache_pts, comp_pts, eval_centers, truth, true_costs, fn, spec.alpha
        )
        records.append(
            MetricsRecord(
                cell=cell, policy=policy, seed=seed, metric=gap,
                switch_count=switches, llm_fraction=llm_frac,
                comparator_loss=comp_loss, comparator_se=comp_se,
                runtime_s=time.perf_counter() - t0, extra=extra,
            )
        )
    return records


def _make_online_policy(
    name: str,
    spec: ExperimentSpec,
    cell: dict,
    env: CostEnv,
    dim: int,
    candidates: np.ndarray,
):
    eps, k, T = cell["eps"], cell["k"], cell["T"]
    delta = spec.delta if spec.delta is not None else 1.0 / T
    kernel = KernelSpec(spec.kernel_length_scale, spec.ridge_lambda)
    fn = MismatchFn(spec.zeta)
    if name == "clcb_ls_cont":
        conf = ConfidenceSpec(spec.rkhs_bound, spec.noise_r, delta, ONLINE_OPTIMISTIC)
        return CLCBLSCont(OnlineConfig(T, eps, k, kernel, conf, fn), env, dim)
    if name == "clcb_frozen_cont":
        conf = ConfidenceSpec(spec.rkhs_bound, spec.noise_r, delta, ONLINE_OPTIMISTIC)
        cfg = FrozenConfig(T, k, kernel, conf, fn, spec.frozen_Lg, spec.frozen_Cp)
        return CLCBFrozenCont(cfg, env, dim)
    if name == "discrete_clcb_ls":
        cfg = bl.BaselineConfig(
            bl.DISCRETE_CLCB_LS, k, fn, serve_radius=eps,
            recompute_period=spec.recompute_period, horizon_T=T,
        )
        return bl.DiscreteCLCBLS(cfg, candidates, env)
    kind = name.upper()
    cfg = bl.BaselineConfig(
        kind, k, fn, serve_radius=eps,
        epsilon_explore=spec.epsilon_explore,
        recompute_period=spec.recompute_period, horizon_T=T,
    )
    return bl.FrequencyBaseline(cfg, candidates, env)


def run_online_cell(
    spec: ExperimentSpec,
    cell: dict,
    seed: int,
    universe: np.ndarray | None,
    token_lengths: np.ndarray | None,
    out_dir: Path | None = None,
) -> list[MetricsRecord]:
    eps, k, T = cell["eps"], cell["k"], cell["T"]
    fn = MismatchFn(spec.zeta)
    noise = NoiseSpec(spec.noise_r, clip=spec.noise_clip)
    if spec.trace is not None:
        base_seed = seed
        rngs = _child_rngs(0xACE, base_seed, ["arrivals", "noise", "weights"] + list(spec.policies))
        arrivals, _, _ = trace_stream(spec.trace, rngs["arrivals"], T)
        pools = np.vstack([s.pool for s in spec.trace.sources])
        lens = np.concatenate([s.token_lengths for s in spec.trace.sources])
        field_ = _token_cost_field(pools, lens)
        warm = max(1, T // 10)
        candidates = build_static_net(arrivals[:warm], eps).centers
    else:
        stream_seed = spec.workload.stream_seed + seed
        rngs = _child_rngs(
            spec.workload.universe_seed, stream_seed,
            ["arrivals", "noise", "weights"] + list(spec.policies),
        )
        wspec = SyntheticSpec(**{**spec.workload.__dict__, "stream_seed": stream_seed})
        arrivals, _ = synthetic_stream(wspec, universe, rngs["arrivals"], T)
        field_ = _token_cost_field(universe, token_lengths)
        candidates = universe
    noise_seq = rngs["noise"].normal(0.0, spec.noise_r, size=T)
    dim = arrivals.shape[1]
    # online evaluation basis: the final epsilon-net over the whole arrival
    # stream, which is exactly the net the dynamic construction ends with
    eval_net = build_static_net(arrivals, eps)
    stream_seed_for_truth = (spec.workload.stream_seed + seed) if spec.workload else seed
    truth = _build_truth(spec, universe, eval_net.centers, stream_seed_for_truth)
    true_costs = true_cost_many(field_, eval_net.centers)
    comp_pts, comp_loss = comparator_cache(eval_net.centers, truth, true_costs, fn, k)
    comp_se = comparator_loss_se(eval_net.centers, truth, true_costs, fn, comp_pts)
    arrival_checksum = hashlib.sha256(arrivals.tobytes()).hexdigest()[:16]
    records = []
    for policy_name in spec.policies:
        env = CostEnv(field_, noise, rngs[policy_name], noise_sequence=noise_seq)
        policy = _make_online_policy(policy_name, spec, cell, env, dim, candidates)
        losses = np.zeros(T)
        payments = np.zeros(T)
        llm = 0
        switches = 0
        loss_memo: dict = {}
        trace_rows = [] if spec.write_traces else None
        runtime = 0.0  # learner loop only; metric evaluation is not timed
        for t in range(T):
            t0 = time.perf_counter()
            out = policy.step(arrivals[t])
            runtime += time.perf_counter() - t0
            sig = policy.cache_signature()
            if sig not in loss_memo:
                loss_memo[sig] = loss_against_points(
                    eval_net.centers, truth.weights, true_costs, fn, policy.cache_points()
                )
            losses[t] = loss_memo[sig]
            payments[t] = out.switch_payment
            llm += out.served_from == SERVED_LLM
            switches += out.switched
            if trace_rows is not None:
                trace_rows.append(
                    {
                        "t": t + 1,
                        "center": int(out.center_index),
                        "action": out.served_from,
                        "cost": round(out.realized_cost_component, 10),
                        "switch": bool(out.switched),
                        "payment": round(out.switch_payment, 10),
                    }
                )
        cum, avg = compute_regret_series(losses, payments, comp_loss, spec.alpha)
        extra = {
            "arrival_checksum": arrival_checksum,
            "cum_regret_half": float(cum[T // 2 - 1]),
            "cum_regret_final": float(cum[-1]),
            "final_cache_size": int(policy.cache_points().shape[0]),
        }
        if policy_name == "clcb_ls_cont":
            st = policy.state
            extra.update(
                centers=st.m_t, local_advances=st.local_advances,
                global_advances=st.global_advances,
            )
        if policy_name == "clcb_frozen_cont":
            st = policy.state
            extra.update(stages=st.stage_count, pool_size=int(st.pool.shape[0]))
            if out_dir is not None:
                _write_stage_records(out_dir, cell, seed, st.stage_records)
        if out_dir is not None and spec.write_series:
            _write_series(out_dir, cell, seed, policy_name, avg)
        if out_dir is not None and trace_rows is not None:
            _write_trace(out_dir, cell, seed, policy_name, trace_rows)
        records.append(
            MetricsRecord(
                cell=cell, policy=policy_name, seed=seed,
                metric=float(avg[-1]),
                switch_count=int(switches),
                llm_fraction=llm / T,
                comparator_loss=comp_loss, comparator_se=comp_se,
                runtime_s=runtime, extra=extra,
            )
        )
    return records


# ---------- output files ----------


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.12g}"
    return str(x)


def _cell_id(cell: dict) -> str:
    return ":".join(f"{k}={_fmt(v)}" for k, v in sorted(cell.items()))


def _write_series(out_dir: Path, cell: dict, seed: int, policy: str, avg: np.ndarray):
    p = out_dir / f"series_{_cell_id(cell)}_s{seed}_{policy}.csv"
    with open(p, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["t", "avg_regret"])
        for t, v in enumerate(avg, start=1):
            w.writerow([t, _fmt(float(v))])


def _write_trace(out_dir: Path, cell: dict, seed: int, policy: str, rows: list[dict]):
    p = out_dir / f"trace_{_cell_id(cell)}_s{seed}_{policy}.jsonl"
    with open(p, "w") as f:
        for row in rows:
            f.write(json.dumps(row, sort_keys=True) + "\n")


def _write_stage_records(out_dir: Path, cell: dict, seed: int, recs):
    p = out_dir / f"stages_{_cell_id(cell)}_s{seed}_clcb_frozen_cont.csv"
    with open(p, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["stage", "tolerance", "radius", "length", "pool_size"])
        for r in recs:
            w.writerow([r.stage, _fmt(r.tolerance), _fmt(r.radius), r.length, r.pool_size])


RESULT_COLUMNS = [
    "setting", "cell", "eps", "n", "k", "T", "seed", "policy",
    "metric", "switch_count", "llm_fraction", "comparator_loss", "comparator_se",
]


def write_results_csv(path: Path, spec: ExperimentSpec, records: list[MetricsRecord]):
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(RESULT_COLUMNS)
        for r in records:
            w.writerow(
                [
                    spec.setting,
                    _cell_id(r.cell),
                    _fmt(r.cell.get("eps", "")),
                    _fmt(r.cell.get("n", "")),
                    _fmt(r.cell.get("k", "")),
                    _fmt(r.cell.get("T", "")),
                    r.seed,
                    r.policy,
                    _fmt(r.metric),
                    r.switch_count,
                    _fmt(r.llm_fraction),
                    _fmt(r.comparator_loss),
                    _fmt(r.comparator_se),
                ]
            )


def write_aggregates_csv(path: Path, records: list[MetricsRecord]):
    groups: dict[tuple, list[MetricsRecord]] = {}
    for r in records:
        groups.setdefault((_cell_id(r.cell), r.policy), []).append(r)
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["cell", "policy", "n_seeds", "metric_mean", "metric_std",
                    "switch_mean", "llm_fraction_mean"])
        for (cell_id, policy) in sorted(groups):
            rs = groups[(cell_id, policy)]
            vals = np.array([r.metric for r in rs])
            w.writerow(
                [
                    cell_id, policy, len(rs),
                    _fmt(float(vals.mean())),
                    _fmt(float(vals.std(ddof=1)) if len(rs) > 1 else 0.0),
                    _fmt(float(np.mean([r.switch_count for r in rs]))),
                    _fmt(float(np.mean([r.llm_fraction for r in rs]))),
                ]
            )


def write_timings_csv(path: Path, records: list[MetricsRecord]):
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["cell", "policy", "seed", "runtime_s"])
        for r in records:
            w.writerow([_cell_id(r.cell), r.policy, r.seed, f"{r.runtime_s:.6f}"])


def run_experiment(
    spec: ExperimentSpec, out_dir: str | Path, seed_offset: int = 0
) -> tuple[list[MetricsRecord], list[str]]:
    """Run every (cell x seed), write results/aggregates/timings + manifest.

    Returns (records, failed cell descriptions). Failures do not stop the
    sweep; callers translate a nonempty failure list into exit code 3.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    universe = token_lengths = None
    if spec.workload is not None:
        universe, token_lengths = gen_synthetic_universe(spec.workload)
    records: list[MetricsRecord] = []
    failures: list[str] = []
    for cell in spec.cells():
        for seed in [s + seed_offset for s in spec.seeds]:
            try:
                if spec.setting == OFFLINE:
                    records.extend(
                        run_offline_cell(spec, cell, seed, universe, token_lengths, out_dir)
                    )
                else:
                    records.extend(
                        run_online_cell(spec, cell, seed, universe, token_lengths, out_dir)
                    )
            except Exception as exc:  # cell failure: record and continue
                failures.append(f"{_cell_id(cell)} seed={seed}: {exc!r}")
    write_results_csv(out_dir / "results.csv", spec, records)
    write_aggregates_csv(out_dir / "aggregates.csv", records)
    write_timings_csv(out_dir / "timings.csv", records)
    manifest = {
        "setting": spec.setting,
        "policies": spec.policies,
        "seeds": [s + seed_offset for s in spec.seeds],
        "cells": [_cell_id(c) for c in spec.cells()],
        "workload": spec.workload.__dict__ if spec.workload else None,
        "alpha": spec.alpha,
        "zeta": spec.zeta,
        "eps_eval": spec.eps_eval,
        "failures": failures,
    }
    with open(out_dir / "manifest.json", "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True, default=str)
    return records, failures
