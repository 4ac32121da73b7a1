"""Offline cache learning from a logged dataset: pessimistic KRR costs over an
epsilon-net with empirical cell weights, then reverse greedy.

The logged dataset records every arrival; the serving cost is present only
for rounds where the logging policy hit the LLM. The logging policy itself is
a simulator knob: with propensity nu (global or per universe point) a cost is
recorded, which is exactly the partial-feedback structure the pessimistic
radius has to survive.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cache_core import CacheState, DiscreteInstance, ReverseGreedyResult, reverse_greedy
from .cost_model import CostField, MismatchFn, NoiseSpec, sample_cost_many
from .geometry import EpsilonNet, assign_cells, build_static_net
from .krr import ConfidenceSpec, KernelSpec, KrrModel, pessimistic_costs_many
from .workload import SyntheticSpec, synthetic_stream

log = logging.getLogger(__name__)


@dataclass
class OfflineDataset:
    """Logged arrivals with optional observed costs (NaN marks ABSENT)."""

    queries: np.ndarray          # (n, d) unit rows
    served_costs: np.ndarray     # (n,) float, NaN where the cache served
    logging_policy_tag: str = ""

    def __post_init__(self):
        self.queries = np.atleast_2d(np.asarray(self.queries, dtype=np.float64))
        self.served_costs = np.asarray(self.served_costs, dtype=np.float64)
        if self.served_costs.shape != (self.queries.shape[0],):
            raise ValueError("served_costs must align with queries")
        observed = self.served_costs[np.isfinite(self.served_costs)]
        if observed.size and (observed.min() < 0.0 or observed.max() > 1.0):
            raise ValueError("present served costs must lie in [0, 1]")

    @property
    def n(self) -> int:
        return self.queries.shape[0]

    def observed(self) -> tuple[np.ndarray, np.ndarray]:
        mask = np.isfinite(self.served_costs)
        return self.queries[mask], self.served_costs[mask]

    @classmethod
    def from_records(
        cls, records: "list[tuple[np.ndarray, float | None]]", tag: str = ""
    ) -> "OfflineDataset":
        """Build from (query, served_cost-or-None) pairs."""
        queries = np.stack([q for q, _ in records])
        costs = np.array([np.nan if c is None else float(c) for _, c in records])
        return cls(queries, costs, logging_policy_tag=tag)


def simulate_logged_dataset(
    spec: SyntheticSpec,
    universe: np.ndarray,
    field_: CostField,
    noise: NoiseSpec,
    n: int,
    rng: np.random.Generator,
    nu: float = 0.5,
    nu_per_universe: np.ndarray | None = None,
) -> OfflineDataset:
    """Stream n synthetic arrivals; record a noisy cost with propensity nu."""
    queries, uidx = synthetic_stream(spec, universe, rng, n)
    if nu_per_universe is not None:
        probs = np.asarray(nu_per_universe)[uidx]
    else:
        probs = np.full(n, nu)
    hit_llm = rng.random(n) < probs
    costs = np.full(n, np.nan)
    if hit_llm.any():
        costs[hit_llm] = sample_cost_many(field_, noise, queries[hit_llm], rng)
    return OfflineDataset(queries, costs, logging_policy_tag=f"bernoulli-nu={nu}")


@dataclass
class OfflineResult:
    net: EpsilonNet
    weights: np.ndarray
    pessimistic_costs: np.ndarray
    cache: CacheState
    cache_indices: list[int]
    greedy: ReverseGreedyResult
    cost_obs_per_cell: np.ndarray     # N_i
    measured_propensity: np.ndarray   # nu_hat_i = N_i / arrivals_i
    n_cost_observations: int
    build_cost: float | None = None

    def to_json_dict(self) -> dict:
        return {
            "net_size": int(self.net.size),
            "eps": float(self.net.radius_eps),
            "weights": self.weights.tolist(),
            "pessimistic_costs": self.pessimistic_costs.tolist(),
            "cache_indices": [int(i) for i in self.cache_indices],
            "removal_order": [int(i) for i in self.greedy.removal_order],
            "estimated_loss": self.greedy.loss,
            "cost_obs_per_cell": self.cost_obs_per_cell.tolist(),
            "measured_propensity": self.measured_propensity.tolist(),
            "n_cost_observations": int(self.n_cost_observations),
            "build_cost": self.build_cost,
        }


def run_offline(
    data: OfflineDataset,
    eps: float,
    k: int,
    kernel: KernelSpec,
    conf: ConfidenceSpec,
    fn: MismatchFn,
    fetch_env: tuple[CostField, NoiseSpec, np.random.Generator] | None = None,
) -> OfflineResult:
    """Net over all arrivals, empirical weights, KRR fit on observed costs,
    pessimistic per-center costs, reverse greedy; in that order."""
    if data.n == 0:
        raise ValueError("offline dataset is empty")
    net = build_static_net(data.queries, eps)
    weights = net.empirical_weights()
    obs_x, obs_y = data.observed()
    ell = obs_x.shape[0]
    if ell == 0:
        log.warning("no cost observations in dataset; falling back to the KRR prior")
        model = KrrModel(kernel, ridge=kernel.ridge_lambda)
    else:
        model = KrrModel(kernel, ridge=ell * kernel.ridge_lambda)
        for i in range(ell):
            model.append_observation(obs_x[i], obs_y[i])
    pess = pessimistic_costs_many(model, conf, net.centers, m=net.size)
    inst = DiscreteInstance(net.centers, weights, pess, fn)
    greedy = reverse_greedy(inst, k)
    entries = [(net.centers[i].copy(), f"resp:{i}") for i in greedy.cache]
    cache = CacheState(capacity_k=max(k, len(entries)), entries=entries)
    cells = assign_cells(net, data.queries)
    obs_cells = cells[np.isfinite(data.served_costs)]
    n_obs = np.bincount(obs_cells, minlength=net.size).astype(np.int64)
    arrivals = np.maximum(net.arrival_counts, 1)
    build_cost = None
    if fetch_env is not None:
        field_, noise, rng = fetch_env
        if greedy.cache:
            build_cost = float(
                np.sum(sample_cost_many(field_, noise, net.centers[greedy.cache], rng))
            )
        else:
            build_cost = 0.0
    return OfflineResult(
        net=net,
        weights=weights,
        pessimistic_costs=pess,
        cache=cache,
        cache_indices=greedy.cache,
        greedy=greedy,
        cost_obs_per_cell=n_obs,
        measured_propensity=n_obs / arrivals,
        n_cost_observations=ell,
        build_cost=build_cost,
    )


def optimal_eps(n: int, d_e: int, p: int, scale: float = 1.0) -> float:
    """Piecewise optimal discretization radius from the n/d_e/p trade-off."""
    if n < 1 or d_e < 1 or p < 1:
        raise ValueError("n, d_e, p must all be >= 1")
    if p >= d_e - 2:
        return scale * n ** (-1.0 / (d_e + 2))
    return scale * n ** (-1.0 / (2 * d_e + p))


# ---------- dataset log files (JSON-lines: {"query_index": int, "cost": float|null}) ----------


def write_dataset_log(path: str | Path, indices: np.ndarray, costs: np.ndarray) -> None:
    with open(path, "w") as f:
        for i, c in zip(indices, costs):
            cost = None if not math.isfinite(float(c)) else float(c)
            f.write(json.dumps({"query_index": int(i), "cost": cost}) + "\n")


def load_dataset_log(path: str | Path, pool: np.ndarray, tag: str = "") -> OfflineDataset:
    idx, costs = [], []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            idx.append(int(row["query_index"]))
            costs.append(np.nan if row["cost"] is None else float(row["cost"]))
    queries = np.atleast_2d(pool)[np.asarray(idx, dtype=np.int64)]
    return OfflineDataset(queries, np.asarray(costs), logging_policy_tag=tag)
