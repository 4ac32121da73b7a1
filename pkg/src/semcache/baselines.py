"""Reference policies: LFU, Greedy, Epsilon-Greedy, and discrete-universe
CUCB / CLCB-LS adaptations.

All online baselines share the serving rule for continuous queries: serve
from cache when the nearest cached item is within `serve_radius` (default:
the run's epsilon), otherwise query the LLM. Frequency baselines refresh the
cache every `recompute_period` rounds and pay switching costs for new entries
exactly like the treatment learners. Discrete baselines run on a fixed
candidate universe with exact-match (nearest candidate) cell assignment and
Hoeffding-style sqrt(2 log t / N) radii in place of KRR.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cache_core import DiscreteInstance, reverse_greedy
from .cost_model import MismatchFn
from .geometry import distances_to_points
from .offline_learner import OfflineDataset
from .online_ls import CostEnv, RoundOutcome, SERVED_CACHE, SERVED_LLM

LFU = "LFU"
GREEDY = "GREEDY"
EPS_GREEDY = "EPS_GREEDY"
DISCRETE_CUCB = "DISCRETE_CUCB"
DISCRETE_CLCB_LS = "DISCRETE_CLCB_LS"

_KINDS = (LFU, GREEDY, EPS_GREEDY, DISCRETE_CUCB, DISCRETE_CLCB_LS)


class BaselineConfigError(ValueError):
    pass


@dataclass
class BaselineConfig:
    kind: str
    k: int
    fn: MismatchFn
    serve_radius: float = 0.4
    epsilon_explore: float = 0.1
    recompute_period: int = 1
    horizon_T: int = 0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise BaselineConfigError(f"unknown baseline kind {self.kind!r}")
        if not (0.0 <= self.epsilon_explore <= 1.0):
            raise BaselineConfigError("epsilon_explore must be in [0, 1]")
        if self.recompute_period < 1:
            raise BaselineConfigError("recompute_period must be >= 1")


def _top_k(scores: np.ndarray, k: int) -> list[int]:
    """Indices of the k largest scores; ties go to the lowest index."""
    if k <= 0:
        return []
    order = np.argsort(-scores, kind="stable")
    return sorted(int(i) for i in order[: min(k, scores.shape[0])])


class FrequencyBaseline:
    """LFU / GREEDY / EPS_GREEDY over a fixed candidate universe."""

    def __init__(self, cfg: BaselineConfig, candidates: np.ndarray, env: CostEnv):
        if cfg.kind not in (LFU, GREEDY, EPS_GREEDY):
            raise BaselineConfigError(f"{cfg.kind} is not a frequency baseline")
        self.cfg = cfg
        self.name = cfg.kind.lower()
        self.candidates = np.atleast_2d(candidates)
        self.env = env
        m = self.candidates.shape[0]
        self.t = 0
        self.counts = np.zeros(m, dtype=np.int64)
        self.cost_n = np.zeros(m, dtype=np.int64)
        self.cost_sum = np.zeros(m, dtype=np.float64)
        self.cache: list[int] = []
        self.switch_count = 0
        self.llm_calls = 0

    def _scores(self) -> np.ndarray:
        if self.cfg.kind == LFU:
            return self.counts.astype(np.float64)
        mean_cost = np.divide(
            self.cost_sum, self.cost_n, out=np.zeros_like(self.cost_sum), where=self.cost_n > 0
        )
        freq = self.counts / max(1, self.t)
        return freq * mean_cost

    def _refresh_cache(self) -> float:
        new_cache = _top_k(self._scores(), self.cfg.k)
        added = sorted(set(new_cache) - set(self.cache))
        payment = 0.0
        changed = set(new_cache) != set(self.cache)
        if added:
            payment = float(np.sum(self.env.fetch_costs(self.candidates[added])))
        if changed:
            self.switch_count += 1
        self.cache = new_cache
        return payment

    def step(self, x_t: np.ndarray) -> RoundOutcome:
        self.t += 1
        cell = int(np.argmin(distances_to_points(x_t, self.candidates)))
        self.counts[cell] += 1
        payment = 0.0
        switched = False
        if (self.t - 1) % self.cfg.recompute_period == 0:
            before = tuple(self.cache)
            payment = self._refresh_cache()
            switched = tuple(self.cache) != before or payment > 0.0
        explore = (
            self.cfg.kind == EPS_GREEDY and float(self.env.rng.random()) < self.cfg.epsilon_explore
        )
        if self.cache:
            dist = float(distances_to_points(x_t, self.candidates[self.cache]).min())
        else:
            dist = math.inf
        if not explore and self.cache and dist <= self.cfg.serve_radius:
            served = SERVED_CACHE
            realized = float(self.cfg.fn(dist))
        else:
            served = SERVED_LLM
            realized = self.env.realize(x_t, self.t)
            self.cost_n[cell] += 1
            self.cost_sum[cell] += realized
            self.llm_calls += 1
        return RoundOutcome(
            served_from=served,
            realized_cost_component=realized,
            switched=switched,
            new_center=False,
            switch_payment=payment,
            center_index=cell,
            cache_changed=switched,
        )

    def cache_points(self) -> np.ndarray:
        if not self.cache:
            return np.zeros((0, self.candidates.shape[1]))
        return self.candidates[self.cache]

    def cache_signature(self):
        return tuple(self.cache)


class DiscreteCLCBLS:
    """Discrete low-switching LCB learner on a fixed universe.

    Same stage thresholds as the continuous learner but with a constant
    candidate count and per-arm empirical means with Hoeffding radii.
    """

    name = "discrete_clcb_ls"

    def __init__(self, cfg: BaselineConfig, candidates: np.ndarray, env: CostEnv):
        if cfg.kind != DISCRETE_CLCB_LS:
            raise BaselineConfigError("DiscreteCLCBLS needs kind=DISCRETE_CLCB_LS")
        if cfg.horizon_T < 1:
            raise BaselineConfigError("horizon_T required for stage thresholds")
        self.cfg = cfg
        self.candidates = np.atleast_2d(candidates)
        self.env = env
        m = self.candidates.shape[0]
        self.m = m
        self.t = 0
        self.n_f = np.zeros(m, dtype=np.int64)
        self.n_c = np.zeros(m, dtype=np.int64)
        self.l_c = np.zeros(m, dtype=np.float64)
        self.tau_u = np.ones(m, dtype=np.int64)
        self.stage_cur = np.zeros(m, dtype=np.int64)
        self.stage_past = np.zeros(m, dtype=np.int64)
        self.tau_f = 1
        self.f_cur = 0
        self.f_past = 0
        self.cache: list[int] = []
        self.switch_count = 0
        self.llm_calls = 0

    def _lcb(self) -> np.ndarray:
        mean = np.divide(
            self.l_c, self.n_c, out=np.zeros_like(self.l_c), where=self.n_c > 0
        )
        radius = np.where(
            self.n_c > 0,
            np.sqrt(2.0 * math.log(max(self.t, 2)) / np.maximum(self.n_c, 1)),
            2.0,  # unobserved arms look maximally cheap: LCB = -2
        )
        return mean - radius

    def _switch(self) -> float:
        weights = self.n_f / max(1, self.t - 1)
        inst = DiscreteInstance(self.candidates, weights, self._lcb(), self.cfg.fn)
        result = reverse_greedy(inst, self.cfg.k)
        added = sorted(set(result.cache) - set(self.cache))
        payment = 0.0
        if added:
            payment = float(np.sum(self.env.fetch_costs(self.candidates[added])))
        self.cache = result.cache
        self.switch_count += 1
        return payment

    def step(self, x_t: np.ndarray) -> RoundOutcome:
        self.t += 1
        u = int(np.argmin(distances_to_points(x_t, self.candidates)))
        switch = False
        thr = 1.0 + np.sqrt((self.cfg.horizon_T / self.m) * self.stage_past)
        hit = self.stage_cur >= thr
        if hit.any():
            self.tau_u[hit] += 1
            self.stage_past[hit] += self.stage_cur[hit]
            self.stage_cur[hit] = 0
            switch = True
        if self.f_cur >= 1.0 + math.sqrt(self.cfg.horizon_T * self.f_past):
            self.tau_f += 1
            self.f_past += self.f_cur
            self.f_cur = 0
            switch = True
        payment = self._switch() if switch else 0.0
        self.n_f[u] += 1
        self.f_cur += 1
        lcb_u = float(self._lcb()[u])
        if self.cache:
            dist = float(distances_to_points(x_t, self.candidates[self.cache]).min())
            phi_val = float(self.cfg.fn(dist))
        else:
            phi_val = 1.0
        if lcb_u <= phi_val:
            realized = self.env.realize(x_t, self.t)
            self.n_c[u] += 1
            self.l_c[u] += realized
            self.stage_cur[u] += 1
            self.llm_calls += 1
            served = SERVED_LLM
        else:
            served = SERVED_CACHE
            realized = phi_val
        return RoundOutcome(
            served_from=served,
            realized_cost_component=realized,
            switched=switch,
            new_center=False,
            switch_payment=payment,
            center_index=u,
            cache_changed=switch,
        )

    def cache_points(self) -> np.ndarray:
        if not self.cache:
            return np.zeros((0, self.candidates.shape[1]))
        return self.candidates[self.cache]

    def cache_signature(self):
        return tuple(self.cache)


# ---------- offline baseline caches ----------


def offline_baseline_cache(
    kind: str,
    data: OfflineDataset,
    candidates: np.ndarray,
    k: int,
    fn: MismatchFn,
    rng: np.random.Generator | None = None,
    epsilon_explore: float = 0.1,
) -> list[int]:
    """Cache selection from a logged dataset for the offline comparisons."""
    candidates = np.atleast_2d(candidates)
    m = candidates.shape[0]
    from .geometry import cross_distances

    cells = np.argmin(cross_distances(data.queries, candidates), axis=1)
    counts = np.bincount(cells, minlength=m).astype(np.float64)
    obs_mask = np.isfinite(data.served_costs)
    cost_sum = np.bincount(cells[obs_mask], weights=data.served_costs[obs_mask], minlength=m)
    cost_n = np.bincount(cells[obs_mask], minlength=m)
    mean_cost = np.divide(cost_sum, cost_n, out=np.zeros(m), where=cost_n > 0)
    n = data.n
    if kind == LFU:
        return _top_k(counts, k)
    if kind == GREEDY:
        return _top_k((counts / n) * mean_cost, k)
    if kind == EPS_GREEDY:
        if rng is None:
            raise BaselineConfigError("EPS_GREEDY offline selection needs an rng")
        scores = (counts / n) * mean_cost
        chosen: list[int] = []
        remaining = list(range(m))
        for _ in range(min(k, m)):
            if float(rng.random()) < epsilon_explore:
                pick = int(remaining[int(rng.integers(len(remaining)))])
            else:
                rem_scores = scores[remaining]
                pick = int(remaining[int(np.argmax(rem_scores))])
            chosen.append(pick)
            remaining.remove(pick)
        return sorted(chosen)
    if kind == DISCRETE_CUCB:
        radius = np.where(cost_n > 0, np.sqrt(2.0 * math.log(max(n, 2)) / np.maximum(cost_n, 1)), 0.0)
        pess = np.where(cost_n > 0, mean_cost + radius, 1.0)  # unobserved arms: max pessimism
        inst = DiscreteInstance(candidates, counts / n, pess, fn)
        return reverse_greedy(inst, k).cache
    raise BaselineConfigError(f"{kind!r} is not an offline baseline")
