"""Online low-switching semantic caching: dynamic epsilon-net, stage-gated
cache rebuilds, optimistic KRR routing.

Per round: the query either founds a new net center (forcing a switch) or maps
to its nearest center; per-center and global stage counters are checked
against 1 + sqrt(T/m_t * past) style thresholds; on a switch the cache is
rebuilt by reverse greedy over empirical weights and KRR lower-confidence
costs; finally the query is served by whichever of LLM / cache the optimistic
comparison picks, and only LLM calls feed the KRR observation set.

Cache-fetch samples paid during switches are charged to switching cost and
deliberately kept out of the KRR dataset; the observation set grows only in
the serve step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cache_core import DiscreteInstance, reverse_greedy
from .cost_model import CostField, MismatchFn, NoiseSpec, sample_cost_many, true_cost_many
from .geometry import EpsilonNet, assign_cell, distances_to_points, dynamic_net_insert
from .krr import ConfidenceSpec, KernelSpec, KrrModel, ONLINE_OPTIMISTIC, optimism_multiplier

SERVED_CACHE = "CACHE"
SERVED_LLM = "LLM"


@dataclass
class CostEnv:
    """Simulation handles: the hidden cost field plus seeded noise streams.

    `noise_sequence` carries one pre-drawn noise value per round so that every
    policy in a paired experiment sees identical serve-time realizations;
    switch-time fetches draw from the policy's own `rng` stream.
    """

    field: CostField
    noise: NoiseSpec
    rng: np.random.Generator
    noise_sequence: np.ndarray | None = None

    def realize(self, x: np.ndarray, t: int) -> float:
        c = true_cost_many(self.field, x[None, :])[0]
        if self.noise_sequence is not None:
            eta = float(self.noise_sequence[t - 1])
        else:
            eta = float(self.rng.normal(0.0, self.noise.r_subgauss))
        v = c + eta
        if self.noise.clip:
            v = min(max(v, 0.0), 1.0)
        return float(v)

    def fetch_costs(self, points: np.ndarray) -> np.ndarray:
        if np.atleast_2d(points).shape[0] == 0:
            return np.zeros(0)
        return sample_cost_many(self.field, self.noise, points, self.rng)


@dataclass
class OnlineConfig:
    horizon_T: int
    eps: float
    k: int
    kernel: KernelSpec = field(default_factory=KernelSpec)
    conf: ConfidenceSpec | None = None
    fn: MismatchFn = field(default_factory=MismatchFn)

    def __post_init__(self):
        if self.conf is None:
            # failure probability defaults to 1/T
            self.conf = ConfidenceSpec(delta=1.0 / self.horizon_T, mode=ONLINE_OPTIMISTIC)
        if self.conf.mode != ONLINE_OPTIMISTIC:
            raise ValueError("online learner needs an ONLINE_OPTIMISTIC confidence spec")


@dataclass
class RoundOutcome:
    served_from: str
    realized_cost_component: float
    switched: bool
    new_center: bool
    switch_payment: float
    center_index: int
    cache_changed: bool = False

    def __post_init__(self):
        if not self.switched and self.switch_payment != 0.0:
            raise AssertionError("switch_payment must be zero without a switch")


class OnlineState:
    """Mutable per-run state: net, KRR model, counters, stages, cache."""

    def __init__(self, cfg: OnlineConfig, dim: int):
        self.cfg = cfg
        self.t = 0
        self.net = EpsilonNet(radius_eps=cfg.eps, centers=np.zeros((0, dim)))
        self.krr = KrrModel(cfg.kernel, ridge=cfg.kernel.ridge_lambda)
        self.n_f = np.zeros(0, dtype=np.int64)        # arrivals per center
        self.n_c = np.zeros(0, dtype=np.int64)        # cost observations per center
        self.l_c = np.zeros(0, dtype=np.float64)      # cost sums per center
        self.tau_u = np.zeros(0, dtype=np.int64)      # local stage index
        self.stage_cur = np.zeros(0, dtype=np.int64)  # |T(u, tau_u)|
        self.stage_past = np.zeros(0, dtype=np.int64) # sum over closed stages
        self.tau_f = 1
        self.f_cur = 0
        self.f_past = 0
        self.cache_indices: list[int] = []
        self.responses: dict[int, str] = {}
        self.switch_count = 0
        self.llm_calls = 0
        self.local_advances = 0
        self.global_advances = 0

    @property
    def m_t(self) -> int:
        return self.net.size

    def _grow_center(self) -> int:
        self.n_f = np.append(self.n_f, 0)
        self.n_c = np.append(self.n_c, 0)
        self.l_c = np.append(self.l_c, 0.0)
        self.tau_u = np.append(self.tau_u, 1)
        self.stage_cur = np.append(self.stage_cur, 0)
        self.stage_past = np.append(self.stage_past, 0)
        u = self.net.size - 1
        self.krr.track_point(self.net.centers[u])
        return u

    def cache_points(self) -> np.ndarray:
        if not self.cache_indices:
            return np.zeros((0, self.net.centers.shape[1]))
        return self.net.centers[self.cache_indices]

    def cache_signature(self) -> tuple[int, ...]:
        return tuple(self.cache_indices)

    def lcb_costs(self) -> np.ndarray:
        """Optimistic per-center costs under the current observation set."""
        means, sigmas = self.krr.tracked_posterior()
        beta = optimism_multiplier(self.cfg.conf, self.krr.info_gain, self.krr.count)
        return means - beta * sigmas

    def check_invariants(self) -> None:
        assert int(self.n_f.sum()) == self.t, "sum N_f(u) must equal t"
        assert self.f_cur + self.f_past == self.t, "global stage sizes must cover all rounds"
        assert int(self.n_c.sum()) == self.krr.count, "sum N_c(u) must equal ell"
        assert int((self.stage_cur + self.stage_past).sum()) == self.krr.count, (
            "local stage sizes must cover all cost observations"
        )


def online_step(state: OnlineState, x_t: np.ndarray, env: CostEnv, cfg: OnlineConfig) -> RoundOutcome:
    """One full round: net insert, stage checks, optional switch, serve/update."""
    state.t += 1
    switch = False
    _, is_new = dynamic_net_insert(state.net, x_t)
    if is_new:
        u_t = state._grow_center()
        switch = True
    else:
        u_t = assign_cell(state.net, x_t)
    # local stage limits, checked for every center on every round
    if state.m_t > 0:
        thr = 1.0 + np.sqrt((cfg.horizon_T / state.m_t) * state.stage_past)
        hit = state.stage_cur >= thr
        if hit.any():
            state.tau_u[hit] += 1
            state.stage_past[hit] += state.stage_cur[hit]
            state.stage_cur[hit] = 0
            state.local_advances += int(hit.sum())
            switch = True
    if state.f_cur >= 1.0 + math.sqrt(cfg.horizon_T * state.f_past):
        state.tau_f += 1
        state.f_past += state.f_cur
        state.f_cur = 0
        state.global_advances += 1
        switch = True
    payment = 0.0
    cache_changed = False
    if switch:
        payment, cache_changed = switch_cache(state, env, cfg)
        state.switch_count += 1
    return serve_and_update(
        state, x_t, u_t, env, cfg,
        switched=switch, new_center=is_new, payment=payment, cache_changed=cache_changed,
    )


def switch_cache(state: OnlineState, env: CostEnv, cfg: OnlineConfig) -> tuple[float, bool]:
    """Rebuild the cache with empirical weights and LCB costs; pay for fetches."""
    t = state.t
    weights = state.n_f / max(1, t - 1)
    lcb = state.lcb_costs()
    inst = DiscreteInstance(state.net.centers, weights, lcb, cfg.fn)
    result = reverse_greedy(inst, cfg.k)
    new_set = set(result.cache) - set(state.cache_indices)
    payment = 0.0
    if new_set:
        fetched = sorted(new_set)
        payment = float(np.sum(env.fetch_costs(state.net.centers[fetched])))
        for u in fetched:
            state.responses[u] = f"resp@{u}"
    changed = set(result.cache) != set(state.cache_indices)
    state.cache_indices = result.cache
    return payment, changed


def serve_and_update(
    state: OnlineState,
    x_t: np.ndarray,
    u_t: int,
    env: CostEnv,
    cfg: OnlineConfig,
    switched: bool = False,
    new_center: bool = False,
    payment: float = 0.0,
    cache_changed: bool = False,
) -> RoundOutcome:
    """Route via the optimistic comparison; only LLM calls extend the KRR set."""
    state.n_f[u_t] += 1
    state.f_cur += 1
    if state.krr.count == 0:
        lcb_u = -cfg.conf.rkhs_bound_B
    else:
        means, sigmas = state.krr.tracked_posterior()
        beta = optimism_multiplier(cfg.conf, state.krr.info_gain, state.krr.count)
        lcb_u = float(means[u_t] - beta * sigmas[u_t])
    cache_pts = state.cache_points()
    if cache_pts.shape[0] == 0:
        dist = math.inf
    else:
        dist = float(distances_to_points(x_t, cache_pts).min())
    phi_val = float(cfg.fn(dist)) if math.isfinite(dist) else 1.0
    if lcb_u <= phi_val:
        cost = env.realize(x_t, state.t)
        state.krr.append_observation(x_t, cost)
        state.n_c[u_t] += 1
        state.l_c[u_t] += cost
        state.stage_cur[u_t] += 1
        state.llm_calls += 1
        served, realized = SERVED_LLM, cost
    else:
        served, realized = SERVED_CACHE, phi_val
    return RoundOutcome(
        served_from=served,
        realized_cost_component=float(realized),
        switched=switched,
        new_center=new_center,
        switch_payment=payment,
        center_index=u_t,
        cache_changed=cache_changed,
    )


class CLCBLSCont:
    """Policy wrapper with the step interface the harness drives."""

    name = "clcb_ls_cont"

    def __init__(self, cfg: OnlineConfig, env: CostEnv, dim: int):
        self.cfg = cfg
        self.env = env
        self.state = OnlineState(cfg, dim)

    def step(self, x_t: np.ndarray) -> RoundOutcome:
        return online_step(self.state, x_t, self.env, self.cfg)

    def cache_points(self) -> np.ndarray:
        return self.state.cache_points()

    def cache_signature(self):
        return self.state.cache_signature()
