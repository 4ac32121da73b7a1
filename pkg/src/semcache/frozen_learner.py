"""Stage-frozen caching: a candidate pool that only refreshes when both the
arrival-weight and cost uncertainty envelopes drop below the stage tolerance
e_s = 2^(-2^s), with membership radius rho_s = e_s / (2 L_g).

Between refreshes the pool, tolerances, and cache are all frozen; queries are
assigned to pool members within rho_s or to the outlier bucket. Routing is the
same optimistic rule as the online learner, except the lower-confidence cost
is evaluated at the raw query instead of its net center (the stage-frozen
variant's printed form; the difference is deliberate).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cache_core import DiscreteInstance, reverse_greedy
from .cost_model import MismatchFn
from .geometry import distances_to_points
from .krr import ConfidenceSpec, KernelSpec, KrrModel, ONLINE_OPTIMISTIC, optimism_multiplier
from .online_ls import CostEnv, RoundOutcome, SERVED_CACHE, SERVED_LLM

BOTTOM = -1  # outlier symbol


@dataclass
class FrozenConfig:
    horizon_T: int
    k: int
    kernel: KernelSpec = field(default_factory=KernelSpec)
    conf: ConfidenceSpec | None = None
    fn: MismatchFn = field(default_factory=MismatchFn)
    lipschitz_Lg: float = 1.0
    pool_Cp: float = 1.0

    def __post_init__(self):
        if self.conf is None:
            self.conf = ConfidenceSpec(delta=1.0 / self.horizon_T, mode=ONLINE_OPTIMISTIC)
        if self.conf.mode != ONLINE_OPTIMISTIC:
            raise ValueError("frozen learner routes with an optimistic LCB spec")
        if self.lipschitz_Lg <= 0 or self.pool_Cp <= 0:
            raise ValueError("L_g and C_p must be positive")


def stage_tolerance(s: int) -> float:
    """e_s = 2^(-2^s); underflows to 0.0 near s = 10, which is a hard stop."""
    return 2.0 ** -(2.0**s)


def pool_uncertainty(m_s: int, t: int, n: int, delta: float, c_p: float) -> float:
    """Arrival-weight envelope C_p sqrt((m_s log 2 + log(2 t^2 / delta)) / n)."""
    if n < 1:
        raise ValueError("stage length n must be >= 1")
    return c_p * math.sqrt((m_s * math.log(2.0) + math.log(2.0 * t * t / delta)) / n)


@dataclass
class UncertaintyEnvelope:
    u_pool: float
    u_cost: float

    def __post_init__(self):
        if self.u_pool < 0 or self.u_cost < 0:
            raise ValueError("envelope values must be nonnegative")

    def below(self, tol: float) -> bool:
        return self.u_cost <= tol and self.u_pool <= tol


@dataclass
class StageRecord:
    stage: int
    tolerance: float
    radius: float
    length: int
    pool_size: int


class FrozenState:
    """Mutable per-run state of the stage-frozen learner."""

    def __init__(self, cfg: FrozenConfig, dim: int):
        self.cfg = cfg
        self.t = 0
        self.dim = dim
        self.all_seen: list[np.ndarray] = []   # unique queries, arrival order
        self._seen_keys: dict[bytes, int] = {}
        self.pool = np.zeros((0, dim))
        self.pool_keys: list[bytes] = []
        self.stage_s = 1
        self.tolerance_e = stage_tolerance(1)
        self.radius_rho = self.tolerance_e / (2.0 * cfg.lipschitz_Lg)
        self.stage_len_n = 0
        self.counts = np.zeros(0, dtype=np.int64)   # N(u) over the pool
        self.count_bottom = 0                        # N(bot)
        self.krr = KrrModel(cfg.kernel, ridge=cfg.kernel.ridge_lambda)
        self.cache_keys: list[bytes] = []
        self.cache_points_arr = np.zeros((0, dim))
        self.responses: dict[bytes, str] = {}
        self.pending_switch = True   # forces the first refresh at t = 1
        self.switch_count = 0
        self.llm_calls = 0
        self.stage_records: list[StageRecord] = [
            StageRecord(1, self.tolerance_e, self.radius_rho, 0, 0)
        ]
        self.last_envelope = UncertaintyEnvelope(0.0, 0.0)

    @property
    def stage_count(self) -> int:
        return len(self.stage_records)

    def cache_points(self) -> np.ndarray:
        return self.cache_points_arr

    def cache_signature(self) -> tuple[bytes, ...]:
        return tuple(self.cache_keys)

    def note_arrival(self, x: np.ndarray) -> None:
        key = x.tobytes()
        if key not in self._seen_keys:
            self._seen_keys[key] = len(self.all_seen)
            self.all_seen.append(x.copy())


def handle_stage(state: FrozenState, x_t: np.ndarray, cfg: FrozenConfig) -> bool:
    """Assign x_t within rho_s or to the outlier bucket, update the envelope,
    and report whether both uncertainty envelopes dropped below e_s."""
    state.stage_len_n += 1
    state.stage_records[-1].length = state.stage_len_n
    if state.pool.shape[0] > 0:
        d = distances_to_points(x_t, state.pool)
        j = int(np.argmin(d))
        z = j if d[j] <= state.radius_rho else BOTTOM
    else:
        z = BOTTOM
    if z == BOTTOM:
        state.count_bottom += 1
    else:
        state.counts[z] += 1
    m_s = state.pool.shape[0] + 1
    u_p = pool_uncertainty(m_s, state.t, state.stage_len_n, cfg.conf.delta, cfg.pool_Cp)
    beta = optimism_multiplier(cfg.conf, state.krr.info_gain, state.krr.count)
    u_c = beta * math.sqrt(2.0 * state.krr.info_gain / state.t)
    state.last_envelope = UncertaintyEnvelope(u_pool=u_p, u_cost=u_c)
    return state.last_envelope.below(state.tolerance_e)


def refresh_pool_weights(state: FrozenState) -> np.ndarray:
    """Weights over the refreshed pool: pool members keep their empirical
    mass; members unseen by the old counting split the outlier mass evenly;
    everything renormalizes to 1."""
    n = max(1, state.stage_len_n)
    old = {k: state.counts[i] / n for i, k in enumerate(state.pool_keys)}
    bot_mass = state.count_bottom / n
    new_keys = [x.tobytes() for x in state.all_seen]
    fresh = [k for k in new_keys if k not in old]
    share = bot_mass / len(fresh) if fresh else 0.0
    w = np.array([old.get(k, share) for k in new_keys], dtype=np.float64)
    total = w.sum()
    if total <= 0:
        w = np.full(len(new_keys), 1.0 / len(new_keys))
    else:
        w = w / total
    return w


def switch_pool(state: FrozenState, env: CostEnv, cfg: FrozenConfig) -> float:
    """Refresh the pool to everything seen, rebuild the cache, advance the stage."""
    weights = refresh_pool_weights(state)
    state.pool = np.stack(state.all_seen)
    state.pool_keys = [x.tobytes() for x in state.all_seen]
    means, sigmas = state.krr.posterior_many(state.pool)
    beta = optimism_multiplier(cfg.conf, state.krr.info_gain, state.krr.count)
    if state.krr.count == 0:
        lcb = -cfg.conf.rkhs_bound_B * np.ones(state.pool.shape[0])
    else:
        lcb = means - beta * sigmas
    inst = DiscreteInstance(state.pool, weights, lcb, cfg.fn)
    result = reverse_greedy(inst, cfg.k)
    new_keys = [state.pool_keys[i] for i in result.cache]
    fetched = [i for i, key in zip(result.cache, new_keys) if key not in set(state.cache_keys)]
    payment = 0.0
    if fetched:
        payment = float(np.sum(env.fetch_costs(state.pool[fetched])))
        for i in fetched:
            state.responses[state.pool_keys[i]] = f"resp#{i}"
    state.cache_keys = new_keys
    state.cache_points_arr = state.pool[result.cache] if result.cache else np.zeros((0, state.dim))
    state.stage_s += 1
    state.tolerance_e = stage_tolerance(state.stage_s)
    if state.tolerance_e == 0.0:
        raise RuntimeError(
            f"stage tolerance underflowed at s={state.stage_s}; run aborted"
        )
    state.radius_rho = state.tolerance_e / (2.0 * cfg.lipschitz_Lg)
    state.stage_len_n = 0
    state.counts = np.zeros(state.pool.shape[0], dtype=np.int64)
    state.count_bottom = 0
    state.switch_count += 1
    state.stage_records.append(
        StageRecord(state.stage_s, state.tolerance_e, state.radius_rho, 0, state.pool.shape[0])
    )
    return payment


def frozen_step(state: FrozenState, x_t: np.ndarray, env: CostEnv, cfg: FrozenConfig) -> RoundOutcome:
    """One round: track the query, maybe refresh the pool, then route."""
    state.t += 1
    state.note_arrival(x_t)
    envelope_hit = handle_stage(state, x_t, cfg)
    do_switch = state.pending_switch or envelope_hit
    payment = 0.0
    if do_switch:
        payment = switch_pool(state, env, cfg)
        state.pending_switch = False
    # routing (LCB evaluated at the raw query, not its pool representative)
    if state.krr.count == 0:
        lcb_x = -cfg.conf.rkhs_bound_B
    else:
        mean, sigma = state.krr.posterior(x_t)
        beta = optimism_multiplier(cfg.conf, state.krr.info_gain, state.krr.count)
        lcb_x = mean - beta * sigma
    pts = state.cache_points()
    dist = float(distances_to_points(x_t, pts).min()) if pts.shape[0] else math.inf
    phi_val = float(cfg.fn(dist)) if math.isfinite(dist) else 1.0
    if lcb_x <= phi_val:
        cost = env.realize(x_t, state.t)
        state.krr.append_observation(x_t, cost)
        state.llm_calls += 1
        served, realized = SERVED_LLM, cost
    else:
        served, realized = SERVED_CACHE, phi_val
    return RoundOutcome(
        served_from=served,
        realized_cost_component=float(realized),
        switched=do_switch,
        new_center=False,
        switch_payment=payment,
        center_index=BOTTOM,
        cache_changed=do_switch,
    )


class CLCBFrozenCont:
    """Policy wrapper with the harness step interface."""

    name = "clcb_frozen_cont"

    def __init__(self, cfg: FrozenConfig, env: CostEnv, dim: int):
        self.cfg = cfg
        self.env = env
        self.state = FrozenState(cfg, dim)

    def step(self, x_t: np.ndarray) -> RoundOutcome:
        return frozen_step(self.state, x_t, self.env, self.cfg)

    def cache_points(self) -> np.ndarray:
        return self.state.cache_points()

    def cache_signature(self):
        return self.state.cache_signature()
