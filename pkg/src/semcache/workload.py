"""Seeded query streams: jittered synthetic universes and bursty trace replay.

The synthetic universe is a set of random unit directions with bimodal token
lengths; arrivals pick a universe point uniformly, add per-coordinate Gaussian
jitter, and renormalize. Trace streams replay embedding pools with a frozen
log-normal popularity per source and round-robin bursts between sources.

True cell weights have no closed form after jitter + renormalization, so the
synthetic side estimates them by Monte Carlo with a reported standard error;
the trace side computes them exactly from the popularity table.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import assign_cells, cross_distances, normalize

SYNTHETIC_ANALYTIC = "SYNTHETIC_ANALYTIC"
TRACE_EMPIRICAL = "TRACE_EMPIRICAL"

# Jitter scales pinned by scripts/calibrate_jitter.py so the stream
# nearest-neighbor median lands near 0.074 in normalized distance.
JITTER_SIGMA_BY_DIM = {384: 0.005726, 32: 0.024124}
DEFAULT_JITTER_SIGMA_384 = JITTER_SIGMA_BY_DIM[384]


@dataclass
class SyntheticSpec:
    universe_size_m: int = 50
    d_e: int = 384
    jitter_sigma: float = DEFAULT_JITTER_SIGMA_384
    token_low_range: tuple[int, int] = (3, 15)
    token_high_range: tuple[int, int] = (25, 40)
    token_mix: float = 0.5
    universe_seed: int = 7
    stream_seed: int = 0

    def __post_init__(self):
        if self.jitter_sigma < 0:
            raise ValueError("jitter_sigma must be nonnegative")
        if not (0.0 <= self.token_mix <= 1.0):
            raise ValueError("token_mix must be a probability")


def gen_synthetic_universe(spec: SyntheticSpec) -> tuple[np.ndarray, np.ndarray]:
    """(embeddings, token_lengths): m random unit rows + bimodal integer lengths."""
    rng = np.random.default_rng(spec.universe_seed)
    coords = normalize(rng.standard_normal((spec.universe_size_m, spec.d_e)))
    low = rng.random(spec.universe_size_m) < spec.token_mix
    lo_a, lo_b = spec.token_low_range
    hi_a, hi_b = spec.token_high_range
    lens = np.where(
        low,
        rng.integers(lo_a, lo_b + 1, size=spec.universe_size_m),
        rng.integers(hi_a, hi_b + 1, size=spec.universe_size_m),
    )
    return coords, lens.astype(np.int64)


def next_synthetic_query(
    spec: SyntheticSpec, universe: np.ndarray, rng: np.random.Generator
) -> tuple[np.ndarray, int]:
    """Uniform universe index, per-coordinate jitter, renormalize."""
    idx = int(rng.integers(universe.shape[0]))
    x = universe[idx] + rng.normal(0.0, spec.jitter_sigma, size=universe.shape[1])
    return normalize(x), idx


def synthetic_stream(
    spec: SyntheticSpec, universe: np.ndarray, rng: np.random.Generator, length: int
) -> tuple[np.ndarray, np.ndarray]:
    """Batch version of next_synthetic_query: (queries, universe_indices)."""
    idx = rng.integers(universe.shape[0], size=length)
    x = universe[idx] + rng.normal(0.0, spec.jitter_sigma, size=(length, universe.shape[1]))
    return normalize(x), idx


@dataclass
class TraceSource:
    """One embedding pool with a frozen log-normal popularity profile."""

    pool: np.ndarray
    popularity_seed: int
    name: str = ""
    token_lengths: np.ndarray | None = None
    probabilities: np.ndarray = field(init=False)

    def __post_init__(self):
        self.pool = np.atleast_2d(np.asarray(self.pool, dtype=np.float64))
        if self.pool.shape[0] == 0:
            raise ValueError(f"trace source {self.name!r} has an empty pool")
        if self.token_lengths is None:
            self.token_lengths = np.ones(self.pool.shape[0], dtype=np.int64)
        rng = np.random.default_rng(self.popularity_seed)
        scores = rng.lognormal(mean=0.0, sigma=1.0, size=self.pool.shape[0])
        self.probabilities = scores / scores.sum()


@dataclass
class TraceSpec:
    sources: list[TraceSource]
    burst_length_law: tuple[int, int] = (20, 100)

    def __post_init__(self):
        if not self.sources:
            raise ValueError("trace spec needs at least one source")
        a, b = self.burst_length_law
        if not (1 <= a <= b):
            raise ValueError("burst length law must satisfy 1 <= min <= max")


@dataclass
class TraceStreamState:
    source_idx: int = 0
    remaining_in_burst: int = 0
    started: bool = False


def next_trace_query(
    spec: TraceSpec, state: TraceStreamState, rng: np.random.Generator
) -> tuple[np.ndarray, int, int]:
    """(embedding, source index, pool index); bursts rotate sources round-robin."""
    if state.remaining_in_burst <= 0:
        if state.started:
            state.source_idx = (state.source_idx + 1) % len(spec.sources)
        state.started = True
        a, b = spec.burst_length_law
        state.remaining_in_burst = int(rng.integers(a, b + 1))
    src = spec.sources[state.source_idx]
    j = int(rng.choice(src.pool.shape[0], p=src.probabilities))
    state.remaining_in_burst -= 1
    return src.pool[j], state.source_idx, j


def trace_stream(
    spec: TraceSpec, rng: np.random.Generator, length: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    state = TraceStreamState()
    qs, srcs, idxs = [], [], []
    for _ in range(length):
        x, s, j = next_trace_query(spec, state, rng)
        qs.append(x)
        srcs.append(s)
        idxs.append(j)
    return np.stack(qs), np.asarray(srcs), np.asarray(idxs)


@dataclass
class ArrivalTruth:
    """Ground-truth Voronoi weights over a candidate set, with MC uncertainty."""

    mode: str
    weights: np.ndarray
    std_errors: np.ndarray
    n_samples: int = 0

    def loss_std_error(self, g_values: np.ndarray) -> float:
        """Standard error of sum_i w_i g_i when w comes from MC sampling."""
        if self.mode == TRACE_EMPIRICAL or self.n_samples == 0:
            return 0.0
        g = np.asarray(g_values, dtype=np.float64)
        mean = float(self.weights @ g)
        var = float(self.weights @ (g - mean) ** 2)
        return float(np.sqrt(max(var, 0.0) / self.n_samples))


def true_weights_synthetic(
    spec: SyntheticSpec,
    universe: np.ndarray,
    candidate_centers: np.ndarray,
    n_samples: int = 100_000,
    weight_seed: int | None = None,
) -> ArrivalTruth:
    """Monte-Carlo cell masses from a fresh seeded sample of the jittered mixture."""
    seed = spec.stream_seed + 0x5EED if weight_seed is None else weight_seed
    rng = np.random.default_rng(seed)
    xs, _ = synthetic_stream(spec, universe, rng, n_samples)
    d = cross_distances(xs, candidate_centers)
    cells = np.argmin(d, axis=1)
    counts = np.bincount(cells, minlength=candidate_centers.shape[0])
    w = counts / n_samples
    se = np.sqrt(w * (1.0 - w) / n_samples)
    return ArrivalTruth(SYNTHETIC_ANALYTIC, w, se, n_samples)


def true_weights_trace(spec: TraceSpec, candidate_centers: np.ndarray) -> ArrivalTruth:
    """Exact cell masses: popularity mass assigned by Voronoi cell, equal
    long-run share per source (identical burst laws, round-robin)."""
    m = np.atleast_2d(candidate_centers).shape[0]
    w = np.zeros(m)
    share = 1.0 / len(spec.sources)
    from .geometry import EpsilonNet

    net = EpsilonNet(radius_eps=1.0, centers=candidate_centers)
    net.arrival_counts = np.zeros(net.size, dtype=np.int64)
    for src in spec.sources:
        cells = assign_cells(net, src.pool)
        w += share * np.bincount(cells, weights=src.probabilities, minlength=m)
    return ArrivalTruth(TRACE_EMPIRICAL, w, np.zeros(m), 0)
