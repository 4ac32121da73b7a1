"""Cache state, discretized/Monte-Carlo losses, reverse greedy, brute force.

The discretized loss over a candidate net is
    sum_i w_i * min(c_i, phi(d(x_i, M)))
with d(x, empty) = infinity. Costs are clamped to [0, 1] inside the loss only:
online LCB inputs may be negative, and the clamp lives at the consumer so the
routing rule keeps the raw values.

Reverse greedy starts from the full candidate set and removes, m - k times,
the item whose removal minimizes the loss. The inner loop keeps nearest /
second-nearest bookkeeping so each removal step costs O(m) instead of O(m^2);
removal deltas are exact per-point contribution differences, and ties break
toward the lowest candidate index.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from math import comb

import numpy as np

from .cost_model import MismatchFn
from .geometry import cross_distances

BRUTE_FORCE_GUARD = 10**6


class ContractViolation(ValueError):
    pass


@dataclass
class CacheState:
    """At most capacity_k (embedding, opaque response handle) entries."""

    capacity_k: int
    entries: list[tuple[np.ndarray, str]] = field(default_factory=list)

    def __post_init__(self):
        if self.capacity_k < 0:
            raise ContractViolation("capacity must be nonnegative")
        if len(self.entries) > self.capacity_k:
            raise ContractViolation("cache over capacity")

    @property
    def points(self) -> np.ndarray:
        if not self.entries:
            return np.zeros((0, 0))
        return np.stack([e[0] for e in self.entries])

    def __len__(self) -> int:
        return len(self.entries)


@dataclass
class DiscreteInstance:
    """(candidates, weights, costs, mismatch) tuple the oracle consumes.

    Weights must sum to 1; costs may be confidence-adjusted reals (clamped to
    [0, 1] during loss evaluation). The pairwise candidate distance matrix is
    computed lazily and cached.
    """

    candidates: np.ndarray
    weights: np.ndarray
    costs: np.ndarray
    mismatch_fn: MismatchFn

    def __post_init__(self):
        self.candidates = np.atleast_2d(np.asarray(self.candidates, dtype=np.float64))
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.costs = np.asarray(self.costs, dtype=np.float64)
        m = self.candidates.shape[0]
        if self.weights.shape != (m,) or self.costs.shape != (m,):
            raise ContractViolation("weights/costs must match candidate count")
        if np.any(self.weights < 0):
            raise ContractViolation("weights must be nonnegative")
        total = float(self.weights.sum())
        # all-zero weights are the online learner's first-round degenerate case
        if m > 0 and total > 1e-12 and abs(total - 1.0) > 1e-9:
            raise ContractViolation(f"weights sum to {total}, expected 1 (or all zero)")
        self._dist: np.ndarray | None = None

    @property
    def size(self) -> int:
        return self.candidates.shape[0]

    def pairwise(self) -> np.ndarray:
        if self._dist is None:
            self._dist = cross_distances(self.candidates, self.candidates)
            np.fill_diagonal(self._dist, 0.0)  # self-distance is exactly zero
        return self._dist

    def clamped_costs(self) -> np.ndarray:
        return np.clip(self.costs, 0.0, 1.0)


def discretized_loss(inst: DiscreteInstance, cache: "set[int] | list[int] | np.ndarray") -> float:
    """Exact weighted loss of caching the given candidate indices."""
    idx = np.asarray(sorted(cache), dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= inst.size):
        raise ContractViolation("cache index out of candidate range")
    cc = inst.clamped_costs()
    if idx.size == 0:
        contrib = inst.weights * np.minimum(cc, 1.0)  # phi(inf) clips to 1
    else:
        dmin = inst.pairwise()[:, idx].min(axis=1)
        contrib = inst.weights * np.minimum(cc, inst.mismatch_fn(dmin))
    return float(np.sum(contrib))


def loss_against_points(
    candidates: np.ndarray,
    weights: np.ndarray,
    costs: np.ndarray,
    fn: MismatchFn,
    cache_points: np.ndarray,
) -> float:
    """Discretized loss of an arbitrary point cache (not restricted to candidates)."""
    cc = np.clip(costs, 0.0, 1.0)
    if cache_points.size == 0:
        return float(np.sum(weights * np.minimum(cc, 1.0)))
    dmin = cross_distances(candidates, cache_points).min(axis=1)
    return float(np.sum(weights * np.minimum(cc, fn(dmin))))


@dataclass
class ReverseGreedyResult:
    cache: list[int]           # surviving candidate indices, ascending
    removal_order: list[int]   # removed indices, least beneficial first
    loss: float


def reverse_greedy(inst: DiscreteInstance, k: int) -> ReverseGreedyResult:
    """Remove least-beneficial candidates until k remain (all stay if m <= k)."""
    if k < 0:
        raise ContractViolation("k must be nonnegative")
    m = inst.size
    if m <= k:
        return ReverseGreedyResult(list(range(m)), [], discretized_loss(inst, range(m)))
    D = inst.pairwise()
    w = inst.weights
    cc = inst.clamped_costs()
    fn = inst.mismatch_fn
    live = np.ones(m, dtype=bool)
    # nearest / second-nearest live candidate per point (self counts; D_ii = 0)
    order = np.argsort(D, axis=1, kind="stable")
    n1 = order[:, 0].copy()
    n2 = order[:, 1].copy() if m > 1 else np.zeros(m, dtype=np.int64)
    g1 = np.minimum(cc, fn(D[np.arange(m), n1]))
    g2 = np.minimum(cc, fn(D[np.arange(m), n2])) if m > 1 else np.minimum(cc, 1.0)
    removal: list[int] = []
    for _ in range(m - k):
        live_idx = np.flatnonzero(live)
        delta = np.bincount(n1, weights=w * (g2 - g1), minlength=m)
        dl = delta[live_idx]
        q = int(live_idx[np.argmin(dl)])  # argmin takes the first = lowest index
        removal.append(q)
        live[q] = False
        live_idx = np.flatnonzero(live)
        if live_idx.size == 0:
            break  # k = 0 and the last candidate just left
        affected = np.flatnonzero((n1 == q) | (n2 == q))
        if affected.size:
            sub = D[np.ix_(affected, live_idx)]
            first = np.argmin(sub, axis=1)
            n1[affected] = live_idx[first]
            g1[affected] = np.minimum(cc[affected], fn(sub[np.arange(affected.size), first]))
            if live_idx.size > 1:
                sub2 = sub.copy()
                sub2[np.arange(affected.size), first] = np.inf
                second = np.argmin(sub2, axis=1)
                n2[affected] = live_idx[second]
                g2[affected] = np.minimum(cc[affected], fn(sub2[np.arange(affected.size), second]))
            else:
                n2[affected] = live_idx[0]
                g2[affected] = np.minimum(cc[affected], 1.0)
    cache = sorted(np.flatnonzero(live).tolist())
    return ReverseGreedyResult(cache, removal, discretized_loss(inst, cache))


@dataclass
class BruteForceResult:
    cache: list[int]
    loss: float


def brute_force_oracle(inst: DiscreteInstance, k: int) -> BruteForceResult:
    """Exhaustive minimum over all candidate subsets of size <= k.

    Subsets are visited in (size, lexicographic) order and strict improvement
    keeps the first optimum found, so ties resolve deterministically.
    """
    m = inst.size
    kk = min(k, m)
    total = sum(comb(m, r) for r in range(kk + 1))
    if total > BRUTE_FORCE_GUARD:
        raise ContractViolation(
            f"brute force refused: {total} subsets exceeds guard {BRUTE_FORCE_GUARD}"
        )
    best_set: tuple[int, ...] = ()
    best_loss = discretized_loss(inst, ())
    for r in range(1, kk + 1):
        for subset in combinations(range(m), r):
            loss = discretized_loss(inst, subset)
            if loss < best_loss:
                best_loss = loss
                best_set = subset
    return BruteForceResult(list(best_set), best_loss)


def monte_carlo_loss(
    cache_points: "np.ndarray | CacheState",
    field,
    fn: MismatchFn,
    sampler,
    n_samples: int,
    rng: np.random.Generator,
) -> tuple[float, float]:
    """Sample-mean estimate of the continuous loss E[min(c(x), phi(d(x, M)))].

    `sampler(rng, size)` must return a (size, d) stack of embeddings from the
    true arrival distribution. Returns (estimate, standard error).
    """
    from .cost_model import true_cost_many

    if isinstance(cache_points, CacheState):
        cache_points = cache_points.points
    if n_samples < 1:
        raise ContractViolation("need at least one sample")
    xs = sampler(rng, n_samples)
    c = np.clip(true_cost_many(field, xs), 0.0, 1.0)
    if np.atleast_2d(cache_points).shape[0] == 0 or cache_points.size == 0:
        g = np.minimum(c, 1.0)
    else:
        dmin = cross_distances(xs, cache_points).min(axis=1)
        g = np.minimum(c, fn(dmin))
    est = float(np.mean(g))
    se = float(np.std(g, ddof=1) / np.sqrt(n_samples)) if n_samples > 1 else float("inf")
    return est, se
