"""Embedding-space primitives: normalized distance, epsilon-nets, Voronoi weights.

All geometry works on unit-norm embeddings. Distances are Euclidean divided
by 2 so that any pair of unit vectors lands in [0, 1] (antipodal pairs hit
exactly 1). Net construction is greedy-sequential in arrival order, which
makes the offline static net and the online dynamic net share one rule.

Nets are immutable after offline construction; dynamic insertion assumes a
single writer. Read-only queries are safe to share.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Sentinel returned by assign_cell when a query is not a member of any cell
# (empty net, or frozen-learner mode with a membership radius).
OUTSIDE = -1

UNIT_NORM_ATOL = 1e-9


class GeometryError(ValueError):
    """Configuration error in geometric inputs (dimension mismatch etc.)."""


def normalize(coords: np.ndarray) -> np.ndarray:
    """Project one vector or a stack of row vectors onto the unit sphere."""
    coords = np.asarray(coords, dtype=np.float64)
    norms = np.linalg.norm(coords, axis=-1, keepdims=True)
    if np.any(norms == 0.0):
        raise GeometryError("cannot normalize a zero vector")
    return coords / norms


def check_unit_norm(x: np.ndarray) -> None:
    norms = np.linalg.norm(np.atleast_2d(x), axis=1)
    if not np.allclose(norms, 1.0, atol=UNIT_NORM_ATOL):
        raise GeometryError("embedding is not unit-norm (re-run normalize())")


def normalized_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Euclidean distance between unit vectors, scaled into [0, 1].

    Unit vectors are at most 2 apart, so dividing by 2 gives the exact
    [0, 1] range. Symmetry and the triangle inequality survive the scaling.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise GeometryError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(np.linalg.norm(a - b) / 2.0)


def distances_to_points(x: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Normalized distances from one embedding to each row of `points`."""
    points = np.atleast_2d(points)
    diff = points - x[None, :]
    return np.sqrt(np.einsum("ij,ij->i", diff, diff)) / 2.0


def cross_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Normalized distance matrix between row stacks a (n x d) and b (m x d)."""
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    if a.shape[1] != b.shape[1]:
        raise GeometryError(f"dimension mismatch: {a.shape} vs {b.shape}")
    sq = (
        np.sum(a * a, axis=1)[:, None]
        + np.sum(b * b, axis=1)[None, :]
        - 2.0 * (a @ b.T)
    )
    np.maximum(sq, 0.0, out=sq)
    return np.sqrt(sq) / 2.0


@dataclass
class EpsilonNet:
    """Greedy epsilon-net over unit embeddings with per-cell arrival counters.

    Invariants: centers are pairwise more than `radius_eps` apart, and
    `arrival_counts` sums to `total_arrivals`.
    """

    radius_eps: float
    centers: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    arrival_counts: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    total_arrivals: int = 0

    def __post_init__(self):
        if not (0.0 < self.radius_eps <= 1.0):
            raise GeometryError(f"radius_eps must be in (0, 1], got {self.radius_eps}")
        self.centers = np.atleast_2d(np.asarray(self.centers, dtype=np.float64))
        if self.centers.size == 0:
            self.centers = self.centers.reshape(0, self.centers.shape[-1] if self.centers.ndim > 1 else 0)

    @property
    def size(self) -> int:
        return self.centers.shape[0]

    def empirical_weights(self) -> np.ndarray:
        """w_hat_i = arrivals in cell i / max(1, total arrivals)."""
        return self.arrival_counts / max(1, self.total_arrivals)

    def record_arrival(self, center_index: int) -> None:
        self.arrival_counts[center_index] += 1
        self.total_arrivals += 1


def build_static_net(points: np.ndarray, eps: float) -> EpsilonNet:
    """Greedy-sequential net: scan in input order, keep points > eps from all kept.

    Every input point ends up within eps of some center (coverage), and kept
    centers are pairwise more than eps apart (separation). Arrival counters are
    filled by Voronoi assignment of the inputs to the finished net, not by the
    incremental scan.
    """
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    n, d = points.shape
    if n == 0:
        return EpsilonNet(radius_eps=eps, centers=np.zeros((0, d)))
    center_idx: list[int] = []
    for i in range(n):
        if not center_idx:
            center_idx.append(i)
            continue
        dmin = distances_to_points(points[i], points[center_idx]).min()
        if dmin > eps:
            center_idx.append(i)
    net = EpsilonNet(radius_eps=eps, centers=points[center_idx].copy())
    net.arrival_counts = np.zeros(net.size, dtype=np.int64)
    cells = assign_cells(net, points)
    counts = np.bincount(cells, minlength=net.size)
    net.arrival_counts = counts.astype(np.int64)
    net.total_arrivals = n
    return net


def assign_cell(net: EpsilonNet, x: np.ndarray, membership_radius: float | None = None) -> int:
    """Index of the nearest center, ties broken by lowest index.

    Returns OUTSIDE when the net is empty, or in membership mode when the
    nearest center is farther than `membership_radius`.
    """
    if net.size == 0:
        return OUTSIDE
    d = distances_to_points(np.asarray(x, dtype=np.float64), net.centers)
    j = int(np.argmin(d))  # np.argmin returns the first (lowest) index on ties
    if membership_radius is not None and d[j] > membership_radius:
        return OUTSIDE
    return j


def assign_cells(net: EpsilonNet, points: np.ndarray) -> np.ndarray:
    """Vectorized Voronoi assignment of many points (no membership radius)."""
    if net.size == 0:
        raise GeometryError("cannot assign cells against an empty net")
    d = cross_distances(np.atleast_2d(points), net.centers)
    return np.argmin(d, axis=1)


def dynamic_net_insert(net: EpsilonNet, x: np.ndarray) -> tuple[EpsilonNet, bool]:
    """Online net rule: x becomes a center iff it is > eps from all centers.

    Mutates `net` in place and returns it together with the new-center flag.
    Arrival counting stays with the caller (the learner owns it).
    """
    x = np.asarray(x, dtype=np.float64)
    if net.size == 0:
        net.centers = x[None, :].copy()
        net.arrival_counts = np.zeros(1, dtype=np.int64)
        return net, True
    dmin = distances_to_points(x, net.centers).min()
    if dmin > net.radius_eps:
        net.centers = np.vstack([net.centers, x[None, :]])
        net.arrival_counts = np.append(net.arrival_counts, 0)
        return net, True
    return net, False


QUANTILE_LEVELS = (0.0, 0.25, 0.5, 0.75, 1.0)


@dataclass
class DistanceStats:
    """Quantiles of pairwise / nearest-neighbor / point-to-universe distances."""

    pairwise_quantiles: list[tuple[float, float]]
    nn_quantiles: list[tuple[float, float]]
    stream_to_universe_quantiles: list[tuple[float, float]]
    singleton: bool = False

    def as_dict(self) -> dict:
        return {
            "pairwise": self.pairwise_quantiles,
            "nearest_neighbor": self.nn_quantiles,
            "stream_to_universe": self.stream_to_universe_quantiles,
            "singleton": self.singleton,
        }


def _quantiles(values: np.ndarray) -> list[tuple[float, float]]:
    if values.size == 0:
        return []
    qs = np.quantile(values, QUANTILE_LEVELS)
    return [(float(q), float(v)) for q, v in zip(QUANTILE_LEVELS, qs)]


def distance_diagnostics(points: np.ndarray, universe: np.ndarray | None = None) -> DistanceStats:
    """Exact distance quantiles for a point sample, optionally against a universe.

    Singleton inputs have no pairwise structure; they are flagged and the
    pairwise/NN lists come back empty.
    """
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    n = points.shape[0]
    if n == 0:
        raise GeometryError("distance_diagnostics needs a nonempty sample")
    if n == 1:
        pair_q: list[tuple[float, float]] = []
        nn_q: list[tuple[float, float]] = []
        singleton = True
    else:
        d = cross_distances(points, points)
        iu = np.triu_indices(n, k=1)
        pair_q = _quantiles(d[iu])
        np.fill_diagonal(d, np.inf)
        nn_q = _quantiles(d.min(axis=1))
        singleton = False
    if universe is not None and np.atleast_2d(universe).shape[0] > 0:
        du = cross_distances(points, universe)
        su_q = _quantiles(du.min(axis=1))
    else:
        su_q = []
    return DistanceStats(
        pairwise_quantiles=pair_q,
        nn_quantiles=nn_q,
        stream_to_universe_quantiles=su_q,
        singleton=singleton,
    )
