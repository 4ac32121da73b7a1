"""Ground-truth serving costs, noisy realizations, and the mismatch penalty.

Two cost fields are supported. TOKEN_LENGTH mirrors the experimental setup:
each universe point carries a token length, costs are the min-max normalized
length, and perturbed queries inherit the cost of their nearest universe
point. SYNTHETIC_RKHS builds a cost that genuinely lives in the RBF RKHS
(a positive combination of kernel atoms), which is what the confidence-bound
coverage tests need.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .geometry import cross_distances

log = logging.getLogger(__name__)

TOKEN_LENGTH = "TOKEN_LENGTH"
SYNTHETIC_RKHS = "SYNTHETIC_RKHS"

DEFAULT_C_MIN = 0.01


@dataclass
class MismatchFn:
    """Clipped linear mismatch phi(d) = min(zeta * d, 1)."""

    zeta: float = 1.0

    def __post_init__(self):
        if self.zeta <= 0:
            raise ValueError(f"zeta must be positive, got {self.zeta}")

    def __call__(self, d):
        return np.minimum(self.zeta * np.asarray(d, dtype=np.float64), 1.0)


def mismatch(fn: MismatchFn, d: float) -> float:
    if d < 0:
        raise ValueError("distance must be nonnegative")
    return float(fn(d))


@dataclass
class NoiseSpec:
    """Additive Gaussian cost noise with scale R; Gaussians are R-sub-Gaussian.

    With clip on, realized costs are forced into [0, 1]; clipping shifts the
    mean by an amount that vanishes for small R (see tests for the empirical
    bound at R <= 0.1).
    """

    r_subgauss: float = 0.1
    clip: bool = True

    def __post_init__(self):
        if self.r_subgauss < 0:
            raise ValueError("noise scale must be nonnegative")


@dataclass
class CostField:
    """Expected serving cost c(x) in (0, 1] over the embedding space."""

    mode: str
    universe: np.ndarray | None = None          # (m, d) unit rows, TOKEN_LENGTH mode
    token_lengths: np.ndarray | None = None     # (m,) ints
    minmax: tuple[float, float] | None = None
    rkhs_anchors: np.ndarray | None = None      # (a, d), SYNTHETIC_RKHS mode
    rkhs_weights: np.ndarray | None = None      # (a,) positive
    rkhs_length_scale: float = 0.5
    c_min: float = DEFAULT_C_MIN

    def __post_init__(self):
        if self.mode not in (TOKEN_LENGTH, SYNTHETIC_RKHS):
            raise ValueError(f"unknown cost mode {self.mode!r}")
        if self.mode == TOKEN_LENGTH:
            if self.universe is None or self.token_lengths is None:
                raise ValueError("TOKEN_LENGTH mode needs universe and token_lengths")
            self.universe = np.atleast_2d(np.asarray(self.universe, dtype=np.float64))
            self.token_lengths = np.asarray(self.token_lengths, dtype=np.float64)
            if self.minmax is None:
                self.minmax = (float(self.token_lengths.min()), float(self.token_lengths.max()))
            lo, hi = self.minmax
            if hi == lo:
                log.warning("degenerate token-length range [%s, %s]; all costs 0.5", lo, hi)
                self._unit_costs = np.full(self.token_lengths.shape, 0.5)
            else:
                normed = (self.token_lengths - lo) / (hi - lo)
                self._unit_costs = np.clip(normed, self.c_min, 1.0)
        else:
            if self.rkhs_anchors is None or self.rkhs_weights is None:
                raise ValueError("SYNTHETIC_RKHS mode needs anchors and weights")
            self.rkhs_anchors = np.atleast_2d(np.asarray(self.rkhs_anchors, dtype=np.float64))
            self.rkhs_weights = np.asarray(self.rkhs_weights, dtype=np.float64)
            if np.any(self.rkhs_weights < 0):
                raise ValueError("RKHS weights must be nonnegative to keep c(x) > 0")


def true_cost_many(field: CostField, x: np.ndarray) -> np.ndarray:
    """Vectorized c(x) for a stack of embeddings (row per query)."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if field.mode == TOKEN_LENGTH:
        d = cross_distances(x, field.universe)
        nearest = np.argmin(d, axis=1)
        return field._unit_costs[nearest]
    # positive kernel combination, strictly > 0 everywhere and <= sum(weights)
    diff_sq = (
        np.sum(x * x, axis=1)[:, None]
        + np.sum(field.rkhs_anchors * field.rkhs_anchors, axis=1)[None, :]
        - 2.0 * (x @ field.rkhs_anchors.T)
    )
    np.maximum(diff_sq, 0.0, out=diff_sq)
    k = np.exp(-diff_sq / (2.0 * field.rkhs_length_scale**2))
    return k @ field.rkhs_weights


def true_cost(field: CostField, x: np.ndarray) -> float:
    return float(true_cost_many(field, x)[0])


def sample_cost(field: CostField, noise: NoiseSpec, x: np.ndarray, rng: np.random.Generator) -> float:
    """One noisy realization C = c(x) + N(0, R^2), clipped to [0, 1] if asked."""
    c = true_cost(field, x) + rng.normal(0.0, noise.r_subgauss)
    if noise.clip:
        c = min(max(c, 0.0), 1.0)
    return float(c)


def sample_cost_many(
    field: CostField, noise: NoiseSpec, x: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    c = true_cost_many(field, x) + rng.normal(0.0, noise.r_subgauss, size=np.atleast_2d(x).shape[0])
    if noise.clip:
        np.clip(c, 0.0, 1.0, out=c)
    return c


def make_rkhs_cost_field(
    dim: int,
    rng: np.random.Generator,
    n_anchors: int = 12,
    length_scale: float = 0.5,
    rkhs_norm_budget: float = 0.9,
) -> tuple[CostField, float]:
    """Random cost field inside the RBF RKHS with norm at most `rkhs_norm_budget`.

    Anchors are random unit vectors, weights are positive and rescaled so that
    both sup_x c(x) <= sum(weights) <= 1 and the exact RKHS norm
    sqrt(w^T G w) stays within budget. Returns (field, actual_norm).
    """
    anchors = rng.standard_normal((n_anchors, dim))
    anchors /= np.linalg.norm(anchors, axis=1, keepdims=True)
    w = rng.random(n_anchors) + 0.1
    diff_sq = (
        np.sum(anchors * anchors, axis=1)[:, None]
        + np.sum(anchors * anchors, axis=1)[None, :]
        - 2.0 * (anchors @ anchors.T)
    )
    np.maximum(diff_sq, 0.0, out=diff_sq)
    gram = np.exp(-diff_sq / (2.0 * length_scale**2))
    norm = float(np.sqrt(w @ gram @ w))
    scale = min(rkhs_norm_budget / norm, 1.0 / w.sum())
    w = w * scale
    field = CostField(
        mode=SYNTHETIC_RKHS,
        rkhs_anchors=anchors,
        rkhs_weights=w,
        rkhs_length_scale=length_scale,
    )
    return field, float(np.sqrt(w @ gram @ w))
