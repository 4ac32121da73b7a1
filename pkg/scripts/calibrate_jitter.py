"""Pin the synthetic jitter scale by bisection.

Target: the stream nearest-neighbor normalized-distance median of a seeded
(universe_seed=7, stream_seed=1, T=1000, m=50) sample should land near 0.074.
Run this to reproduce the JITTER_SIGMA_BY_DIM values in semcache.workload.
"""

from __future__ import annotations

import numpy as np

from semcache import workload
from semcache.geometry import cross_distances

TARGET = 0.074


def nn_median(dim: int, sigma: float, t: int = 1000) -> float:
    spec = workload.SyntheticSpec(d_e=dim, jitter_sigma=sigma, universe_seed=7, stream_seed=1)
    universe, _ = workload.gen_synthetic_universe(spec)
    rng = np.random.default_rng(spec.stream_seed)
    xs, _ = workload.synthetic_stream(spec, universe, rng, t)
    d = cross_distances(xs, xs)
    np.fill_diagonal(d, np.inf)
    return float(np.median(d.min(axis=1)))


def calibrate(dim: int, lo: float = 1e-4, hi: float = 0.5) -> float:
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        if nn_median(dim, mid) < TARGET:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


if __name__ == "__main__":
    for dim in (384, 32, 2):
        sigma = calibrate(dim)
        print(f"d_e={dim}: sigma={sigma:.6f}  nn_median={nn_median(dim, sigma):.4f}")
