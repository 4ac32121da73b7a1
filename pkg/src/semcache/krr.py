"""RBF kernel ridge regression: posterior, incremental updates, confidence radii.

The kernel measures similarity with the *raw* Euclidean distance between
unit-norm embeddings (the cache geometry divides by 2; the kernel does not,
and the length scale absorbs the difference). A model is built with one fixed
effective ridge: the offline learner passes ell*lambda, the online learners
pass lambda, matching how each algorithm writes its Gram system.

Appending an observation extends the Cholesky factor by one row (a single
triangular solve) and updates any tracked points in closed form, so per-round
posterior lookups at net centers are O(1).

Appends assume a single writer; posterior queries between appends are
read-only and safe to run concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg.blas import dtpsv

JITTER = 1e-10

OFFLINE_PESSIMISTIC = "OFFLINE_PESSIMISTIC"
ONLINE_OPTIMISTIC = "ONLINE_OPTIMISTIC"


class KrrNumericError(ArithmeticError):
    """Non-finite kernel values or a Cholesky breakdown after jitter."""


@dataclass
class KernelSpec:
    """Unit-variance RBF: kappa(x, z) = exp(-||x - z||^2 / (2 length_scale^2))."""

    length_scale: float = 0.5
    ridge_lambda: float = 1.0

    def __post_init__(self):
        if self.length_scale <= 0 or self.ridge_lambda <= 0:
            raise ValueError("length_scale and ridge_lambda must be positive")

    def cross(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        a = np.atleast_2d(np.asarray(a, dtype=np.float64))
        b = np.atleast_2d(np.asarray(b, dtype=np.float64))
        sq = (
            np.sum(a * a, axis=1)[:, None]
            + np.sum(b * b, axis=1)[None, :]
            - 2.0 * (a @ b.T)
        )
        np.maximum(sq, 0.0, out=sq)
        return np.exp(-sq / (2.0 * self.length_scale**2))


@dataclass
class ConfidenceSpec:
    rkhs_bound_B: float = 1.0
    noise_R: float = 0.1
    delta: float = 0.05
    mode: str = OFFLINE_PESSIMISTIC

    def __post_init__(self):
        if not (0.0 < self.delta < 1.0):
            raise ValueError("delta must be in (0, 1)")
        if self.rkhs_bound_B <= 0 or self.noise_R < 0:
            raise ValueError("need B > 0 and R >= 0")
        if self.mode not in (OFFLINE_PESSIMISTIC, ONLINE_OPTIMISTIC):
            raise ValueError(f"unknown confidence mode {self.mode!r}")


class KrrModel:
    """Incremental KRR posterior over a fixed-ridge Gram system.

    The stored factor is chol(K + (ridge + JITTER) I); posterior variance is
    kappa(x,x) - ||L^-1 k_x||^2 and the running information gain follows the
    rank-one determinant identity against the model ridge.

    The lower-triangular factor lives in packed row-major storage (row j at
    offset j(j+1)/2), so appending an observation appends one row without
    copying, and solves run through BLAS dtpsv on a contiguous packed slice.
    """

    def __init__(self, kernel: KernelSpec, ridge: float | None = None):
        self.kernel = kernel
        self.ridge = kernel.ridge_lambda if ridge is None else float(ridge)
        if self.ridge <= 0:
            raise ValueError("effective ridge must be positive")
        self.count = 0
        self.info_gain = 0.0
        self._dim: int | None = None
        self._cap = 64
        self._X = None
        self._y = np.zeros(self._cap)
        self._Lp = np.zeros(self._cap * (self._cap + 1) // 2)  # packed factor
        self._plen = 0
        self._b = np.zeros(self._cap)  # L^-1 y, kept alongside the factor
        # tracked-point state: columns of V are L^-1 k_p for each tracked p
        self._tcap = 16
        self._tracked = None
        self._V = None
        self._t_mean = np.zeros(0)
        self._t_var = np.zeros(0)
        self.n_tracked = 0

    # ---------- storage ----------

    def _ensure_obs_capacity(self, dim: int):
        if self._X is None:
            self._dim = dim
            self._X = np.zeros((self._cap, dim))
            if self._V is None:
                self._V = np.zeros((self._cap, self._tcap))
        if self.count >= self._cap:
            new = self._cap * 2
            X = np.zeros((new, dim)); X[: self.count] = self._X[: self.count]
            y = np.zeros(new); y[: self.count] = self._y[: self.count]
            b = np.zeros(new); b[: self.count] = self._b[: self.count]
            V = np.zeros((new, self._V.shape[1])); V[: self.count] = self._V[: self.count]
            Lp = np.zeros(new * (new + 1) // 2); Lp[: self._plen] = self._Lp[: self._plen]
            self._X, self._y, self._b, self._V, self._Lp = X, y, b, V, Lp
            self._cap = new

    def _ensure_tracked_capacity(self, dim: int):
        if self._tracked is None:
            self._dim = self._dim or dim
            self._tracked = np.zeros((self._tcap, dim))
            self._t_mean = np.zeros(self._tcap)
            self._t_var = np.zeros(self._tcap)
            if self._V is None:
                self._V = np.zeros((self._cap, self._tcap))
        if self.n_tracked >= self._tcap:
            new = self._tcap * 2
            P = np.zeros((new, self._tracked.shape[1])); P[: self.n_tracked] = self._tracked[: self.n_tracked]
            V = np.zeros((self._V.shape[0], new)); V[:, : self.n_tracked] = self._V[:, : self.n_tracked]
            m = np.zeros(new); m[: self.n_tracked] = self._t_mean[: self.n_tracked]
            v = np.zeros(new); v[: self.n_tracked] = self._t_var[: self.n_tracked]
            self._tracked, self._V, self._t_mean, self._t_var = P, V, m, v
            self._tcap = new

    @property
    def observations(self) -> tuple[np.ndarray, np.ndarray]:
        if self.count == 0:
            return np.zeros((0, 0)), np.zeros(0)
        return self._X[: self.count].copy(), self._y[: self.count].copy()

    # ---------- posterior ----------

    def _forward_solve(self, rhs: np.ndarray) -> np.ndarray:
        """L^-1 rhs via the packed factor (rhs is one vector of length count)."""
        # packed rows of L are packed columns of L^T, so solve L^T' x = rhs
        return dtpsv(self.count, self._Lp[: self._plen], rhs, lower=0, trans=1, diag=0)

    def _solve_kvec(self, points: np.ndarray) -> np.ndarray:
        """L^-1 K(X_obs, points), shape (count, npoints)."""
        kmat = self.kernel.cross(self._X[: self.count], np.atleast_2d(points))
        if not np.all(np.isfinite(kmat)):
            raise KrrNumericError("non-finite kernel values against observation set")
        out = np.empty_like(kmat)
        for j in range(kmat.shape[1]):
            out[:, j] = self._forward_solve(np.ascontiguousarray(kmat[:, j]))
        return out

    def posterior(self, x: np.ndarray) -> tuple[float, float]:
        """Posterior (mean, sigma) at x; the empty model returns the prior (0, 1)."""
        m, s = self.posterior_many(np.atleast_2d(x))
        return float(m[0]), float(s[0])

    def posterior_many(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        if self.count == 0:
            n = points.shape[0]
            return np.zeros(n), np.ones(n)
        W = self._solve_kvec(points)
        means = W.T @ self._b[: self.count]
        var = 1.0 - np.einsum("ij,ij->j", W, W)
        np.clip(var, 0.0, None, out=var)
        return means, np.sqrt(var)

    # ---------- updates ----------

    def append_observation(self, z: np.ndarray, y: float) -> None:
        """Rank-one Cholesky extension plus closed-form tracked-point updates."""
        if not math.isfinite(y):
            raise KrrNumericError(f"observation value must be finite, got {y}")
        z = np.asarray(z, dtype=np.float64).ravel()
        self._ensure_obs_capacity(z.shape[0])
        ell = self.count
        ridge_eff = self.ridge + JITTER
        if ell == 0:
            w = np.zeros(0)
            var_z = 1.0
            mean_z = 0.0
            cov_tracked = (
                self.kernel.cross(self._tracked[: self.n_tracked], z[None, :]).ravel()
                if self.n_tracked
                else np.zeros(0)
            )
        else:
            w = self._solve_kvec(z[None, :]).ravel()
            var_z = max(1.0 - float(w @ w), 0.0)
            mean_z = float(w @ self._b[:ell])
            if self.n_tracked:
                kpz = self.kernel.cross(self._tracked[: self.n_tracked], z[None, :]).ravel()
                cov_tracked = kpz - self._V[:ell, : self.n_tracked].T @ w
            else:
                cov_tracked = np.zeros(0)
        diag = 1.0 + ridge_eff - float(w @ w)
        if diag <= 0.0:
            raise KrrNumericError("Cholesky breakdown: Gram system lost positive definiteness")
        lnn = math.sqrt(diag)
        denom = ridge_eff + (1.0 - float(w @ w))  # ridge + sigma^2_before(z)
        if self.n_tracked:
            gain = cov_tracked / denom
            self._t_mean[: self.n_tracked] += gain * (y - mean_z)
            self._t_var[: self.n_tracked] -= gain * cov_tracked
            np.clip(self._t_var[: self.n_tracked], 0.0, None, out=self._t_var[: self.n_tracked])
            self._V[ell, : self.n_tracked] = cov_tracked / lnn
        self._Lp[self._plen : self._plen + ell] = w
        self._Lp[self._plen + ell] = lnn
        self._plen += ell + 1
        self._X[ell] = z
        self._y[ell] = y
        self._b[ell] = (y - float(w @ self._b[:ell])) / lnn
        self.count = ell + 1
        self.info_gain += 0.5 * math.log1p(var_z / self.ridge)

    # ---------- tracked points ----------

    def track_point(self, p: np.ndarray) -> int:
        """Start maintaining the posterior at p; returns its tracked index."""
        p = np.asarray(p, dtype=np.float64).ravel()
        self._ensure_tracked_capacity(p.shape[0])
        i = self.n_tracked
        self._tracked[i] = p
        if self.count == 0:
            mean, var = 0.0, 1.0
        else:
            col = self._solve_kvec(p[None, :]).ravel()
            mean = float(col @ self._b[: self.count])
            var = max(1.0 - float(col @ col), 0.0)
            self._V[: self.count, i] = col
        self._t_mean[i] = mean
        self._t_var[i] = var
        self.n_tracked = i + 1
        return i

    def tracked_posterior(self) -> tuple[np.ndarray, np.ndarray]:
        """(means, sigmas) for all tracked points, maintained incrementally."""
        n = self.n_tracked
        return self._t_mean[:n].copy(), np.sqrt(np.clip(self._t_var[:n], 0.0, None))

    # ---------- diagnostics ----------

    def info_gain_from_scratch(self) -> float:
        """Recompute 0.5 * logdet(I + K / ridge) directly (test oracle)."""
        if self.count == 0:
            return 0.0
        K = self.kernel.cross(self._X[: self.count], self._X[: self.count])
        sign, logdet = np.linalg.slogdet(np.eye(self.count) + K / self.ridge)
        return float(0.5 * logdet)

    def diagnostic_snapshot(self, probe_points: np.ndarray | None = None) -> dict:
        snap = {
            "count": self.count,
            "ridge": self.ridge,
            "info_gain": self.info_gain,
            "length_scale": self.kernel.length_scale,
        }
        if probe_points is not None:
            means, sigmas = self.posterior_many(probe_points)
            snap["probe_means"] = means.tolist()
            snap["probe_sigmas"] = sigmas.tolist()
        return snap


# ---------- confidence-adjusted costs ----------


def pessimistic_cost(model: KrrModel, conf: ConfidenceSpec, x: np.ndarray, m: int) -> float:
    """UCB cost for the offline learner: mean plus the algorithm-box radius."""
    if conf.mode != OFFLINE_PESSIMISTIC:
        raise ValueError("pessimistic_cost needs OFFLINE_PESSIMISTIC mode")
    if m < 1:
        raise ValueError("net size m must be >= 1")
    if model.count == 0:
        return min(conf.rkhs_bound_B, 1.0)
    mean, sigma = model.posterior(x)
    return mean + pessimism_radius(model, conf, m) * sigma


def pessimism_radius(model: KrrModel, conf: ConfidenceSpec, m: int) -> float:
    ell = model.count
    lam = model.kernel.ridge_lambda
    return conf.rkhs_bound_B + math.sqrt(math.log(2.0 * m / conf.delta) / (ell * lam))


def pessimistic_costs_many(
    model: KrrModel, conf: ConfidenceSpec, points: np.ndarray, m: int
) -> np.ndarray:
    if conf.mode != OFFLINE_PESSIMISTIC:
        raise ValueError("pessimistic_costs_many needs OFFLINE_PESSIMISTIC mode")
    n = np.atleast_2d(points).shape[0]
    if model.count == 0:
        return np.full(n, min(conf.rkhs_bound_B, 1.0))
    means, sigmas = model.posterior_many(points)
    return means + pessimism_radius(model, conf, m) * sigmas


def optimism_multiplier(conf: ConfidenceSpec, info_gain: float, count: int) -> float:
    """beta = B + R sqrt(2 (gamma + ln(2/delta))); the empty model uses bare B."""
    if count == 0:
        return conf.rkhs_bound_B
    return conf.rkhs_bound_B + conf.noise_R * math.sqrt(
        2.0 * (info_gain + math.log(2.0 / conf.delta))
    )


def optimistic_cost(model: KrrModel, conf: ConfidenceSpec, x: np.ndarray) -> float:
    """LCB cost for the online learners; may be negative by design."""
    if conf.mode != ONLINE_OPTIMISTIC:
        raise ValueError("optimistic_cost needs ONLINE_OPTIMISTIC mode")
    mean, sigma = model.posterior(x)
    return mean - optimism_multiplier(conf, model.info_gain, model.count) * sigma
