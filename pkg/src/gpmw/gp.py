"""Incremental Gaussian-process posterior with confidence bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .kernels import KernelSpec, kernel_diag, kernel_matrix

JITTER = 1e-9
JITTER_RETRIES = 3


class NumericalError(ArithmeticError):
    pass


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ConfidenceSchedule:
    """Confidence width ``beta_t = B + sqrt(2 (gamma_{t-1} + log(2 / delta)))``.

    ``constant`` overrides the schedule with a fixed width; this is how
    heuristic (non-theoretical) widths are configured.
    """

    rkhs_bound: float = 1.0
    delta: float = 0.1
    constant: float | None = None

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise ConfigError(f"delta must lie in (0, 1), got {self.delta}")
        if self.rkhs_bound < 0:
            raise ConfigError(f"rkhs_bound must be nonnegative, got {self.rkhs_bound}")
        if self.constant is not None and self.constant < 0:
            raise ConfigError(f"constant beta must be nonnegative, got {self.constant}")

    def __call__(self, info_gain_prev: float) -> float:
        if self.constant is not None:
            return float(self.constant)
        return beta(self, info_gain_prev)


def beta(schedule: ConfidenceSchedule, info_gain_prev: float) -> float:
    if not 0.0 < schedule.delta < 1.0:
        raise ConfigError(f"delta must lie in (0, 1), got {schedule.delta}")
    if info_gain_prev < 0:
        raise ValueError("information gain cannot be negative")
    return schedule.rkhs_bound + math.sqrt(2.0 * (info_gain_prev + math.log(2.0 / schedule.delta)))


class GpPosterior:
    """Zero-mean (or constant-mean) GP posterior updated one observation at a time.

    The lower Cholesky factor of ``K_t + noise_var * I`` is extended by a
    bordered update on every :meth:`append`, so each step costs O(t^2).
    ``info_gain`` tracks ``0.5 * log det(I + K_t / noise_var)`` of the points
    actually observed. Predictions never mutate state.
    """

    def __init__(self, kernel: KernelSpec, noise_var: float, prior_mean: float = 0.0, capacity: int = 64):
        if not noise_var > 0:
            raise ConfigError(f"noise variance must be positive, got {noise_var}")
        self.kernel = kernel
        self.noise_var = float(noise_var)
        self.prior_mean = float(prior_mean)
        self.info_gain = 0.0
        self._n = 0
        self._dim: int | None = None
        self._X = np.zeros((0, 0))
        self._y = np.zeros(capacity)
        self._L = np.zeros((capacity, capacity))
        # L^{-1} (y - prior_mean), extended alongside the factor
        self._z = np.zeros(capacity)
        self._watchers: list[QueryCache] = []

    def __len__(self):
        return self._n

    @property
    def points(self) -> np.ndarray:
        return self._X[: self._n]

    @property
    def observations(self) -> np.ndarray:
        return self._y[: self._n]

    @property
    def factor(self) -> np.ndarray:
        return self._L[: self._n, : self._n]

    def _grow(self, dim: int):
        if self._dim is None:
            self._dim = dim
            self._X = np.zeros((self._L.shape[0], dim))
        elif dim != self._dim:
            raise ValueError(f"expected {self._dim}-dimensional outcome, got {dim}")
        cap = self._L.shape[0]
        if self._n < cap:
            return
        new = 2 * cap
        L = np.zeros((new, new))
        L[:cap, :cap] = self._L
        self._L = L
        self._X = np.vstack([self._X, np.zeros((new - cap, dim))])
        self._y = np.concatenate([self._y, np.zeros(new - cap)])
        self._z = np.concatenate([self._z, np.zeros(new - cap)])

    def _as_batch(self, A) -> np.ndarray:
        A = np.atleast_2d(np.asarray(A, dtype=float))
        if self._dim is not None and A.shape[1] != self._dim:
            raise ValueError(f"expected {self._dim}-dimensional outcome, got {A.shape[1]}")
        return A

    def _project(self, A: np.ndarray) -> np.ndarray:
        """``L^{-1} k_t(A)`` with one column per query row."""
        Kx = kernel_matrix(self.kernel, self.points, A)
        return solve_triangular(self.factor, Kx, lower=True, check_finite=False)

    def predict(self, A) -> tuple[np.ndarray, np.ndarray]:
        """Posterior mean and standard deviation at each row of ``A``."""
        A = self._as_batch(A)
        prior_var = kernel_diag(self.kernel, A)
        if self._n == 0:
            return np.full(A.shape[0], self.prior_mean), np.sqrt(np.maximum(prior_var, 0.0))
        V = self._project(A)
        mean = self.prior_mean + V.T @ self._z[: self._n]
        var = prior_var - (V * V).sum(0)
        return mean, np.sqrt(np.clip(var, 0.0, None))

    def append(self, a, y: float) -> "GpPosterior":
        """Condition on one more noisy observation ``y`` at outcome ``a`` (in place)."""
        a = np.asarray(a, dtype=float).ravel()
        y = float(y)
        if not (np.isfinite(y) and np.all(np.isfinite(a))):
            raise ValueError("observations must be finite")
        self._grow(a.size)
        n = self._n
        kaa = float(kernel_diag(self.kernel, a[None, :])[0])
        if n:
            v = self._project(a[None, :])[:, 0]
            post_var = kaa - v @ v
        else:
            v = np.zeros(0)
            post_var = kaa
        pivot = post_var + self.noise_var
        jitter = JITTER
        for _ in range(JITTER_RETRIES):
            if pivot > 0:
                break
            pivot = post_var + self.noise_var + jitter
            jitter *= 10.0
        if not pivot > 0:
            raise NumericalError(
                f"non-positive pivot {pivot:.3e} appending point {n + 1} (posterior variance {post_var:.3e})"
            )
        d = math.sqrt(pivot)
        self._L[n, :n] = v
        self._L[n, n] = d
        self._X[n] = a
        self._y[n] = y
        self._z[n] = (y - self.prior_mean - v @ self._z[:n]) / d
        self._n = n + 1
        self.info_gain += 0.5 * math.log(pivot / self.noise_var)
        for w in self._watchers:
            w._extend(a, v, d, self._z[n])
        return self

    def watch(self, Q) -> "QueryCache":
        """Keep the posterior at a fixed query set up to date across appends."""
        cache = QueryCache(self, self._as_batch(Q))
        self._watchers.append(cache)
        return cache

    def ucb(self, beta_t: float, A) -> np.ndarray:
        mean, std = self.predict(A)
        return mean + beta_t * std

    def lcb(self, beta_t: float, A) -> np.ndarray:
        mean, std = self.predict(A)
        return mean - beta_t * std

    def log_marginal_likelihood(self) -> float:
        n = self._n
        z = self._z[:n]
        return float(-0.5 * z @ z - np.log(np.diag(self.factor)).sum() - 0.5 * n * math.log(2 * math.pi))


class QueryCache:
    """Posterior mean/std at a fixed query set, extended row by row.

    Each append costs O(t * len(Q)) instead of a fresh triangular solve.
    """

    def __init__(self, gp: GpPosterior, Q: np.ndarray):
        self.gp = gp
        self.Q = Q
        self._var = kernel_diag(gp.kernel, Q).astype(float)
        self._mean = np.full(len(Q), gp.prior_mean)
        n = len(gp)
        self._V = np.zeros((max(2 * n, 64), len(Q)))
        if n:
            self._V[:n] = gp._project(Q)
            self._mean = self._mean + self._V[:n].T @ gp._z[:n]
            self._var = self._var - (self._V[:n] ** 2).sum(0)

    def _extend(self, a, v, d, z):
        n = v.size
        if n == self._V.shape[0]:
            self._V = np.vstack([self._V, np.zeros_like(self._V)])
        row = (kernel_matrix(self.gp.kernel, a[None, :], self.Q)[0] - v @ self._V[:n]) / d
        self._V[n] = row
        self._mean = self._mean + row * z
        self._var = self._var - row * row

    @property
    def mean(self) -> np.ndarray:
        return self._mean

    @property
    def std(self) -> np.ndarray:
        return np.sqrt(np.clip(self._var, 0.0, None))


def posterior_predict(gp: GpPosterior, a) -> tuple[float, float]:
    mean, std = gp.predict(np.asarray(a, dtype=float)[None, :] if np.ndim(a) == 1 else a)
    return float(mean[0]), float(std[0])


def ucb(gp: GpPosterior, beta_t: float, a) -> float:
    m, s = posterior_predict(gp, a)
    return m + beta_t * s


def lcb(gp: GpPosterior, beta_t: float, a) -> float:
    m, s = posterior_predict(gp, a)
    return m - beta_t * s
