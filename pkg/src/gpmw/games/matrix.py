"""Two-player matrix games with GP-sampled payoff tables."""

from __future__ import annotations

import numpy as np

from ..gp import ConfigError, NumericalError
from ..kernels import KernelSpec, kernel_matrix
from ..learners import concat_outcomes
from .base import Environment

DEGENERATE_SPREAD = 1e-9


def sample_gp_function(kernel: KernelSpec, X: np.ndarray, rng: np.random.Generator, jitter: float = 1e-9) -> np.ndarray:
    """One joint draw of a zero-mean GP at the rows of ``X``."""
    K = kernel_matrix(kernel, X)
    n = len(X)
    for _ in range(4):
        try:
            L = np.linalg.cholesky(K + jitter * np.eye(n))
            break
        except np.linalg.LinAlgError:
            jitter *= 10.0
    else:
        raise NumericalError(f"kernel matrix of {n} points not factorisable (jitter up to {jitter:.1e})")
    return L @ rng.standard_normal(n)


class MatrixGame(Environment):
    kind = "matrix"

    def __init__(self, tables, noise_std=(1.0, 1.0), transform=None):
        tables = [np.asarray(t, dtype=float) for t in tables]
        if len(tables) != 2 or tables[0].shape != tables[1].shape or tables[0].ndim != 2:
            raise ConfigError("a matrix game needs two payoff tables of equal shape")
        if not all(np.all(np.isfinite(t)) for t in tables):
            raise ConfigError("payoff entries must be finite")
        self.tables = tables
        self.K = tables[0].shape[0]
        self.n_players = 2
        self.roles = {"player1": [0], "player2": [1]}
        self._noise = tuple(float(s) for s in noise_std)
        # (offset, scale) such that table = (raw - offset) / scale
        self.transform = transform

    def n_actions(self, i):
        return self.tables[0].shape[i]

    def reward(self, i, joint):
        return float(self.tables[i][joint[0], joint[1]])

    def full_rewards(self, i, joint):
        return self.tables[i][:, joint[1]].copy() if i == 0 else self.tables[i][joint[0], :].copy()

    def context(self, i, joint):
        return np.array([float(joint[1 - i])])

    def outcomes(self, i):
        return concat_outcomes(np.arange(self.n_actions(i), dtype=float)[:, None])

    def noise_std(self, i):
        return self._noise[i]


def rescale(raw: np.ndarray) -> tuple[np.ndarray, tuple[float, float]]:
    """Min-max rescale into [0, 1]; a (near-)constant table becomes all 0.5."""
    lo, hi = float(raw.min()), float(raw.max())
    if hi - lo < DEGENERATE_SPREAD:
        return np.full_like(raw, 0.5), (lo, 0.0)
    return (raw - lo) / (hi - lo), (lo, hi - lo)


def sample_matrix_game(K: int, kernel: KernelSpec, seed=None, noise_std: float = 1.0) -> MatrixGame:
    """Shared payoff table drawn from GP(0, k) over the K x K index grid, rescaled to [0, 1].

    ``noise_std`` is in units of the raw draw, so it is divided by the same
    factor as the table: the signal-to-noise ratio survives the rescaling.
    """
    if K < 2:
        raise ConfigError(f"need K >= 2, got {K}")
    rng = np.random.default_rng(seed)
    grid = np.array([(a, b) for a in range(K) for b in range(K)], dtype=float)
    raw = sample_gp_function(kernel, grid, rng).reshape(K, K)
    table, transform = rescale(raw)
    s = noise_std / transform[1] if transform[1] > 0 else noise_std
    game = MatrixGame([table, table.copy()], (s, s), transform)
    game.raw = raw
    return game
