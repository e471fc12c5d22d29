"""Robust Bayesian optimisation as a player-vs-adversary repeated game.

The player recommends one of M items (feature rows ``m``); the adversary
simultaneously picks one of U profiles ``u_i``. The reward is ``m . u_i``,
min-max rescaled over the full M x U table. The adversary's reward is the
complement, so a Hedge adversary steers towards the player's weak spots.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..gp import ConfigError
from ..kernels import KernelSpec, product
from ..learners import concat_outcomes
from .base import Environment
from .matrix import rescale


def synthetic_profiles(n: int, p: int, rng: np.random.Generator) -> np.ndarray:
    """Rows with entries uniform on [0, 1], normalised to unit length."""
    X = rng.uniform(size=(n, p))
    return X / np.linalg.norm(X, axis=1, keepdims=True)


def load_profiles(path) -> np.ndarray:
    """Read a delimiter-separated table of profiles (one row each, p real columns)."""
    path = Path(path)
    text = path.read_text()
    delim = "," if "," in text else (";" if ";" in text else None)
    try:
        X = np.loadtxt(path, delimiter=delim, ndmin=2, comments="#")
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if X.size == 0 or not np.all(np.isfinite(X)):
        raise ConfigError(f"{path}: empty or non-finite profile table")
    return X


class RobustBoGame(Environment):
    kind = "robust-bo"

    def __init__(self, items: np.ndarray, profiles: np.ndarray, noise_std: float = 0.1, reveal: str = "index"):
        items = np.atleast_2d(np.asarray(items, dtype=float))
        profiles = np.atleast_2d(np.asarray(profiles, dtype=float))
        if items.shape[1] != profiles.shape[1]:
            raise ConfigError(f"item dimension {items.shape[1]} != profile dimension {profiles.shape[1]}")
        self.items = items
        self.profiles = profiles
        self.raw = items @ profiles.T
        self.table, self.transform = rescale(self.raw)
        self._noise = float(noise_std)
        self.n_players = 2
        self.roles = {"player": [0], "adversary": [1]}
        if reveal not in ("index", "profile"):
            raise ConfigError(f"reveal must be 'index' or 'profile', got {reveal!r}")
        # what the player sees of the adversary: a one-hot index or the profile itself
        self.reveal = reveal
        self._onehot = np.eye(len(profiles))
        self._adv = self._onehot if reveal == "index" else self.profiles

    @property
    def M(self):
        return self.items.shape[0]

    @property
    def U(self):
        return self.profiles.shape[0]

    def n_actions(self, i):
        return self.M if i == 0 else self.U

    def reward(self, i, joint):
        f = float(self.table[joint[0], joint[1]])
        return f if i == 0 else 1.0 - f

    def full_rewards(self, i, joint):
        if i == 0:
            return self.table[:, joint[1]].copy()
        return 1.0 - self.table[joint[0], :]

    def context(self, i, joint):
        return self._adv[joint[1]] if i == 0 else self.items[joint[0]]

    def outcomes(self, i):
        if i == 0:
            return concat_outcomes(self.items)
        return concat_outcomes(self._onehot)


    def grid(self) -> np.ndarray:
        """``(M, U, p + q)`` joint outcomes of the player for GP-UCB / StableOpt."""
        M, U, p = self.M, self.U, self.items.shape[1]
        q = self._adv.shape[1]
        g = np.empty((M, U, p + q))
        g[:, :, :p] = self.items[:, None, :]
        g[:, :, p:] = self._adv[None, :, :]
        return g

    def default_kernel(self, offset: float = 0.5, lengthscale: float = 2.0) -> KernelSpec:
        """Affine kernel on item features times a kernel on what is revealed of the adversary.

        With a revealed index the second factor is diagonal (linear on the
        one-hot code); with a revealed profile it is affine in the profile.
        """
        p = self.items.shape[1]
        q = self._adv.shape[1]
        second = (
            KernelSpec("linear", lengthscale=1.0)
            if self.reveal == "index"
            else KernelSpec("polynomial", lengthscale=lengthscale, degree=1, offset=offset)
        )
        return product(
            (KernelSpec("polynomial", lengthscale=lengthscale, degree=1, offset=offset), slice(0, p)),
            (second, slice(p, p + q)),
        )

    def noise_std(self, i):
        return self._noise


def robust_bo_round(game: RobustBoGame, player: int, adversary: int, rng: np.random.Generator) -> tuple[float, int]:
    """Noisy player reward for one round plus the revealed adversary index."""
    if not (0 <= player < game.M and 0 <= adversary < game.U):
        raise IndexError(f"action ({player}, {adversary}) outside {game.M} x {game.U}")
    return float(game.table[player, adversary] + game.noise_std(0) * rng.standard_normal()), int(adversary)


def synthetic_game(M: int, U: int, p: int, seed=None, noise_std: float = 0.1, reveal: str = "index") -> RobustBoGame:
    rng = np.random.default_rng(seed)
    return RobustBoGame(synthetic_profiles(M, p, rng), synthetic_profiles(U, p, rng), noise_std, reveal)
