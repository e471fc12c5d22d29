"""Learning policies for repeated games.

Every learner exposes ``step(feedback) -> action index``. The first call of
an episode passes ``None``; every later call passes the feedback of the
previous round, restricted to the learner's ``channel``:

* ``"bandit"``: the learner's own noisy reward only (Exp3.P)
* ``"context"``: own noisy reward plus the opponents' profile (GP-MW,
  GP-UCB, StableOpt)
* ``"full"``: the true reward of every own action (Hedge)
* ``"none"``: nothing (uniform-random and fixed players)
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .gp import ConfidenceSchedule, ConfigError, GpPosterior
from .kernels import KernelSpec


class ProtocolError(RuntimeError):
    """A learner was driven out of order (e.g. missing feedback)."""


class CapacityError(ValueError):
    pass


@dataclass
class Feedback:
    reward: float | None = None
    context: np.ndarray | None = None
    rewards: np.ndarray | None = None


def eta_schedule(K: int, T: int) -> float:
    """Learning rate ``sqrt(8 log K / T)``."""
    if K < 2:
        raise ConfigError(f"need at least 2 actions, got {K}")
    if T < 1:
        raise ConfigError(f"horizon must be positive, got {T}")
    return math.sqrt(8.0 * math.log(K) / T)


def eta_continuous(d: int, L: float, b: float, T: int) -> float:
    """Learning rate for a discretised box ``[0, b]^d`` with an L-Lipschitz reward."""
    arg = L * b * math.sqrt(d * T)
    if arg <= 1:
        raise ConfigError("L * b * sqrt(d T) must exceed 1")
    return math.sqrt(8.0 * d * math.log(arg) / T)


def mw_update(weights, rewards, eta: float) -> np.ndarray:
    """One multiplicative-weights step on losses ``1 - rewards``."""
    w = np.asarray(weights, dtype=float)
    r = np.asarray(rewards, dtype=float)
    if r.shape != w.shape:
        raise ValueError(f"{r.size} reward estimates for {w.size} actions")
    if np.any(~np.isfinite(r)) or r.min() < 0.0 or r.max() > 1.0:
        raise ValueError("reward estimates must lie in [0, 1]")
    with np.errstate(divide="ignore"):
        logw = np.log(w) - eta * (1.0 - r)
    logw -= logw.max()
    out = np.exp(logw)
    return out / out.sum()


def sample_index(weights: np.ndarray, rng: np.random.Generator) -> int:
    """Inverse-CDF draw from a probability vector."""
    cdf = np.cumsum(weights)
    u = rng.random() * cdf[-1]
    return min(int(np.searchsorted(cdf, u, side="right")), len(weights) - 1)


def optimistic_rewards(gp: GpPosterior, beta_t: float, outcomes: np.ndarray) -> np.ndarray:
    """UCB of every own action against a fixed opponent profile, clipped to [0, 1].

    ``outcomes`` holds one joint-outcome row per own action.
    """
    return np.clip(gp.ucb(beta_t, outcomes), 0.0, 1.0)


def concat_outcomes(actions: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
    """Joint outcome = own action coordinates followed by the opponents' profile."""
    actions = np.atleast_2d(np.asarray(actions, dtype=float))

    def build(context) -> np.ndarray:
        ctx = np.atleast_1d(np.asarray(context, dtype=float))
        return np.hstack([actions, np.broadcast_to(ctx, (len(actions), ctx.size))])

    return build


def discretize_box(b: float, d: int, L: float, T: int, budget: int = 1_000_000) -> np.ndarray:
    """Cell-centred uniform grid on ``[0, b]^d`` fine enough for an L-Lipschitz reward.

    Uses ``ceil(L b sqrt(d T))`` points per axis, so every box point lies within
    l1 distance ``sqrt(d / T) / L`` of a grid point.
    """
    if b <= 0 or d < 1 or L <= 0 or T < 1:
        raise ConfigError("b, d, L and T must all be positive")
    m = max(1, math.ceil(L * b * math.sqrt(d * T)))
    if m**d > budget:
        raise CapacityError(f"grid of {m}^{d} = {m**d} points exceeds budget {budget}")
    axis = (np.arange(m) + 0.5) * b / m
    mesh = np.meshgrid(*([axis] * d), indexing="ij")
    return np.stack([g.ravel() for g in mesh], axis=1)


class Learner:
    """Base class: round bookkeeping and the act/update protocol."""

    variant = "base"
    channel = "none"

    def __init__(self, n_actions: int, seed=None):
        if n_actions < 1:
            raise ConfigError("a learner needs at least one action")
        self.n_actions = int(n_actions)
        self.rng = np.random.default_rng(seed)
        self.t = 0
        self.last_action: int | None = None

    @property
    def strategy(self) -> np.ndarray | None:
        return None

    def _choose(self) -> int:
        raise NotImplementedError

    def _update(self, feedback: Feedback) -> None:
        pass

    def step(self, feedback: Feedback | None = None) -> int:
        if self.last_action is not None:
            if feedback is None and self.channel != "none":
                raise ProtocolError(f"{self.variant}: round {self.t + 1} needs feedback from round {self.t}")
            self._update(feedback if feedback is not None else Feedback())
            self.t += 1
        self.last_action = int(self._choose())
        return self.last_action


class UniformRandom(Learner):
    variant = "uniform-random"

    def _choose(self) -> int:
        return int(self.rng.integers(self.n_actions))


class Fixed(Learner):
    variant = "fixed"

    def __init__(self, n_actions: int, action: int = 0, seed=None):
        super().__init__(n_actions, seed)
        if not 0 <= action < n_actions:
            raise ConfigError(f"fixed action {action} out of range")
        self.action = int(action)

    def _choose(self) -> int:
        return self.action


class _MixedStrategyLearner(Learner):
    def __init__(self, n_actions: int, eta: float, seed=None):
        super().__init__(n_actions, seed)
        if eta < 0:
            raise ConfigError("learning rate must be nonnegative")
        self.eta = float(eta)
        self.weights = np.full(self.n_actions, 1.0 / self.n_actions)

    @property
    def strategy(self) -> np.ndarray:
        return self.weights

    def _choose(self) -> int:
        return sample_index(self.weights, self.rng)


class Hedge(_MixedStrategyLearner):
    """Full-information multiplicative weights."""

    variant = "hedge"
    channel = "full"

    def _update(self, feedback: Feedback) -> None:
        if feedback.rewards is None:
            raise ProtocolError("hedge needs the full reward vector")
        self.weights = mw_update(self.weights, feedback.rewards, self.eta)


class GpMw(_MixedStrategyLearner):
    """GP-MW: multiplicative weights driven by GP upper confidence bounds.

    At round t the optimistic estimates use the posterior of rounds 1..t-1
    and ``beta_t`` built from the information gain of those rounds; the new
    observation is appended afterwards.
    """

    variant = "gp-mw"
    channel = "context"

    def __init__(
        self,
        n_actions: int,
        outcomes: Callable[[np.ndarray], np.ndarray],
        gp: GpPosterior,
        schedule: ConfidenceSchedule,
        eta: float,
        seed=None,
    ):
        super().__init__(n_actions, eta, seed)
        self.outcomes = outcomes
        self.gp = gp
        self.schedule = schedule
        self.last_estimates: np.ndarray | None = None

    def _update(self, feedback: Feedback) -> None:
        if feedback.reward is None or feedback.context is None:
            raise ProtocolError("gp-mw needs its noisy reward and the opponents' profile")
        rows = self.outcomes(feedback.context)
        beta_t = self.schedule(self.gp.info_gain)
        estimates = optimistic_rewards(self.gp, beta_t, rows)
        self.weights = mw_update(self.weights, estimates, self.eta)
        self.last_estimates = estimates
        self.gp.append(rows[self.last_action], feedback.reward)


class Exp3P(Learner):
    """Exp3.P: exponential weights on biased importance-weighted reward estimates.

    The estimate of action ``i`` is ``(x * [i played] + bonus) / p_i`` and the
    played distribution mixes the exponential weights with a uniform share
    ``gamma``. Rewards observed outside [0, 1] are clipped when ``clip`` is
    set and rejected otherwise.
    """

    variant = "exp3p"
    channel = "bandit"

    def __init__(self, n_actions: int, horizon: int, delta: float = 0.05, gamma: float | None = None, clip=True, seed=None):
        super().__init__(n_actions, seed)
        K, T = self.n_actions, int(horizon)
        if T < 1:
            raise ConfigError("horizon must be positive")
        if gamma is None:
            gamma = min(1.0, math.sqrt(K * math.log(K) / ((math.e - 1.0) * T)))
        self.gamma = float(gamma)
        self.eta = 0.95 * math.sqrt(math.log(K) / (T * K))
        self.bonus = math.sqrt(math.log(K / delta) / (T * K))
        self.clip = clip
        self.log_weights = np.zeros(K)

    @property
    def strategy(self) -> np.ndarray:
        w = np.exp(self.log_weights - self.log_weights.max())
        return (1.0 - self.gamma) * w / w.sum() + self.gamma / self.n_actions

    def _choose(self) -> int:
        if self.n_actions == 1:
            return 0
        return sample_index(self.strategy, self.rng)

    def _update(self, feedback: Feedback) -> None:
        x = feedback.reward
        if x is None:
            raise ProtocolError("exp3p needs its own reward")
        if self.clip:
            x = min(1.0, max(0.0, x))
        elif not 0.0 <= x <= 1.0:
            raise ValueError(f"exp3p reward {x} outside [0, 1]")
        if self.n_actions == 1:
            return
        p = self.strategy
        gain = np.full(self.n_actions, self.bonus)
        gain[self.last_action] += x
        self.log_weights = self.log_weights + self.eta * gain / p


def _check_grid(grid: np.ndarray):
    if grid.ndim != 3 or grid.shape[0] == 0 or grid.shape[1] == 0:
        raise ConfigError("empty action set")


def _maxmax(mean, std, beta_t, M, U) -> tuple[int, int]:
    u = (mean + beta_t * std).reshape(M, U)
    m = int(np.argmax(u.max(axis=1)))
    return m, int(np.argmax(u[m]))


def _maxmin(mean, std, beta_t, M, U) -> tuple[int, int]:
    u = (mean + beta_t * std).reshape(M, U)
    m = int(np.argmax(u.min(axis=1)))
    low = (mean - beta_t * std).reshape(M, U)[m]
    return m, int(np.argmin(low))


def gpucb_select(gp: GpPosterior, beta_t: float, grid: np.ndarray) -> tuple[int, int]:
    """``argmax_m max_i UCB(m, i)`` over a ``(M, U, d)`` outcome grid, plus the imputed ``i``.

    Ties go to the lowest index.
    """
    _check_grid(grid)
    M, U, d = grid.shape
    return _maxmax(*gp.predict(grid.reshape(M * U, d)), beta_t, M, U)


def stableopt_select(gp: GpPosterior, beta_t: float, grid: np.ndarray) -> tuple[int, int]:
    """``argmax_m min_i UCB(m, i)`` plus the imputed ``argmin_i LCB(m, i)``."""
    _check_grid(grid)
    M, U, d = grid.shape
    return _maxmin(*gp.predict(grid.reshape(M * U, d)), beta_t, M, U)


class _GridBo(Learner):
    """Deterministic GP selection over an own-action x adversary grid.

    The posterior is updated at the imputed adversary index, not the revealed one.
    """

    channel = "context"
    rule: Callable = staticmethod(_maxmax)

    def __init__(self, grid: np.ndarray, gp: GpPosterior, schedule: ConfidenceSchedule, seed=None):
        grid = np.asarray(grid, dtype=float)
        _check_grid(grid)
        super().__init__(grid.shape[0], seed)
        self.grid = grid
        self.gp = gp
        self.schedule = schedule
        self.imputed: int | None = None
        M, U, d = grid.shape
        self._cache = gp.watch(grid.reshape(M * U, d))

    def _choose(self) -> int:
        M, U, _ = self.grid.shape
        beta_t = self.schedule(self.gp.info_gain)
        m, i = self.rule(self._cache.mean, self._cache.std, beta_t, M, U)
        self.imputed = i
        return m

    def _update(self, feedback: Feedback) -> None:
        if feedback.reward is None:
            raise ProtocolError(f"{self.variant} needs its noisy reward")
        self.gp.append(self.grid[self.last_action, self.imputed], feedback.reward)


class GpUcb(_GridBo):
    variant = "gp-ucb"
    rule = staticmethod(_maxmax)


class StableOpt(_GridBo):
    variant = "stableopt"
    rule = staticmethod(_maxmin)


def make_gp(kernel: KernelSpec, noise_std: float, prior_mean: float = 0.0) -> GpPosterior:
    return GpPosterior(kernel, noise_var=noise_std**2, prior_mean=prior_mean)
