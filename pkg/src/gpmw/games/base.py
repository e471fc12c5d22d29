"""Common surface every environment offers to the harness.

Environments are stateless evaluators of joint action profiles. A joint
profile is a tuple of action indices, one per player. Rewards handed to
learners live in [0, 1]; ``counterfactual`` returns rewards in the units
regret is reported in (identical for the matrix and robust-BO games,
negated travel time for routing).
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from ..learners import Feedback


class Environment:
    kind = "base"
    n_players: int
    roles: dict[str, list[int]]

    def n_actions(self, i: int) -> int:
        raise NotImplementedError

    def reward(self, i: int, joint: Sequence[int]) -> float:
        """True reward of player ``i`` on the learner's [0, 1] scale."""
        raise NotImplementedError

    def full_rewards(self, i: int, joint: Sequence[int]) -> np.ndarray:
        """Learner-scale reward of every own action against the others in ``joint``."""
        raise NotImplementedError

    def counterfactual(self, i: int, joint: Sequence[int]) -> np.ndarray:
        """Regret-unit reward of every own action against the others in ``joint``."""
        return self.full_rewards(i, joint)

    def context(self, i: int, joint: Sequence[int]) -> np.ndarray:
        """What player ``i`` observes about the others: their actions or their aggregate."""
        raise NotImplementedError

    def outcomes(self, i: int) -> Callable[[np.ndarray], np.ndarray]:
        """Map an observed context to one joint-outcome row per own action."""
        raise NotImplementedError

    def noise_std(self, i: int) -> float:
        raise NotImplementedError

    def congestion(self, joint: Sequence[int]) -> float | None:
        return None

    def feedback(self, i: int, joint: Sequence[int], channel: str, noisy: float) -> Feedback | None:
        """Only the information the learner's channel entitles it to."""
        if channel == "none":
            return None
        if channel == "bandit":
            return Feedback(reward=noisy)
        if channel == "context":
            return Feedback(reward=noisy, context=self.context(i, joint))
        if channel == "full":
            return Feedback(rewards=self.full_rewards(i, joint))
        raise ValueError(f"unknown feedback channel {channel!r}")
