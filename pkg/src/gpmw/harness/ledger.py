"""Exact hindsight regret from cached counterfactual sums."""

from __future__ import annotations

import numpy as np


class RegretLedger:
    """Running ``max_a sum_s r(a, a_s^-i) - sum_s r(a_s, a_s^-i)`` for one player.

    ``add`` takes the reward every own action would have earned this round
    (noiseless, with the opponents held at their realised actions) and the
    action actually played.
    """

    def __init__(self, n_actions: int):
        self.cumulative = np.zeros(n_actions)
        self.realized = 0.0
        self.regret: list[float] = []

    def add(self, counterfactual, action: int) -> float:
        cf = np.asarray(counterfactual, dtype=float)
        self.cumulative += cf
        self.realized += float(cf[action])
        r = float(self.cumulative.max() - self.realized)
        self.regret.append(r)
        return r

    def __len__(self):
        return len(self.regret)


def regret_series(ledger: RegretLedger) -> np.ndarray:
    """Time-averaged regret ``R(t) / t`` for t = 1..T."""
    R = np.asarray(ledger.regret)
    return R / np.arange(1, len(R) + 1)
