"""Episode logs and their on-disk form.

One episode (one repeat of one experiment variant) is written as
``<stem>.csv`` with a row per (round, tracked agent) and ``<stem>.json``
holding metadata and strategy snapshots. Floats are written with
``repr`` so a read/write cycle is byte-identical.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

COLUMNS = ("round", "agent", "action", "true_reward", "noisy_reward", "regret", "congestion")


class LogError(ValueError):
    pass


def _fmt(x) -> str:
    if x is None:
        return ""
    return repr(float(x))


@dataclass
class EpisodeLog:
    agents: list[int]
    rounds: int
    action: np.ndarray  # (T, n_agents) int
    true_reward: np.ndarray  # (T, n_agents)
    noisy_reward: np.ndarray
    regret: np.ndarray  # cumulative, regret units
    congestion: np.ndarray | None = None  # (T,)
    meta: dict = field(default_factory=dict)

    def avg_regret(self) -> np.ndarray:
        """Time-averaged regret per agent, shape (T, n_agents)."""
        return self.regret / np.arange(1, self.rounds + 1)[:, None]

    def role_avg_regret(self, role: str) -> np.ndarray:
        """Time-averaged regret averaged over the agents of one role."""
        members = self.meta.get("roles", {}).get(role, [])
        cols = [self.agents.index(a) for a in members if a in self.agents]
        if not cols:
            raise LogError(f"no tracked agents in role {role!r}")
        return self.avg_regret()[:, cols].mean(axis=1)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        for t in range(self.rounds):
            cong = None if self.congestion is None else self.congestion[t]
            for j, agent in enumerate(self.agents):
                w.writerow(
                    [
                        t + 1,
                        agent,
                        int(self.action[t, j]),
                        _fmt(self.true_reward[t, j]),
                        _fmt(self.noisy_reward[t, j]),
                        _fmt(self.regret[t, j]),
                        _fmt(cong),
                    ]
                )
        return buf.getvalue()

    def meta_json(self) -> str:
        return json.dumps(self.meta, indent=1, sort_keys=True) + "\n"

    def save(self, stem) -> None:
        stem = Path(stem)
        stem.parent.mkdir(parents=True, exist_ok=True)
        stem.with_suffix(".csv").write_text(self.to_csv())
        stem.with_suffix(".json").write_text(self.meta_json())

    @classmethod
    def from_csv(cls, text: str, meta: dict | None = None) -> "EpisodeLog":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or tuple(rows[0]) != COLUMNS:
            raise LogError("missing or unexpected header")
        body = rows[1:]
        if not body:
            raise LogError("log has no records")
        agents: list[int] = []
        for r in body:
            a = int(r[1])
            if a in agents:
                break
            agents.append(a)
        n = len(agents)
        if len(body) % n:
            raise LogError("record count is not a multiple of the agent count")
        T = len(body) // n
        action = np.zeros((T, n), dtype=int)
        cols = {k: np.zeros((T, n)) for k in ("true_reward", "noisy_reward", "regret")}
        cong = np.zeros(T)
        has_cong = body[0][6] != ""
        try:
            for k, r in enumerate(body):
                t, j = divmod(k, n)
                if int(r[0]) != t + 1 or int(r[1]) != agents[j]:
                    raise LogError(f"record {k + 2} out of order")
                action[t, j] = int(r[2])
                cols["true_reward"][t, j] = float(r[3])
                cols["noisy_reward"][t, j] = float(r[4])
                cols["regret"][t, j] = float(r[5])
                if has_cong:
                    cong[t] = float(r[6])
        except (ValueError, IndexError) as exc:
            raise LogError(f"corrupt record: {exc}") from None
        return cls(agents, T, action, cols["true_reward"], cols["noisy_reward"], cols["regret"], cong if has_cong else None, meta or {})

    @classmethod
    def load(cls, stem) -> "EpisodeLog":
        stem = Path(stem)
        csv_path, meta_path = stem.with_suffix(".csv"), stem.with_suffix(".json")
        if not csv_path.exists():
            raise LogError(f"{csv_path} not found")
        meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
        return cls.from_csv(csv_path.read_text(), meta)
