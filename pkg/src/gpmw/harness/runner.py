"""Play repeated games round by round and record exact regret."""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from ..learners import ProtocolError
from .build import STREAM_FIT, STREAM_NOISE, agent_seed, build_environment, build_learner, derive_seed
from .config import ExperimentConfig
from .ledger import RegretLedger
from .log import EpisodeLog

log = logging.getLogger(__name__)


class RunError(RuntimeError):
    pass


def fresh_seed() -> int:
    """A platform-entropy seed, for configs that do not pin one."""
    return int(np.random.SeedSequence().entropy % (2**63))


def _environment_meta(env) -> dict:
    meta = {"kind": env.kind, "n_players": env.n_players}
    if env.kind in ("matrix", "robust-bo"):
        meta["transform"] = {"offset": env.transform[0], "scale": env.transform[1]}
    if env.kind == "routing":
        meta["regret_units"] = "travel time"
        meta["learning_agents"] = env.roles["learning"]
    return meta


def run_episode(cfg: ExperimentConfig, variant: str | None, repeat: int, seed: int) -> EpisodeLog:
    """One repeat of one variant. Deterministic given (cfg, variant, repeat, seed)."""
    env = build_environment(cfg, repeat, seed)
    specs = cfg.learners_for(variant)
    learners, kernels = [], {}
    role_of = {}
    for role, members in env.roles.items():
        for i in members:
            role_of[i] = role
    for i in range(env.n_players):
        role = role_of[i]
        spec = specs.get(role, {"variant": "fixed"})
        learner, tree = build_learner(spec, env, i, cfg, agent_seed(seed, repeat, i), derive_seed(seed, repeat, STREAM_FIT) + i)
        learners.append(learner)
        if tree is not None:
            kernels[str(i)] = tree
    tracked = [i for i in range(env.n_players) if learners[i].variant != "fixed"]
    roles = {r: [i for i in m if i in tracked] for r, m in env.roles.items()}
    roles = {r: m for r, m in roles.items() if m}

    T, n = cfg.horizon, len(tracked)
    noise_rng = np.random.default_rng(derive_seed(seed, repeat, STREAM_NOISE))
    ledgers = {i: RegretLedger(env.n_actions(i)) for i in tracked}
    action = np.zeros((T, n), dtype=int)
    true_r = np.zeros((T, n))
    noisy_r = np.zeros((T, n))
    regret = np.zeros((T, n))
    cong = np.zeros(T) if env.kind == "routing" else None
    snapshots: dict[str, list] = {}
    needs_reward = [learners[i].channel in ("bandit", "context") for i in range(env.n_players)]
    feedback = [None] * env.n_players

    for t in range(T):
        joint = []
        for i, learner in enumerate(learners):
            try:
                joint.append(learner.step(feedback[i]))
            except ProtocolError as exc:
                raise RunError(f"repeat {repeat}, round {t + 1}, agent {i} ({learner.variant}): {exc}") from exc
        joint = tuple(joint)
        # one draw per player every round keeps noise aligned across variants
        z = noise_rng.standard_normal(env.n_players)
        rewards = {}
        for i in range(env.n_players):
            if needs_reward[i] or i in ledgers:
                rewards[i] = env.reward(i, joint)
        for i, learner in enumerate(learners):
            noisy = rewards[i] + env.noise_std(i) * z[i] if i in rewards else None
            feedback[i] = env.feedback(i, joint, learner.channel, noisy)
        for j, i in enumerate(tracked):
            regret[t, j] = ledgers[i].add(env.counterfactual(i, joint), joint[i])
            action[t, j] = joint[i]
            true_r[t, j] = rewards[i]
            noisy_r[t, j] = rewards[i] + env.noise_std(i) * z[i]
        if cong is not None:
            cong[t] = env.congestion(joint)
        if cfg.snapshot_every and (t + 1) % cfg.snapshot_every == 0:
            for i in tracked:
                s = learners[i].strategy
                if s is not None:
                    snapshots.setdefault(str(i), []).append([t + 1, [float(x) for x in s]])

    meta = {
        "name": cfg.name,
        "variant": variant or "default",
        "repeat": repeat,
        "seed": seed,
        "horizon": T,
        "roles": roles,
        "learners": {r: specs[r]["variant"] for r in roles if r in specs},
        "environment": _environment_meta(env),
    }
    if kernels:
        meta["kernels"] = kernels
    if snapshots:
        meta["snapshots"] = snapshots
    return EpisodeLog(tracked, T, action, true_r, noisy_r, regret, cong, meta)


def _job(args):
    return run_episode(*args)


def run_experiment(cfg: ExperimentConfig, variant: str | None = None, parallel: int = 1, seed: int | None = None) -> list[EpisodeLog]:
    """All repeats of one variant (the first declared one when ``variant`` is None)."""
    seed = seed if seed is not None else cfg.seed
    if seed is None:
        seed = fresh_seed()
        log.warning("no seed configured; using generated seed %d", seed)
    if variant is None and cfg.variants:
        variant = cfg.variant_names()[0]
    cfg.learners_for(variant)  # fail fast on unknown variants
    jobs = [(cfg, variant, r, seed) for r in range(cfg.repeats)]
    if parallel > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            return list(pool.map(_job, jobs))
    out = []
    for job in jobs:
        out.append(_job(job))
        log.info("%s/%s repeat %d done", cfg.name, variant or "default", job[2])
    return out


def run_all(cfg: ExperimentConfig, parallel: int = 1, seed: int | None = None) -> dict[str, list[EpisodeLog]]:
    """Every declared variant with the same seed, so variants share games and noise."""
    seed = seed if seed is not None else cfg.seed
    if seed is None:
        seed = fresh_seed()
        log.warning("no seed configured; using generated seed %d", seed)
    return {v: run_experiment(cfg, v if cfg.variants else None, parallel, seed) for v in cfg.variant_names()}
