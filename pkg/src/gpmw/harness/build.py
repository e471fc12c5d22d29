"""Turn validated config sections into environments and learners."""

from __future__ import annotations

import functools
from pathlib import Path

import numpy as np

from ..games import RobustBoGame, RoutingGame, enumerate_all, sample_matrix_game, scale_rewards, sioux_falls
from ..games.robust_bo import load_profiles, synthetic_game
from ..games.tntp import load as load_network
from ..gp import ConfidenceSchedule, ConfigError
from ..kernels import KernelSpec, product
from ..learners import Exp3P, Fixed, GpMw, GpUcb, Hedge, StableOpt, UniformRandom, eta_schedule, make_gp
from .fit import fit_hyperparameters

STREAM_ENV = 0
STREAM_NOISE = 1
STREAM_FIT = 2
STREAM_AGENT = 16


def derive_seed(base: int, repeat: int, stream: int) -> int:
    """Independent 63-bit seed for (base, repeat, stream) via numpy's SeedSequence hashing."""
    state = np.random.SeedSequence(entropy=int(base), spawn_key=(int(repeat), int(stream))).generate_state(2, np.uint32)
    return int(state[0]) << 31 | int(state[1]) >> 1


def agent_seed(base: int, repeat: int, agent: int) -> int:
    return derive_seed(base, repeat, STREAM_AGENT + agent)


@functools.lru_cache(maxsize=8)
def _routes(net_key, K: int, max_ratio: float):
    network = sioux_falls() if net_key == "sioux-falls" else load_network(*net_key)
    return network, enumerate_all(network, K, max_ratio)


def network_and_routes(cfg):
    env = cfg.environment
    net = env.get("network", "sioux-falls")
    key = net if net == "sioux-falls" else (str(cfg.resolve(net["net"])), str(cfg.resolve(net["trips"])))
    return _routes(key, int(env.get("routes", 5)), float(env.get("max_ratio", 3.0)))


def _matrix_kernel(env_cfg) -> KernelSpec:
    return KernelSpec.from_dict(env_cfg.get("kernel", {"family": "se", "lengthscale": 6.0}))


def build_environment(cfg, repeat: int, seed: int):
    """The repeat's environment; everything random in it comes from the environment stream."""
    env = cfg.environment
    s = derive_seed(seed, repeat, STREAM_ENV)
    kind = env["type"]
    if kind == "matrix":
        return sample_matrix_game(int(env.get("K", 30)), _matrix_kernel(env), seed=s, noise_std=float(env.get("noise_std", 1.0)))
    if kind == "routing":
        network, agents = network_and_routes(cfg)
        N = len(agents)
        rng = np.random.default_rng(s)
        la = env.get("learning_agents")
        if la is None:
            learning = list(range(N))
        elif isinstance(la, list):
            if any(a >= N for a in la):
                raise ConfigError(f"environment.learning_agents: agent ids must be < {N}")
            learning = sorted(set(la))
        else:
            if la > N:
                raise ConfigError(f"environment.learning_agents: {la} exceeds the {N} agents")
            learning = sorted(rng.choice(N, size=la, replace=False).tolist())
        game = RoutingGame(
            network,
            agents,
            learning=learning,
            normalize=bool(env.get("normalize", True)),
            noise_fraction=float(env.get("noise_fraction", 1e-3)),
        )
        game.bounds = scale_rewards(game, int(env.get("bound_samples", 10_000)), seed=rng.integers(2**63))
        return game
    noise = float(env.get("noise_std", 0.1))
    reveal = env.get("reveal", "index")
    if "items" in env:
        return RobustBoGame(load_profiles(cfg.resolve(env["items"])), load_profiles(cfg.resolve(env["profiles"])), noise, reveal)
    return synthetic_game(int(env.get("M", 200)), int(env.get("U", 50)), int(env.get("p", 15)), seed=s, noise_std=noise, reveal=reveal)


def _routing_kernel_tree(spec_kernel):
    k = spec_kernel or {}
    own = k.get("own", {"family": "linear", "lengthscale": 1.0})
    load = k.get("load", {"family": "polynomial", "degree": 4, "offset": 1.0, "lengthscale": 1.0})
    return {"own": own, "load": load}


def kernel_builder(env, agent: int, cfg_env: dict):
    """``tree -> KernelSpec`` for this agent; routing trees are split into own/load blocks."""
    if env.kind == "routing":
        own_block, load_block = env.kernel_blocks(agent)

        def build(tree):
            return product(
                (KernelSpec.from_dict(tree["own"]), own_block),
                (KernelSpec.from_dict(tree["load"]), load_block),
            )

        return build
    return KernelSpec.from_dict


def default_kernel_tree(env, cfg_env: dict, spec: dict):
    if "kernel" in spec:
        return _routing_kernel_tree(spec["kernel"]) if env.kind == "routing" else spec["kernel"]
    if env.kind == "routing":
        return _routing_kernel_tree(None)
    if env.kind == "matrix":
        # the prior the table was drawn from, carried through the min-max rescaling
        k = _matrix_kernel(cfg_env)
        lo, scale = env.transform
        return (k.with_params(variance=k.variance / scale**2) if scale > 0 else k).to_dict()
    return env.default_kernel().to_dict()


def default_prior_mean(env) -> float:
    if env.kind == "matrix":
        lo, scale = env.transform
        return -lo / scale if scale > 0 else 0.5
    if env.kind == "routing":
        # rewards are 1 - cost; the constant offset is not in the kernel's span
        return 1.0
    return 0.0


def _schedule(spec) -> ConfidenceSchedule:
    b = spec.get("beta", {})
    return ConfidenceSchedule(
        rkhs_bound=float(b.get("rkhs_bound", 1.0)),
        delta=float(b.get("delta", 0.1)),
        constant=None if b.get("constant") is None else float(b["constant"]),
    )


def _eta(spec, K, T) -> float:
    eta = spec.get("eta", "auto")
    if eta == "auto":
        return eta_schedule(K, T) if K >= 2 else 0.0
    return float(eta)


def build_learner(spec: dict, env, agent: int, cfg, seed: int, fit_seed: int | None = None):
    """One learner for ``agent``; returns (learner, kernel tree used or None)."""
    variant = spec["variant"]
    K = env.n_actions(agent)
    T = cfg.horizon
    if variant == "uniform-random":
        return UniformRandom(K, seed=seed), None
    if variant == "fixed":
        a = spec.get("action", "shortest" if env.kind == "routing" else 0)
        a = env.shortest(agent) if a == "shortest" else int(a)
        if a >= K:
            raise ConfigError(f"fixed action {a} out of range for agent {agent} with {K} actions")
        return Fixed(K, a, seed=seed), None
    if variant == "hedge":
        return Hedge(K, _eta(spec, K, T), seed=seed), None
    if variant == "exp3p":
        return Exp3P(K, T, delta=float(spec.get("delta", 0.05)), gamma=spec.get("gamma"), clip=bool(spec.get("clip", True)), seed=seed), None

    noise = float(spec.get("noise_std", env.noise_std(agent)))
    prior_mean = float(spec.get("prior_mean", default_prior_mean(env)))
    tree = default_kernel_tree(env, cfg.environment, spec)
    build = kernel_builder(env, agent, cfg.environment)
    if "fit" in spec:
        f = spec["fit"]
        tree = fit_hyperparameters(
            env, agent, tree, f.get("candidates", {}), int(f.get("samples", 200)),
            seed=fit_seed, noise_std=noise, prior_mean=prior_mean, build=build,
        )
    gp = make_gp(build(tree), noise, prior_mean)
    schedule = _schedule(spec)
    if variant == "gp-mw":
        return GpMw(K, env.outcomes(agent), gp, schedule, _eta(spec, K, T), seed=seed), tree
    cls = GpUcb if variant == "gp-ucb" else StableOpt
    return cls(env.grid(), gp, schedule, seed=seed), tree
