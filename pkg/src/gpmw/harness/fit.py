"""Offline kernel selection by grid search on the GP log marginal likelihood."""

from __future__ import annotations

import copy
import itertools
import math
from typing import Callable

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from ..gp import ConfigError, NumericalError
from ..kernels import KernelError, KernelSpec, kernel_matrix


def log_marginal_likelihood(kernel: KernelSpec, X, y, noise_var: float, prior_mean: float = 0.0) -> float:
    """``log p(y | X)`` under GP(prior_mean, k) with Gaussian noise, by one dense Cholesky."""
    X = np.asarray(X, dtype=float)
    r = np.asarray(y, dtype=float) - prior_mean
    K = kernel_matrix(kernel, X) + noise_var * np.eye(len(r))
    c, low = cho_factor(K, lower=True, check_finite=False)
    alpha = cho_solve((c, low), r, check_finite=False)
    return float(-0.5 * r @ alpha - np.log(np.diag(c)).sum() - 0.5 * len(r) * math.log(2 * math.pi))


def _set_path(tree, dotted: str, value):
    keys = dotted.split(".")
    node = tree
    for k in keys[:-1]:
        node = node[int(k)] if isinstance(node, list) else node[k]
    last = keys[-1]
    if isinstance(node, list):
        node[int(last)] = value
    else:
        node[last] = value


def candidate_grid(template: dict, candidates: dict) -> list[dict]:
    """Every combination of the candidate values, written into copies of ``template``."""
    if not candidates:
        return [copy.deepcopy(template)]
    keys = sorted(candidates)
    out = []
    for combo in itertools.product(*(candidates[k] for k in keys)):
        t = copy.deepcopy(template)
        try:
            for k, v in zip(keys, combo):
                _set_path(t, k, v)
        except (KeyError, IndexError, ValueError, TypeError):
            raise ConfigError(f"candidate path {k!r} does not exist in the kernel template") from None
        out.append(t)
    return out


def select_kernel(
    X,
    y,
    template,
    candidates: dict | None = None,
    noise_var: float = 1e-2,
    prior_mean: float = 0.0,
    build: Callable[[dict], KernelSpec] | None = None,
):
    """Best template instance by log marginal likelihood of ``(X, y)``.

    ``template`` is a KernelSpec or a plain config tree; ``build`` turns a
    tree into a KernelSpec (default ``KernelSpec.from_dict``). Returns the
    winner in the same form as ``template`` plus its score.
    """
    is_spec = isinstance(template, KernelSpec)
    tree = template.to_dict() if is_spec else template
    build = build or KernelSpec.from_dict
    best, best_score = None, -math.inf
    for cand in candidate_grid(tree, candidates or {}):
        try:
            score = log_marginal_likelihood(build(cand), X, y, noise_var, prior_mean)
        except (np.linalg.LinAlgError, KernelError, FloatingPointError):
            continue
        if np.isfinite(score) and score > best_score:
            best, best_score = cand, score
    if best is None:
        raise NumericalError("every candidate kernel failed to factorise")
    return (KernelSpec.from_dict(best) if is_spec else best), best_score


def sample_outcomes(env, agent: int, sample_count: int, rng: np.random.Generator):
    """Uniformly random joint outcomes seen by ``agent`` and their noisy rewards."""
    outcomes = env.outcomes(agent)
    X, y = [], []
    sizes = [env.n_actions(j) for j in range(env.n_players)]
    for _ in range(sample_count):
        joint = [int(rng.integers(n)) for n in sizes]
        rows = outcomes(env.context(agent, joint))
        X.append(rows[joint[agent]])
        y.append(env.reward(agent, joint) + env.noise_std(agent) * rng.standard_normal())
    return np.array(X), np.array(y)


def fit_hyperparameters(
    env,
    agent: int,
    template,
    candidates: dict | None = None,
    sample_count: int = 200,
    seed=None,
    noise_std: float | None = None,
    prior_mean: float = 0.0,
    build=None,
):
    """Kernel hyperparameters for one agent of ``env`` from random outcomes.

    With a single candidate (or none) the template comes back unchanged.
    """
    grid = candidate_grid(template.to_dict() if isinstance(template, KernelSpec) else template, candidates or {})
    if len(grid) == 1:
        return template
    rng = np.random.default_rng(seed)
    X, y = sample_outcomes(env, agent, sample_count, rng)
    s = env.noise_std(agent) if noise_std is None else noise_std
    best, _ = select_kernel(X, y, template, candidates, max(s * s, 1e-12), prior_mean, build)
    return best
