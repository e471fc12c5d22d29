"""Experiment configuration: YAML in, validated ``ExperimentConfig`` out.

Every validation error names the offending section path and, when the
config came from a file, the line it sits on::

    configs/bad.yaml:7: learners.player1.variant: unknown variant 'gp'

Layout (all keys except ``environment`` and ``learners`` are optional)::

    name: matrix-random-opponent
    seed: 2019
    horizon: 200
    repeats: 10
    environment: {type: matrix, K: 30, kernel: {family: se, lengthscale: 6}}
    learners:                      # one entry per role of the environment
      player1: {variant: gp-mw}
      player2: {variant: uniform-random}
    variants:                      # named overrides; each replaces whole roles
      hedge: {player1: {variant: hedge}}
    output: {dir: results/matrix_random_opponent, snapshot_every: 0}
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from ..gp import ConfigError
from ..kernels import KernelError, KernelSpec

ROLES = {
    "matrix": ("player1", "player2"),
    "routing": ("learning", "fixed"),
    "robust-bo": ("player", "adversary"),
}

ENV_KEYS = {
    "matrix": {"type", "K", "kernel", "noise_std"},
    "routing": {"type", "network", "routes", "max_ratio", "learning_agents", "bound_samples", "noise_fraction", "normalize"},
    "robust-bo": {"type", "M", "U", "p", "noise_std", "items", "profiles", "reveal"},
}

LEARNER_KEYS = {
    "uniform-random": set(),
    "fixed": {"action"},
    "hedge": {"eta"},
    "exp3p": {"delta", "gamma", "clip"},
    "gp-mw": {"kernel", "noise_std", "prior_mean", "beta", "eta", "fit"},
    "gp-ucb": {"kernel", "noise_std", "prior_mean", "beta", "fit"},
    "stableopt": {"kernel", "noise_std", "prior_mean", "beta", "fit"},
}

TOP_KEYS = {"name", "seed", "horizon", "repeats", "environment", "learners", "variants", "output"}
ALLOWED_DEGREES = (2, 4, 6)


def _marks(node, path=(), out=None) -> dict[tuple, int]:
    """Map every section path of a composed YAML tree to its 1-based line."""
    out = {} if out is None else out
    out[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            key = k.value
            _marks(v, path + (key,), out)
            # a key's own line is more useful than where its value starts
            out[path + (key,)] = k.start_mark.line + 1
    elif isinstance(node, yaml.SequenceNode):
        for j, v in enumerate(node.value):
            _marks(v, path + (j,), out)
    return out


@dataclass
class ExperimentConfig:
    environment: dict
    learners: dict
    name: str = "experiment"
    seed: int | None = None
    horizon: int = 100
    repeats: int = 1
    variants: dict = field(default_factory=dict)
    output_dir: str = "results"
    snapshot_every: int = 0
    source: str | None = None
    base_dir: Path = field(default_factory=Path.cwd)
    marks: dict = field(default_factory=dict, repr=False)

    def error(self, path, msg) -> ConfigError:
        path = tuple(path)
        where = ".".join(str(p) for p in path) or "<root>"
        line = None
        for k in range(len(path), -1, -1):
            if path[:k] in self.marks:
                line = self.marks[path[:k]]
                break
        prefix = f"{self.source}:{line}: " if self.source and line else ""
        return ConfigError(f"{prefix}{where}: {msg}")

    @property
    def kind(self) -> str:
        return self.environment["type"]

    def variant_names(self) -> list[str]:
        return list(self.variants) or ["default"]

    def learners_for(self, variant: str | None = None) -> dict:
        """Role -> learner spec with the variant's overrides applied."""
        specs = copy.deepcopy(self.learners)
        if self.variants:
            name = variant if variant is not None else self.variant_names()[0]
            if name not in self.variants:
                raise ConfigError(f"unknown variant {name!r}; choose from {self.variant_names()}")
            specs.update(copy.deepcopy(self.variants[name] or {}))
        elif variant not in (None, "default"):
            raise ConfigError(f"unknown variant {variant!r}; this config defines none")
        return specs

    def resolve(self, p) -> Path:
        p = Path(p)
        return p if p.is_absolute() else self.base_dir / p

    def to_dict(self) -> dict:
        d = {
            "name": self.name,
            "seed": self.seed,
            "horizon": self.horizon,
            "repeats": self.repeats,
            "environment": self.environment,
            "learners": self.learners,
            "output": {"dir": self.output_dir, "snapshot_every": self.snapshot_every},
        }
        if self.variants:
            d["variants"] = self.variants
        return d


def _int(cfg, path, v, lo=None, allow_none=False):
    if v is None and allow_none:
        return None
    if isinstance(v, bool) or not isinstance(v, int):
        raise cfg.error(path, f"expected an integer, got {v!r}")
    if lo is not None and v < lo:
        raise cfg.error(path, f"must be >= {lo}, got {v}")
    return v


def _num(cfg, path, v, positive=False, nonneg=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise cfg.error(path, f"expected a number, got {v!r}")
    if positive and not v > 0:
        raise cfg.error(path, f"must be positive, got {v}")
    if nonneg and v < 0:
        raise cfg.error(path, f"must be nonnegative, got {v}")
    return float(v)


def _keys(cfg, path, d, allowed):
    if not isinstance(d, dict):
        raise cfg.error(path, f"expected a mapping, got {type(d).__name__}")
    for k in d:
        if k not in allowed:
            raise cfg.error(tuple(path) + (k,), f"unknown key; expected one of {sorted(allowed)}")


def _kernel(cfg, path, d, kind):
    if kind == "routing" and isinstance(d, dict) and set(d) <= {"own", "load"}:
        for part in ("own", "load"):
            if part in d:
                _kernel(cfg, tuple(path) + (part,), d[part], None)
        return
    try:
        KernelSpec.from_dict(d)
    except (KernelError, TypeError, KeyError, ValueError) as exc:
        raise cfg.error(path, f"invalid kernel: {exc}") from None


def _file(cfg, path, v):
    if not isinstance(v, str):
        raise cfg.error(path, f"expected a file path, got {v!r}")
    if not cfg.resolve(v).exists():
        raise cfg.error(path, f"file not found: {v}")


def _validate_env(cfg: ExperimentConfig):
    env = cfg.environment
    if not isinstance(env, dict):
        raise cfg.error(("environment",), "expected a mapping")
    kind = env.get("type")
    if kind not in ROLES:
        raise cfg.error(("environment", "type"), f"unknown environment {kind!r}; expected one of {sorted(ROLES)}")
    _keys(cfg, ("environment",), env, ENV_KEYS[kind])
    p = ("environment",)
    if kind == "matrix":
        _int(cfg, p + ("K",), env.get("K", 30), lo=2)
        _kernel(cfg, p + ("kernel",), env.get("kernel", {"family": "se", "lengthscale": 6.0}), kind)
        _num(cfg, p + ("noise_std",), env.get("noise_std", 1.0), nonneg=True)
    elif kind == "routing":
        net = env.get("network", "sioux-falls")
        if isinstance(net, dict):
            _keys(cfg, p + ("network",), net, {"net", "trips"})
            for k in ("net", "trips"):
                if k not in net:
                    raise cfg.error(p + ("network",), f"missing {k!r} file")
                _file(cfg, p + ("network", k), net[k])
        elif net != "sioux-falls":
            raise cfg.error(p + ("network",), "expected 'sioux-falls' or a mapping with 'net' and 'trips'")
        _int(cfg, p + ("routes",), env.get("routes", 5), lo=1)
        _num(cfg, p + ("max_ratio",), env.get("max_ratio", 3.0), positive=True)
        la = env.get("learning_agents")
        if isinstance(la, list):
            for j, a in enumerate(la):
                _int(cfg, p + ("learning_agents", j), a, lo=0)
        elif la is not None:
            _int(cfg, p + ("learning_agents",), la, lo=0)
        _int(cfg, p + ("bound_samples",), env.get("bound_samples", 10_000), lo=1)
        _num(cfg, p + ("noise_fraction",), env.get("noise_fraction", 1e-3), positive=True)
        if not isinstance(env.get("normalize", True), bool):
            raise cfg.error(p + ("normalize",), "expected true or false")
    else:
        files = [k for k in ("items", "profiles") if k in env]
        if files and len(files) != 2:
            raise cfg.error(p, "give both 'items' and 'profiles' files or neither")
        for k in files:
            _file(cfg, p + (k,), env[k])
        if not files:
            for k, dflt in (("M", 200), ("U", 50), ("p", 15)):
                _int(cfg, p + (k,), env.get(k, dflt), lo=1)
        _num(cfg, p + ("noise_std",), env.get("noise_std", 0.1), nonneg=True)
        if env.get("reveal", "index") not in ("index", "profile"):
            raise cfg.error(p + ("reveal",), "expected 'index' or 'profile'")


def _validate_learner(cfg: ExperimentConfig, path, spec):
    if not isinstance(spec, dict):
        raise cfg.error(path, "expected a mapping with a 'variant' key")
    v = spec.get("variant")
    if v not in LEARNER_KEYS:
        raise cfg.error(tuple(path) + ("variant",), f"unknown variant {v!r}; expected one of {sorted(LEARNER_KEYS)}")
    _keys(cfg, path, spec, LEARNER_KEYS[v] | {"variant"})
    role = path[-1]
    kind = cfg.kind
    if v in ("gp-ucb", "stableopt") and not (kind == "robust-bo" and role == "player"):
        raise cfg.error(tuple(path) + ("variant",), f"{v} needs an action x adversary grid (robust-bo player only)")
    if "eta" in spec and spec["eta"] != "auto":
        _num(cfg, tuple(path) + ("eta",), spec["eta"], nonneg=True)
    if "action" in spec and spec["action"] != "shortest":
        _int(cfg, tuple(path) + ("action",), spec["action"], lo=0)
    if spec.get("action") == "shortest" and kind != "routing":
        raise cfg.error(tuple(path) + ("action",), "'shortest' is only meaningful for routing")
    if "delta" in spec:
        d = _num(cfg, tuple(path) + ("delta",), spec["delta"], positive=True)
        if d >= 1:
            raise cfg.error(tuple(path) + ("delta",), "must lie in (0, 1)")
    if spec.get("gamma") is not None:
        _num(cfg, tuple(path) + ("gamma",), spec["gamma"], nonneg=True)
    for k in ("noise_std",):
        if k in spec:
            _num(cfg, tuple(path) + (k,), spec[k], positive=True)
    if "prior_mean" in spec:
        _num(cfg, tuple(path) + ("prior_mean",), spec["prior_mean"])
    if "kernel" in spec:
        _kernel(cfg, tuple(path) + ("kernel",), spec["kernel"], kind)
    if "beta" in spec:
        b = spec["beta"]
        _keys(cfg, tuple(path) + ("beta",), b, {"rkhs_bound", "delta", "constant"})
        for k, val in b.items():
            _num(cfg, tuple(path) + ("beta", k), val, nonneg=True)
        if "delta" in b and not 0 < b["delta"] < 1:
            raise cfg.error(tuple(path) + ("beta", "delta"), "must lie in (0, 1)")
    if "fit" in spec:
        f = spec["fit"]
        fp = tuple(path) + ("fit",)
        _keys(cfg, fp, f, {"samples", "candidates"})
        _int(cfg, fp + ("samples",), f.get("samples", 200), lo=2)
        cands = f.get("candidates", {})
        _keys(cfg, fp + ("candidates",), cands, set(cands))
        for k, vals in cands.items():
            if not isinstance(vals, list) or not vals:
                raise cfg.error(fp + ("candidates", k), "expected a nonempty list of values")
            if k.split(".")[-1] == "degree" and any(d not in ALLOWED_DEGREES for d in vals):
                raise cfg.error(fp + ("candidates", k), f"polynomial degree candidates must come from {ALLOWED_DEGREES}")


def validate(cfg: ExperimentConfig) -> ExperimentConfig:
    cfg.horizon = _int(cfg, ("horizon",), cfg.horizon, lo=1)
    cfg.repeats = _int(cfg, ("repeats",), cfg.repeats, lo=1)
    cfg.seed = _int(cfg, ("seed",), cfg.seed, lo=0, allow_none=True)
    cfg.snapshot_every = _int(cfg, ("output", "snapshot_every"), cfg.snapshot_every, lo=0)
    _validate_env(cfg)
    roles = ROLES[cfg.kind]
    _keys(cfg, ("learners",), cfg.learners, set(roles))
    required = roles if cfg.kind != "routing" else ("learning",)
    for r in required:
        if r not in cfg.learners:
            raise cfg.error(("learners",), f"missing learner for role {r!r}")
    for r, spec in cfg.learners.items():
        _validate_learner(cfg, ("learners", r), spec)
    if not isinstance(cfg.variants, dict):
        raise cfg.error(("variants",), "expected a mapping of variant name to role overrides")
    for name, over in cfg.variants.items():
        over = over or {}
        _keys(cfg, ("variants", name), over, set(roles))
        for r, spec in over.items():
            _validate_learner(cfg, ("variants", name, r), spec)
    return cfg


def from_dict(data: dict, source: str | None = None, base_dir=None, marks=None) -> ExperimentConfig:
    """Build and validate a config from an already-parsed mapping."""
    stub = ExperimentConfig({}, {}, source=source, marks=marks or {})
    if not isinstance(data, dict):
        raise stub.error((), "config must be a mapping")
    _keys(stub, (), data, TOP_KEYS)
    for k in ("environment", "learners"):
        if k not in data:
            raise stub.error((), f"missing required section {k!r}")
    out = data.get("output") or {}
    _keys(stub, ("output",), out, {"dir", "snapshot_every"})
    cfg = ExperimentConfig(
        environment=data["environment"],
        learners=data["learners"],
        name=str(data.get("name", "experiment")),
        seed=data.get("seed"),
        horizon=data.get("horizon", 100),
        repeats=data.get("repeats", 1),
        variants=data.get("variants") or {},
        output_dir=str(out.get("dir", "results")),
        snapshot_every=out.get("snapshot_every", 0),
        source=source,
        base_dir=Path(base_dir) if base_dir is not None else Path.cwd(),
        marks=marks or {},
    )
    return validate(cfg)


def load_config(path) -> ExperimentConfig:
    """Read, parse and validate a YAML experiment config."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"{path}: config file not found")
    text = path.read_text()
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = f"{mark.line + 1}:" if mark is not None else ""
        raise ConfigError(f"{path}:{line} YAML syntax error: {getattr(exc, 'problem', exc)}") from None
    marks = _marks(node) if node is not None else {}
    return from_dict(data, source=str(path), base_dir=path.parent, marks=marks)
