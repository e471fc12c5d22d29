"""Kernel functions over joint game outcomes.

A kernel is described declaratively by :class:`KernelSpec` so that it can be
written in a config file, fitted offline and shipped to learners. Evaluation
is vectorised: :func:`kernel_matrix` is the workhorse, :func:`eval_kernel` is
the checked scalar entry point.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np

FAMILIES = ("se", "matern", "polynomial", "linear", "product")

_ALIASES = {
    "squared-exponential": "se",
    "squared_exponential": "se",
    "rbf": "se",
    "product-composite": "product",
    "composite": "product",
}

MATERN_NU = (0.5, 1.5, 2.5)


class KernelError(ValueError):
    """Invalid kernel configuration or kernel input."""


@dataclass(frozen=True)
class Factor:
    """One factor of a product kernel: a kernel applied to selected coordinates."""

    kernel: "KernelSpec"
    # (start, stop) slice into the joint input, or an explicit index list
    coords: tuple[int, ...] | slice

    def select(self, X: np.ndarray) -> np.ndarray:
        if isinstance(self.coords, slice):
            return X[:, self.coords]
        return X[:, list(self.coords)]


@dataclass(frozen=True)
class KernelSpec:
    family: str = "se"
    lengthscale: float = 1.0
    degree: int = 1
    offset: float = 0.0
    nu: float = 2.5
    factors: tuple[Factor, ...] = field(default=())
    # output scale: every kernel value is multiplied by this
    variance: float = 1.0

    def __post_init__(self):
        family = _ALIASES.get(self.family, self.family)
        object.__setattr__(self, "family", family)
        if family not in FAMILIES:
            raise KernelError(f"unknown kernel family {self.family!r}")
        if not (np.isfinite(self.variance) and self.variance > 0):
            raise KernelError(f"variance must be positive, got {self.variance}")
        if family == "product":
            if not self.factors:
                raise KernelError("product kernel needs at least one factor")
            return
        if not (np.isfinite(self.lengthscale) and self.lengthscale > 0):
            raise KernelError(f"lengthscale must be positive, got {self.lengthscale}")
        if family == "polynomial":
            if int(self.degree) != self.degree or self.degree < 1:
                raise KernelError(f"degree must be a positive integer, got {self.degree}")
            if self.offset < 0:
                raise KernelError(f"offset must be nonnegative, got {self.offset}")
        if family == "matern" and float(self.nu) not in MATERN_NU:
            raise KernelError(f"matern nu must be one of {MATERN_NU}, got {self.nu}")

    def with_params(self, **params) -> "KernelSpec":
        return replace(self, **params)

    def to_dict(self) -> dict[str, Any]:
        if self.family == "product":
            out = []
            for f in self.factors:
                coords = (
                    [f.coords.start, f.coords.stop]
                    if isinstance(f.coords, slice)
                    else {"index": list(f.coords)}
                )
                out.append({"kernel": f.kernel.to_dict(), "coords": coords})
            d: dict[str, Any] = {"family": "product", "factors": out}
        else:
            d = {"family": self.family, "lengthscale": float(self.lengthscale)}
            if self.family == "polynomial":
                d.update(degree=int(self.degree), offset=float(self.offset))
            if self.family == "matern":
                d["nu"] = float(self.nu)
        if self.variance != 1.0:
            d["variance"] = float(self.variance)
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "KernelSpec":
        d = dict(d)
        family = _ALIASES.get(d.get("family", "se"), d.get("family", "se"))
        if family == "product":
            factors = []
            for f in d.get("factors", []):
                coords = f.get("coords")
                if isinstance(coords, dict):
                    coords = tuple(int(i) for i in coords["index"])
                elif isinstance(coords, (list, tuple)) and len(coords) == 2:
                    coords = slice(int(coords[0]), int(coords[1]))
                else:
                    raise KernelError(f"bad factor coords {coords!r}")
                factors.append(Factor(cls.from_dict(f["kernel"]), coords))
            return cls(family="product", factors=tuple(factors), variance=float(d.get("variance", 1.0)))
        unknown = set(d) - {"family", "lengthscale", "degree", "offset", "nu", "variance"}
        if unknown:
            raise KernelError(f"unknown kernel parameters {sorted(unknown)}")
        return cls(
            family=family,
            lengthscale=float(d.get("lengthscale", 1.0)),
            degree=int(d.get("degree", 1)),
            offset=float(d.get("offset", 0.0)),
            nu=float(d.get("nu", 2.5)),
            variance=float(d.get("variance", 1.0)),
        )


def product(*parts: tuple[KernelSpec, tuple[int, ...] | slice]) -> KernelSpec:
    """Build a product-composite kernel from ``(kernel, coords)`` pairs."""
    return KernelSpec(family="product", factors=tuple(Factor(k, c) for k, c in parts))


def _sqdist(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    d2 = (X * X).sum(1)[:, None] + (Y * Y).sum(1)[None, :] - 2.0 * X @ Y.T
    return np.maximum(d2, 0.0)


def _matern(s: np.ndarray, nu: float, lengthscale: float) -> np.ndarray:
    if nu == 0.5:
        return np.exp(-s / lengthscale)
    if nu == 1.5:
        r = np.sqrt(3.0) * s / lengthscale
        return (1.0 + r) * np.exp(-r)
    r = np.sqrt(5.0) * s / lengthscale
    return (1.0 + r + r * r / 3.0) * np.exp(-r)


def kernel_matrix(spec: KernelSpec, X, Y=None) -> np.ndarray:
    """Gram matrix ``[k(x, y)]`` for rows of ``X`` against rows of ``Y``."""
    K = _unscaled_matrix(spec, X, Y)
    return K if spec.variance == 1.0 else spec.variance * K


def _unscaled_matrix(spec: KernelSpec, X, Y=None) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = X if Y is None else np.atleast_2d(np.asarray(Y, dtype=float))
    if spec.family == "product":
        out = np.ones((X.shape[0], Y.shape[0]))
        for f in spec.factors:
            out *= kernel_matrix(f.kernel, f.select(X), f.select(Y))
        return out
    if spec.family in ("polynomial", "linear"):
        inner = X @ Y.T / spec.lengthscale
        if spec.family == "linear":
            return inner
        return (spec.offset + inner) ** int(spec.degree)
    d2 = _sqdist(X, Y)
    if Y is X:
        np.fill_diagonal(d2, 0.0)
    if spec.family == "se":
        return np.exp(-0.5 * d2 / spec.lengthscale**2)
    return _matern(np.sqrt(d2), float(spec.nu), spec.lengthscale)


def kernel_diag(spec: KernelSpec, X) -> np.ndarray:
    """``k(x, x)`` for every row of ``X`` without forming the full matrix."""
    d = _unscaled_diag(spec, X)
    return d if spec.variance == 1.0 else spec.variance * d


def _unscaled_diag(spec: KernelSpec, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if spec.family == "product":
        out = np.ones(X.shape[0])
        for f in spec.factors:
            out *= kernel_diag(f.kernel, f.select(X))
        return out
    if spec.family in ("se", "matern"):
        return np.ones(X.shape[0])
    inner = (X * X).sum(1) / spec.lengthscale
    if spec.family == "linear":
        return inner
    return (spec.offset + inner) ** int(spec.degree)


def input_dim(spec: KernelSpec) -> int | None:
    """Smallest joint-input width a product kernel needs; None if unconstrained."""
    if spec.family != "product":
        return None
    need = 0
    for f in spec.factors:
        if isinstance(f.coords, slice):
            need = max(need, f.coords.stop)
        elif f.coords:
            need = max(need, max(f.coords) + 1)
    return need


def eval_kernel(spec: KernelSpec, a, b) -> float:
    """Evaluate ``k(a, b)`` for two single joint outcomes."""
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.shape != b.shape:
        raise KernelError(f"dimension mismatch: {a.shape} vs {b.shape}")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise KernelError("kernel inputs must be finite")
    need = input_dim(spec)
    if need is not None and a.size < need:
        raise KernelError(f"product kernel expects at least {need} coordinates, got {a.size}")
    return float(kernel_matrix(spec, a[None, :], b[None, :])[0, 0])
