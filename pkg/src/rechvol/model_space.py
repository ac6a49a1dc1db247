"""Parameter layouts, support constraints and priors for the six model families.

Parameters travel as float arrays whose last axis follows ``ModelSpec.names``;
a cloud of particles is an ``(M, d)`` array.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from rechvol.errors import InvalidInput

FAMILIES = ("GARCH", "GJR", "EGARCH", "SRN_GARCH", "SRN_GJR", "SRN_EGARCH")

PARAM_NAMES = {
    "GARCH": ("omega", "alpha", "beta"),
    "GJR": ("omega", "alpha", "beta", "gamma"),
    "EGARCH": ("omega", "alpha", "beta", "gamma"),
    "SRN_GARCH": ("beta0", "beta1", "alpha", "beta", "v0", "v1", "v2", "w", "b"),
    "SRN_GJR": ("beta0", "beta1", "alpha", "beta", "gamma", "v0", "v1", "v2", "w", "b"),
    "SRN_EGARCH": ("beta0", "beta1", "omega", "alpha", "beta", "gamma", "v0", "v1", "v2", "w", "b"),
}

RECURRENT_WEIGHTS = ("v0", "v1", "v2", "w", "b")


@dataclass(frozen=True)
class ModelSpec:
    family: str

    def __post_init__(self):
        family = self.family.upper().replace("-", "_")
        if family not in FAMILIES:
            raise InvalidInput(f"unknown model family {self.family!r}; choose from {FAMILIES}")
        object.__setattr__(self, "family", family)

    @property
    def names(self) -> tuple[str, ...]:
        return PARAM_NAMES[self.family]

    @property
    def dim(self) -> int:
        return len(self.names)

    @property
    def is_srn(self) -> bool:
        return self.family.startswith("SRN_")

    @property
    def base(self) -> str:
        """GARCH, GJR or EGARCH: the conditional-variance part of the family."""
        return self.family[4:] if self.is_srn else self.family

    def vector(self, params) -> np.ndarray:
        """Build a parameter array from a mapping keyed by name."""
        missing = [n for n in self.names if n not in params]
        if missing:
            raise InvalidInput(f"{self.family} parameters missing: {missing}")
        return np.array([float(params[n]) for n in self.names])

    def as_dict(self, theta) -> dict[str, float]:
        theta = np.asarray(theta, dtype=float)
        return {n: float(v) for n, v in zip(self.names, theta)}


# -- priors -----------------------------------------------------------------


@dataclass(frozen=True)
class Uniform:
    low: float
    high: float

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        inside = (x >= self.low) & (x <= self.high)
        return np.where(inside, -math.log(self.high - self.low), -np.inf)

    def sample(self, rng, size):
        return rng.uniform(self.low, self.high, size)

    def to_json(self):
        return {"dist": "uniform", "low": self.low, "high": self.high}


@dataclass(frozen=True)
class Normal:
    mean: float
    var: float

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        return -0.5 * math.log(2 * math.pi * self.var) - 0.5 * (x - self.mean) ** 2 / self.var

    def sample(self, rng, size):
        return rng.normal(self.mean, math.sqrt(self.var), size)

    def to_json(self):
        return {"dist": "normal", "mean": self.mean, "var": self.var}


@dataclass(frozen=True)
class Fixed:
    """Point mass; useful for pinning a parameter or the whole model."""

    value: float

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x == self.value, 0.0, -np.inf)

    def sample(self, rng, size):
        return np.full(size, float(self.value))

    def to_json(self):
        return {"dist": "fixed", "value": self.value}


def prior_from_json(obj) -> Uniform | Normal | Fixed:
    kind = obj.get("dist")
    if kind == "uniform":
        low, high = float(obj["low"]), float(obj["high"])
        if not (math.isfinite(low) and math.isfinite(high) and low < high):
            raise InvalidInput(f"bad uniform bounds {low}, {high}")
        return Uniform(low, high)
    if kind == "normal":
        var = float(obj["var"])
        if not var > 0:
            raise InvalidInput("normal prior variance must be positive")
        return Normal(float(obj["mean"]), var)
    if kind == "fixed":
        return Fixed(float(obj["value"]))
    raise InvalidInput(f"unknown prior distribution {kind!r}")


_BASE_PRIORS = {
    "GARCH": {"omega": Uniform(0.0, 10.0), "alpha": Uniform(0.0, 1.0), "beta": Uniform(0.0, 1.0)},
    "GJR": {
        "omega": Uniform(0.0, 10.0),
        "alpha": Uniform(0.0, 1.0),
        "beta": Uniform(0.0, 1.0),
        "gamma": Normal(0.0, 0.1),
    },
    "EGARCH": {
        "omega": Normal(0.0, 1.0),
        "alpha": Normal(0.0, 1.0),
        "beta": Uniform(0.0, 1.0),
        "gamma": Normal(0.0, 0.1),
    },
}


def default_priors(spec: ModelSpec) -> dict:
    """Default prior per parameter, keyed by name in ``spec.names`` order."""
    base = _BASE_PRIORS[spec.base]
    priors = {}
    for name in spec.names:
        if name in ("beta0", "beta1"):
            priors[name] = Uniform(0.0, 0.5)
        elif name in RECURRENT_WEIGHTS:
            priors[name] = Normal(0.0, 0.1)
        else:
            priors[name] = base[name]
    return priors


def resolve_priors(spec: ModelSpec, overrides=None) -> dict:
    priors = default_priors(spec)
    for name, obj in (overrides or {}).items():
        if name not in priors:
            raise InvalidInput(f"{spec.family} has no parameter {name!r}")
        priors[name] = obj if isinstance(obj, (Uniform, Normal, Fixed)) else prior_from_json(obj)
    return priors


def priors_to_json(priors) -> dict:
    return {name: p.to_json() for name, p in priors.items()}


# -- support ----------------------------------------------------------------


def in_support(spec: ModelSpec, theta) -> np.ndarray:
    """Joint constraints of the family; prior bounds are checked separately."""
    theta = np.atleast_2d(np.asarray(theta, dtype=float))
    col = {n: theta[:, i] for i, n in enumerate(spec.names)}
    ok = np.all(np.isfinite(theta), axis=1)
    base = spec.base
    if base == "GARCH":
        ok &= (col["alpha"] >= 0) & (col["beta"] >= 0) & (col["alpha"] + col["beta"] < 1)
    elif base == "GJR":
        a, b, g = col["alpha"], col["beta"], col["gamma"]
        ok &= (a >= 0) & (b >= 0) & (a + g >= 0) & (a + b + g < 1)
    else:
        ok &= (col["beta"] >= 0) & (col["beta"] < 1)
    if spec.is_srn:
        for name in ("beta0", "beta1"):
            ok &= (col[name] >= 0) & (col[name] <= 0.5)
    elif base in ("GARCH", "GJR"):
        ok &= col["omega"] > 0
    return ok


def log_prior(spec: ModelSpec, theta, priors=None) -> np.ndarray | float:
    """Sum of per-parameter log densities; -inf outside the support.

    Accepts a single vector (returns a float) or an ``(M, d)`` cloud.
    """
    priors = priors or default_priors(spec)
    arr = np.asarray(theta, dtype=float)
    single = arr.ndim == 1
    arr = np.atleast_2d(arr)
    if arr.shape[1] != spec.dim:
        raise InvalidInput(f"{spec.family} expects {spec.dim} parameters, got {arr.shape[1]}")
    total = np.zeros(arr.shape[0])
    with np.errstate(invalid="ignore"):
        for i, name in enumerate(spec.names):
            total = total + priors[name].logpdf(arr[:, i])
    total = np.where(in_support(spec, arr), total, -np.inf)
    return float(total[0]) if single else total


def sample_prior(spec: ModelSpec, count: int, rng, priors=None, return_rate: bool = False):
    """Draw ``count`` particles from the prior restricted to the joint support."""
    if count < 1:
        raise InvalidInput("count must be at least 1")
    priors = priors or default_priors(spec)
    kept = []
    n_kept = n_drawn = 0
    while n_kept < count:
        batch = max(2 * (count - n_kept), 16)
        draws = np.column_stack([priors[n].sample(rng, batch) for n in spec.names])
        ok = np.isfinite(log_prior(spec, draws, priors))
        n_drawn += batch
        kept.append(draws[ok])
        n_kept += int(ok.sum())
    out = np.concatenate(kept)[:count]
    if return_rate:
        return out, n_kept / n_drawn
    return out
