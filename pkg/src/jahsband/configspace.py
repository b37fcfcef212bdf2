"""Typed hyperparameter search spaces.

A space is an ordered list of parameter specs (float, log-float, integer,
ordinal, categorical), each carrying a default value and a prior confidence.
Sampling supports three strategies: uniform, prior-centered (truncated normal
around the default in normalized space, boosted-default for categoricals),
and local sampling around an arbitrary center. Densities of configurations
under those prior distributions are available for likelihood scoring.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Sequence, Union

import numpy as np
from scipy.special import ndtr, ndtri

FLOAT = "float"
LOG_FLOAT = "log_float"
INTEGER = "integer"
ORDINAL = "ordinal"
CATEGORICAL = "categorical"

_NUMERIC_KINDS = (FLOAT, LOG_FLOAT, INTEGER)
_KINDS = (FLOAT, LOG_FLOAT, INTEGER, ORDINAL, CATEGORICAL)

#: normalized-space standard deviation per prior confidence level
CONFIDENCE_SIGMA = {"low": 0.5, "medium": 0.25, "high": 0.125}
#: boosted-default categorical multiplier per confidence level
CONFIDENCE_MULTIPLIER = {"low": 2.0, "medium": 4.0, "high": 8.0}


class SpaceError(ValueError):
    """Base class for search space validation errors."""


class DuplicateNameError(SpaceError):
    """Two parameters share a name."""


class DefaultOutOfDomainError(SpaceError):
    """A default value lies outside its parameter's domain."""


class EmptyDomainError(SpaceError):
    """A space or a value list has no content."""


class UnknownParameterError(SpaceError):
    """A configuration names a parameter the space does not have."""


class OutOfDomainError(SpaceError):
    """A configuration value lies outside its parameter's domain."""


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _truncnorm_sample(
    rng: np.random.Generator, mu: float, sigma: float
) -> float:
    """One draw from a normal(mu, sigma) truncated to [0, 1], by inverse CDF."""
    a = ndtr((0.0 - mu) / sigma)
    b = ndtr((1.0 - mu) / sigma)
    u = rng.uniform(a, b)
    return float(mu + sigma * ndtri(u))


def _truncnorm_pdf(x: float, mu: float, sigma: float) -> float:
    """Density at x of a normal(mu, sigma) truncated to [0, 1]."""
    if not 0.0 <= x <= 1.0:
        return 0.0
    z = (x - mu) / sigma
    mass = ndtr((1.0 - mu) / sigma) - ndtr((0.0 - mu) / sigma)
    return float(math.exp(-0.5 * z * z) / (sigma * math.sqrt(2.0 * math.pi) * mass))


@dataclass(frozen=True)
class ParameterSpec:
    """A single hyperparameter: its kind, domain, default, and prior width.

    Numeric kinds use ``lo``/``hi`` bounds; ordinal and categorical kinds use
    a ``values`` list (ordered for ordinal, unordered for categorical).
    """

    name: str
    kind: str
    lo: float | None = None
    hi: float | None = None
    values: tuple[Any, ...] | None = None
    default: Any = None
    prior_confidence: str = "medium"

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise SpaceError(f"{self.name}: unknown kind {self.kind!r}")
        if self.prior_confidence not in CONFIDENCE_SIGMA:
            raise SpaceError(
                f"{self.name}: confidence must be one of low/medium/high"
            )
        if self.kind in _NUMERIC_KINDS:
            if self.lo is None or self.hi is None:
                raise SpaceError(f"{self.name}: numeric kinds need lo and hi")
            if not (self.lo < self.hi):
                raise SpaceError(f"{self.name}: requires lo < hi")
            if self.kind == LOG_FLOAT and self.lo <= 0:
                raise SpaceError(f"{self.name}: log scale requires lo > 0")
        else:
            if not self.values:
                raise EmptyDomainError(f"{self.name}: empty value list")
            if len(set(map(repr, self.values))) != len(self.values):
                raise SpaceError(f"{self.name}: duplicate values")
        if self.default is None:
            raise SpaceError(f"{self.name}: default required")
        if not self.contains(self.default):
            raise DefaultOutOfDomainError(
                f"{self.name}: default {self.default!r} outside domain"
            )

    def contains(self, value: Any) -> bool:
        if self.kind in _NUMERIC_KINDS:
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                return False
            if self.kind == INTEGER and float(value) != int(value):
                return False
            return self.lo <= value <= self.hi
        return value in self.values

    @property
    def n_choices(self) -> int:
        """Number of discrete choices (ordinal/categorical only)."""
        assert self.values is not None
        return len(self.values)

    def to_unit(self, value: Any) -> float:
        """Map a domain value to its normalized coordinate.

        Float/integer map affinely onto [0, 1]; log-float maps through log
        first; ordinal maps to index/(K-1). Categorical maps to the raw
        category index (not interpolated).
        """
        if not self.contains(value):
            raise OutOfDomainError(f"{self.name}: {value!r} outside domain")
        if self.kind == FLOAT or self.kind == INTEGER:
            return (float(value) - self.lo) / (self.hi - self.lo)
        if self.kind == LOG_FLOAT:
            return (math.log(value) - math.log(self.lo)) / (
                math.log(self.hi) - math.log(self.lo)
            )
        idx = self.values.index(value)
        if self.kind == ORDINAL:
            return idx / (self.n_choices - 1) if self.n_choices > 1 else 0.0
        return float(idx)

    def from_unit(self, coord: float) -> Any:
        """Inverse of :meth:`to_unit`; integer-like kinds round to nearest."""
        if self.kind == FLOAT:
            return self.lo + coord * (self.hi - self.lo)
        if self.kind == LOG_FLOAT:
            return math.exp(
                math.log(self.lo)
                + coord * (math.log(self.hi) - math.log(self.lo))
            )
        if self.kind == INTEGER:
            v = _round_half_up(self.lo + coord * (self.hi - self.lo))
            return int(min(max(v, self.lo), self.hi))
        if self.kind == ORDINAL:
            idx = _round_half_up(coord * (self.n_choices - 1))
        else:
            idx = _round_half_up(coord)
        idx = min(max(idx, 0), self.n_choices - 1)
        return self.values[idx]

    def category_probs(self, center_value: Any, confidence: str) -> np.ndarray:
        """Boosted-default distribution: the center category gets weight m,
        every other category weight 1, normalized."""
        assert self.kind == CATEGORICAL
        m = CONFIDENCE_MULTIPLIER[confidence]
        probs = np.full(self.n_choices, 1.0 / (m + self.n_choices - 1))
        probs[self.values.index(center_value)] = m / (m + self.n_choices - 1)
        return probs


@dataclass(frozen=True)
class Configuration:
    """One point in a search space: a value per parameter, plus an optional
    architecture derivation when the space carries a grammar."""

    assignments: dict[str, Any]
    derivation: tuple | None = None

    def __getitem__(self, name: str) -> Any:
        return self.assignments[name]


class SearchSpace:
    """An ordered, validated collection of parameter specs with an optional
    architecture grammar slot."""

    def __init__(self, specs: Sequence[ParameterSpec], grammar=None) -> None:
        if not specs and grammar is None:
            raise EmptyDomainError("space needs parameters or a grammar")
        names = [s.name for s in specs]
        dupes = {n for n in names if names.count(n) > 1}
        if dupes:
            raise DuplicateNameError(f"duplicate parameter names: {sorted(dupes)}")
        self.parameters: tuple[ParameterSpec, ...] = tuple(specs)
        self.grammar = grammar
        self._by_name = {s.name: s for s in self.parameters}

    def __len__(self) -> int:
        return len(self.parameters)

    def __iter__(self) -> Iterable[ParameterSpec]:
        return iter(self.parameters)

    def __getitem__(self, name: str) -> ParameterSpec:
        try:
            return self._by_name[name]
        except KeyError:
            raise UnknownParameterError(name) from None

    @property
    def names(self) -> list[str]:
        return [s.name for s in self.parameters]

    def validate(self, config: Configuration) -> None:
        """Raise if the configuration does not fit this space."""
        for name in config.assignments:
            if name not in self._by_name:
                raise UnknownParameterError(name)
        for spec in self.parameters:
            if spec.name not in config.assignments:
                raise UnknownParameterError(f"missing value for {spec.name}")
            if not spec.contains(config.assignments[spec.name]):
                raise OutOfDomainError(
                    f"{spec.name}: {config.assignments[spec.name]!r}"
                )
        if (config.derivation is not None) != (self.grammar is not None):
            raise SpaceError(
                "derivation must be present iff the space has a grammar"
            )

    def default_configuration(self) -> Configuration:
        derivation = None
        if self.grammar is not None:
            from . import grammar as hg

            derivation = hg.default_derivation(self.grammar)
        return Configuration(
            {s.name: s.default for s in self.parameters}, derivation
        )


def build_space(specs: Sequence[ParameterSpec], grammar=None) -> SearchSpace:
    """Validate specs and assemble a search space."""
    return SearchSpace(specs, grammar)


def normalize(space: SearchSpace, config: Configuration) -> np.ndarray:
    """Normalized coordinates of a configuration, in parameter order.

    Categorical entries hold the raw category index; everything else lies in
    [0, 1].
    """
    space.validate(config)
    return np.array(
        [s.to_unit(config.assignments[s.name]) for s in space.parameters]
    )


def denormalize(space: SearchSpace, coords: np.ndarray) -> Configuration:
    """Inverse of :func:`normalize` (integer-like kinds round to the nearest
    index). The result never carries a derivation."""
    if len(coords) != len(space.parameters):
        raise UnknownParameterError(
            f"expected {len(space.parameters)} coordinates, got {len(coords)}"
        )
    return Configuration(
        {
            s.name: s.from_unit(float(c))
            for s, c in zip(space.parameters, coords)
        }
    )


# sampling strategies

Strategy = Union[str, tuple]


def _sample_param_uniform(rng: np.random.Generator, spec: ParameterSpec) -> Any:
    if spec.kind == FLOAT:
        return float(rng.uniform(spec.lo, spec.hi))
    if spec.kind == LOG_FLOAT:
        return float(
            math.exp(rng.uniform(math.log(spec.lo), math.log(spec.hi)))
        )
    if spec.kind == INTEGER:
        return int(rng.integers(int(spec.lo), int(spec.hi) + 1))
    return spec.values[int(rng.integers(spec.n_choices))]


def _sample_param_prior(
    rng: np.random.Generator, spec: ParameterSpec, center: Any, confidence: str
) -> Any:
    if spec.kind == CATEGORICAL:
        probs = spec.category_probs(center, confidence)
        return spec.values[int(rng.choice(spec.n_choices, p=probs))]
    sigma = CONFIDENCE_SIGMA[confidence]
    mu = spec.to_unit(center)
    if spec.kind == ORDINAL:
        # index units: treat the K positions as an integer scale
        mu = spec.values.index(center) / max(spec.n_choices - 1, 1)
    coord = _truncnorm_sample(rng, mu, sigma)
    return spec.from_unit(coord)


def _as_rng(seed: int | np.random.Generator) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def sample(
    space: SearchSpace,
    strategy: Strategy = "uniform",
    seed: int | np.random.Generator = 0,
    confidence: str | None = None,
) -> Configuration:
    """Draw one configuration.

    strategy is ``"uniform"``, ``"prior"`` (truncated normal around each
    default, width set by each parameter's own confidence unless
    ``confidence`` overrides it), or ``("around", center)`` for local sampling
    around an arbitrary configuration (confidence defaults to medium).
    Architecture derivations are drawn with the matching grammar mode.
    """
    rng = _as_rng(seed)
    assignments: dict[str, Any] = {}

    if strategy == "uniform":
        for spec in space.parameters:
            assignments[spec.name] = _sample_param_uniform(rng, spec)
    elif strategy == "prior":
        for spec in space.parameters:
            conf = confidence or spec.prior_confidence
            assignments[spec.name] = _sample_param_prior(
                rng, spec, spec.default, conf
            )
    elif isinstance(strategy, tuple) and strategy[0] == "around":
        center = strategy[1]
        space.validate(center)
        conf_default = confidence or "medium"
        for spec in space.parameters:
            assignments[spec.name] = _sample_param_prior(
                rng, spec, center.assignments[spec.name], conf_default
            )
    else:
        raise ValueError(f"unknown strategy {strategy!r}")

    derivation = None
    if space.grammar is not None:
        from . import grammar as hg

        if strategy == "uniform":
            derivation = hg.sample_derivation(space.grammar, "uniform", rng)
        else:
            if strategy == "prior":
                center_d = hg.default_derivation(space.grammar)
                conf = confidence or getattr(
                    space.grammar, "prior_confidence", "medium"
                )
            else:
                center_d = strategy[1].derivation
                conf = confidence or "medium"
            derivation = hg.sample_derivation(
                space.grammar, ("prior", center_d, conf), rng
            )
    return Configuration(assignments, derivation)


def prior_pdf(
    space: SearchSpace,
    config: Configuration,
    center: Configuration,
    confidence: str | None = None,
) -> float:
    """Density of ``config`` under the prior-style distribution centered at
    ``center``: a product of per-parameter truncated-normal densities
    (numeric kinds) and boosted-default category probabilities.

    With ``confidence=None`` each parameter uses its own declared confidence.
    Architecture derivations do not enter the product.
    """
    space.validate(config)
    space.validate(center)
    score = 1.0
    for spec in space.parameters:
        value = config.assignments[spec.name]
        c_value = center.assignments[spec.name]
        conf = confidence or spec.prior_confidence
        if spec.kind == CATEGORICAL:
            probs = spec.category_probs(c_value, conf)
            score *= float(probs[spec.values.index(value)])
        else:
            sigma = CONFIDENCE_SIGMA[conf]
            score *= _truncnorm_pdf(spec.to_unit(value), spec.to_unit(c_value), sigma)
    return score


# declarative space files

_KIND_ALIASES = {
    "float": FLOAT,
    "log_float": LOG_FLOAT,
    "log-float": LOG_FLOAT,
    "logfloat": LOG_FLOAT,
    "integer": INTEGER,
    "int": INTEGER,
    "ordinal": ORDINAL,
    "categorical": CATEGORICAL,
}


def spec_from_dict(obj: dict[str, Any]) -> ParameterSpec:
    kind = _KIND_ALIASES.get(str(obj.get("kind", "")).lower())
    if kind is None:
        raise SpaceError(f"unknown kind in {obj!r}")
    values = obj.get("values")
    return ParameterSpec(
        name=obj["name"],
        kind=kind,
        lo=obj.get("lo"),
        hi=obj.get("hi"),
        values=tuple(values) if values is not None else None,
        default=obj["default"],
        prior_confidence=obj.get("confidence", "medium"),
    )


def load_space(source: str | Path | dict) -> SearchSpace:
    """Load a search space from a JSON file or an already-parsed dict.

    Format: ``{"parameters": [{name, kind, lo/hi or values, default,
    confidence}, ...], "grammar": {...}?}``. A bare list is accepted as the
    parameters array.
    """
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    else:
        data = source
    if isinstance(data, list):
        data = {"parameters": data}
    specs = [spec_from_dict(o) for o in data.get("parameters", [])]
    grammar = None
    gspec = data.get("grammar")
    if gspec:
        from . import grammar as hg

        grammar = hg.grammar_from_dict(gspec)
    return build_space(specs, grammar)


def space_to_dict(space: SearchSpace) -> dict[str, Any]:
    """Serializable form of a space, inverse of :func:`load_space`."""
    params = []
    for s in space.parameters:
        obj: dict[str, Any] = {"name": s.name, "kind": s.kind}
        if s.kind in _NUMERIC_KINDS:
            obj["lo"] = s.lo
            obj["hi"] = s.hi
        else:
            obj["values"] = list(s.values)
        obj["default"] = s.default
        obj["confidence"] = s.prior_confidence
        params.append(obj)
    out: dict[str, Any] = {"parameters": params}
    if space.grammar is not None:
        from . import grammar as hg

        out["grammar"] = hg.grammar_to_dict(space.grammar)
    return out
