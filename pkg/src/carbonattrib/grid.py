"""Generation sources, hourly generation mixes, and PPA portfolios."""

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from types import MappingProxyType

import numpy as np

from .errors import (
    InvalidParameter,
    InvalidPortfolio,
    LengthMismatch,
    NegativeCef,
    NegativeGeneration,
    NonFiniteValue,
    UnknownSource,
)

HOUR = timedelta(hours=1)
DEFAULT_START = datetime(2022, 1, 1, tzinfo=timezone.utc)


@dataclass(frozen=True)
class EnergySource:
    """One generation technology and its carbon emission factor (g CO2-eq / kWh)."""

    name: str
    cef: float
    renewable: bool = False
    ppa_eligible: bool = False

    def __post_init__(self):
        try:
            cef = float(self.cef)
        except (TypeError, ValueError):
            raise InvalidParameter(f"source {self.name!r}: CEF must be a number") from None
        if not math.isfinite(cef):
            raise InvalidParameter(f"source {self.name!r}: CEF must be finite")
        object.__setattr__(self, "cef", cef)
        if self.cef < 0:
            raise NegativeCef(f"source {self.name!r}: CEF {self.cef} < 0")
        if self.ppa_eligible and not self.renewable:
            raise InvalidParameter(
                f"source {self.name!r}: only renewable sources can be PPA-eligible"
            )


# Fossil CEFs beyond coal and gas must come from an explicit table.
DEFAULT_SOURCES: Mapping[str, EnergySource] = MappingProxyType(
    {
        "coal": EnergySource("coal", 760.0),
        "gas": EnergySource("gas", 370.0),
        "solar": EnergySource("solar", 0.0, renewable=True, ppa_eligible=True),
        "wind": EnergySource("wind", 0.0, renewable=True, ppa_eligible=True),
        "hydro": EnergySource("hydro", 0.0, renewable=True),
        "geothermal": EnergySource("geothermal", 0.0, renewable=True),
    }
)


def source_table(sources: Mapping[str, EnergySource] | Iterable[EnergySource] | None) -> dict:
    """Normalize a collection of sources into a ``name -> EnergySource`` dict."""
    if sources is None:
        return dict(DEFAULT_SOURCES)
    if isinstance(sources, Mapping):
        return dict(sources)
    table = {}
    for src in sources:
        if src.name in table and table[src.name] != src:
            raise InvalidParameter(f"conflicting definitions for source {src.name!r}")
        table[src.name] = src
    return table


def _as_readonly(values) -> np.ndarray:
    try:
        arr = np.array(values, dtype=float)
    except (TypeError, ValueError) as exc:
        raise NonFiniteValue(f"generation values are not numeric: {exc}") from None
    arr = np.atleast_1d(arr)
    if arr.ndim != 1:
        raise LengthMismatch("generation values must be one-dimensional")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class GenerationSeries:
    """Hourly generation (MWh) per source for a single region."""

    region_id: str
    per_source: Mapping[str, np.ndarray]
    start: datetime = DEFAULT_START

    def __post_init__(self):
        arrays = {name: _as_readonly(vals) for name, vals in self.per_source.items()}
        object.__setattr__(self, "per_source", MappingProxyType(dict(sorted(arrays.items()))))
        start = self.start
        if start.tzinfo is None:
            start = start.replace(tzinfo=timezone.utc)
        object.__setattr__(self, "start", start.astimezone(timezone.utc))

    @property
    def sources(self) -> tuple[str, ...]:
        return tuple(self.per_source)

    @property
    def hours(self) -> int:
        if not self.per_source:
            return 0
        return len(next(iter(self.per_source.values())))

    def matrix(self) -> np.ndarray:
        """Generation as an array of shape (n_sources, T), rows in ``sources`` order."""
        if not self.per_source:
            return np.zeros((0, 0))
        return np.vstack(list(self.per_source.values()))

    def total(self) -> np.ndarray:
        return self.matrix().sum(axis=0)

    def timestamps(self) -> list[datetime]:
        return [self.start + t * HOUR for t in range(self.hours)]

    def window(self, begin: int, end: int) -> "GenerationSeries":
        """Hours ``[begin, end)`` as a new series starting at the matching timestamp."""
        if not 0 <= begin < end <= self.hours:
            raise InvalidParameter(f"window [{begin}, {end}) outside series of {self.hours} hours")
        return GenerationSeries(
            self.region_id,
            {k: v[begin:end] for k, v in self.per_source.items()},
            self.start + begin * HOUR,
        )

    def scaled(self, factor: float) -> "GenerationSeries":
        return GenerationSeries(
            self.region_id, {k: v * factor for k, v in self.per_source.items()}, self.start
        )

    def __eq__(self, other):
        if not isinstance(other, GenerationSeries):
            return NotImplemented
        return (
            self.region_id == other.region_id
            and self.start == other.start
            and self.sources == other.sources
            and all(np.array_equal(self.per_source[k], other.per_source[k]) for k in self.sources)
        )

    __hash__ = None


def validate_series(
    series: GenerationSeries,
    sources: Mapping[str, EnergySource] | Iterable[EnergySource] | None = None,
) -> GenerationSeries:
    """Check a series against a source table and return it unchanged.

    Raises UnknownSource, LengthMismatch, NonFiniteValue or NegativeGeneration.
    """
    table = source_table(sources)
    if not series.per_source:
        raise LengthMismatch(f"region {series.region_id!r}: series has no sources")
    for name in series.sources:
        if name not in table:
            raise UnknownSource(f"region {series.region_id!r}: source {name!r} is not declared")
    lengths = {name: len(v) for name, v in series.per_source.items()}
    if len(set(lengths.values())) != 1:
        raise LengthMismatch(f"region {series.region_id!r}: ragged source lengths {lengths}")
    if series.hours < 1:
        raise LengthMismatch(f"region {series.region_id!r}: series is empty")
    for name, values in series.per_source.items():
        if not np.all(np.isfinite(values)):
            raise NonFiniteValue(f"region {series.region_id!r}: {name} has non-finite values")
        if np.any(values < 0):
            hour = int(np.argmax(values < 0))
            raise NegativeGeneration(
                f"region {series.region_id!r}: {name} is negative at hour {hour}"
            )
    return series


@dataclass(frozen=True)
class PpaPortfolio:
    """Per-source fraction of generation under PPA contract, constant over time."""

    fractions: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for name, p in self.fractions.items():
            p = float(p)
            if not math.isfinite(p) or not 0.0 <= p <= 1.0:
                raise InvalidPortfolio(f"fraction for {name!r} must lie in [0, 1], got {p}")
            clean[name] = p
        object.__setattr__(self, "fractions", MappingProxyType(dict(sorted(clean.items()))))

    def __hash__(self):
        return hash(tuple(self.fractions.items()))

    def fraction(self, name: str) -> float:
        return self.fractions.get(name, 0.0)

    @property
    def is_empty(self) -> bool:
        return not any(self.fractions.values())

    def validate_against(self, sources) -> "PpaPortfolio":
        table = source_table(sources)
        for name, p in self.fractions.items():
            if p == 0.0:
                continue
            if name not in table:
                raise UnknownSource(f"portfolio contracts undeclared source {name!r}")
            if not table[name].ppa_eligible:
                raise InvalidPortfolio(f"source {name!r} is not PPA-eligible")
        return self

    @classmethod
    def uniform(cls, p: float, sources=None) -> "PpaPortfolio":
        """The same fraction ``p`` on every PPA-eligible source."""
        table = source_table(sources)
        return cls({name: p for name, src in table.items() if src.ppa_eligible})


@dataclass(frozen=True)
class ConsumerProfile:
    """Share of a consumer's demand covered by its own PPAs."""

    f: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.f) or not 0.0 <= self.f <= 1.0:
            raise InvalidParameter(f"PPA share f must lie in [0, 1], got {self.f}")
