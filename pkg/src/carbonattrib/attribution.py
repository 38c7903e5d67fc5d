"""Location-based, residual, and market-based carbon intensity.

All intensities are g CO2-eq per kWh. Generation is in MWh, so the MWh
weights cancel in the weighted average and no unit conversion is needed.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from datetime import datetime

import numpy as np

from .errors import (
    DegenerateResidualHour,
    EmptyAfterExclusion,
    InvalidParameter,
    NonFiniteValue,
    WrongInputMethod,
    ZeroTotalGeneration,
)
from .grid import (
    DEFAULT_START,
    HOUR,
    ConsumerProfile,
    GenerationSeries,
    PpaPortfolio,
    source_table,
    validate_series,
)

LOCATION_BASED = "location_based"
RESIDUAL = "residual"
MARKET_BASED = "market_based"
METHODS = (LOCATION_BASED, RESIDUAL, MARKET_BASED)

DEGENERATE_POLICIES = ("error", "clamp_zero")
# residual generation at or below this (MWh) has no meaningful mix
DEGENERATE_EPS = 1e-9

GROUPINGS = ("overall", "hour_of_day", "month", "region")


@dataclass(frozen=True, eq=False)
class CarbonSignal:
    """Hourly carbon intensity of one region under one attribution method."""

    region_id: str
    method: str
    values: np.ndarray
    ppa: PpaPortfolio = field(default_factory=PpaPortfolio)
    f: float | None = None
    start: datetime = DEFAULT_START
    degenerate_hours: tuple[int, ...] = ()

    def __post_init__(self):
        if self.method not in METHODS:
            raise InvalidParameter(f"unknown attribution method {self.method!r}")
        if self.method == MARKET_BASED:
            if self.f is None or not 0.0 <= self.f <= 1.0:
                raise InvalidParameter("market-based signals need a PPA share f in [0, 1]")
        elif self.f is not None:
            raise InvalidParameter(f"{self.method} signals carry no PPA share")
        vals = np.array(self.values, dtype=float)
        vals = np.atleast_1d(vals)
        if vals.ndim != 1:
            raise InvalidParameter("signal values must be one-dimensional")
        if not np.all(np.isfinite(vals)):
            raise NonFiniteValue(f"signal for {self.region_id!r} has non-finite values")
        if np.any(vals < 0):
            raise InvalidParameter(f"signal for {self.region_id!r} has negative values")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "degenerate_hours", tuple(int(h) for h in self.degenerate_hours))

    def __len__(self):
        return len(self.values)

    @property
    def label(self) -> str:
        if self.method == MARKET_BASED:
            return f"mb({self.f:g})"
        return "lb" if self.method == LOCATION_BASED else "res"

    def timestamps(self) -> list[datetime]:
        return [self.start + t * HOUR for t in range(len(self.values))]

    def __eq__(self, other):
        if not isinstance(other, CarbonSignal):
            return NotImplemented
        return (
            self.region_id == other.region_id
            and self.method == other.method
            and self.f == other.f
            and self.ppa == other.ppa
            and self.start == other.start
            and self.degenerate_hours == other.degenerate_hours
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None


def _mix(series: GenerationSeries, sources) -> tuple[np.ndarray, np.ndarray]:
    table = source_table(sources)
    validate_series(series, table)
    cef = np.array([table[name].cef for name in series.sources])
    return series.matrix(), cef


def _contract(matrix: np.ndarray, names, ppa: PpaPortfolio) -> np.ndarray:
    p = np.array([ppa.fraction(name) for name in names])
    return matrix - p[:, None] * matrix


def ci_lb(series: GenerationSeries, sources=None) -> CarbonSignal:
    """Grid-mix carbon intensity, the generation-weighted mean of source CEFs."""
    matrix, cef = _mix(series, sources)
    total = matrix.sum(axis=0)
    zero = np.flatnonzero(total <= 0.0)
    if zero.size:
        raise ZeroTotalGeneration(int(zero[0]), series.region_id)
    values = (cef @ matrix) / total
    return CarbonSignal(series.region_id, LOCATION_BASED, values, start=series.start)


def residual_mix(series: GenerationSeries, ppa: PpaPortfolio, sources=None) -> GenerationSeries:
    """The generation left over once PPA-contracted energy is removed."""
    if sources is not None:
        ppa.validate_against(sources)
    remaining = _contract(series.matrix(), series.sources, ppa)
    return GenerationSeries(
        series.region_id, dict(zip(series.sources, remaining)), series.start
    )


def ci_res(
    series: GenerationSeries,
    ppa: PpaPortfolio,
    sources=None,
    degenerate_policy: str = "error",
) -> CarbonSignal:
    """Carbon intensity of the residual mix.

    Hours where the residual generation is at most ``DEGENERATE_EPS`` MWh
    raise :class:`DegenerateResidualHour` under ``degenerate_policy="error"``;
    with ``"clamp_zero"`` they get intensity 0 and are listed in
    ``degenerate_hours``.
    """
    if degenerate_policy not in DEGENERATE_POLICIES:
        raise InvalidParameter(f"unknown degenerate policy {degenerate_policy!r}")
    table = source_table(sources)
    matrix, cef = _mix(series, table)
    ppa.validate_against(table)
    remaining = _contract(matrix, series.sources, ppa)
    denom = remaining.sum(axis=0)
    bad = denom <= DEGENERATE_EPS
    if bad.any() and degenerate_policy == "error":
        raise DegenerateResidualHour(int(np.flatnonzero(bad)[0]), series.region_id)
    numer = cef @ remaining
    values = np.zeros_like(denom)
    np.divide(numer, denom, out=values, where=~bad)
    return CarbonSignal(
        series.region_id,
        RESIDUAL,
        values,
        ppa=ppa,
        start=series.start,
        degenerate_hours=tuple(np.flatnonzero(bad)),
    )


def ci_mb(res_signal: CarbonSignal, consumer: ConsumerProfile | float) -> CarbonSignal:
    """Market-based intensity seen by a consumer covering a share f of demand with PPAs."""
    if res_signal.method != RESIDUAL:
        raise WrongInputMethod(f"expected a residual signal, got {res_signal.method}")
    if not isinstance(consumer, ConsumerProfile):
        consumer = ConsumerProfile(float(consumer))
    return CarbonSignal(
        res_signal.region_id,
        MARKET_BASED,
        (1.0 - consumer.f) * res_signal.values,
        ppa=res_signal.ppa,
        f=consumer.f,
        start=res_signal.start,
        degenerate_hours=res_signal.degenerate_hours,
    )


@dataclass(frozen=True)
class DivergenceSummary:
    """Per-group statistics of the percentage increase of residual over grid-mix CI."""

    grouping: str
    keys: tuple
    n_hours: tuple[int, ...]
    mean_increase_pct: tuple[float, ...]
    median_increase_pct: tuple[float, ...]
    max_increase_pct: tuple[float, ...]
    mean_gap: tuple[float, ...]  # mean of CI_res - CI_lb, g/kWh
    excluded_degenerate: int = 0
    excluded_zero_lb: int = 0

    def rows(self) -> list[dict]:
        return [
            {
                "group": key,
                "n_hours": n,
                "mean_increase_pct": mean,
                "median_increase_pct": med,
                "max_increase_pct": mx,
                "mean_gap_g_per_kwh": gap,
            }
            for key, n, mean, med, mx, gap in zip(
                self.keys,
                self.n_hours,
                self.mean_increase_pct,
                self.median_increase_pct,
                self.max_increase_pct,
                self.mean_gap,
            )
        ]

    def row(self, key) -> dict:
        for r in self.rows():
            if r["group"] == key:
                return r
        raise KeyError(key)


def _group_key(grouping: str, series: GenerationSeries, t: int):
    if grouping == "overall":
        return "all"
    if grouping == "region":
        return series.region_id
    stamp = series.start + t * HOUR
    return stamp.hour if grouping == "hour_of_day" else stamp.month


def divergence(
    series_set: GenerationSeries | Iterable[GenerationSeries],
    ppa: PpaPortfolio,
    grouping: str = "overall",
    sources=None,
) -> DivergenceSummary:
    """Summarize ``100 * (CI_res - CI_lb) / CI_lb`` over hours, grouped.

    Per-hour ratios are averaged (not the ratio of averages). Hours with no
    residual generation, and hours where CI_lb is zero, are left out of the
    statistics and only counted.
    """
    if grouping not in GROUPINGS:
        raise InvalidParameter(f"unknown grouping {grouping!r}")
    if isinstance(series_set, GenerationSeries):
        series_set = [series_set]
    table = source_table(sources)
    ppa.validate_against(table)

    pct: dict = {}
    gap: dict = {}
    n_degenerate = n_zero_lb = 0
    for series in series_set:
        matrix, cef = _mix(series, table)
        total = matrix.sum(axis=0)
        remaining = _contract(matrix, series.sources, ppa)
        denom = remaining.sum(axis=0)
        lb_numer = cef @ matrix
        res_numer = cef @ remaining
        for t in range(series.hours):
            if denom[t] <= DEGENERATE_EPS or total[t] <= 0.0:
                n_degenerate += 1
                continue
            lb = lb_numer[t] / total[t]
            if lb == 0.0:
                n_zero_lb += 1
                continue
            res = res_numer[t] / denom[t]
            key = _group_key(grouping, series, t)
            pct.setdefault(key, []).append(100.0 * (res - lb) / lb)
            gap.setdefault(key, []).append(res - lb)

    if not pct:
        raise EmptyAfterExclusion(
            f"no hour left after excluding {n_degenerate} degenerate and {n_zero_lb} zero-CI hours"
        )
    keys = tuple(sorted(pct))
    return DivergenceSummary(
        grouping=grouping,
        keys=keys,
        n_hours=tuple(len(pct[k]) for k in keys),
        mean_increase_pct=tuple(math.fsum(pct[k]) / len(pct[k]) for k in keys),
        median_increase_pct=tuple(float(np.median(pct[k])) for k in keys),
        max_increase_pct=tuple(max(pct[k]) for k in keys),
        mean_gap=tuple(math.fsum(gap[k]) / len(gap[k]) for k in keys),
        excluded_degenerate=n_degenerate,
        excluded_zero_lb=n_zero_lb,
    )


def signal_set(
    series: GenerationSeries,
    ppa_fraction: float,
    consumer_f: float = 0.0,
    sources=None,
    degenerate_policy: str = "error",
) -> dict[str, CarbonSignal]:
    """The ``lb``, ``res`` and ``mb`` signals of a region for a uniform PPA fraction."""
    table = source_table(sources)
    lb = ci_lb(series, table)
    res = ci_res(series, PpaPortfolio.uniform(ppa_fraction, table), table, degenerate_policy)
    return {"lb": lb, "res": res, "mb": ci_mb(res, ConsumerProfile(consumer_f))}


def all_signal_sets(
    series_map: Mapping[str, GenerationSeries],
    ppa_fraction: float,
    consumer_f: float = 0.0,
    sources=None,
    degenerate_policy: str = "error",
) -> dict[str, dict[str, CarbonSignal]]:
    return {
        region: signal_set(s, ppa_fraction, consumer_f, sources, degenerate_policy)
        for region, s in sorted(series_map.items())
    }
