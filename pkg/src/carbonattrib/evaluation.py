"""Emissions of decision traces, OPT_x/EVAL_y scenarios, PPA sweeps and CDFs."""

from __future__ import annotations

import math
import numbers
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field, replace
from functools import singledispatch

import numpy as np

from .attribution import CarbonSignal, ci_lb, ci_mb, ci_res
from .errors import (
    EmptyInput,
    InvalidParameter,
    MismatchedScenarios,
    SignalSpanMismatch,
    ZeroBaselineEmissions,
)
from .grid import ConsumerProfile, GenerationSeries, PpaPortfolio, source_table
from .optimizers import (
    DEFAULT_ALPHA,
    AllocationPlan,
    AutoscaleJob,
    ClientSite,
    DataCenter,
    RoutingAssignment,
    TemporalJob,
    autoscale,
    autoscale_baseline,
    route_baseline,
    route_requests,
    schedule_baseline,
    schedule_job,
)

TECHNIQUES = ("spatial", "temporal", "autoscale")
OPT_METHODS = ("lb", "mb")
DEFAULT_FRACTIONS = (0.0, 0.25, 0.5, 0.75, 1.0)
CELLS = (("lb", "lb"), ("lb", "mb"), ("mb", "mb"))


@dataclass(frozen=True)
class EmissionsReport:
    total_g: float
    total_kwh: float
    per_hour_g: tuple[float, ...] = ()

    @property
    def per_kwh(self) -> float:
        return self.total_g / self.total_kwh if self.total_kwh > 0 else 0.0

    @classmethod
    def from_hourly(cls, grams: np.ndarray, kwh: np.ndarray) -> "EmissionsReport":
        return cls(math.fsum(grams), math.fsum(kwh), tuple(float(g) for g in grams))

    def __add__(self, other: "EmissionsReport") -> "EmissionsReport":
        n = max(len(self.per_hour_g), len(other.per_hour_g))
        hourly = np.zeros(n)
        hourly[: len(self.per_hour_g)] += self.per_hour_g
        hourly[: len(other.per_hour_g)] += other.per_hour_g
        return EmissionsReport(
            math.fsum([self.total_g, other.total_g]),
            math.fsum([self.total_kwh, other.total_kwh]),
            tuple(float(g) for g in hourly),
        )


# --------------------------------------------------------------------------
# evaluating decisions


@singledispatch
def evaluate(decision, signal, context) -> EmissionsReport:
    """Grams of CO2-eq emitted by ``decision`` when charged at ``signal``.

    ``decision`` may be a start hour (``context`` is the TemporalJob), an
    AllocationPlan (``context`` is the AutoscaleJob) or a RoutingAssignment
    (``signal`` maps region id to signal, ``context`` is the data centers).
    """
    raise TypeError(f"cannot evaluate a {type(decision).__name__}")


@evaluate.register(numbers.Integral)
def _(start, signal: CarbonSignal, job: TemporalJob) -> EmissionsReport:
    start = int(start)
    if start < 0 or start + job.duration > len(signal):
        raise SignalSpanMismatch(
            f"job at [{start}, {start + job.duration}) outside a {len(signal)} h signal"
        )
    kwh = np.zeros(len(signal))
    kwh[start : start + job.duration] = job.power
    return EmissionsReport.from_hourly(kwh * signal.values, kwh)


@evaluate.register(AllocationPlan)
def _(plan, signal: CarbonSignal, job: AutoscaleJob) -> EmissionsReport:
    if plan.deadline > len(signal):
        raise SignalSpanMismatch(f"plan ends at hour {plan.deadline}, signal has {len(signal)}")
    kwh = np.zeros(len(signal))
    kwh[plan.release : plan.deadline] = np.array(plan.counts, dtype=float) * job.per_instance_power
    return EmissionsReport.from_hourly(kwh * signal.values, kwh)


@evaluate.register(RoutingAssignment)
def _(assignment, signals: Mapping[str, CarbonSignal], dcs: Sequence[DataCenter]) -> EmissionsReport:
    by_id = {dc.dc_id: dc for dc in dcs}
    grams = np.zeros(assignment.hours)
    kwh = np.zeros(assignment.hours)
    for region in {dc.region_id for dc in dcs}:
        if region in signals and len(signals[region]) < assignment.hours:
            raise SignalSpanMismatch(f"signal for {region!r} shorter than the routing trace")
    for e in assignment.entries:
        dc = by_id[e.dc_id]
        energy = e.requests * dc.per_request_energy
        kwh[e.hour] += energy
        grams[e.hour] += energy * signals[dc.region_id].values[e.hour]
    return EmissionsReport.from_hourly(grams, kwh)


# --------------------------------------------------------------------------
# technique inputs


@dataclass(frozen=True, eq=False)
class SpatialInputs:
    sites: tuple[ClientSite, ...]
    dcs: tuple[DataCenter, ...]
    series: Mapping[str, GenerationSeries] | None = None
    alpha: float = DEFAULT_ALPHA
    latency_cap: float | None = None
    sources: Mapping | None = None

    @property
    def region_id(self) -> str:
        return "+".join(sorted({dc.region_id for dc in self.dcs}))

    def regions(self) -> dict[str, GenerationSeries]:
        needed = sorted({dc.region_id for dc in self.dcs})
        missing = [r for r in needed if self.series is None or r not in self.series]
        if missing:
            raise InvalidParameter(f"no generation series for regions {missing}")
        return {r: self.series[r] for r in needed}


@dataclass(frozen=True, eq=False)
class TemporalInputs:
    jobs: tuple[TemporalJob, ...]
    series: GenerationSeries | None = None
    sources: Mapping | None = None
    region: str | None = None

    @property
    def region_id(self) -> str:
        return self.region or (self.series.region_id if self.series is not None else "")

    def regions(self) -> dict[str, GenerationSeries]:
        if self.series is None:
            raise InvalidParameter("no generation series given")
        return {self.series.region_id: self.series}


@dataclass(frozen=True, eq=False)
class AutoscaleInputs:
    jobs: tuple[AutoscaleJob, ...]
    series: GenerationSeries | None = None
    sources: Mapping | None = None
    region: str | None = None

    region_id = TemporalInputs.region_id
    regions = TemporalInputs.regions


_INPUT_TYPES = {"spatial": SpatialInputs, "temporal": TemporalInputs, "autoscale": AutoscaleInputs}


def _check_technique(technique: str, inputs) -> None:
    if technique not in _INPUT_TYPES:
        raise InvalidParameter(f"unknown technique {technique!r}; expected one of {TECHNIQUES}")
    if not isinstance(inputs, _INPUT_TYPES[technique]):
        raise InvalidParameter(
            f"{technique} needs {_INPUT_TYPES[technique].__name__}, got {type(inputs).__name__}"
        )


def optimize(technique: str, inputs, signals: Mapping[str, CarbonSignal]):
    """Run the technique's carbon-aware optimizer against ``signals``."""
    _check_technique(technique, inputs)
    if technique == "spatial":
        return route_requests(inputs.sites, inputs.dcs, signals, inputs.alpha, inputs.latency_cap)
    signal = signals[inputs.region_id]
    if technique == "temporal":
        return tuple(schedule_job(job, signal) for job in inputs.jobs)
    return tuple(autoscale(job, signal) for job in inputs.jobs)


def baseline(technique: str, inputs):
    _check_technique(technique, inputs)
    if technique == "spatial":
        return route_baseline(inputs.sites, inputs.dcs)
    if technique == "temporal":
        return tuple(schedule_baseline(job) for job in inputs.jobs)
    return tuple(autoscale_baseline(job) for job in inputs.jobs)


def evaluate_decision(technique: str, inputs, decision, signals: Mapping[str, CarbonSignal]) -> EmissionsReport:
    _check_technique(technique, inputs)
    if technique == "spatial":
        return evaluate(decision, signals, inputs.dcs)
    signal = signals[inputs.region_id]
    total = EmissionsReport(0.0, 0.0, (0.0,) * len(signal))
    for job, part in zip(inputs.jobs, decision, strict=True):
        total = total + evaluate(part, signal, job)
    return total


def build_signals(
    inputs,
    method: str,
    ppa_fraction: float,
    consumer_f: float = 0.0,
    degenerate_policy: str = "error",
) -> dict[str, CarbonSignal]:
    """CI_lb or CI_mb signals for every region the inputs touch."""
    if method not in OPT_METHODS:
        raise InvalidParameter(f"unknown attribution method {method!r}")
    table = source_table(inputs.sources)
    out = {}
    for region, series in inputs.regions().items():
        if method == "lb":
            out[region] = ci_lb(series, table)
        else:
            ppa = PpaPortfolio.uniform(ppa_fraction, table)
            res = ci_res(series, ppa, table, degenerate_policy)
            out[region] = ci_mb(res, ConsumerProfile(consumer_f))
    return out


# --------------------------------------------------------------------------
# scenarios


def savings_pct(baseline_g: float, optimized_g: float) -> float:
    if baseline_g == 0.0:
        if optimized_g == 0.0:
            return 0.0
        raise ZeroBaselineEmissions(f"baseline emits 0 g but the optimized trace emits {optimized_g} g")
    return 100.0 * (baseline_g - optimized_g) / baseline_g


@dataclass(frozen=True)
class ScenarioResult:
    technique: str
    opt_method: str
    eval_method: str
    ppa_fraction: float
    baseline: EmissionsReport
    optimized: EmissionsReport
    decision: object = field(repr=False)
    baseline_decision: object = field(repr=False)
    consumer_f: float = 0.0

    @property
    def cell(self) -> str:
        return f"opt_{self.opt_method}_eval_{self.eval_method}"

    @property
    def savings_pct(self) -> float:
        return savings_pct(self.baseline.total_g, self.optimized.total_g)

    @property
    def savings_per_kwh_pct(self) -> float:
        return savings_pct(self.baseline.per_kwh, self.optimized.per_kwh)

    def to_dict(self) -> dict:
        return {
            "technique": self.technique,
            "opt_method": self.opt_method,
            "eval_method": self.eval_method,
            "ppa_fraction": self.ppa_fraction,
            "consumer_f": self.consumer_f,
            "baseline_g": self.baseline.total_g,
            "optimized_g": self.optimized.total_g,
            "baseline_kwh": self.baseline.total_kwh,
            "optimized_kwh": self.optimized.total_kwh,
            "savings_pct": self.savings_pct,
            "savings_per_kwh_pct": self.savings_per_kwh_pct,
        }


def scenario_from_signals(
    technique: str,
    inputs,
    opt_signals: Mapping[str, CarbonSignal],
    eval_signals: Mapping[str, CarbonSignal],
    opt_method: str,
    eval_method: str,
    ppa_fraction: float,
    consumer_f: float = 0.0,
    decision=None,
) -> ScenarioResult:
    """Optimize on one signal set and evaluate optimizer and baseline on another.

    A precomputed ``decision`` may be passed to reuse an optimizer run.
    """
    if decision is None:
        decision = optimize(technique, inputs, opt_signals)
    base = baseline(technique, inputs)
    return ScenarioResult(
        technique=technique,
        opt_method=opt_method,
        eval_method=eval_method,
        ppa_fraction=ppa_fraction,
        baseline=evaluate_decision(technique, inputs, base, eval_signals),
        optimized=evaluate_decision(technique, inputs, decision, eval_signals),
        decision=decision,
        baseline_decision=base,
        consumer_f=consumer_f,
    )


def run_scenario(
    technique: str,
    inputs,
    ppa_fraction: float,
    opt_method: str,
    eval_method: str,
    consumer_f: float = 0.0,
    degenerate_policy: str = "error",
) -> ScenarioResult:
    """One OPT_x_EVAL_y cell for a uniform PPA fraction on all eligible sources."""
    opt = build_signals(inputs, opt_method, ppa_fraction, consumer_f, degenerate_policy)
    ev = build_signals(inputs, eval_method, ppa_fraction, consumer_f, degenerate_policy)
    return scenario_from_signals(
        technique, inputs, opt, ev, opt_method, eval_method, ppa_fraction, consumer_f
    )


@dataclass(frozen=True)
class DiscrepancyRecord:
    region_id: str
    ppa_fraction: float
    discrepancy_pp: float
    savings_lb_lb: float
    savings_lb_mb: float
    label: str = ""

    def to_dict(self) -> dict:
        return {
            "region_id": self.region_id,
            "label": self.label,
            "ppa_fraction": self.ppa_fraction,
            "savings_opt_lb_eval_lb": self.savings_lb_lb,
            "savings_opt_lb_eval_mb": self.savings_lb_mb,
            "discrepancy_pp": self.discrepancy_pp,
        }


def discrepancy(
    lb_lb: ScenarioResult, lb_mb: ScenarioResult, region_id: str = "", label: str = ""
) -> DiscrepancyRecord:
    """Savings claimed under location-based evaluation minus market-based, in points."""
    if (lb_lb.opt_method, lb_lb.eval_method) != ("lb", "lb"):
        raise MismatchedScenarios(f"first scenario must be opt_lb_eval_lb, got {lb_lb.cell}")
    if (lb_mb.opt_method, lb_mb.eval_method) != ("lb", "mb"):
        raise MismatchedScenarios(f"second scenario must be opt_lb_eval_mb, got {lb_mb.cell}")
    if lb_lb.technique != lb_mb.technique or lb_lb.ppa_fraction != lb_mb.ppa_fraction:
        raise MismatchedScenarios("scenarios differ in technique or PPA fraction")
    if lb_lb.decision != lb_mb.decision or lb_lb.baseline_decision != lb_mb.baseline_decision:
        raise MismatchedScenarios("scenarios were produced by different decisions")
    a, b = lb_lb.savings_pct, lb_mb.savings_pct
    return DiscrepancyRecord(region_id, lb_lb.ppa_fraction, a - b, a, b, label)


@dataclass(frozen=True)
class ScenarioMatrix:
    region_id: str
    ppa_fraction: float
    lb_lb: ScenarioResult
    lb_mb: ScenarioResult
    mb_mb: ScenarioResult

    @property
    def cells(self) -> tuple[ScenarioResult, ...]:
        return (self.lb_lb, self.lb_mb, self.mb_mb)

    def discrepancy(self, label: str = "") -> DiscrepancyRecord:
        return discrepancy(self.lb_lb, self.lb_mb, self.region_id, label)


def scenario_matrix(
    technique: str,
    inputs,
    ppa_fraction: float,
    consumer_f: float = 0.0,
    degenerate_policy: str = "error",
) -> ScenarioMatrix:
    """All three cells; the two OPT_lb cells share one optimizer run."""
    lb = build_signals(inputs, "lb", ppa_fraction, consumer_f, degenerate_policy)
    mb = build_signals(inputs, "mb", ppa_fraction, consumer_f, degenerate_policy)
    lb_decision = optimize(technique, inputs, lb)
    args = (technique, inputs)
    return ScenarioMatrix(
        region_id=inputs.region_id,
        ppa_fraction=ppa_fraction,
        lb_lb=scenario_from_signals(*args, lb, lb, "lb", "lb", ppa_fraction, consumer_f, lb_decision),
        lb_mb=scenario_from_signals(*args, lb, mb, "lb", "mb", ppa_fraction, consumer_f, lb_decision),
        mb_mb=scenario_from_signals(*args, mb, mb, "mb", "mb", ppa_fraction, consumer_f),
    )


@dataclass(frozen=True)
class SweepTable:
    technique: str
    region_id: str
    rows: tuple[ScenarioMatrix, ...]

    @property
    def fractions(self) -> tuple[float, ...]:
        return tuple(r.ppa_fraction for r in self.rows)

    def as_rows(self) -> list[dict]:
        return [
            {
                "region_id": self.region_id,
                "technique": self.technique,
                "ppa_fraction": r.ppa_fraction,
                "opt_lb_eval_lb": r.lb_lb.savings_pct,
                "opt_lb_eval_mb": r.lb_mb.savings_pct,
                "opt_mb_eval_mb": r.mb_mb.savings_pct,
                "discrepancy_pp": r.discrepancy().discrepancy_pp,
            }
            for r in self.rows
        ]

    def table_row(self) -> tuple[str, float, tuple[float, ...]]:
        """(region, location-based savings, market-based savings per nonzero fraction)."""
        lb_value = self.rows[0].lb_lb.savings_pct
        mb_values = tuple(r.mb_mb.savings_pct for r in self.rows if r.ppa_fraction > 0)
        return self.region_id, lb_value, mb_values


def ppa_sweep(
    technique: str,
    inputs,
    fractions: Iterable[float] = DEFAULT_FRACTIONS,
    consumer_f: float = 0.0,
    degenerate_policy: str = "error",
) -> SweepTable:
    fractions = tuple(float(p) for p in fractions)
    if not fractions:
        raise EmptyInput("no PPA fractions to sweep")
    bad = [p for p in fractions if not 0.0 <= p <= 1.0]
    if bad:
        raise InvalidParameter(f"PPA fractions outside [0, 1]: {bad}")
    rows = tuple(
        scenario_matrix(technique, inputs, p, consumer_f, degenerate_policy)
        for p in sorted(set(fractions))
    )
    return SweepTable(technique, inputs.region_id, rows)


# --------------------------------------------------------------------------
# per-day splitting and CDFs


def split_by_day(technique: str, inputs) -> list[tuple[str, object]]:
    """Independent per-day sub-problems, labelled ``day<N>``.

    Temporal and autoscale jobs are grouped by the day of their nominal start
    or release and keep the full series; spatial traces are cut into 24 h
    windows.
    """
    _check_technique(technique, inputs)
    out = []
    if technique == "spatial":
        hours = inputs.sites[0].hours if inputs.sites else 0
        for day in range(hours // 24):
            lo, hi = 24 * day, 24 * day + 24
            sites = tuple(
                ClientSite(s.site_id, s.distance, s.hourly_requests[lo:hi]) for s in inputs.sites
            )
            series = {r: s.window(lo, hi) for r, s in inputs.regions().items()}
            out.append((f"day{day}", replace(inputs, sites=sites, series=series)))
        return out
    key = (lambda j: j.nominal_start) if technique == "temporal" else (lambda j: j.release)
    days: dict[int, list] = {}
    for job in inputs.jobs:
        days.setdefault(key(job) // 24, []).append(job)
    for day in sorted(days):
        out.append((f"day{day}", replace(inputs, jobs=tuple(days[day]))))
    return out


def daily_discrepancies(
    technique: str,
    inputs,
    ppa_fraction: float,
    consumer_f: float = 0.0,
    degenerate_policy: str = "error",
) -> list[DiscrepancyRecord]:
    return [
        scenario_matrix(technique, sub, ppa_fraction, consumer_f, degenerate_policy).discrepancy(label)
        for label, sub in split_by_day(technique, inputs)
    ]


@dataclass(frozen=True)
class CdfResult:
    points: tuple[tuple[float, float], ...]  # (value, cumulative fraction)
    mean: float
    max: float
    n: int
    label: str = ""


def region_cdf(records: Iterable[DiscrepancyRecord | float], label: str = "") -> CdfResult:
    """Empirical CDF with tied values merged into one point."""
    values = [r.discrepancy_pp if isinstance(r, DiscrepancyRecord) else float(r) for r in records]
    if not values:
        raise EmptyInput("cannot build a CDF from no records")
    values.sort()
    n = len(values)
    points = []
    for i, v in enumerate(values):
        if i + 1 < n and values[i + 1] == v:
            continue
        points.append((v, (i + 1) / n))
    return CdfResult(tuple(points), math.fsum(values) / n, values[-1], n, label)


def per_region_cdfs(records: Iterable[DiscrepancyRecord]) -> dict[str, CdfResult]:
    """CDFs across regions of each region's mean and of its maximum discrepancy."""
    by_region: dict[str, list[float]] = {}
    for r in records:
        by_region.setdefault(r.region_id, []).append(r.discrepancy_pp)
    if not by_region:
        raise EmptyInput("no discrepancy records")
    means = [math.fsum(v) / len(v) for _, v in sorted(by_region.items())]
    maxima = [max(v) for _, v in sorted(by_region.items())]
    return {
        "per_region_mean": region_cdf(means, "per_region_mean"),
        "per_region_max": region_cdf(maxima, "per_region_max"),
    }
