"""Carbon-aware spatial routing, temporal shifting, and autoscaling.

Every optimizer takes the carbon signal(s) it should minimize against as a
plain argument, so the same code serves location-based and market-based
optimization. Baselines never look at a signal.
"""

from __future__ import annotations

import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass

import numpy as np

from .attribution import CarbonSignal
from .errors import (
    EmptyWindow,
    InfeasibleDeadline,
    InvalidParameter,
    NoEligibleDc,
    SignalSpanMismatch,
)

DEFAULT_ALPHA = 0.67  # weight on carbon; distance gets 1 - alpha = 0.33
DEFAULT_NOMINAL_HOUR = 1  # nightly jobs at 01:00
DEFAULT_FLEXIBILITY = 8  # +/- hours around the nominal start
DEFAULT_WORK = 24.0  # instance-hours
DEFAULT_MAX_INSTANCES = 8
DEFAULT_AUTOSCALE_WINDOW = 24  # hours between release and deadline

# relative slack when deciding whether accumulated work covers the target
WORK_TOL = 1e-9


# --------------------------------------------------------------------------
# spatial routing


@dataclass(frozen=True)
class DataCenter:
    dc_id: str
    region_id: str
    per_request_energy: float = 1.0  # kWh per served request

    def __post_init__(self):
        e = float(self.per_request_energy)
        if not math.isfinite(e) or e <= 0:
            raise InvalidParameter(f"data center {self.dc_id!r}: per-request energy must be > 0")
        object.__setattr__(self, "per_request_energy", e)


@dataclass(frozen=True)
class ClientSite:
    site_id: str
    distance: Mapping[str, float]
    hourly_requests: tuple[float, ...]

    def __post_init__(self):
        dist = {k: float(v) for k, v in sorted(self.distance.items())}
        if any(not math.isfinite(d) or d < 0 for d in dist.values()):
            raise InvalidParameter(f"site {self.site_id!r}: distances must be finite and >= 0")
        reqs = tuple(float(r) for r in self.hourly_requests)
        if any(not math.isfinite(r) or r < 0 for r in reqs):
            raise InvalidParameter(f"site {self.site_id!r}: request counts must be >= 0")
        object.__setattr__(self, "distance", dist)
        object.__setattr__(self, "hourly_requests", reqs)

    def __hash__(self):
        return hash((self.site_id, tuple(self.distance.items()), self.hourly_requests))

    @property
    def hours(self) -> int:
        return len(self.hourly_requests)


@dataclass(frozen=True)
class RouteEntry:
    hour: int
    site_id: str
    dc_id: str
    requests: float


@dataclass(frozen=True)
class RoutingAssignment:
    """Chosen data center for every (hour, client site) pair."""

    hours: int
    entries: tuple[RouteEntry, ...]

    def total_requests(self, hour: int) -> float:
        return math.fsum(e.requests for e in self.entries if e.hour == hour)

    def requests_by_dc(self) -> dict[str, np.ndarray]:
        out: dict[str, np.ndarray] = {}
        for e in self.entries:
            out.setdefault(e.dc_id, np.zeros(self.hours))[e.hour] += e.requests
        return dict(sorted(out.items()))

    def dc_of(self, hour: int, site_id: str) -> str:
        for e in self.entries:
            if e.hour == hour and e.site_id == site_id:
                return e.dc_id
        raise KeyError((hour, site_id))


def _check_sites(sites: Sequence[ClientSite], dcs: Sequence[DataCenter]) -> int:
    if not dcs:
        raise InvalidParameter("at least one data center is required")
    ids = [dc.dc_id for dc in dcs]
    if len(set(ids)) != len(ids):
        raise InvalidParameter("data center ids must be unique")
    lengths = {site.hours for site in sites}
    if len(lengths) > 1:
        raise SignalSpanMismatch(f"client sites have different trace lengths {sorted(lengths)}")
    for site in sites:
        missing = set(ids) - set(site.distance)
        if missing:
            raise InvalidParameter(f"site {site.site_id!r} has no distance to {sorted(missing)}")
    return lengths.pop() if lengths else 0


def _minmax(values: list[float]) -> list[float]:
    lo, hi = min(values), max(values)
    if hi == lo:
        return [0.0] * len(values)
    return [(v - lo) / (hi - lo) for v in values]


def route_requests(
    sites: Sequence[ClientSite],
    dcs: Sequence[DataCenter],
    signals: Mapping[str, CarbonSignal],
    alpha: float = DEFAULT_ALPHA,
    latency_cap: float | None = None,
) -> RoutingAssignment:
    """Send each (hour, site) to the data center with the lowest weighted score.

    The score is ``alpha * carbon + (1 - alpha) * distance`` with both terms
    min-max normalized over the eligible data centers. The carbon term is the
    per-request carbon cost ``CI * per_request_energy``; with uniform
    per-request energy this normalizes to exactly the normalized CI.
    Ties go to the closer data center, then the smaller ``dc_id``.
    """
    if not 0.0 <= alpha <= 1.0:
        raise InvalidParameter(f"alpha must lie in [0, 1], got {alpha}")
    hours = _check_sites(sites, dcs)
    dcs = sorted(dcs, key=lambda dc: dc.dc_id)
    for dc in dcs:
        if dc.region_id not in signals:
            raise InvalidParameter(f"no carbon signal for region {dc.region_id!r}")
        if len(signals[dc.region_id]) < hours:
            raise SignalSpanMismatch(
                f"signal for {dc.region_id!r} covers {len(signals[dc.region_id])} h, need {hours}"
            )

    entries = []
    for site in sorted(sites, key=lambda s: s.site_id):
        eligible = [dc for dc in dcs if latency_cap is None or site.distance[dc.dc_id] <= latency_cap]
        if not eligible:
            raise NoEligibleDc(f"site {site.site_id!r}: no data center within {latency_cap}")
        dist = [site.distance[dc.dc_id] for dc in eligible]
        dist_n = _minmax(dist)
        for t in range(hours):
            carbon = [signals[dc.region_id].values[t] * dc.per_request_energy for dc in eligible]
            carbon_n = _minmax(carbon)
            best = min(
                range(len(eligible)),
                key=lambda i: (
                    alpha * carbon_n[i] + (1.0 - alpha) * dist_n[i],
                    dist[i],
                    eligible[i].dc_id,
                ),
            )
            entries.append(RouteEntry(t, site.site_id, eligible[best].dc_id, site.hourly_requests[t]))
    entries.sort(key=lambda e: (e.hour, e.site_id))
    return RoutingAssignment(hours, tuple(entries))


def route_baseline(sites: Sequence[ClientSite], dcs: Sequence[DataCenter]) -> RoutingAssignment:
    """Carbon-unaware routing: every request goes to the closest data center."""
    hours = _check_sites(sites, dcs)
    entries = []
    for site in sorted(sites, key=lambda s: s.site_id):
        closest = min(dcs, key=lambda dc: (site.distance[dc.dc_id], dc.dc_id))
        for t in range(hours):
            entries.append(RouteEntry(t, site.site_id, closest.dc_id, site.hourly_requests[t]))
    entries.sort(key=lambda e: (e.hour, e.site_id))
    return RoutingAssignment(hours, tuple(entries))


# --------------------------------------------------------------------------
# temporal shifting


@dataclass(frozen=True, kw_only=True)
class TemporalJob:
    """A contiguous, non-preemptible job that may start within +/- ``flexibility`` hours."""

    duration: int
    nominal_start: int = DEFAULT_NOMINAL_HOUR
    flexibility: int = DEFAULT_FLEXIBILITY
    power: float = 1.0  # kW

    def __post_init__(self):
        if int(self.duration) != self.duration or self.duration < 1:
            raise InvalidParameter(f"duration must be a positive integer, got {self.duration}")
        if int(self.nominal_start) != self.nominal_start or self.nominal_start < 0:
            raise InvalidParameter(f"nominal start must be a non-negative hour index")
        if int(self.flexibility) != self.flexibility or self.flexibility < 0:
            raise InvalidParameter(f"flexibility must be a non-negative integer")
        if not math.isfinite(self.power) or self.power <= 0:
            raise InvalidParameter(f"power must be > 0 kW, got {self.power}")

    def feasible_starts(self, horizon: int) -> range:
        lo = max(0, self.nominal_start - self.flexibility)
        hi = min(self.nominal_start + self.flexibility, horizon - self.duration)
        if hi < lo:
            raise EmptyWindow(
                f"no start in [{self.nominal_start - self.flexibility}, "
                f"{self.nominal_start + self.flexibility}] fits a {self.duration} h job "
                f"in {horizon} h"
            )
        return range(lo, hi + 1)


def schedule_job(job: TemporalJob, signal: CarbonSignal) -> int:
    """Start hour with the lowest mean CI over the job's run.

    Ties prefer the start closest to the nominal one, then the earlier start.
    """
    values = signal.values
    best = None
    for start in job.feasible_starts(len(values)):
        # window totals compare the same as means (fixed duration)
        key = (math.fsum(values[start : start + job.duration]), abs(start - job.nominal_start), start)
        if best is None or key < best:
            best = key
    return best[2]


def schedule_baseline(job: TemporalJob) -> int:
    return job.nominal_start


# --------------------------------------------------------------------------
# autoscaling


@dataclass(frozen=True, kw_only=True)
class AutoscaleJob:
    """Interruptible work that must finish between ``release`` and ``deadline``.

    ``throughput[a]`` is the work rate with ``a`` instances (``throughput[0]``
    must be 0); the default is linear, one unit of work per instance-hour.
    """

    release: int = 0
    deadline: int | None = None
    work: float = DEFAULT_WORK
    max_instances: int = DEFAULT_MAX_INSTANCES
    per_instance_power: float = 1.0  # kW
    throughput: tuple[float, ...] | None = None

    def __post_init__(self):
        if int(self.release) != self.release or self.release < 0:
            raise InvalidParameter("release must be a non-negative hour index")
        if self.deadline is None:
            object.__setattr__(self, "deadline", self.release + DEFAULT_AUTOSCALE_WINDOW)
        if int(self.deadline) != self.deadline or self.deadline <= self.release:
            raise InvalidParameter("deadline must be an hour index after release")
        if int(self.max_instances) != self.max_instances or self.max_instances < 1:
            raise InvalidParameter("max_instances must be a positive integer")
        if not math.isfinite(self.work) or self.work < 0:
            raise InvalidParameter("work must be finite and >= 0")
        if not math.isfinite(self.per_instance_power) or self.per_instance_power <= 0:
            raise InvalidParameter("per-instance power must be > 0 kW")
        if self.throughput is None:
            profile = tuple(float(a) for a in range(self.max_instances + 1))
        else:
            profile = tuple(float(x) for x in self.throughput)
        if len(profile) != self.max_instances + 1:
            raise InvalidParameter("throughput needs one entry per instance count 0..max_instances")
        if profile[0] != 0.0:
            raise InvalidParameter("throughput with zero instances must be 0")
        if any(b < a for a, b in zip(profile, profile[1:])) or not all(map(math.isfinite, profile)):
            raise InvalidParameter("throughput must be finite and non-decreasing")
        object.__setattr__(self, "throughput", profile)

    @property
    def window(self) -> int:
        return self.deadline - self.release

    @property
    def is_linear(self) -> bool:
        rate = self.throughput[1]
        return all(s == a * rate for a, s in enumerate(self.throughput))

    def covers(self, done: float) -> bool:
        return done >= self.work - WORK_TOL * max(1.0, self.work)


@dataclass(frozen=True)
class AllocationPlan:
    """Instance counts for each hour of ``[release, release + len(counts))``."""

    release: int
    counts: tuple[int, ...]

    @property
    def deadline(self) -> int:
        return self.release + len(self.counts)

    def work_done(self, job: AutoscaleJob) -> float:
        return math.fsum(job.throughput[a] for a in self.counts)

    def instance_hours(self) -> int:
        return sum(self.counts)


def _steps_needed(work: float, rate: float) -> int:
    return max(0, math.ceil(work / rate - WORK_TOL))


def autoscale(job: AutoscaleJob, signal: CarbonSignal) -> AllocationPlan:
    """Emission-minimal instance counts per hour that finish the work by the deadline."""
    if job.deadline > len(signal):
        raise SignalSpanMismatch(
            f"job window ends at hour {job.deadline} but the signal has {len(signal)} hours"
        )
    if not job.covers(job.window * job.throughput[-1]):
        raise InfeasibleDeadline(
            f"{job.work} units of work cannot finish in {job.window} h "
            f"at {job.throughput[-1]} units/h"
        )
    ci = signal.values[job.release : job.deadline]
    if job.work == 0:
        return AllocationPlan(job.release, (0,) * job.window)
    if job.is_linear:
        return _greedy_linear(job, ci)
    return _pareto_plan(job, ci)


def _greedy_linear(job: AutoscaleJob, ci: np.ndarray) -> AllocationPlan:
    # every instance-hour adds the same work, so the cheapest slots win
    left = _steps_needed(job.work, job.throughput[1])
    counts = [0] * job.window
    for t in sorted(range(job.window), key=lambda t: (ci[t], t)):
        if left <= 0:
            break
        counts[t] = min(job.max_instances, left)
        left -= counts[t]
    return AllocationPlan(job.release, tuple(counts))


def _pareto_plan(job: AutoscaleJob, ci: np.ndarray) -> AllocationPlan:
    """Exact optimum for any non-decreasing throughput profile.

    Walks the hours keeping, for each reachable amount of work (capped at the
    target), the cheapest partial plan, and drops states beaten by a state
    with more work at no more cost.
    """
    target = job.work
    states: dict[float, tuple[float, tuple[int, ...]]] = {0.0: (0.0, ())}
    for t in range(job.window):
        nxt: dict[float, tuple[float, tuple[int, ...]]] = {}
        for done, (cost, plan) in sorted(states.items()):
            for a in range(job.max_instances + 1):
                w = done + job.throughput[a]
                if job.covers(w):
                    w = target
                c = cost + a * ci[t]
                if w not in nxt or c < nxt[w][0]:
                    nxt[w] = (c, plan + (a,))
        frontier = {}
        best_cost = math.inf
        for w in sorted(nxt, reverse=True):
            if nxt[w][0] < best_cost:
                frontier[w] = nxt[w]
                best_cost = nxt[w][0]
        states = frontier
    return AllocationPlan(job.release, states[target][1])


def autoscale_baseline(job: AutoscaleJob) -> AllocationPlan:
    """One instance from release until the work is done."""
    if job.work == 0:
        return AllocationPlan(job.release, (0,) * job.window)
    rate = job.throughput[1]
    if rate <= 0:
        raise InfeasibleDeadline("a single instance makes no progress")
    n = _steps_needed(job.work, rate)
    if n > job.window:
        raise InfeasibleDeadline(
            f"a single instance needs {n} h but the window is {job.window} h"
        )
    return AllocationPlan(job.release, (1,) * n + (0,) * (job.window - n))
