"""Exhaustive reference solvers and random small instances.

Nothing here calls the optimizers under test; emissions are recomputed
from scratch with plain Python sums.
"""

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from carbonattrib.attribution import LOCATION_BASED, MARKET_BASED, CarbonSignal
from carbonattrib.optimizers import AutoscaleJob, ClientSite, DataCenter, TemporalJob


def temporal_emissions(start, job, ci):
    return job.power * math.fsum(ci[start : start + job.duration])


def temporal_brute(job, ci):
    """Lowest emissions over every feasible start."""
    lo = max(0, job.nominal_start - job.flexibility)
    hi = min(job.nominal_start + job.flexibility, len(ci) - job.duration)
    return min(temporal_emissions(s, job, ci) for s in range(lo, hi + 1))


def autoscale_emissions(counts, job, ci, release=0):
    return job.per_instance_power * math.fsum(a * ci[release + t] for t, a in enumerate(counts))


@lru_cache(maxsize=None)
def _all_counts(window, max_instances):
    return np.array(list(itertools.product(range(max_instances + 1), repeat=window)), dtype=np.int64)


def autoscale_brute(job, ci):
    """Lowest emissions over every count vector that finishes the work."""
    grid = _all_counts(job.window, job.max_instances)
    rate = np.array(job.throughput)
    done = rate[grid].sum(axis=1)
    ok = done >= job.work - 1e-9 * max(1.0, job.work)
    window_ci = np.asarray(ci[job.release : job.deadline], dtype=float)
    cost = (grid[ok] * window_ci).sum(axis=1) * job.per_instance_power
    return float(cost.min())


def routing_emissions(choice, sites, dcs, signals):
    by_id = {dc.dc_id: dc for dc in dcs}
    total = []
    for (t, site_id), dc_id in choice.items():
        site = next(s for s in sites if s.site_id == site_id)
        dc = by_id[dc_id]
        total.append(site.hourly_requests[t] * dc.per_request_energy * signals[dc.region_id].values[t])
    return math.fsum(total)


def routing_brute(sites, dcs, signals, latency_cap=None):
    """Lowest emissions over every joint (hour, site) -> data center choice."""
    pairs = [(t, s) for s in sites for t in range(s.hours)]
    options = []
    for t, s in pairs:
        row = []
        for dc in dcs:
            if latency_cap is not None and s.distance[dc.dc_id] > latency_cap:
                continue
            row.append(s.hourly_requests[t] * dc.per_request_energy * signals[dc.region_id].values[t])
        options.append(row)
    best = math.inf
    for combo in itertools.product(*options):
        best = min(best, math.fsum(combo))
    return best


# --------------------------------------------------------------------------
# random instances with integer data, so every emissions total is exact


@dataclass
class Instance:
    kind: str
    lb: dict  # region -> CarbonSignal
    mb: dict
    job: object = None
    sites: tuple = ()
    dcs: tuple = ()


def _signals(rng, regions, hours):
    lb, mb = {}, {}
    for r in regions:
        lb[r] = CarbonSignal(r, LOCATION_BASED, rng.integers(0, 30, hours).astype(float))
        mb[r] = CarbonSignal(r, MARKET_BASED, rng.integers(0, 30, hours).astype(float), f=0.0)
    return lb, mb


def random_temporal(rng):
    hours = int(rng.integers(1, 9))
    duration = int(rng.integers(1, hours + 1))
    job = TemporalJob(
        duration=duration,
        nominal_start=int(rng.integers(0, hours - duration + 1)),
        flexibility=int(rng.integers(0, hours + 1)),
        power=float(rng.integers(1, 4)),
    )
    lb, mb = _signals(rng, ["A"], hours)
    return Instance("temporal", lb, mb, job=job)


def random_autoscale(rng):
    window = int(rng.integers(1, 9))
    m = int(rng.integers(1, 4))
    if rng.random() < 0.5:
        profile = None
        rate1 = 1.0
        top = float(m)
    else:
        steps = rng.choice([0.0, 0.5, 1.0, 1.5, 2.0], size=m)
        steps[0] = max(steps[0], 0.5)
        profile = tuple(np.concatenate([[0.0], np.cumsum(steps)]))
        rate1 = profile[1]
        top = profile[-1]
    # keep the single-instance baseline feasible
    limit = min(window * rate1, window * top)
    work = float(rng.integers(0, int(2 * limit) + 1)) / 2
    job = AutoscaleJob(
        release=0,
        deadline=window,
        work=work,
        max_instances=m,
        per_instance_power=float(rng.integers(1, 3)),
        throughput=profile,
    )
    lb, mb = _signals(rng, ["A"], window)
    return Instance("autoscale", lb, mb, job=job)


def random_routing(rng):
    n_dc = int(rng.integers(2, 4))
    n_sites = int(rng.integers(1, 3))
    hours = int(rng.integers(1, 8 // n_sites + 1))
    regions = [f"R{i}" for i in range(n_dc)]
    dcs = tuple(
        DataCenter(f"dc{i}", regions[i], float(rng.integers(1, 4))) for i in range(n_dc)
    )
    sites = tuple(
        ClientSite(
            f"s{j}",
            {dc.dc_id: float(rng.integers(0, 5000)) for dc in dcs},
            rng.integers(0, 6, hours).astype(float),
        )
        for j in range(n_sites)
    )
    lb, mb = _signals(rng, regions, hours)
    return Instance("spatial", lb, mb, sites=sites, dcs=dcs)


GENERATORS = {"temporal": random_temporal, "autoscale": random_autoscale, "spatial": random_routing}


def random_instances(n, seed):
    rng = np.random.default_rng(seed)
    kinds = list(GENERATORS)
    return [GENERATORS[kinds[i % 3]](rng) for i in range(n)]
