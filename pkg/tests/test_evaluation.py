import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from carbonattrib.attribution import CarbonSignal
from carbonattrib.errors import (
    EmptyInput,
    InvalidParameter,
    MismatchedScenarios,
    SignalSpanMismatch,
    ZeroBaselineEmissions,
)
from carbonattrib.evaluation import (
    AutoscaleInputs,
    EmissionsReport,
    SpatialInputs,
    TemporalInputs,
    daily_discrepancies,
    discrepancy,
    evaluate,
    per_region_cdfs,
    ppa_sweep,
    region_cdf,
    run_scenario,
    savings_pct,
    scenario_matrix,
    split_by_day,
)
from carbonattrib.grid import GenerationSeries
from carbonattrib.optimizers import (
    AllocationPlan,
    AutoscaleJob,
    ClientSite,
    DataCenter,
    TemporalJob,
)

from test_acceptance import sign_flip_inputs


def sig(values):
    return CarbonSignal("A", "location_based", values)


def test_evaluate_temporal_and_autoscale():
    job = TemporalJob(duration=2, power=3.0)
    report = evaluate(1, sig([1, 2, 4, 8]), job)
    assert report.total_g == 18.0 and report.total_kwh == 6.0
    assert report.per_hour_g == (0.0, 6.0, 12.0, 0.0)
    assert report.per_kwh == 3.0
    auto = AutoscaleJob(release=1, deadline=3, work=1, per_instance_power=2.0)
    assert evaluate(AllocationPlan(1, (2, 1)), sig([9, 1, 3]), auto).total_g == 10.0
    with pytest.raises(SignalSpanMismatch):
        evaluate(3, sig([1, 2, 4, 8]), job)
    with pytest.raises(TypeError):
        evaluate("x", sig([1]), job)


def test_evaluate_routing_sums_over_dcs():
    from carbonattrib.optimizers import route_baseline

    dcs = (DataCenter("a", "A", 2.0), DataCenter("b", "B", 1.0))
    sites = (ClientSite("s", {"a": 1, "b": 2}, [3, 4]), ClientSite("t", {"a": 9, "b": 2}, [1, 1]))
    plan = route_baseline(sites, dcs)
    signals = {"A": CarbonSignal("A", "location_based", [10, 20]), "B": CarbonSignal("B", "location_based", [5, 5])}
    report = evaluate(plan, signals, dcs)
    assert report.total_g == 3 * 2 * 10 + 4 * 2 * 20 + 1 * 5 + 1 * 5
    assert report.total_kwh == 16.0


def test_report_addition():
    a = EmissionsReport(1.0, 2.0, (1.0,))
    b = EmissionsReport(3.0, 1.0, (1.0, 2.0))
    c = a + b
    assert (c.total_g, c.total_kwh, c.per_hour_g) == (4.0, 3.0, (2.0, 2.0))
    assert EmissionsReport(0.0, 0.0).per_kwh == 0.0


def test_savings_pct_edge_cases():
    assert savings_pct(200.0, 50.0) == 75.0
    assert savings_pct(100.0, 150.0) == -50.0
    assert savings_pct(0.0, 0.0) == 0.0
    with pytest.raises(ZeroBaselineEmissions):
        savings_pct(0.0, 1.0)


def test_sign_flip_scenarios():
    inputs = sign_flip_inputs()
    m = scenario_matrix("temporal", inputs, 1.0)
    assert [c.cell for c in m.cells] == ["opt_lb_eval_lb", "opt_lb_eval_mb", "opt_mb_eval_mb"]
    assert m.lb_lb.decision == (1,) and m.mb_mb.decision == (0,)
    assert m.mb_mb.savings_pct == 0.0
    # no PPAs: market-based equals location-based
    m0 = scenario_matrix("temporal", inputs, 0.0)
    assert m0.mb_mb.savings_pct == 50.0
    assert m0.discrepancy().discrepancy_pp == 0.0
    # the consumer's own PPA share scales everything and leaves savings alone
    mf = scenario_matrix("temporal", inputs, 1.0, consumer_f=0.5)
    assert mf.lb_mb.savings_pct == -100.0
    assert mf.lb_mb.optimized.total_g == 100.0


def test_run_scenario_matches_matrix_cell():
    inputs = sign_flip_inputs()
    r = run_scenario("temporal", inputs, 1.0, "lb", "mb")
    assert r.savings_pct == -100.0
    assert r.to_dict()["opt_method"] == "lb"
    with pytest.raises(InvalidParameter):
        run_scenario("temporal", inputs, 1.0, "res", "mb")
    with pytest.raises(InvalidParameter):
        run_scenario("spatial", inputs, 1.0, "lb", "lb")


def test_discrepancy_requires_matching_cells():
    inputs = sign_flip_inputs()
    a = run_scenario("temporal", inputs, 1.0, "lb", "lb")
    b = run_scenario("temporal", inputs, 1.0, "lb", "mb")
    assert discrepancy(a, b).discrepancy_pp == 150.0
    with pytest.raises(MismatchedScenarios):
        discrepancy(b, a)
    c = run_scenario("temporal", inputs, 0.5, "lb", "mb")
    with pytest.raises(MismatchedScenarios):
        discrepancy(a, c)


def test_ppa_sweep_rows():
    table = ppa_sweep("temporal", sign_flip_inputs())
    assert table.fractions == (0.0, 0.25, 0.5, 0.75, 1.0)
    assert all(r["opt_lb_eval_lb"] == 50.0 for r in table.as_rows())
    region, lb_savings, mb_savings = table.table_row()
    assert (region, lb_savings) == ("flip", 50.0)
    assert len(mb_savings) == 4 and mb_savings[-1] == 0.0


def _two_day_series():
    coal = np.full(48, 10.0)
    solar = np.tile(np.r_[np.zeros(8), np.full(8, 20.0), np.zeros(8)], 2)
    return GenerationSeries("R", {"coal": coal, "solar": solar})


def test_split_by_day_temporal_and_autoscale():
    series = _two_day_series()
    t_inputs = TemporalInputs(tuple(TemporalJob(duration=1, nominal_start=24 * d + 1) for d in range(2)), series)
    parts = split_by_day("temporal", t_inputs)
    assert [label for label, _ in parts] == ["day0", "day1"]
    assert all(len(p.jobs) == 1 for _, p in parts)
    a_inputs = AutoscaleInputs((AutoscaleJob(release=24, deadline=48, work=4),), series)
    assert [label for label, _ in split_by_day("autoscale", a_inputs)] == ["day1"]
    records = daily_discrepancies("temporal", t_inputs, 1.0)
    assert [r.label for r in records] == ["day0", "day1"]


def test_split_by_day_spatial():
    series = {"R": _two_day_series()}
    inputs = SpatialInputs((ClientSite("s", {"dc": 0}, [1.0] * 48),), (DataCenter("dc", "R"),), series)
    parts = split_by_day("spatial", inputs)
    assert len(parts) == 2
    assert parts[1][1].sites[0].hours == 24
    assert parts[1][1].regions()["R"].hours == 24


def test_region_cdf_merges_ties():
    cdf = region_cdf([3.0, 1.0, 3.0, 2.0], "x")
    assert cdf.points == ((1.0, 0.25), (2.0, 0.5), (3.0, 1.0))
    assert (cdf.mean, cdf.max, cdf.n) == (2.25, 3.0, 4)
    with pytest.raises(EmptyInput):
        region_cdf([])


@given(st.lists(st.floats(-500, 500), min_size=1, max_size=50))
@settings(max_examples=150, deadline=None)
def test_cdf_properties(values):
    cdf = region_cdf(values)
    xs = [x for x, _ in cdf.points]
    fs = [f for _, f in cdf.points]
    assert xs == sorted(set(xs))
    assert all(a < b for a, b in zip(fs, fs[1:]))
    assert fs[-1] == 1.0
    assert cdf.max == max(values)
    assert math.isclose(cdf.mean, math.fsum(values) / len(values), abs_tol=1e-9)


def test_per_region_cdfs_mean_and_max():
    from carbonattrib.evaluation import DiscrepancyRecord

    recs = [
        DiscrepancyRecord("A", 1.0, 10.0, 0, 0),
        DiscrepancyRecord("A", 1.0, 30.0, 0, 0),
        DiscrepancyRecord("B", 1.0, 5.0, 0, 0),
    ]
    cdfs = per_region_cdfs(recs)
    assert cdfs["per_region_mean"].points == ((5.0, 0.5), (20.0, 1.0))
    assert cdfs["per_region_max"].points == ((5.0, 0.5), (30.0, 1.0))
    with pytest.raises(EmptyInput):
        per_region_cdfs([])
