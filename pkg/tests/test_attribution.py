import math
from datetime import datetime, timezone

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from carbonattrib.attribution import (
    CarbonSignal,
    ci_lb,
    ci_mb,
    ci_res,
    divergence,
    residual_mix,
    signal_set,
)
from carbonattrib.errors import (
    DegenerateResidualHour,
    EmptyAfterExclusion,
    InvalidParameter,
    WrongInputMethod,
    ZeroTotalGeneration,
)
from carbonattrib.grid import DEFAULT_SOURCES, EnergySource, GenerationSeries, PpaPortfolio

# exact values from a Fraction-based hand computation, p = 0.5 on solar and wind
SMALL = GenerationSeries(
    "S",
    {"coal": [1, 2, 0], "gas": [1, 0, 3], "solar": [0, 4, 1], "wind": [2, 2, 0]},
)
SMALL_LB = [282.5, 190.0, 277.5]
SMALL_RES = [1130 / 3, 304.0, 2220 / 7]


def loop_ci(gen, cef, share):
    """Plain per-hour summation, kept independent of the numpy code."""
    hours = len(next(iter(gen.values())))
    out = []
    for t in range(hours):
        kept = {s: gen[s][t] - share.get(s, 0.0) * gen[s][t] for s in gen}
        num = math.fsum(cef[s] * kept[s] for s in gen)
        den = math.fsum(kept.values())
        out.append(num / den)
    return out


def test_small_fixture_values():
    assert ci_lb(SMALL).values.tolist() == pytest.approx(SMALL_LB, rel=1e-12)
    res = ci_res(SMALL, PpaPortfolio.uniform(0.5, None))
    assert res.values.tolist() == pytest.approx(SMALL_RES, rel=1e-12)
    assert res.label == "res"
    mb = ci_mb(res, 0.25)
    assert mb.values.tolist() == pytest.approx([0.75 * v for v in SMALL_RES], rel=1e-12)
    assert mb.label == "mb(0.25)"


def test_small_fixture_divergence():
    d = divergence(SMALL, PpaPortfolio.uniform(0.5, None))
    row = d.row("all")
    assert row["n_hours"] == 3
    assert row["mean_increase_pct"] == pytest.approx((100 / 3 + 60 + 100 / 7) / 3, rel=1e-12)
    assert row["median_increase_pct"] == pytest.approx(100 / 3, rel=1e-12)
    assert row["max_increase_pct"] == pytest.approx(60.0, rel=1e-12)
    gaps = [r - l for r, l in zip(SMALL_RES, SMALL_LB)]
    assert row["mean_gap_g_per_kwh"] == pytest.approx(sum(gaps) / 3, rel=1e-12)


gen_strategy = st.lists(
    st.tuples(*[st.floats(0, 1e5, allow_nan=False) for _ in range(4)]),
    min_size=1,
    max_size=24,
).filter(lambda rows: all(sum(r) > 1e-3 for r in rows))


def _series(rows):
    cols = list(zip(*rows))
    return GenerationSeries("H", dict(zip(("coal", "gas", "solar", "wind"), cols)))


@given(rows=gen_strategy, p=st.floats(0, 1))
@settings(max_examples=150, deadline=None)
def test_matches_summation_oracle(rows, p):
    series = _series(rows)
    cef = {k: v.cef for k, v in DEFAULT_SOURCES.items()}
    gen = {s: list(series.per_source[s]) for s in series.sources}
    np.testing.assert_allclose(ci_lb(series).values, loop_ci(gen, cef, {}), rtol=1e-9)
    res = ci_res(series, PpaPortfolio.uniform(p, None), degenerate_policy="clamp_zero")
    ok = [t for t in range(series.hours) if t not in res.degenerate_hours]
    want = loop_ci({s: [gen[s][t] for t in ok] for s in gen}, cef, {"solar": p, "wind": p})
    np.testing.assert_allclose(res.values[ok], want, rtol=1e-9, atol=1e-9)


@given(rows=gen_strategy, f=st.floats(0, 1))
@settings(max_examples=100, deadline=None)
def test_mb_scales_residual(rows, f):
    res = ci_res(_series(rows), PpaPortfolio.uniform(1.0, None), degenerate_policy="clamp_zero")
    mb = ci_mb(res, f)
    np.testing.assert_allclose(mb.values, (1 - f) * res.values, rtol=1e-12)
    assert mb.degenerate_hours == res.degenerate_hours


@given(rows=gen_strategy)
@settings(max_examples=100, deadline=None)
def test_ci_bounded_by_cef_range(rows):
    values = ci_lb(_series(rows)).values
    assert np.all(values >= 0) and np.all(values <= 760 * (1 + 1e-12))


def test_empty_portfolio_residual_equals_lb():
    res = ci_res(SMALL, PpaPortfolio())
    assert np.array_equal(res.values, ci_lb(SMALL).values)


def test_residual_mix_removes_contracted_share():
    mix = residual_mix(SMALL, PpaPortfolio({"solar": 1.0, "wind": 0.5}))
    assert mix.per_source["solar"].tolist() == [0, 0, 0]
    assert mix.per_source["wind"].tolist() == [1, 1, 0]
    assert mix.per_source["coal"].tolist() == [1, 2, 0]


def test_zero_total_generation():
    s = GenerationSeries("Z", {"coal": [1.0, 0.0], "solar": [1.0, 0.0]})
    with pytest.raises(ZeroTotalGeneration) as info:
        ci_lb(s)
    assert info.value.hour == 1


def test_degenerate_policies():
    s = GenerationSeries("D", {"coal": [1.0, 0.0], "solar": [1.0, 2.0]})
    full = PpaPortfolio.uniform(1.0, None)
    with pytest.raises(DegenerateResidualHour) as info:
        ci_res(s, full)
    assert (info.value.hour, info.value.region_id) == (1, "D")
    res = ci_res(s, full, degenerate_policy="clamp_zero")
    assert res.values.tolist() == [760.0, 0.0]
    assert res.degenerate_hours == (1,)
    with pytest.raises(InvalidParameter):
        ci_res(s, full, degenerate_policy="ignore")


def test_degenerate_threshold_is_tiny():
    # 1e-6 MWh of residual is still a real mix
    s = GenerationSeries("D", {"coal": [1e-6], "solar": [5.0]})
    assert ci_res(s, PpaPortfolio.uniform(1.0, None)).values.tolist() == [760.0]


def test_mb_requires_residual_input():
    with pytest.raises(WrongInputMethod):
        ci_mb(ci_lb(SMALL), 0.5)


def test_signal_validation():
    with pytest.raises(InvalidParameter):
        CarbonSignal("R", "market_based", [1.0])
    with pytest.raises(InvalidParameter):
        CarbonSignal("R", "location_based", [1.0], f=0.2)
    with pytest.raises(InvalidParameter):
        CarbonSignal("R", "location_based", [-1.0])
    with pytest.raises(InvalidParameter):
        CarbonSignal("R", "bogus", [1.0])


def test_custom_sources_and_hydro_not_contracted():
    sources = dict(DEFAULT_SOURCES)
    sources["nuclear"] = EnergySource("nuclear", 12.0)
    s = GenerationSeries("N", {"nuclear": [2.0], "hydro": [2.0], "solar": [4.0]})
    assert ci_lb(s, sources).values.tolist() == [3.0]
    res = ci_res(s, PpaPortfolio.uniform(1.0, sources), sources)
    assert res.values.tolist() == [6.0]


def test_divergence_groupings():
    start = datetime(2022, 1, 31, 22, tzinfo=timezone.utc)
    a = GenerationSeries("A", {"coal": [1.0] * 4, "solar": [0.0, 1.0, 1.0, 0.0]}, start)
    b = GenerationSeries("B", {"gas": [1.0] * 4, "wind": [1.0] * 4}, start)
    ppa = PpaPortfolio.uniform(0.5, None)
    by_hour = divergence([a, b], ppa, "hour_of_day")
    assert by_hour.keys == (0, 1, 22, 23)
    assert by_hour.n_hours == (2, 2, 2, 2)
    by_month = divergence([a, b], ppa, "month")
    assert by_month.keys == (1, 2)
    by_region = divergence([a, b], ppa, "region")
    assert by_region.keys == ("A", "B")
    # coal-only hours have no gap
    assert by_region.row("A")["n_hours"] == 4
    assert by_region.row("B")["mean_increase_pct"] == pytest.approx(100 * (370 / 1.5 - 185) / 185)


def test_divergence_exclusions():
    s = GenerationSeries("X", {"coal": [0.0, 0.0, 1.0], "solar": [1.0, 0.0, 1.0], "hydro": [0.0, 1.0, 0.0]})
    d = divergence(s, PpaPortfolio.uniform(1.0, None))
    # hour 0 has no residual, hour 1 has zero CI_lb
    assert (d.excluded_degenerate, d.excluded_zero_lb) == (1, 1)
    assert d.n_hours == (1,)
    with pytest.raises(EmptyAfterExclusion):
        divergence(s.window(0, 2), PpaPortfolio.uniform(1.0, None))
    with pytest.raises(InvalidParameter):
        divergence(s, PpaPortfolio(), "weekday")


def test_signal_set_keys():
    sigs = signal_set(SMALL, 0.5, 0.2)
    assert [sigs[k].label for k in ("lb", "res", "mb")] == ["lb", "res", "mb(0.2)"]
