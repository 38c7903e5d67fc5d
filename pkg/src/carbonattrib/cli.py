"""Command-line front end.

Every subcommand renders all of its output in memory first and only then
writes files (each via temp file + rename), so a failed run leaves nothing
behind. Exit codes: 0 success, 1 data error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import dataio
from .attribution import DEGENERATE_POLICIES, GROUPINGS, ci_lb, ci_mb, ci_res, divergence
from .errors import CarbonAttribError, IoError, ParseError
from .evaluation import (
    DEFAULT_FRACTIONS,
    TECHNIQUES,
    AutoscaleInputs,
    SpatialInputs,
    TemporalInputs,
    daily_discrepancies,
    per_region_cdfs,
    ppa_sweep,
    scenario_matrix,
)
from .grid import DEFAULT_SOURCES, ConsumerProfile, PpaPortfolio
from .optimizers import (
    DEFAULT_ALPHA,
    DEFAULT_AUTOSCALE_WINDOW,
    DEFAULT_FLEXIBILITY,
    DEFAULT_MAX_INSTANCES,
    DEFAULT_NOMINAL_HOUR,
    DEFAULT_WORK,
    AutoscaleJob,
    ClientSite,
    DataCenter,
    TemporalJob,
)

OUT_ENV = "CARBONATTRIB_OUT"


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    subcommand: str
    generation: list[str] = field(default_factory=list)
    cef: str | None = None
    spatial: str | None = None
    out: str = "out"
    fmt: str = "csv"
    region: str | None = None
    technique: str = "temporal"
    ppa: float = 1.0
    fractions: tuple[float, ...] = DEFAULT_FRACTIONS
    consumer_f: float = 0.0
    degenerate: str = "error"
    grouping: str = "overall"
    alpha: float = DEFAULT_ALPHA
    latency_cap: float | None = None
    nominal: int = DEFAULT_NOMINAL_HOUR
    flex: int = DEFAULT_FLEXIBILITY
    duration: int = 1
    power: float = 1.0
    work: float = DEFAULT_WORK
    max_instances: int = DEFAULT_MAX_INSTANCES
    window: int = DEFAULT_AUTOSCALE_WINDOW
    release_hour: int = 0
    preset: str | None = None
    regions: int = 0
    days: int = 7
    seed: int = 0

    @classmethod
    def from_namespace(cls, ns: argparse.Namespace) -> "RunConfig":
        known = {f for f in cls.__dataclass_fields__}
        values = {k: v for k, v in vars(ns).items() if k in known and v is not None}
        cfg = cls(**values)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        def unit(name, value):
            if not math.isfinite(value) or not 0.0 <= value <= 1.0:
                raise UsageError(f"--{name.replace('_', '-')} must lie in [0, 1], got {value}")

        unit("ppa", self.ppa)
        unit("consumer_f", self.consumer_f)
        unit("alpha", self.alpha)
        for p in self.fractions:
            unit("fractions", p)
        if not self.fractions:
            raise UsageError("--fractions needs at least one value")
        if self.latency_cap is not None and not self.latency_cap >= 0:
            raise UsageError("--latency-cap must be >= 0")
        if not 0 <= self.nominal <= 23 or not 0 <= self.release_hour <= 23:
            raise UsageError("--nominal and --release-hour are hours of day (0-23)")
        for name in ("flex", "regions"):
            if getattr(self, name) < 0:
                raise UsageError(f"--{name} must be >= 0")
        for name in ("duration", "max_instances", "window", "days"):
            if getattr(self, name) < 1:
                raise UsageError(f"--{name.replace('_', '-')} must be >= 1")
        if not self.power > 0 or not math.isfinite(self.power):
            raise UsageError("--power must be > 0")
        if not self.work >= 0 or not math.isfinite(self.work):
            raise UsageError("--work must be >= 0")
        if not 0 <= self.seed < 2**64:
            raise UsageError("--seed must fit in 64 unsigned bits")


# --------------------------------------------------------------------------
# argument parsing


def _fractions(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}")


def _data_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--generation", nargs="+", metavar="CSV",
                   help="generation CSV file(s), rows timestamp,region,source,generation_mwh "
                        "(MWh per hour); default: bundled CAISO-like and ERCOT-like fixtures")
    p.add_argument("--cef", metavar="CSV",
                   help="source table CSV source,cef_g_per_kwh,renewable,ppa_eligible "
                        "(g CO2-eq/kWh); default: coal 760, gas 370, renewables 0")
    p.add_argument("--degenerate", choices=DEGENERATE_POLICIES,
                   help="hours with no residual generation: fail (error, default) or use 0 g/kWh")
    p.add_argument("--consumer-f", type=float, dest="consumer_f",
                   help="share of the consumer's demand met by its own PPAs (fraction 0-1, default 0)")


def _out_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", metavar="DIR",
                   help=f"output directory (default: ${OUT_ENV} or ./out)")
    p.add_argument("--format", dest="fmt", choices=("csv", "json"),
                   help="report format (default csv)")


def _technique_flags(p: argparse.ArgumentParser, which: set[str]) -> None:
    p.add_argument("--region", help="only this region (temporal/autoscale; default: every region)")
    if "spatial" in which:
        p.add_argument("--spatial", metavar="JSON",
                       help="data centers and client sites (distances in km, energy in kWh/request); "
                            "default: bundled two-region example")
        p.add_argument("--alpha", type=float,
                       help=f"weight of carbon vs distance in the routing score (0-1, default {DEFAULT_ALPHA})")
        p.add_argument("--latency-cap", type=float, dest="latency_cap",
                       help="maximum client-to-data-center distance (km, default: none)")
    if "temporal" in which:
        p.add_argument("--nominal", type=int,
                       help=f"daily nominal job start (hour of day 0-23, default {DEFAULT_NOMINAL_HOUR})")
        p.add_argument("--flex", type=int,
                       help=f"start flexibility either side of nominal (hours, default {DEFAULT_FLEXIBILITY})")
        p.add_argument("--duration", type=int, help="job run time (hours, default 1)")
    if "autoscale" in which:
        p.add_argument("--work", type=float,
                       help=f"work per job (instance-hours, default {DEFAULT_WORK:g})")
        p.add_argument("--max-instances", type=int, dest="max_instances",
                       help=f"instance cap (count, default {DEFAULT_MAX_INSTANCES})")
        p.add_argument("--window", type=int,
                       help=f"release-to-deadline span (hours, default {DEFAULT_AUTOSCALE_WINDOW})")
        p.add_argument("--release-hour", type=int, dest="release_hour",
                       help="daily job release (hour of day 0-23, default 0)")
    if which & {"temporal", "autoscale"}:
        p.add_argument("--power", type=float,
                       help="job power draw, per instance for autoscale (kW, default 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="carbonattrib",
        description="Location- vs market-based carbon intensity and carbon-aware optimization.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("ci", help="emit CI_lb, CI_res and CI_mb series")
    _data_flags(p)
    p.add_argument("--ppa", type=float,
                   help="contracted share of every solar and wind source (fraction 0-1, default 1)")
    _out_flags(p)

    p = sub.add_parser("divergence", help="CI_res vs CI_lb increase statistics")
    _data_flags(p)
    p.add_argument("--ppa", type=float, help="contracted solar/wind share (fraction 0-1, default 1)")
    p.add_argument("--grouping", choices=GROUPINGS, help="statistics per group (default overall)")
    _out_flags(p)

    for name, tech, blurb in (
        ("route", "spatial", "carbon-aware request routing"),
        ("schedule", "temporal", "carbon-aware job start shifting"),
        ("autoscale", "autoscale", "carbon-aware autoscaling"),
    ):
        p = sub.add_parser(name, help=f"scenario matrix for {blurb}")
        _data_flags(p)
        p.add_argument("--ppa", type=float, help="contracted solar/wind share (fraction 0-1, default 1)")
        _technique_flags(p, {tech})
        _out_flags(p)
        p.set_defaults(technique=tech)

    p = sub.add_parser("sweep", help="savings per scenario cell across PPA fractions")
    _data_flags(p)
    p.add_argument("--technique", choices=TECHNIQUES, help="optimizer to sweep (default temporal)")
    p.add_argument("--fractions", type=_fractions,
                   help="comma-separated PPA fractions (0-1, default 0,0.25,0.5,0.75,1)")
    _technique_flags(p, set(TECHNIQUES))
    _out_flags(p)

    p = sub.add_parser("cdf", help="CDF across regions of per-day discrepancies")
    _data_flags(p)
    p.add_argument("--technique", choices=TECHNIQUES, help="optimizer (default temporal)")
    p.add_argument("--ppa", type=float, help="contracted solar/wind share (fraction 0-1, default 1)")
    _technique_flags(p, set(TECHNIQUES))
    _out_flags(p)

    p = sub.add_parser("synth", help="write seeded synthetic generation CSVs")
    p.add_argument("--preset", choices=sorted(dataio.BUNDLED_SPECS) + ["all"],
                   help="regenerate a bundled fixture (7 days, MWh per hour)")
    p.add_argument("--regions", type=int, help="number of random regions to generate (count)")
    p.add_argument("--days", type=int, help="length of random regions (days, default 7)")
    p.add_argument("--seed", type=int, help="seed for random regions (64-bit integer, default 0)")
    _out_flags(p)
    return parser


# --------------------------------------------------------------------------
# commands


def _sources(cfg: RunConfig):
    return dataio.load_cef_csv(cfg.cef) if cfg.cef else dict(DEFAULT_SOURCES)


def _series(cfg: RunConfig, sources):
    if cfg.generation:
        return dataio.load_generation_files(cfg.generation, sources)
    return dataio.load_generation_files(
        [dataio.bundled_path(f"{k}.csv") for k in dataio.BUNDLED_SPECS], sources
    )


def _pick_regions(cfg: RunConfig, series_map):
    if cfg.region is None:
        return series_map
    if cfg.region not in series_map:
        raise ParseError(0, f"region {cfg.region!r} not in the generation data")
    return {cfg.region: series_map[cfg.region]}


def load_spatial_config(path, hours: int) -> tuple[tuple[ClientSite, ...], tuple[DataCenter, ...]]:
    """Read data centers and client sites from JSON.

    Each site gives either ``hourly_requests`` (one count per hour) or a
    constant ``requests_per_hour``.
    """
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from None
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ParseError(0, f"{path}: invalid JSON ({exc})") from None
    try:
        dcs = tuple(
            DataCenter(d["dc_id"], d["region_id"], d.get("per_request_energy_kwh", 1.0))
            for d in doc["datacenters"]
        )
        sites = []
        for s in doc["sites"]:
            if "hourly_requests" in s:
                reqs = s["hourly_requests"]
            else:
                reqs = [s["requests_per_hour"]] * hours
            sites.append(ClientSite(s["site_id"], s["distance_km"], reqs))
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(0, f"{path}: malformed spatial config ({exc!r})") from None
    return tuple(sites), dcs


def _inputs(cfg: RunConfig, technique: str, series_map, sources) -> list:
    """One inputs object per region (spatial: one for the whole map)."""
    if technique == "spatial":
        hours = min(s.hours for s in series_map.values())
        path = cfg.spatial or dataio.bundled_path("spatial_example.json")
        sites, dcs = load_spatial_config(path, hours)
        return [SpatialInputs(sites, dcs, series_map, cfg.alpha, cfg.latency_cap, sources)]
    out = []
    for region, series in _pick_regions(cfg, series_map).items():
        days = series.hours // 24
        if technique == "temporal":
            jobs = tuple(
                TemporalJob(duration=cfg.duration, nominal_start=24 * d + cfg.nominal,
                            flexibility=cfg.flex, power=cfg.power)
                for d in range(days)
                if 24 * d + cfg.nominal + cfg.duration <= series.hours
            )
            out.append(TemporalInputs(jobs, series, sources))
        else:
            jobs = tuple(
                AutoscaleJob(release=24 * d + cfg.release_hour,
                             deadline=24 * d + cfg.release_hour + cfg.window,
                             work=cfg.work, max_instances=cfg.max_instances,
                             per_instance_power=cfg.power)
                for d in range(days)
                if 24 * d + cfg.release_hour + cfg.window <= series.hours
            )
            out.append(AutoscaleInputs(jobs, series, sources))
    return out


def _decision_rows(technique: str, matrix) -> list[dict]:
    lb, mb, base = matrix.lb_lb.decision, matrix.mb_mb.decision, matrix.lb_lb.baseline_decision
    region = matrix.region_id
    if technique == "spatial":
        by = {k: d.requests_by_dc() for k, d in (("lb", lb), ("mb", mb), ("baseline", base))}
        dcs = sorted(set().union(*(v.keys() for v in by.values())))
        rows = []
        for t in range(lb.hours):
            for dc in dcs:
                row = {"hour": t, "dc_id": dc}
                for k in ("baseline", "lb", "mb"):
                    arr = by[k].get(dc)
                    row[f"requests_{k}"] = float(arr[t]) if arr is not None else 0.0
                rows.append(row)
        return rows
    if technique == "temporal":
        return [
            {"region_id": region, "job": i, "start_baseline": b, "start_opt_lb": x, "start_opt_mb": y}
            for i, (b, x, y) in enumerate(zip(base, lb, mb))
        ]
    rows = []
    for i, (b, x, y) in enumerate(zip(base, lb, mb)):
        for k, (cb, cx, cy) in enumerate(zip(b.counts, x.counts, y.counts)):
            rows.append({"region_id": region, "job": i, "hour": b.release + k,
                         "instances_baseline": cb, "instances_opt_lb": cx, "instances_opt_mb": cy})
    return rows


def cmd_ci(cfg: RunConfig) -> dict[str, str]:
    sources = _sources(cfg)
    series_map = _series(cfg, sources)
    ppa = PpaPortfolio.uniform(cfg.ppa, sources)
    lb, res, mb = [], [], []
    for series in series_map.values():
        lb.append(ci_lb(series, sources))
        res.append(ci_res(series, ppa, sources, cfg.degenerate))
        mb.append(ci_mb(res[-1], ConsumerProfile(cfg.consumer_f)))
    return {
        f"ci_lb.{cfg.fmt}": dataio.render_report(lb, cfg.fmt),
        f"ci_res.{cfg.fmt}": dataio.render_report(res, cfg.fmt),
        f"ci_mb.{cfg.fmt}": dataio.render_report(mb, cfg.fmt),
    }


def cmd_divergence(cfg: RunConfig) -> dict[str, str]:
    sources = _sources(cfg)
    series_map = _series(cfg, sources)
    summary = divergence(list(series_map.values()), PpaPortfolio.uniform(cfg.ppa, sources),
                         cfg.grouping, sources)
    rows = [
        dict(row, excluded_degenerate=summary.excluded_degenerate,
             excluded_zero_lb=summary.excluded_zero_lb)
        for row in summary.rows()
    ]
    return {f"divergence.{cfg.fmt}": dataio.render_report(rows, cfg.fmt)}


def cmd_matrix(cfg: RunConfig) -> dict[str, str]:
    sources = _sources(cfg)
    series_map = _series(cfg, sources)
    matrices = [
        scenario_matrix(cfg.technique, inputs, cfg.ppa, cfg.consumer_f, cfg.degenerate)
        for inputs in _inputs(cfg, cfg.technique, series_map, sources)
    ]
    decisions = [row for m in matrices for row in _decision_rows(cfg.technique, m)]
    return {
        f"scenarios.{cfg.fmt}": dataio.render_report(matrices, cfg.fmt),
        f"discrepancy.{cfg.fmt}": dataio.render_report([m.discrepancy() for m in matrices], cfg.fmt),
        f"decisions.{cfg.fmt}": dataio.render_report(decisions, cfg.fmt),
    }


def cmd_sweep(cfg: RunConfig) -> dict[str, str]:
    sources = _sources(cfg)
    series_map = _series(cfg, sources)
    tables = [
        ppa_sweep(cfg.technique, inputs, cfg.fractions, cfg.consumer_f, cfg.degenerate)
        for inputs in _inputs(cfg, cfg.technique, series_map, sources)
    ]
    return {f"sweep.{cfg.fmt}": dataio.render_report(tables, cfg.fmt)}


def cmd_cdf(cfg: RunConfig) -> dict[str, str]:
    sources = _sources(cfg)
    series_map = _series(cfg, sources)
    records = []
    for inputs in _inputs(cfg, cfg.technique, series_map, sources):
        records.extend(
            daily_discrepancies(cfg.technique, inputs, cfg.ppa, cfg.consumer_f, cfg.degenerate)
        )
    cdfs = per_region_cdfs(records)
    files = {f"discrepancies.{cfg.fmt}": dataio.render_report(records, cfg.fmt)}
    for label, cdf in cdfs.items():
        files[f"cdf_{label}.{cfg.fmt}"] = dataio.render_report(cdf, cfg.fmt)
    return files


def cmd_synth(cfg: RunConfig) -> dict[str, str]:
    files = {}
    if cfg.preset is None and cfg.regions == 0:
        raise UsageError("synth needs --preset or --regions")
    if cfg.preset:
        names = sorted(dataio.BUNDLED_SPECS) if cfg.preset == "all" else [cfg.preset]
        for name in names:
            series = dataio.synth_generate(dataio.BUNDLED_SPECS[name])
            files[f"{name}.csv"] = dataio.generation_csv_text([series])
    if cfg.regions:
        specs = dataio.random_grid_specs(cfg.regions, cfg.seed, cfg.days)
        files["synthetic_regions.csv"] = dataio.generation_csv_text(
            [dataio.synth_generate(s) for s in specs]
        )
    return files


COMMANDS = {
    "ci": cmd_ci,
    "divergence": cmd_divergence,
    "route": cmd_matrix,
    "schedule": cmd_matrix,
    "autoscale": cmd_matrix,
    "sweep": cmd_sweep,
    "cdf": cmd_cdf,
    "synth": cmd_synth,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if getattr(ns, "out", None) is None:
        ns.out = os.environ.get(OUT_ENV) or "out"
    try:
        cfg = RunConfig.from_namespace(ns)
        files = COMMANDS[cfg.subcommand](cfg)
        written = dataio.write_all(files, Path(cfg.out))
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return 2
    except CarbonAttribError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    for path in written:
        print(path)
    return 0


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
