"""CSV ingestion, seeded synthetic grids, and report writing.

Generation CSV: ``timestamp,region,source,generation_mwh`` with UTC ISO-8601
timestamps on the hour. CEF CSV: ``source,cef_g_per_kwh,renewable,ppa_eligible``.
"""

from __future__ import annotations

import csv
import json
import math
import os
from collections.abc import Iterable, Mapping
from dataclasses import dataclass
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path

import numpy as np

from .attribution import CarbonSignal, DivergenceSummary
from .errors import (
    DuplicateRow,
    GapInSeries,
    InvalidParameter,
    IoError,
    ParseError,
)
from .evaluation import (
    CdfResult,
    DiscrepancyRecord,
    ScenarioMatrix,
    ScenarioResult,
    SweepTable,
)
from .grid import DEFAULT_START, HOUR, EnergySource, GenerationSeries, validate_series

GENERATION_HEADER = ("timestamp", "region", "source", "generation_mwh")
CEF_HEADER = ("source", "cef_g_per_kwh", "renewable", "ppa_eligible")
TIMESTAMP_FORMAT = "%Y-%m-%dT%H:%MZ"

_TRUE = {"true", "1", "yes", "y", "t"}
_FALSE = {"false", "0", "no", "n", "f"}


# --------------------------------------------------------------------------
# reading


def _open_rows(path):
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            return list(csv.reader(fh))
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from None
    except (csv.Error, UnicodeDecodeError) as exc:
        raise ParseError(0, f"{path} is not a readable CSV file: {exc}") from None


def parse_hour(text: str, line: int = 0) -> datetime:
    raw = text.strip()
    if raw.endswith(("Z", "z")):
        raw = raw[:-1] + "+00:00"
    try:
        stamp = datetime.fromisoformat(raw)
    except ValueError:
        raise ParseError(line, f"bad timestamp {text!r}") from None
    if stamp.tzinfo is None:
        stamp = stamp.replace(tzinfo=timezone.utc)
    stamp = stamp.astimezone(timezone.utc)
    if stamp.minute or stamp.second or stamp.microsecond:
        raise ParseError(line, f"timestamp {text!r} is not on the hour")
    return stamp


def format_hour(stamp: datetime) -> str:
    return stamp.astimezone(timezone.utc).strftime(TIMESTAMP_FORMAT)


def _parse_float(text: str, line: int, what: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ParseError(line, f"{what} {text!r} is not a number") from None


def load_generation_csv(path, sources=None) -> dict[str, GenerationSeries]:
    """Read hourly generation rows into one validated series per region.

    Row order is free, but every source of a region must cover every hour
    between that region's first and last timestamp.
    """
    rows = _open_rows(path)
    if not rows or tuple(c.strip() for c in rows[0]) != GENERATION_HEADER:
        raise ParseError(1, f"expected header {','.join(GENERATION_HEADER)}")
    cells: dict[str, dict[str, dict[datetime, float]]] = {}
    for line, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 4:
            raise ParseError(line, f"expected 4 fields, got {len(row)}")
        stamp = parse_hour(row[0], line)
        region, source = row[1].strip(), row[2].strip()
        if not region or not source:
            raise ParseError(line, "empty region or source")
        value = _parse_float(row[3], line, "generation")
        by_source = cells.setdefault(region, {}).setdefault(source, {})
        if stamp in by_source:
            raise DuplicateRow(line, (region, format_hour(stamp), source))
        by_source[stamp] = value

    out = {}
    for region in sorted(cells):
        per_source = cells[region]
        first = min(min(v) for v in per_source.values())
        last = max(max(v) for v in per_source.values())
        hours = int((last - first) / HOUR) + 1
        arrays = {}
        for source in sorted(per_source):
            values = per_source[source]
            column = np.empty(hours)
            for t in range(hours):
                stamp = first + t * HOUR
                if stamp not in values:
                    raise GapInSeries(region, format_hour(stamp), source)
                column[t] = values[stamp]
            arrays[source] = column
        series = GenerationSeries(region, arrays, first)
        table = sources if sources is not None else [EnergySource(s, 0.0) for s in arrays]
        out[region] = validate_series(series, table)
    return out


def load_generation_files(paths: Iterable, sources=None) -> dict[str, GenerationSeries]:
    merged: dict[str, GenerationSeries] = {}
    for path in paths:
        for region, series in load_generation_csv(path, sources).items():
            if region in merged:
                raise InvalidParameter(f"region {region!r} appears in more than one file")
            merged[region] = series
    return dict(sorted(merged.items()))


def _parse_bool(text: str, line: int) -> bool:
    low = text.strip().lower()
    if low in _TRUE:
        return True
    if low in _FALSE:
        return False
    raise ParseError(line, f"expected a boolean, got {text!r}")


def load_cef_csv(path) -> dict[str, EnergySource]:
    """Read a source table. The header row is optional."""
    rows = _open_rows(path)
    table: dict[str, EnergySource] = {}
    for line, row in enumerate(rows, start=1):
        if not row or all(not c.strip() for c in row):
            continue
        if line == 1 and tuple(c.strip() for c in row) == CEF_HEADER:
            continue
        if len(row) != 4:
            raise ParseError(line, f"expected 4 fields, got {len(row)}")
        name = row[0].strip()
        if not name:
            raise ParseError(line, "empty source name")
        if name in table:
            raise DuplicateRow(line, name)
        cef = _parse_float(row[1], line, "CEF")
        try:
            table[name] = EnergySource(
                name, cef, _parse_bool(row[2], line), _parse_bool(row[3], line)
            )
        except InvalidParameter as exc:
            raise ParseError(line, str(exc)) from None
    return table


# --------------------------------------------------------------------------
# synthetic grids


@dataclass(frozen=True)
class SyntheticGridSpec:
    """Shape parameters (MWh per hour) for a seeded synthetic region."""

    region_id: str
    days: int = 7
    baseload_coal: float = 0.0
    gas_base: float = 0.0
    gas_peaker_amplitude: float = 0.0
    solar_peak: float = 0.0
    wind_mean: float = 0.0
    wind_jitter: float = 0.0
    rng_seed: int = 0
    utc_offset: int = 0  # hours added to UTC to get local solar time
    start: datetime = DEFAULT_START

    def __post_init__(self):
        if int(self.days) != self.days or self.days < 1:
            raise InvalidParameter("days must be a positive integer")
        for name in ("baseload_coal", "gas_base", "gas_peaker_amplitude", "solar_peak",
                     "wind_mean", "wind_jitter"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise InvalidParameter(f"{name} must be finite and >= 0")
        if not 0 <= self.rng_seed < 2**64:
            raise InvalidParameter("rng_seed must fit in 64 unsigned bits")


def _hump(hours: np.ndarray, begin: float, end: float) -> np.ndarray:
    # half-sine on (begin, end), exactly zero outside
    inside = (hours > begin) & (hours < end)
    return np.where(inside, np.sin(np.pi * (hours - begin) / (end - begin)), 0.0)


def synth_generate(spec: SyntheticGridSpec) -> GenerationSeries:
    """Deterministic hourly mix: flat coal, evening gas peakers, daytime solar, noisy wind."""
    hours = spec.days * 24
    utc_hour = (spec.start.hour + np.arange(hours)) % 24
    local = (utc_hour + spec.utc_offset) % 24
    rng = np.random.default_rng(spec.rng_seed)
    wind = spec.wind_mean + spec.wind_jitter * rng.uniform(-1.0, 1.0, hours)
    return GenerationSeries(
        spec.region_id,
        {
            "coal": np.full(hours, float(spec.baseload_coal)),
            "gas": spec.gas_base + spec.gas_peaker_amplitude * _hump(local, 14.0, 24.0),
            "solar": spec.solar_peak * _hump(local, 6.0, 18.0),
            "wind": np.clip(wind, 0.0, None),
        },
        spec.start,
    )


def random_grid_specs(n: int, seed: int, days: int = 7) -> list[SyntheticGridSpec]:
    """``n`` varied synthetic regions drawn from one seeded generator."""
    rng = np.random.default_rng(seed)
    specs = []
    for i in range(n):
        specs.append(
            SyntheticGridSpec(
                region_id=f"R{i:03d}",
                days=days,
                baseload_coal=float(rng.choice([0.0, rng.uniform(0, 20000)])),
                gas_base=float(rng.uniform(500, 15000)),
                gas_peaker_amplitude=float(rng.uniform(0, 8000)),
                solar_peak=float(rng.choice([0.0, rng.uniform(0, 20000)])),
                wind_mean=float(rng.choice([0.0, rng.uniform(0, 10000)])),
                wind_jitter=float(rng.uniform(0, 5000)),
                rng_seed=int(rng.integers(0, 2**63)),
                utc_offset=int(rng.integers(-12, 13)),
            )
        )
    return specs


CAISO_LIKE = SyntheticGridSpec(
    "CAISO-like",
    days=7,
    baseload_coal=2000.0,
    gas_base=8000.0,
    gas_peaker_amplitude=6000.0,
    solar_peak=12000.0,
    wind_mean=1500.0,
    wind_jitter=1000.0,
    rng_seed=20220101,
)
ERCOT_LIKE = SyntheticGridSpec(
    "ERCOT-like",
    days=7,
    baseload_coal=15000.0,
    gas_base=15000.0,
    gas_peaker_amplitude=8000.0,
    solar_peak=3000.0,
    wind_mean=12000.0,
    wind_jitter=6000.0,
    rng_seed=20220102,
)
BUNDLED_SPECS = {"caiso_like": CAISO_LIKE, "ercot_like": ERCOT_LIKE}


def bundled_path(name: str) -> Path:
    """Path of a data file shipped inside the package."""
    return Path(str(resources.files("carbonattrib") / "data" / name))


def bundled_generation() -> dict[str, GenerationSeries]:
    return load_generation_files([bundled_path(f"{k}.csv") for k in BUNDLED_SPECS])


# --------------------------------------------------------------------------
# writing


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_name(f".{path.name}.tmp")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(tmp, "w", newline="", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError as exc:
        try:
            tmp.unlink()
        except OSError:
            pass
        raise IoError(f"cannot write {path}: {exc}") from None


def generation_csv_text(series: Iterable[GenerationSeries] | Mapping[str, GenerationSeries]) -> str:
    if isinstance(series, Mapping):
        series = series.values()
    lines = [",".join(GENERATION_HEADER)]
    for s in sorted(series, key=lambda s: s.region_id):
        stamps = [format_hour(ts) for ts in s.timestamps()]
        for t, stamp in enumerate(stamps):
            for source in s.sources:
                # repr keeps full precision so files reload bit-exactly
                lines.append(f"{stamp},{s.region_id},{source},{float(s.per_source[source][t])!r}")
    return "\n".join(lines) + "\n"


def write_generation_csv(series, path) -> Path:
    path = Path(path)
    _atomic_write(path, generation_csv_text(series))
    return path


def write_cef_csv(sources: Mapping[str, EnergySource], path) -> Path:
    lines = [",".join(CEF_HEADER)]
    for name, src in sorted(sources.items()):
        lines.append(f"{name},{src.cef!r},{str(src.renewable).lower()},{str(src.ppa_eligible).lower()}")
    path = Path(path)
    _atomic_write(path, "\n".join(lines) + "\n")
    return path


def signal_rows(signals: Iterable[CarbonSignal]) -> list[dict]:
    rows = []
    for sig in signals:
        for stamp, value in zip(sig.timestamps(), sig.values):
            rows.append(
                {
                    "timestamp": format_hour(stamp),
                    "region_id": sig.region_id,
                    "method": sig.label,
                    "ci_g_per_kwh": float(value),
                }
            )
    return rows


def to_rows(results) -> list[dict]:
    """Flatten any result object into a list of flat, ordered dicts."""
    if isinstance(results, ScenarioResult):
        return [results.to_dict()]
    if isinstance(results, ScenarioMatrix):
        rows = [dict(region_id=results.region_id, **c.to_dict()) for c in results.cells]
        return rows
    if isinstance(results, SweepTable):
        return results.as_rows()
    if isinstance(results, CdfResult):
        return [{"discrepancy_pp": x, "cumulative_fraction": f} for x, f in results.points]
    if isinstance(results, DivergenceSummary):
        return results.rows()
    if isinstance(results, DiscrepancyRecord):
        return [results.to_dict()]
    if isinstance(results, CarbonSignal):
        return signal_rows([results])
    if isinstance(results, Mapping):
        return [dict(results)]
    rows = []
    for item in results:
        rows.extend(to_rows(item))
    return rows


def _fmt_csv(value) -> str:
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, (float, np.floating)):
        text = f"{float(value):.6f}"
        return "0.000000" if text == "-0.000000" else text
    if value is None:
        return ""
    return str(value)


def _round_json(value):
    if isinstance(value, (float, np.floating)):
        value = round(float(value), 6)
        return 0.0 if value == 0 else value
    if isinstance(value, dict):
        return {k: _round_json(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_round_json(v) for v in value]
    if isinstance(value, np.integer):
        return int(value)
    return value


def render_report(results, fmt: str = "json") -> str:
    """Serialize results with stable key order and 6-decimal floats."""
    if fmt not in ("json", "csv"):
        raise InvalidParameter(f"unknown report format {fmt!r}")
    if fmt == "json" and isinstance(results, CdfResult):
        doc = {
            "label": results.label,
            "n": results.n,
            "mean": results.mean,
            "max": results.max,
            "points": to_rows(results),
        }
        return json.dumps(_round_json(doc), indent=2) + "\n"
    rows = to_rows(results)
    if fmt == "json":
        return json.dumps(_round_json(rows), indent=2) + "\n"
    if not rows:
        return ""
    columns = list(rows[0])
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(_fmt_csv(row.get(c)) for c in columns))
    return "\n".join(lines) + "\n"


def write_report(results, out_dir, fmt: str = "json", name: str = "report") -> Path:
    """Render ``results`` and write ``<out_dir>/<name>.<fmt>`` atomically."""
    text = render_report(results, fmt)
    path = Path(out_dir) / f"{name}.{fmt}"
    _atomic_write(path, text)
    return path


def write_all(files: Mapping[str, str], out_dir) -> list[Path]:
    """Write pre-rendered files; nothing is touched until every file is rendered."""
    written = []
    for name, text in files.items():
        path = Path(out_dir) / name
        _atomic_write(path, text)
        written.append(path)
    return written

