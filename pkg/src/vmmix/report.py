"""Baselines, mix reports and their serialization."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

import numpy as np

from .catalog import (ON_DEMAND, RESERVED_1Y, RESERVED_3Y, SCHEDULED, SPOT_BLOCK, SUSTAINED, TRANSIENT,
                      PricingCatalog, ProviderProfile, default_catalog)
from .matching import match_shapes
from .trace import DemandSeries, JobTrace, build_demand

REPORT_OPTIONS = (ON_DEMAND, SUSTAINED, TRANSIENT, SPOT_BLOCK, SCHEDULED, RESERVED_1Y, RESERVED_3Y)
CSV_COLUMNS = ("option", "resource_hours", "relative_cost", "dollar_cost", "mix_fraction")
DISPLAY_DIGITS = 4


class ReportError(ValueError):
    pass


def matched_rates(trace: JobTrace, profile: ProviderProfile, catalog: PricingCatalog) -> np.ndarray:
    """On-demand bundle rate of every job's matched VM shape."""
    if len(trace) == 0:
        return np.zeros(0)
    return match_shapes(profile, catalog, trace.cores, trace.mem_gb)[4]


def baseline_on_demand(trace: JobTrace, profile: ProviderProfile, catalog: PricingCatalog | None = None) -> float:
    catalog = catalog or default_catalog()
    if len(trace) == 0:
        return 0.0
    rates = matched_rates(trace, profile, catalog)
    return float(np.sum(rates * trace.runtime_hours) * catalog.on_demand)


def baseline_reserved_peak(demand, catalog: PricingCatalog | None = None) -> float:
    """Peak x horizon x 1-year rate, summed over (series, price weight) pairs.

    `demand` is a DemandSeries in bundle units, or a list of (DemandSeries, weight).
    """
    catalog = catalog or default_catalog()
    pairs = [(demand, 1.0)] if isinstance(demand, DemandSeries) else list(demand)
    if not pairs or any(len(s) == 0 or s.peak <= 0 for s, _ in pairs):
        raise ReportError("reserved-peak baseline needs a non-empty, non-zero demand series")
    return float(sum(s.peak * len(s) * s.slot_hours * w for s, w in pairs) * catalog.reserved_1y)


@dataclass(frozen=True)
class Baselines:
    trace_id: str
    on_demand: float
    reserved_peak: float | None


def compute_baselines(trace: JobTrace, profile: ProviderProfile, catalog: PricingCatalog | None = None,
                      slot_hours: float = 1.0) -> Baselines:
    catalog = catalog or default_catalog()
    od = baseline_on_demand(trace, profile, catalog)
    peak = None
    if len(trace):
        series = build_demand(trace, slot_hours, resource="bundle", amounts=matched_rates(trace, profile, catalog))
        peak = baseline_reserved_peak(series, catalog)
    return Baselines(trace.fingerprint, od, peak)


@dataclass(frozen=True)
class OptionLine:
    resource_hours: float
    relative_cost: float
    dollar_cost: float
    mix_fraction: float


@dataclass(frozen=True)
class MixReport:
    provider: str
    mode: str
    options: tuple
    lines: dict
    totals: dict
    baselines: dict
    pct_of_on_demand: float | None
    pct_of_reserved_peak: float | None
    warnings: tuple = ()
    trace_id: str = ""
    source: str = "offline"

    @property
    def mix_fractions(self) -> dict:
        return {o: line.mix_fraction for o, line in self.lines.items()}

    @property
    def total_cost(self) -> float:
        return self.totals["relative_cost"]


def _pct(total, base):
    return None if not base else 100.0 * total / base


def build_mix_report(source, baselines: Baselines, catalog: PricingCatalog | None = None) -> MixReport:
    """Aggregate an AllocationPlan or SimResult against baselines of the same trace."""
    catalog = catalog or default_catalog()
    if source.trace_id != baselines.trace_id:
        raise ReportError("baselines were computed on a different trace")
    hours, costs = source.option_hours(), source.option_cost()
    shown = [o for o in REPORT_OPTIONS if o in source.options or hours.get(o) or costs.get(o)]
    total_h = float(sum(hours.get(o, 0.0) for o in shown))
    total_c = float(sum(costs.get(o, 0.0) for o in shown))
    lines = {}
    for o in shown:
        h, c = float(hours.get(o, 0.0)), float(costs.get(o, 0.0))
        lines[o] = OptionLine(h, c, c * catalog.base_dollar_rate, h / total_h if total_h > 0 else 0.0)
    totals = {"resource_hours": total_h, "relative_cost": total_c,
              "dollar_cost": total_c * catalog.base_dollar_rate,
              "demanded_hours": float(source.demanded_hours)}
    base = {"on_demand": baselines.on_demand, "reserved_peak": baselines.reserved_peak}
    return MixReport(source.provider, source.mode, tuple(shown), lines, totals, base,
                     _pct(total_c, baselines.on_demand), _pct(total_c, baselines.reserved_peak),
                     tuple(source.warnings), source.trace_id, getattr(source, "kind", "offline"))


def _round(x):
    return None if x is None else round(x, DISPLAY_DIGITS)


def report_to_dict(report: MixReport) -> dict:
    lines = {o: {"resource_hours": l.resource_hours, "relative_cost": l.relative_cost,
                 "dollar_cost": l.dollar_cost, "mix_fraction": l.mix_fraction}
             for o, l in report.lines.items()}
    return {
        "provider": report.provider,
        "mode": report.mode,
        "source": report.source,
        "trace_id": report.trace_id,
        "options": lines,
        "totals": report.totals,
        "baselines": report.baselines,
        "mix_fractions": report.mix_fractions,
        "pct_of_on_demand": report.pct_of_on_demand,
        "pct_of_reserved_peak": report.pct_of_reserved_peak,
        "warnings": list(report.warnings),
        "display": {
            "relative_cost": _round(report.totals["relative_cost"]),
            "dollar_cost": round(report.totals["dollar_cost"], 2),
            "pct_of_on_demand": _round(report.pct_of_on_demand),
            "pct_of_reserved_peak": _round(report.pct_of_reserved_peak),
            "mix_fractions": {o: _round(f) for o, f in report.mix_fractions.items()},
        },
    }


def report_from_dict(d: dict) -> MixReport:
    try:
        lines = {o: OptionLine(**v) for o, v in d["options"].items()}
        return MixReport(d["provider"], d["mode"], tuple(lines), lines, dict(d["totals"]),
                         dict(d["baselines"]), d["pct_of_on_demand"], d["pct_of_reserved_peak"],
                         tuple(d.get("warnings", ())), d.get("trace_id", ""), d.get("source", "offline"))
    except (KeyError, TypeError, AttributeError) as e:
        raise ReportError(f"malformed report: {e}") from None


def report_from_json(text: str) -> MixReport:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as e:
        raise ReportError(f"report is not valid JSON: {e}") from None
    if not isinstance(d, dict):
        raise ReportError("report must be a JSON object")
    return report_from_dict(d)


def _csv_rows(report: MixReport, with_provider=False):
    rows = []
    for o, l in report.lines.items():
        rows.append([o, repr(l.resource_hours), repr(l.relative_cost), repr(l.dollar_cost), repr(l.mix_fraction)])
    t = report.totals
    frac = sum(l.mix_fraction for l in report.lines.values())
    rows.append(["total", repr(t["resource_hours"]), repr(t["relative_cost"]), repr(t["dollar_cost"]), repr(frac)])
    return rows


def emit_report(report, fmt: str = "json") -> str:
    """Serialize one report (or a list of reports as a JSON array)."""
    if fmt == "json":
        if isinstance(report, (list, tuple)):
            return json.dumps([report_to_dict(r) for r in report], indent=2) + "\n"
        return json.dumps(report_to_dict(report), indent=2) + "\n"
    if fmt == "csv":
        if isinstance(report, (list, tuple)):
            raise ReportError("csv output holds a single report")
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        w.writerows(_csv_rows(report))
        return buf.getvalue()
    raise ReportError(f"unknown format {fmt!r}")


def emit_series(times, demand, per_option: dict, fmt: str = "csv") -> str:
    """Plot-ready per-slot demand and per-option served demand."""
    names = [o for o in REPORT_OPTIONS if o in per_option]
    if fmt == "json":
        return json.dumps({"slot_start": [int(t) for t in times], "demand": [float(x) for x in demand],
                           "options": {o: [float(x) for x in per_option[o]] for o in names}}) + "\n"
    if fmt != "csv":
        raise ReportError(f"unknown format {fmt!r}")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["slot_start", "demand", *names])
    cols = [np.asarray(per_option[o], dtype=float) for o in names]
    for i, t in enumerate(times):
        w.writerow([int(t), repr(float(demand[i])), *(repr(float(c[i])) for c in cols)])
    return buf.getvalue()
