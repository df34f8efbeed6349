"""Command-line entry point: vmmix {offline,simulate,synth,baseline,report}.

Exit status: 0 success, 1 usage error, 2 data error (unreadable or
malformed input). Diagnostics go to stderr; results to stdout or --out.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor

from .catalog import (PROVIDER_IDS, CatalogError, RevocationModel, expand_option_names, load_catalog,
                      provider_profile)
from .offline import optimize_offline
from .online import sim_config_from_dict, simulate
from .report import (ReportError, build_mix_report, compute_baselines, emit_report, emit_series,
                     report_from_json)
from .trace import SynthConfig, TraceError, emit_trace, parse_trace, synth_trace

log = logging.getLogger("vmmix")


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _add_common(p, trace=True):
    if trace:
        p.add_argument("--trace", metavar="PATH", required=True, help="job trace CSV")
    p.add_argument("--config", metavar="PATH", help="JSON catalog overrides, plus optional "
                   "'simulation' and 'revocation' sections")
    p.add_argument("--provider", metavar="ID", action="append",
                   help=f"provider profile, repeatable; one of {', '.join(PROVIDER_IDS)} (default aws)")
    p.add_argument("--no-option", metavar="NAME", action="append", default=[],
                   help="disable a purchasing option, repeatable ('reserved' disables both terms)")
    p.add_argument("--out", metavar="PATH", help="output file (default stdout)")
    p.add_argument("--format", choices=("json", "csv"), default="json", help="output format")
    p.add_argument("--workers", type=int, default=1, metavar="N",
                   help="threads for multi-provider runs; output order is unaffected")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="vmmix", description="Cloud VM purchasing-option optimizer and simulator.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("offline", help="optimistic offline option mix")
    _add_common(p)
    p.add_argument("--mode", choices=("fractional", "typed"),
                   help="demand model (default: fractional for gcp-custom, typed otherwise)")
    p.add_argument("--slot-hours", type=float, default=1.0, metavar="F", help="slot length in hours")
    p.add_argument("--window-step-slots", type=int, default=168, metavar="N",
                   help="reservation window step in slots")
    p.add_argument("--series", metavar="PATH",
                   help="also write per-slot demand and per-option series (CSV) to PATH")

    p = sub.add_parser("simulate", help="online policy simulation")
    _add_common(p)
    p.add_argument("--seed", type=int, metavar="N", help="revocation seed (default from config, else 0)")
    p.add_argument("--predictor", choices=("class", "oracle"), help="runtime predictor")

    p = sub.add_parser("synth", help="write a synthetic trace")
    p.add_argument("--years", type=float, default=SynthConfig.years, metavar="F", help="horizon in years")
    p.add_argument("--jobs-per-hour", type=float, default=SynthConfig.jobs_per_hour, metavar="F",
                   help="mean arrival rate")
    p.add_argument("--seed", type=int, default=0, metavar="N", help="generator seed")
    p.add_argument("--out", metavar="PATH", help="output file (default stdout)")

    p = sub.add_parser("baseline", help="on-demand and reserved-peak baselines")
    _add_common(p)
    p.add_argument("--slot-hours", type=float, default=1.0, metavar="F", help="slot length in hours")

    p = sub.add_parser("report", help="re-format a saved JSON report")
    p.add_argument("--in", dest="input", metavar="PATH", required=True, help="saved JSON report")
    p.add_argument("--out", metavar="PATH", help="output file (default stdout)")
    p.add_argument("--format", choices=("json", "csv"), default="json", help="output format")
    return parser


def _read(path):
    try:
        with open(path, encoding="utf-8") as f:
            return f.read()
    except OSError as e:
        raise DataError(f"cannot read {path}: {e.strerror or e}") from None


def _write(path, text):
    if path is None:
        sys.stdout.write(text)
        return
    d = os.path.dirname(os.path.abspath(path))
    try:
        fd, tmp = tempfile.mkstemp(dir=d, prefix=".vmmix-")
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except OSError as e:
        raise DataError(f"cannot write {path}: {e.strerror or e}") from None


def _load_config(path):
    if path is None:
        return load_catalog(""), {}, None
    text = _read(path)
    catalog = load_catalog(text)
    doc = json.loads(text) if text.strip() else {}
    sim = doc.get("simulation", {})
    rev = doc.get("revocation")
    if not isinstance(sim, dict):
        raise CatalogError("'simulation' must be an object")
    return catalog, sim, rev


def _revocation_for(rev, provider):
    if rev is None:
        return None
    if isinstance(rev, dict) and "kind" not in rev:
        rev = rev.get(provider)
        if rev is None:
            return None
    if not isinstance(rev, dict):
        raise CatalogError("'revocation' entries must be objects with 'kind' and 'param'")
    return RevocationModel(str(rev.get("kind")), float(rev.get("param", 0.0)))


def _profiles(args, rev):
    ids = args.provider or ["aws"]
    try:
        disabled = expand_option_names(args.no_option)
    except CatalogError as e:
        raise UsageError(str(e)) from None
    out = []
    for pid in ids:
        prof = provider_profile(pid, _revocation_for(rev, pid))
        out.append(prof.with_options(prof.enabled_options - disabled))
    return out


def _load_trace(path):
    text = _read(path)
    return parse_trace(text)


def _fan_out(fn, items, workers):
    if workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _emit_reports(reports, fmt):
    if fmt == "csv" and len(reports) > 1:
        raise UsageError("--format csv takes a single --provider")
    return emit_report(reports[0] if len(reports) == 1 else reports, fmt)


def _cmd_offline(args):
    catalog, _, rev = _load_config(args.config)
    profiles = _profiles(args, rev)
    if not args.slot_hours > 0 or args.window_step_slots < 1:
        raise UsageError("--slot-hours must be > 0 and --window-step-slots >= 1")
    if args.series and len(profiles) > 1:
        raise UsageError("--series takes a single --provider")
    trace = _load_trace(args.trace)

    def run(prof):
        log.info("offline %s: %d jobs", prof.id, len(trace))
        return optimize_offline(trace, prof, catalog, mode=args.mode, slot_hours=args.slot_hours,
                                window_step_slots=args.window_step_slots)

    results = _fan_out(run, profiles, args.workers)
    text = _emit_reports([r for _, r in results], args.format)
    if args.series:
        plan = results[0][0]
        times = [plan.start + i * plan.slot_hours * 3600 for i in range(plan.n_slots)]
        _write(args.series, emit_series(times, plan.demand_series(), plan.option_series()))
    _write(args.out, text)


def _cmd_simulate(args):
    catalog, sim, rev = _load_config(args.config)
    if args.seed is not None:
        sim = {**sim, "seed": args.seed}
    if args.predictor is not None:
        sim = {**sim, "predictor": args.predictor}
    try:
        config = sim_config_from_dict(sim)
    except (TypeError, ValueError) as e:
        raise CatalogError(f"bad simulation config: {e}") from None
    profiles = _profiles(args, rev)
    trace = _load_trace(args.trace)

    def run(prof):
        log.info("simulate %s: %d jobs, seed %d", prof.id, len(trace), config.seed)
        res = simulate(trace, prof, catalog, config)
        return build_mix_report(res, compute_baselines(trace, prof, catalog), catalog)

    _write(args.out, _emit_reports(_fan_out(run, profiles, args.workers), args.format))


def _cmd_synth(args):
    try:
        cfg = SynthConfig(years=args.years, jobs_per_hour=args.jobs_per_hour)
        cfg.validate()
    except ValueError as e:
        raise UsageError(str(e)) from None
    _write(args.out, emit_trace(synth_trace(cfg, args.seed)))


def _cmd_baseline(args):
    catalog, _, rev = _load_config(args.config)
    profiles = _profiles(args, rev)
    trace = _load_trace(args.trace)
    rows = []
    for prof in profiles:
        b = compute_baselines(trace, prof, catalog, args.slot_hours)
        rows.append({"provider": prof.id, "trace_id": b.trace_id,
                     "on_demand": b.on_demand, "reserved_peak": b.reserved_peak,
                     "on_demand_dollars": b.on_demand * catalog.base_dollar_rate,
                     "reserved_peak_dollars": (None if b.reserved_peak is None
                                               else b.reserved_peak * catalog.base_dollar_rate)})
    if args.format == "json":
        _write(args.out, json.dumps(rows[0] if len(rows) == 1 else rows, indent=2) + "\n")
        return
    cols = ("provider", "on_demand", "reserved_peak", "on_demand_dollars", "reserved_peak_dollars")
    lines = [",".join(cols)] + [",".join("" if r[c] is None else str(r[c]) for c in cols) for r in rows]
    _write(args.out, "\n".join(lines) + "\n")


def _cmd_report(args):
    report = report_from_json(_read(args.input))
    _write(args.out, emit_report(report, args.format))


COMMANDS = {"offline": _cmd_offline, "simulate": _cmd_simulate, "synth": _cmd_synth,
            "baseline": _cmd_baseline, "report": _cmd_report}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        parser.print_usage(sys.stderr)
        print(f"vmmix: error: {e}", file=sys.stderr)
        return 1
    except SystemExit as e:  # --help
        return int(e.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s", stream=sys.stderr)
    try:
        COMMANDS[args.command](args)
    except UsageError as e:
        print(f"vmmix: error: {e}", file=sys.stderr)
        return 1
    except (DataError, TraceError, CatalogError, ReportError) as e:
        print(f"vmmix: error: {e}", file=sys.stderr)
        return 2
    return 0


def main() -> None:
    sys.exit(run())
