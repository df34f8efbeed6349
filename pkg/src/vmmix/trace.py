"""Job traces, stacked demand series, utilization CDFs and synthetic workloads."""
from __future__ import annotations

import csv
import hashlib
import io
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

CSV_HEADER = ["job_id", "submit_time", "runtime_seconds", "cores", "mem_gb", "class"]

CATEGORY_EDGES_HOURS = (6.0, 24.0, 96.0)
CATEGORY_NAMES = ("<=6h", "<=24h", "<=96h", ">96h")


class TraceError(ValueError):
    pass


@dataclass(frozen=True)
class JobRecord:
    job_id: str
    submit_time: int
    runtime_seconds: int
    cores: int
    mem_gb: float
    class_key: str = ""

    @property
    def runtime_hours(self) -> float:
        return self.runtime_seconds / 3600.0

    @property
    def end_time(self) -> int:
        return self.submit_time + self.runtime_seconds


class JobTrace:
    """An immutable list of jobs sorted by (submit_time, job_id)."""

    def __init__(self, jobs):
        jobs = sorted(jobs, key=lambda j: (j.submit_time, j.job_id))
        seen = set()
        for j in jobs:
            if j.job_id in seen:
                raise TraceError(f"duplicate job_id {j.job_id!r}")
            seen.add(j.job_id)
            if j.runtime_seconds <= 0 or j.cores < 1 or not j.mem_gb > 0:
                raise TraceError(f"job {j.job_id!r} violates runtime > 0, cores >= 1, mem_gb > 0")
        self.jobs = tuple(jobs)
        n = len(jobs)
        self.submit = np.fromiter((j.submit_time for j in jobs), dtype=np.int64, count=n)
        self.runtime = np.fromiter((j.runtime_seconds for j in jobs), dtype=np.int64, count=n)
        self.cores = np.fromiter((j.cores for j in jobs), dtype=np.int64, count=n)
        self.mem_gb = np.fromiter((j.mem_gb for j in jobs), dtype=float, count=n)
        for arr in (self.submit, self.runtime, self.cores, self.mem_gb):
            arr.setflags(write=False)
        if n:
            self.horizon = (int(self.submit.min()), int((self.submit + self.runtime).max()))
        else:
            self.horizon = (0, 0)
        self._fingerprint = None

    def __len__(self):
        return len(self.jobs)

    def __iter__(self):
        return iter(self.jobs)

    def __eq__(self, other):
        return isinstance(other, JobTrace) and self.jobs == other.jobs

    @property
    def runtime_hours(self) -> np.ndarray:
        return self.runtime / 3600.0

    @property
    def fingerprint(self) -> str:
        """Stable content hash used to tie reports to the trace they came from."""
        if self._fingerprint is None:
            self._fingerprint = hashlib.sha256(emit_trace(self).encode()).hexdigest()[:16]
        return self._fingerprint

    def subset(self, mask) -> "JobTrace":
        mask = np.asarray(mask, dtype=bool)
        return JobTrace([j for j, keep in zip(self.jobs, mask) if keep])


def parse_trace(stream) -> JobTrace:
    """Read the trace CSV (`job_id,submit_time,runtime_seconds,cores,mem_gb,class`)."""
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise TraceError("line 1: empty file, expected header") from None
    header = [h.strip() for h in header]
    missing = [c for c in CSV_HEADER if c not in header]
    if missing:
        raise TraceError(f"line 1: missing column(s) {missing}")
    col = {name: header.index(name) for name in CSV_HEADER}
    jobs = []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) < len(header):
            raise TraceError(f"line {lineno}: expected {len(header)} fields, got {len(row)}")
        try:
            job = JobRecord(
                job_id=row[col["job_id"]].strip(),
                submit_time=int(row[col["submit_time"]]),
                runtime_seconds=int(row[col["runtime_seconds"]]),
                cores=int(row[col["cores"]]),
                mem_gb=float(row[col["mem_gb"]]),
                class_key=row[col["class"]].strip(),
            )
        except ValueError as exc:
            raise TraceError(f"line {lineno}: non-numeric field ({exc})") from None
        if not job.job_id:
            raise TraceError(f"line {lineno}: empty job_id")
        if job.runtime_seconds <= 0:
            raise TraceError(f"line {lineno}: runtime_seconds must be > 0")
        if job.cores < 1:
            raise TraceError(f"line {lineno}: cores must be >= 1")
        if not (job.mem_gb > 0 and math.isfinite(job.mem_gb)):
            raise TraceError(f"line {lineno}: mem_gb must be > 0")
        jobs.append(job)
    try:
        return JobTrace(jobs)
    except TraceError as exc:
        raise TraceError(f"{exc}") from None


def emit_trace(trace: JobTrace) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for j in trace.jobs:
        writer.writerow([j.job_id, j.submit_time, j.runtime_seconds, j.cores,
                         repr(float(j.mem_gb)), j.class_key])
    return buf.getvalue()


# -- demand series ------------------------------------------------------------

@dataclass(frozen=True)
class DemandSeries:
    resource: str
    slot_hours: float
    start: int
    values: np.ndarray

    def __len__(self):
        return len(self.values)

    @property
    def slot_seconds(self) -> float:
        return self.slot_hours * 3600.0

    @property
    def peak(self) -> float:
        return float(self.values.max()) if len(self.values) else 0.0

    @property
    def mean(self) -> float:
        return float(self.values.mean()) if len(self.values) else 0.0

    def slot_times(self) -> np.ndarray:
        """Epoch seconds at the start of each slot."""
        return self.start + np.arange(len(self.values)) * self.slot_seconds


def slot_grid(horizon, slot_hours: float):
    """Aligned start (epoch seconds) and slot count covering a horizon."""
    slot_s = slot_hours * 3600.0
    begin, end = horizon
    start = int(math.floor(begin / slot_s) * slot_s)
    n = int(math.ceil((end - start) / slot_s)) if end > start else 0
    return start, n


def job_slot_overlaps(submit, runtime, start: int, slot_seconds: float):
    """Expand jobs into (job index, slot index, overlap fraction of the slot) triples."""
    submit = np.asarray(submit)
    runtime = np.asarray(runtime)
    if len(submit) == 0:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty, np.zeros(0)
    rel_s = (submit - start).astype(float)
    rel_e = rel_s + runtime.astype(float)
    first = np.floor(rel_s / slot_seconds).astype(np.int64)
    last = np.ceil(rel_e / slot_seconds).astype(np.int64) - 1
    last = np.maximum(last, first)
    counts = last - first + 1
    job_idx = np.repeat(np.arange(len(submit)), counts)
    offsets = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
    slot_idx = first[job_idx] + offsets
    lo = np.maximum(rel_s[job_idx], slot_idx * slot_seconds)
    hi = np.minimum(rel_e[job_idx], (slot_idx + 1) * slot_seconds)
    frac = (hi - lo) / slot_seconds
    return job_idx, slot_idx, frac


def build_demand(trace: JobTrace, slot_hours: float = 1.0, resource: str = "cores",
                 amounts=None, horizon=None) -> DemandSeries:
    """Aggregate per-slot demand; a job adds amount x overlap fraction to each slot it touches.

    `amounts` overrides the per-job resource amount (e.g. matched VM bundles).
    """
    if not slot_hours > 0:
        raise ValueError("slot_hours must be > 0")
    if amounts is None:
        if resource == "cores":
            amounts = trace.cores.astype(float)
        elif resource == "mem_gb":
            amounts = trace.mem_gb
        else:
            raise ValueError(f"unknown resource {resource!r}; pass amounts explicitly")
    amounts = np.asarray(amounts, dtype=float)
    start, n = slot_grid(horizon or trace.horizon, slot_hours)
    job_idx, slot_idx, frac = job_slot_overlaps(trace.submit, trace.runtime, start, slot_hours * 3600.0)
    values = np.bincount(slot_idx, weights=amounts[job_idx] * frac, minlength=n)[:n] if n else np.zeros(0)
    values.setflags(write=False)
    return DemandSeries(resource, float(slot_hours), start, values)


# -- utilization --------------------------------------------------------------

@dataclass(frozen=True)
class UtilizationCdf:
    """util[k] is the fraction of window slots during which stacked unit k+1 is in use."""
    window: tuple
    levels: np.ndarray
    util: np.ndarray

    def __call__(self, unit: int) -> float:
        if unit < 1 or unit > len(self.util):
            return 0.0
        return float(self.util[unit - 1])

    def largest_unit_with(self, threshold: float) -> int:
        """Largest stacked unit whose utilization is at least `threshold` (0 if none)."""
        ok = np.nonzero(self.util >= threshold)[0]
        return int(ok[-1] + 1) if len(ok) else 0


def unit_utilization(values, n_units: int | None = None) -> np.ndarray:
    """Mean over slots of clip(D - (u-1), 0, 1) for u = 1..n_units, from sorted demand.

    Cost is O(S log S + U), independent of the unit x slot product.
    """
    d = np.sort(np.asarray(values, dtype=float))
    s = len(d)
    if n_units is None:
        n_units = int(math.ceil(d[-1])) if s and d[-1] > 0 else 0
    if s == 0 or n_units == 0:
        return np.zeros(n_units)
    prefix = np.concatenate([[0.0], np.cumsum(d)])
    u = np.arange(1, n_units + 1, dtype=float)
    lo = np.searchsorted(d, u - 1.0, side="right")  # slots with D <= u-1 contribute 0
    hi = np.searchsorted(d, u, side="left")         # slots with D >= u contribute 1
    partial = (prefix[hi] - prefix[lo]) - (u - 1.0) * (hi - lo)
    return ((s - hi) + partial) / s


def utilization_cdf(series: DemandSeries, window=None) -> UtilizationCdf:
    if window is None:
        window = (0, len(series.values))
    a, b = window
    if not (0 <= a < b <= len(series.values)):
        raise ValueError(f"window {window} is empty or outside the series")
    util = unit_utilization(series.values[a:b])
    return UtilizationCdf((a, b), np.arange(1, len(util) + 1), util)


# -- statistics ---------------------------------------------------------------

@dataclass
class TraceStats:
    job_share: dict
    cpu_hour_share: dict
    n_jobs: int
    total_core_hours: float
    peak_cores: float
    mean_cores: float

    @property
    def peak_to_mean(self) -> float:
        return self.peak_cores / self.mean_cores if self.mean_cores else 0.0


def runtime_category(hours):
    return np.searchsorted(np.array(CATEGORY_EDGES_HOURS), np.asarray(hours, dtype=float), side="left")


def trace_stats(trace: JobTrace, slot_hours: float = 1.0) -> TraceStats:
    if len(trace) == 0:
        zeros = {k: 0.0 for k in CATEGORY_NAMES}
        return TraceStats(dict(zeros), dict(zeros), 0, 0.0, 0.0, 0.0)
    hours = trace.runtime_hours
    cat = runtime_category(hours)
    core_hours = trace.cores * hours
    n_by = np.bincount(cat, minlength=4)
    ch_by = np.bincount(cat, weights=core_hours, minlength=4)
    demand = build_demand(trace, slot_hours, "cores")
    return TraceStats(
        job_share={k: float(v) for k, v in zip(CATEGORY_NAMES, n_by / n_by.sum())},
        cpu_hour_share={k: float(v) for k, v in zip(CATEGORY_NAMES, ch_by / ch_by.sum())},
        n_jobs=len(trace),
        total_core_hours=float(core_hours.sum()),
        peak_cores=demand.peak,
        mean_cores=demand.mean,
    )


# -- synthetic traces ---------------------------------------------------------

@dataclass(frozen=True)
class RuntimeComponent:
    """Lognormal runtime component truncated to [low_hours, high_hours]."""
    weight: float
    median_hours: float
    sigma: float
    low_hours: float
    high_hours: float


# Masses and medians chosen so that a default year lands near the published
# category shares: jobs {96%, 99%, 99.9%}, CPU-hours {25%, 52%, 82%}.
DEFAULT_RUNTIME_MIX = (
    RuntimeComponent(0.961, 0.13, 1.5, 1 / 60, 6.0),
    RuntimeComponent(0.0294, 12.0, 0.5, 6.0, 24.0),
    RuntimeComponent(0.0085, 48.0, 0.6, 24.0, 96.0),
    RuntimeComponent(0.0011, 200.0, 0.5, 96.0, 2000.0),
)

DEFAULT_CORE_CHOICES = ((1, 0.40), (2, 0.18), (3, 0.05), (4, 0.14), (6, 0.06), (8, 0.10),
                        (12, 0.04), (16, 0.03))

DEFAULT_MEM_PER_CORE = ((2.0, 0.25), (4.0, 0.35), (6.0, 0.25), (8.0, 0.15))


@dataclass(frozen=True)
class SynthConfig:
    years: float = 3.0
    jobs_per_hour: float = 100000 / 8760
    diurnal_amplitude: float = 0.3
    weekly_amplitude: float = 0.2
    seasonal_amplitude: float = 0.3
    seasonal_period_days: float = 120.0
    runtime_mix: tuple = DEFAULT_RUNTIME_MIX
    core_choices: tuple = DEFAULT_CORE_CHOICES
    mem_per_core: tuple = DEFAULT_MEM_PER_CORE
    n_classes_per_component: int = 40
    class_noise: float = 0.15
    start_time: int = 0

    def validate(self):
        if not self.years > 0:
            raise ValueError("years must be > 0")
        if self.jobs_per_hour < 0:
            raise ValueError("jobs_per_hour must be >= 0")
        for name in ("diurnal_amplitude", "weekly_amplitude", "seasonal_amplitude"):
            if not 0 <= getattr(self, name) < 1:
                raise ValueError(f"{name} must be in [0, 1)")
        if not self.runtime_mix or any(c.weight < 0 or not 0 < c.low_hours < c.high_hours
                                       for c in self.runtime_mix):
            raise ValueError("runtime_mix components need weight >= 0 and 0 < low < high")
        if sum(c.weight for c in self.runtime_mix) <= 0:
            raise ValueError("runtime_mix weights must not all be zero")
        for name in ("core_choices", "mem_per_core"):
            table = getattr(self, name)
            if not table or any(p < 0 for _, p in table) or sum(p for _, p in table) <= 0:
                raise ValueError(f"{name} must be a non-empty table of non-negative weights")
        if any(int(c) != c or c < 1 for c, _ in self.core_choices):
            raise ValueError("core_choices must be integers >= 1")
        if not 0 <= self.class_noise <= 1 or self.n_classes_per_component < 1:
            raise ValueError("class_noise in [0, 1] and n_classes_per_component >= 1 required")


def _arrival_rate(cfg: SynthConfig, hours: np.ndarray) -> np.ndarray:
    day = np.sin(2 * np.pi * (hours % 24 - 8) / 24)
    week = np.cos(2 * np.pi * ((hours / 24 + 3) % 7 - 2) / 7)  # epoch day 0 is a Thursday
    season = np.sin(2 * np.pi * hours / (24 * cfg.seasonal_period_days))
    return (cfg.jobs_per_hour * (1 + cfg.diurnal_amplitude * day)
            * (1 + cfg.weekly_amplitude * week) * (1 + cfg.seasonal_amplitude * season))


def synth_trace(config: SynthConfig | None = None, seed: int = 0) -> JobTrace:
    """Paper-shaped synthetic batch workload, deterministic per (config, seed).

    Arrivals are Poisson per hour with diurnal, weekly and seasonal modulation;
    runtimes come from a mixture of truncated lognormals; each job carries a
    class key shared by jobs of similar length so runtime prediction has signal.
    """
    cfg = config or SynthConfig()
    cfg.validate()
    rng = np.random.default_rng(seed)
    n_hours = int(math.ceil(cfg.years * 8760))
    hours = np.arange(n_hours, dtype=float)
    counts = rng.poisson(_arrival_rate(cfg, hours)) if cfg.jobs_per_hour > 0 else np.zeros(n_hours, int)
    n = int(counts.sum())
    if n == 0:
        return JobTrace([])
    submit = cfg.start_time + (np.repeat(hours, counts) * 3600
                               + rng.integers(0, 3600, size=n)).astype(np.int64)

    weights = np.array([c.weight for c in cfg.runtime_mix], dtype=float)
    comp = rng.choice(len(weights), size=n, p=weights / weights.sum())
    runtime_h = np.empty(n)
    quantile = np.empty(n)
    for k, c in enumerate(cfg.runtime_mix):
        sel = np.nonzero(comp == k)[0]
        if not len(sel):
            continue
        mu = math.log(c.median_hours)
        a = (math.log(c.low_hours) - mu) / c.sigma
        b = (math.log(c.high_hours) - mu) / c.sigma
        q = rng.random(len(sel))
        z = stats.truncnorm.ppf(q, a, b)
        runtime_h[sel] = np.exp(mu + c.sigma * z)
        quantile[sel] = q
    runtime = np.maximum(np.round(runtime_h * 3600).astype(np.int64), 1)

    ncls = cfg.n_classes_per_component
    cls_idx = np.minimum((quantile * ncls).astype(int), ncls - 1)
    noisy = rng.random(n) < cfg.class_noise
    cls_idx[noisy] = rng.integers(0, ncls, size=int(noisy.sum()))

    core_vals = np.array([c for c, _ in cfg.core_choices], dtype=np.int64)
    core_p = np.array([p for _, p in cfg.core_choices], dtype=float)
    cores = core_vals[rng.choice(len(core_vals), size=n, p=core_p / core_p.sum())]
    mpc_vals = np.array([m for m, _ in cfg.mem_per_core], dtype=float)
    mpc_p = np.array([p for _, p in cfg.mem_per_core], dtype=float)
    mem = cores * mpc_vals[rng.choice(len(mpc_vals), size=n, p=mpc_p / mpc_p.sum())]

    width = len(str(n))
    jobs = [
        JobRecord(f"j{i:0{width}d}", int(submit[i]), int(runtime[i]), int(cores[i]),
                  float(mem[i]), f"c{comp[i]}-{cls_idx[i]}")
        for i in range(n)
    ]
    return JobTrace(jobs)
