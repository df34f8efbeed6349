"""Event-driven simulation of a practical online purchasing policy.

Jobs start on arrival. Each arrival predicts its runtime from completed jobs
of its class, is matched to a VM shape and placed on idle reserved capacity
if any fits, else on the option with the lowest predicted cost per useful
hour. Revoked transient and overrun spot-block jobs restart from scratch on
on-demand. The reserved pool is resized at monthly epochs from trailing
demand.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from .catalog import (HOURS_PER_YEAR, ON_DEMAND, RESERVED_1Y, RESERVED_3Y, SCHEDULED, SPOT_BLOCK,
                      SUSTAINED, TRANSIENT, PricingCatalog, ProviderProfile, default_catalog,
                      rate_for_shape, sample_revocation)
from .costmodel import spot_block_hours, transient_effective_rates
from .matching import VmShape, match_shapes, match_vm, standard_shapes
from .offline import MIX_OPTIONS, MONTH_HOURS, TERM_YEARS, sustained_split
from .schedopt import enumerate_daily, enumerate_weekly, price_candidates, select_schedules
from .trace import JobTrace, job_slot_overlaps, slot_grid, unit_utilization

__all__ = ["RuntimePredictor", "predict_runtime", "update_predictor", "match_vm", "OptionDecision",
           "choose_option", "size_reserved_pool", "ReservedPool", "SimConfig", "JobOutcome",
           "SimResult", "simulate"]


# -- runtime prediction --------------------------------------------------------

@dataclass
class RuntimePredictor:
    """Geometric mean of completed runtimes per class, then over all jobs, then a default."""
    default_hours: float = 1.0
    min_count: int = 3
    classes: dict = field(default_factory=dict)   # class_key -> [count, sum of log hours]
    global_count: int = 0
    global_log_sum: float = 0.0

    def predict(self, job) -> float:
        st = self.classes.get(job.class_key)
        if job.class_key and st is not None and st[0] >= self.min_count:
            return math.exp(st[1] / st[0])
        if self.global_count:
            return math.exp(self.global_log_sum / self.global_count)
        return self.default_hours

    def update(self, job, actual_hours: float) -> None:
        lg = math.log(actual_hours)
        st = self.classes.setdefault(job.class_key, [0, 0.0])
        st[0] += 1
        st[1] += lg
        self.global_count += 1
        self.global_log_sum += lg


def predict_runtime(predictor: RuntimePredictor, job) -> float:
    return predictor.predict(job)


def update_predictor(predictor: RuntimePredictor, job, actual_hours: float) -> None:
    predictor.update(job, actual_hours)


# -- option choice --------------------------------------------------------------

@dataclass(frozen=True)
class OptionDecision:
    option: str
    rate: float                 # predicted cost per useful hour, relative to on-demand
    block_hours: int = 0


def choose_option(job, predicted_hours: float, profile: ProviderProfile, catalog: PricingCatalog | None = None,
                  pool_idle: float = 0.0, need: float | None = None) -> OptionDecision:
    """Reserved if idle capacity fits, else the cheapest predicted job-level option.

    `need` is the reserved capacity the job occupies (standard-shape cores);
    it defaults to the job's core count.
    """
    if not predicted_hours > 0:
        raise ValueError("predicted_hours must be > 0")
    catalog = catalog or default_catalog()
    need = float(job.cores if need is None else need)
    if pool_idle >= need - 1e-9 and pool_idle > 0:
        return OptionDecision("reserved", 0.0)
    best = OptionDecision(ON_DEMAND, catalog.on_demand)
    cands = []
    if profile.offers(TRANSIENT):
        cands.append(OptionDecision(TRANSIENT, float(
            transient_effective_rates(catalog, profile.revocation, predicted_hours))))
    if profile.offers(SPOT_BLOCK):
        b = int(spot_block_hours(catalog, predicted_hours))
        if b:
            cands.append(OptionDecision(SPOT_BLOCK, catalog.spot_block_rate(b), b))
    for c in reversed(cands):  # earlier options win ties
        if c.rate <= best.rate:
            best = c
    return best


# -- reserved pool ---------------------------------------------------------------

def size_reserved_pool(history, catalog: PricingCatalog | None = None, current: dict | None = None,
                       terms=(RESERVED_1Y, RESERVED_3Y), rho: float = 1.0,
                       min_history_slots: int = 90 * 24) -> dict:
    """Target reserved capacity per term from a trailing demand window.

    A stacked level u is worth committing when its utilization clears the
    break-even ratio term_rate / rho. Targets never fall below what is
    already committed. Callers buy the longest enabled term only.
    """
    catalog = catalog or default_catalog()
    current = current or {}
    values = np.asarray(getattr(history, "values", history), dtype=float)
    out = {t: float(current.get(t, 0.0)) for t in terms}
    if len(values) < min_history_slots or not len(values):
        return out
    util = unit_utilization(values)
    for t in terms:
        thr = catalog.term_rate(t) / rho
        ok = np.nonzero(util >= thr - 1e-12)[0]
        out[t] = max(out[t], float(ok[-1] + 1) if len(ok) else 0.0)
    return out


@dataclass
class Commitment:
    term: str
    units: float
    start: float       # epoch seconds
    end: float


@dataclass
class ReservedPool:
    """Committed reserved capacity in standard-core units."""
    commitments: list = field(default_factory=list)
    in_use: float = 0.0

    def capacity(self, t: float, term: str | None = None) -> float:
        return float(sum(c.units for c in self.commitments
                         if c.start <= t < c.end and (term is None or c.term == term)))

    def idle(self, t: float) -> float:
        return max(self.capacity(t) - self.in_use, 0.0)

    def buy(self, term: str, units: float, t: float) -> None:
        if units > 0:
            self.commitments.append(Commitment(term, units, t, t + TERM_YEARS[term] * HOURS_PER_YEAR * 3600))

    def billed(self, catalog: PricingCatalog, horizon_end: float) -> dict:
        """Commitment cost within the simulated horizon, per term (bundle-hour units)."""
        out = {RESERVED_1Y: 0.0, RESERVED_3Y: 0.0}
        for c in self.commitments:
            hours = max(min(c.end, horizon_end) - c.start, 0.0) / 3600
            out[c.term] += c.units * hours * catalog.term_rate(c.term)
        return out


# -- simulation --------------------------------------------------------------------

@dataclass(frozen=True)
class SimConfig:
    seed: int = 0
    predictor: str = "class"          # "class" or "oracle"
    default_runtime_hours: float = 1.0
    min_class_count: int = 3
    epoch_hours: float = MONTH_HOURS
    min_history_days: float = 90.0
    history_days: float = 365.0
    rho: float = 1.0
    scheduled_online: bool = False

    def validate(self):
        if self.predictor not in ("class", "oracle"):
            raise ValueError("predictor must be 'class' or 'oracle'")
        if not (self.default_runtime_hours > 0 and self.epoch_hours > 0 and self.rho > 0):
            raise ValueError("default_runtime_hours, epoch_hours and rho must be > 0")
        if self.min_history_days < 0 or self.history_days <= 0 or self.min_class_count < 1:
            raise ValueError("bad history or class-count setting")


SIM_KEYS = tuple(SimConfig.__dataclass_fields__)


def sim_config_from_dict(d: dict | None) -> SimConfig:
    d = dict(d or {})
    unknown = sorted(set(d) - set(SIM_KEYS))
    if unknown:
        raise ValueError(f"unknown simulation key {unknown[0]!r}")
    cfg = SimConfig(**d)
    cfg.validate()
    return cfg


@dataclass(frozen=True)
class JobOutcome:
    job_id: str
    option: str
    shape: VmShape
    predicted_hours: float
    revocations: tuple        # (option, hours into the first attempt) per revocation
    cost: float               # relative units, before ex-post sustained-use discounts


@dataclass(frozen=True)
class SimResult:
    provider: str
    options: tuple
    trace_id: str
    jobs: tuple
    hours: dict
    costs: dict
    sustained_months: tuple
    demanded_hours: float
    n_revocations: int
    warnings: tuple = ()
    mode: str = "online"
    kind: str = "online"

    def option_hours(self) -> dict:
        return dict(self.hours)

    def option_cost(self) -> dict:
        return dict(self.costs)

    @property
    def billed_hours(self) -> float:
        return float(sum(self.hours.values()))

    @property
    def total_cost(self) -> float:
        return float(sum(self.costs.values()))

    def mix_fractions(self) -> dict:
        tot = self.billed_hours
        return {o: (h / tot if tot > 0 else 0.0) for o, h in self.hours.items()}

    def dollar_cost(self, catalog: PricingCatalog | None = None) -> float:
        return self.total_cost * (catalog or default_catalog()).base_dollar_rate


_ARRIVE, _EPOCH, _DONE = 2, 0, 1   # same-time order: epochs, completions, arrivals


class _ScheduledPool:
    """Online scheduled-reserved capacity: hour-of-week windows bought for a year."""

    def __init__(self):
        self.items = []     # (start, end, cells set, units)
        self.in_use = 0.0

    def capacity(self, t):
        how = int(((t // 86400 + 3) % 7) * 24 + (t % 86400) // 3600)
        return sum(u for s, e, cells, u in self.items if s <= t < e and how in cells)

    def idle(self, t):
        return max(self.capacity(t) - self.in_use, 0.0)


def _buy_schedules(pool, sched, values, start_slot, t, catalog, base_units):
    """Daily/weekly schedules for the stacked units just above reserved capacity."""
    year = int(HOURS_PER_YEAR)
    if len(values) < year:
        return 0.0
    v = values[-year:]
    slots = start_slot - year + np.arange(year)
    how = ((slots // 24 + 3) % 7) * 24 + slots % 24
    count = np.bincount(how, minlength=168).astype(float)
    shells = enumerate_daily(catalog) + enumerate_weekly(catalog)
    cost = 0.0
    for level in range(int(base_units), int(base_units) + 4):
        used = np.clip(v - level, 0.0, 1.0)
        annual = used.mean()
        if annual <= 0:
            break
        cell_use = np.bincount(how, weights=used, minlength=168) / np.maximum(count, 1)
        chosen = select_schedules(price_candidates(
            shells, [float(cell_use[s.cells()].mean()) for s in shells], catalog.reserved_1y / annual))
        for c in chosen:
            sched.items.append((t, t + year * 3600, frozenset(c.cells()), 1.0))
            cost += c.annual_hours * c.blended_rate
    return cost


def simulate(trace: JobTrace, profile: ProviderProfile, catalog: PricingCatalog | None = None,
             config: SimConfig | None = None, seed: int | None = None, sampler=None) -> SimResult:
    """Run the online policy over a trace.

    `sampler(seed, job_id) -> hours` replaces the profile's revocation draws
    (for what-if runs and tests).
    """
    catalog = catalog or default_catalog()
    config = config or SimConfig()
    config.validate()
    seed = config.seed if seed is None else seed
    n = len(trace)
    kinds = [o for o in MIX_OPTIONS if profile.offers(o) or o == ON_DEMAND]
    if n == 0:
        z = {o: 0.0 for o in kinds}
        return SimResult(profile.id, tuple(kinds), trace.fingerprint, (), z, dict(z), (), 0.0, 0)

    sc, sm, custom, inst, rates = match_shapes(profile, catalog, trace.cores, trace.mem_gb)
    std_c, std_m, _ = standard_shapes(profile, trace.cores, trace.mem_gb)
    need = np.maximum(std_c, std_m / 4.0)
    # bundle-equivalent size without the surcharge: billed resource-hours per hour
    size = rate_for_shape(catalog, sc, sm)
    raw_size = rate_for_shape(catalog, trace.cores, trace.mem_gb)
    runtime_h = trace.runtime_hours
    h0, h1 = trace.horizon
    start_slot_time, n_slots = slot_grid((h0, h1), 1.0)
    # hourly reserved-eligible demand, read only for fully elapsed slots at each epoch
    j_idx, s_idx, frac = job_slot_overlaps(trace.submit, trace.runtime, start_slot_time, 3600.0)
    demand = np.bincount(s_idx, weights=need[j_idx] * frac, minlength=n_slots)

    predictor = RuntimePredictor(config.default_runtime_hours, config.min_class_count)
    terms = [t for t in (RESERVED_3Y, RESERVED_1Y) if profile.offers(t)]
    use_sched = config.scheduled_online and profile.offers(SCHEDULED)
    pool, sched = ReservedPool(), _ScheduledPool()
    sched_cost = 0.0
    hist_min = int(config.min_history_days * 24)
    hist_len = int(config.history_days * 24)

    events = []
    k = 1
    while start_slot_time + k * config.epoch_hours * 3600 < h1:
        heapq.heappush(events, (start_slot_time + k * config.epoch_hours * 3600, _EPOCH, k))
        k += 1
    for i in range(n):
        heapq.heappush(events, (float(trace.submit[i]), _ARRIVE, i))

    hours = {o: 0.0 for o in kinds}
    costs = {o: 0.0 for o in kinds}
    od_intervals = []       # (start s, end s, bundle rate) for sustained-use billing
    outcomes = [None] * n
    holds = {}              # job -> (pool kind, units)
    n_rev = 0
    last_sched_buy = -math.inf
    jobs = trace.jobs

    while events:
        t, kind, i = heapq.heappop(events)
        if kind == _EPOCH:
            slot_now = int(round((t - start_slot_time) / 3600))
            hist = demand[max(0, slot_now - hist_len):slot_now]
            if terms and len(hist) >= hist_min:
                current = {tm: pool.capacity(t, tm) for tm in terms}
                main = terms[0]
                target = size_reserved_pool(hist, catalog, {}, (main,), config.rho, hist_min)[main]
                have = sum(current.values())
                pool.buy(main, target - have, t)
            if use_sched and slot_now >= HOURS_PER_YEAR and t - last_sched_buy >= HOURS_PER_YEAR * 3600:
                sched_cost += _buy_schedules(pool, sched, demand[:slot_now], slot_now, t, catalog,
                                             pool.capacity(t))
                last_sched_buy = t
            continue
        if kind == _DONE:
            what, units = holds.pop(i, (None, 0.0))
            if what == "reserved":
                pool.in_use -= units
            elif what == SCHEDULED:
                sched.in_use -= units
            predictor.update(jobs[i], float(runtime_h[i]))
            continue

        job = jobs[i]
        T = float(runtime_h[i])
        pred = T if config.predictor == "oracle" else predictor.predict(job)
        rate, sz = float(rates[i]), float(size[i])
        dec = choose_option(job, pred, profile, catalog, pool.idle(t), float(need[i]))
        revs = []
        end = t + T * 3600
        option = dec.option
        if option == "reserved":
            term = next((tm for tm in terms if pool.capacity(t, tm) > 0), terms[0])
            option = term
            pool.in_use += need[i]
            holds[i] = ("reserved", float(need[i]))
            hours[term] += float(need[i]) * T
            cost = 0.0
        elif use_sched and sched.idle(t) >= need[i] and dec.rate > catalog.scheduled_offpeak:
            option = SCHEDULED
            sched.in_use += need[i]
            holds[i] = (SCHEDULED, float(need[i]))
            hours[SCHEDULED] += float(need[i]) * T
            cost = 0.0
        elif option == TRANSIENT:
            tau = (sampler(seed, job.job_id) if sampler is not None
                   else sample_revocation(profile.revocation, (seed, job.job_id)))
            if tau < T:
                revs.append((TRANSIENT, tau))
                cost = catalog.transient * rate * tau
                costs[TRANSIENT] += cost
                hours[TRANSIENT] += sz * tau
                restart = t + tau * 3600
                end = restart + T * 3600
                od_intervals.append((restart, end, rate, sz))
                cost += catalog.on_demand * rate * T
            else:
                cost = catalog.transient * rate * T
                costs[TRANSIENT] += cost
                hours[TRANSIENT] += sz * T
        elif option == SPOT_BLOCK:
            b = dec.block_hours
            held = min(T, b)
            cost = dec.rate * rate * held
            costs[SPOT_BLOCK] += cost
            hours[SPOT_BLOCK] += sz * held
            if T > b:
                revs.append((SPOT_BLOCK, float(b)))
                restart = t + b * 3600
                end = restart + T * 3600
                od_intervals.append((restart, end, rate, sz))
                cost += catalog.on_demand * rate * T
        else:
            od_intervals.append((t, end, rate, sz))
            cost = catalog.on_demand * rate * T
        n_rev += len(revs)
        shape = VmShape(int(sc[i]), float(sm[i]), bool(custom[i]), int(inst[i]), rate)
        outcomes[i] = JobOutcome(job.job_id, option, shape, float(pred), tuple(revs), float(cost))
        heapq.heappush(events, (end, _DONE, i))

    horizon_end = max(h1, max((e for _, e, _, _ in od_intervals), default=h1))
    for term, c in pool.billed(catalog, h1).items():
        if term in costs:
            costs[term] += c
    if use_sched:
        costs[SCHEDULED] += sched_cost
    months = []
    if od_intervals:
        a = np.array([x[0] for x in od_intervals])
        e = np.array([x[1] for x in od_intervals])
        r = np.array([x[2] for x in od_intervals])
        s = np.array([x[3] for x in od_intervals])
        od_hours_cost = float(np.sum(r * (e - a) / 3600)) * catalog.on_demand
        od_hours = float(np.sum(s * (e - a) / 3600))
        if profile.offers(SUSTAINED):
            # months are 730-hour blocks from the start of the first hour, as offline
            month_s = MONTH_HOURS * 3600
            nm = int(math.ceil((horizon_end - start_slot_time) / month_s))
            jj, mm, ff = job_slot_overlaps(a, e - a, start_slot_time, month_s)
            pool_cost = np.bincount(mm, weights=r[jj] * ff * MONTH_HOURS, minlength=nm)
            od_c, sus_c, _, _, A, bill = sustained_split(pool_cost, 1.0, catalog)
            # hours split in the same proportion as the month's cost-weighted usage
            share = np.where(pool_cost > 0, od_c / np.maximum(pool_cost, 1e-300), 1.0)
            month_hours = np.bincount(mm, weights=s[jj] * ff * MONTH_HOURS, minlength=nm)
            costs[ON_DEMAND] += float(od_c.sum())
            costs[SUSTAINED] += float(sus_c.sum())
            hours[ON_DEMAND] += float((month_hours * share).sum())
            hours[SUSTAINED] += float((month_hours * (1 - share)).sum())
            months = [{"month": int(q), "avg_units": float(A[q]), "on_demand_cost": float(pool_cost[q]),
                       "bill": float(bill[q])} for q in range(nm) if pool_cost[q] > 0]
        else:
            costs[ON_DEMAND] += od_hours_cost
            hours[ON_DEMAND] += od_hours
    demanded = float(np.sum(raw_size * runtime_h))
    warnings = []
    if terms and h1 - h0 < config.min_history_days * 86400:
        warnings.append("trace shorter than the minimum pool-sizing history: no reserved capacity bought")
    return SimResult(profile.id, tuple(kinds), trace.fingerprint, tuple(outcomes), hours, costs,
                     tuple(months), demanded, n_rev, tuple(warnings))
