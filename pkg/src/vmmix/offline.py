"""Optimistic offline selection of purchasing options over stacked demand.

Aggregate demand is cut into unit-height layers ("stacked units"). Every
(unit, slot) pair with demand is one record carrying the used fraction of the
unit and the cheapest job-level cost of that mass. Records are built sparsely
from a cumulative cost curve, so the work scales with total demand rather than
peak x horizon.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np

from .catalog import (HOURS_PER_YEAR, ON_DEMAND, RESERVED_1Y, RESERVED_3Y, SCHEDULED, SPOT_BLOCK,
                      SUSTAINED, TRANSIENT, PricingCatalog, ProviderProfile, default_catalog)
from .costmodel import JOB_OPTION_ORDER, cheapest_job_options, packed_sustained_cost
from .matching import match_shapes, standard_shapes
from .schedopt import (MONTH_DAYS, ScheduleCandidate, enumerate_daily, enumerate_monthly,
                       enumerate_weekly, select_schedules, weighted_interval_schedule)
from .trace import JobTrace, job_slot_overlaps, slot_grid

log = logging.getLogger(__name__)

MONTH_HOURS = HOURS_PER_YEAR / 12
TERM_YEARS = {RESERVED_1Y: 1, RESERVED_3Y: 3}
MIX_OPTIONS = (ON_DEMAND, SUSTAINED, TRANSIENT, SPOT_BLOCK, SCHEDULED, RESERVED_1Y, RESERVED_3Y)


def default_mode(profile: ProviderProfile) -> str:
    return "fractional" if profile.allows_customized else "typed"


# -- per-slot stacks ----------------------------------------------------------

@dataclass(frozen=True)
class SlotCostStack:
    """Cheapest job-level rates in one slot, sorted so the cheapest mass sits lowest.

    breakpoints[i] = (cumulative demand level, rate of the layer ending there).
    """
    slot: int
    breakpoints: tuple

    @property
    def top(self) -> float:
        return self.breakpoints[-1][0] if self.breakpoints else 0.0

    def unit_rate(self, unit: int, on_demand: float = 1.0) -> float:
        """Mean rate over the used part of stacked unit `unit` (1-based)."""
        lo, hi = unit - 1.0, min(float(unit), self.top)
        if hi <= lo:
            return on_demand
        cost, prev = 0.0, 0.0
        for level, rate in self.breakpoints:
            a, b = max(prev, lo), min(level, hi)
            if b > a:
                cost += (b - a) * rate
            prev = level
        return cost / (hi - lo)


def job_rates(trace: JobTrace, profile: ProviderProfile, catalog: PricingCatalog):
    """Cheapest job-level option code and effective rate for every job (known runtimes)."""
    choice, rates, _ = cheapest_job_options(trace.runtime_hours, profile, catalog)
    return choice, rates


def build_slot_cost_stack(trace: JobTrace, profile: ProviderProfile, catalog: PricingCatalog | None,
                          slot: int, slot_hours: float = 1.0, amounts=None) -> SlotCostStack:
    """Stack for a single slot; `amounts` defaults to job cores."""
    catalog = catalog or default_catalog()
    start, n = slot_grid(trace.horizon, slot_hours)
    if len(trace) == 0 or not 0 <= slot < n:
        return SlotCostStack(slot, ())
    amounts = trace.cores.astype(float) if amounts is None else np.asarray(amounts, dtype=float)
    _, rates = job_rates(trace, profile, catalog)
    j, t, frac = job_slot_overlaps(trace.submit, trace.runtime, start, slot_hours * 3600.0)
    sel = (t == slot) & (frac > 0)
    mass, r = amounts[j[sel]] * frac[sel], rates[j[sel]]
    order = np.argsort(r, kind="stable")
    bps = []
    level = 0.0
    for m, rate in zip(mass[order], r[order]):
        level += m
        if bps and bps[-1][1] == rate:
            bps[-1] = (level, rate)
        else:
            bps.append((level, float(rate)))
    return SlotCostStack(slot, tuple((float(lv), rt) for lv, rt in bps))


class StackedResource:
    """All slots of one resource stacked along a global cumulative-mass axis."""

    def __init__(self, name, weight, amounts, rates, options, trace, start, n_slots, slot_hours):
        self.name = name
        self.weight = float(weight)
        self.n_slots = n_slots
        self.slot_hours = slot_hours
        j, t, frac = job_slot_overlaps(trace.submit, trace.runtime, start, slot_hours * 3600.0)
        mass = np.asarray(amounts, dtype=float)[j] * frac
        keep = mass > 0
        j, t, mass = j[keep], t[keep], mass[keep]
        order = np.lexsort((j, options[j], rates[j], t))
        self.seg_slot = t[order]
        self.seg_rate = rates[j][order]
        self.seg_opt = options[j][order]
        seg_mass = mass[order]
        self.G = np.concatenate([[0.0], np.cumsum(seg_mass)])
        self.KC = np.concatenate([[0.0], np.cumsum(seg_mass * self.seg_rate)])
        self.KO = [np.concatenate([[0.0], np.cumsum(seg_mass * (self.seg_opt == o))]) for o in range(3)]
        self.KCO = [np.concatenate([[0.0], np.cumsum(seg_mass * self.seg_rate * (self.seg_opt == o))])
                    for o in range(3)]
        first = np.searchsorted(self.seg_slot, np.arange(n_slots + 1))
        self.offsets = self.G[first]
        self.demand = np.diff(self.offsets)
        self._sustained = None

    def _between(self, curve, lo, hi):
        return np.interp(hi, self.G, curve) - np.interp(lo, self.G, curve)

    def records(self):
        """Sparse (unit, slot) records sorted by unit then slot."""
        d = self.demand
        k = np.ceil(d).astype(np.int64)
        slot = np.repeat(np.arange(self.n_slots), k)
        unit = np.arange(k.sum()) - np.repeat(np.cumsum(k) - k, k)
        lo = self.offsets[slot] + unit
        hi = np.minimum(lo + 1.0, self.offsets[slot + 1])
        usage = hi - lo
        ok = usage > 0
        slot, unit, lo, hi, usage = slot[ok], unit[ok], lo[ok], hi[ok], usage[ok]
        order = np.lexsort((slot, unit))
        slot, unit, lo, hi, usage = slot[order], unit[order], lo[order], hi[order], usage[order]
        rec = {
            "unit": unit, "slot": slot, "usage": usage,
            "cost": self._between(self.KC, lo, hi),
            "opt_mass": np.stack([self._between(c, lo, hi) for c in self.KO]),
            "opt_cost": np.stack([self._between(c, lo, hi) for c in self.KCO]),
        }
        return rec

    def unit_rate(self, unit: int, slot: int, on_demand: float = 1.0) -> float:
        """Mean job-level rate over the used part of stacked unit `unit` (1-based) in `slot`."""
        lo = self.offsets[slot] + unit - 1
        hi = min(lo + 1.0, self.offsets[slot + 1])
        return on_demand if hi <= lo else float(self._between(self.KC, lo, hi) / (hi - lo))

    def sustained_rate(self, unit: int, slot: int, catalog: PricingCatalog) -> float | None:
        """Sustained-use rate of the unit in the slot's month if all demand billed on-demand."""
        if self._sustained is None:
            rec = self.records()
            rates = sustained_unit_rates(rec["unit"], rec["slot"], rec["usage"], self.slot_hours, catalog)
            self._sustained = (rec["unit"] * self.n_slots + rec["slot"], rates)
        keys, rates = self._sustained
        k = (unit - 1) * self.n_slots + slot
        i = np.searchsorted(keys, k)
        return float(rates[i]) if i < len(keys) and keys[i] == k else None


def nonreserved_rate(stack: StackedResource, sustained_adjust: bool, unit: int, slot: int,
                     catalog: PricingCatalog | None = None) -> float:
    """Cheapest non-reserved rate for stacked unit `unit` (1-based) in `slot`.

    With `sustained_adjust`, the unit may instead run on-demand at its
    sustained-use rate, computed as if all demand billed on-demand.
    """
    catalog = catalog or default_catalog()
    rate = stack.unit_rate(unit, slot, catalog.on_demand)
    if sustained_adjust:
        s = stack.sustained_rate(unit, slot, catalog)
        if s is not None:
            rate = min(rate, s)
    return rate


def stack_resources(trace: JobTrace, profile: ProviderProfile, catalog: PricingCatalog | None = None,
                    slot_hours: float = 1.0, mode: str | None = None) -> list:
    """StackedResource per priced resource (one bundle stack in typed mode)."""
    catalog = catalog or default_catalog()
    start, n_slots = slot_grid(trace.horizon, slot_hours)
    choice, rates = job_rates(trace, profile, catalog)
    return [StackedResource(name, w, amounts, rates, choice, trace, start, n_slots, slot_hours)
            for name, w, amounts in resource_amounts(trace, profile, catalog, mode or default_mode(profile))]


# -- sustained use -------------------------------------------------------------

def month_slots(slot_hours: float) -> int:
    return max(1, int(round(MONTH_HOURS / slot_hours)))


def sustained_unit_rates(unit, slot, usage, slot_hours, catalog):
    """Per-record sustained-use rate if every unit's usage billed on-demand.

    Within a month, usage is packed bottom unit first onto whole-month
    resources, so a unit used all month by itself pays the full-month rate.
    """
    ms = month_slots(slot_hours)
    month = slot // ms
    n_units = int(unit.max()) + 1 if len(unit) else 0
    n_months = int(month.max()) + 1 if len(month) else 0
    if n_units == 0:
        return np.zeros(0)
    F = np.bincount(unit * n_months + month, weights=usage, minlength=n_units * n_months)
    F = F.reshape(n_units, n_months) / ms
    S = np.cumsum(F, axis=0)
    C = packed_sustained_cost(S, catalog)
    dC = np.diff(np.vstack([np.zeros((1, n_months)), C]), axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        rate = np.where(F > 0, dC / F, catalog.on_demand)
    return rate[unit, month]


def sustained_split(pool_mass_by_month, slot_hours, catalog):
    """Bill on-demand usage per month ex post; returns (on-demand part, sustained part) cost and hours.

    All values in unit-slot terms (multiply by slot_hours for hours).
    """
    ms = month_slots(slot_hours)
    A = np.asarray(pool_mass_by_month, dtype=float) / ms
    whole = np.floor(A)
    frac = A - whole
    first_tier = np.minimum(frac, catalog.sustained_tiers[0][0])
    bill = packed_sustained_cost(A, catalog)
    od_cost = first_tier * ms * catalog.on_demand
    sus_cost = (bill * ms) - od_cost
    od_mass = first_tier * ms
    sus_mass = (whole + frac - first_tier) * ms
    return od_cost, sus_cost, od_mass, sus_mass, A, bill * ms


# -- reservations --------------------------------------------------------------

@dataclass(frozen=True)
class Reservation:
    term: str
    start_slot: int
    length_slots: int
    unit: int = 0
    resource: str = ""
    savings: float = 0.0


def term_slots(term: str, slot_hours: float) -> int:
    return int(round(TERM_YEARS[term] * HOURS_PER_YEAR / slot_hours))


def window_starts(n_slots: int, length: int, step: int) -> np.ndarray:
    if length > n_slots:
        return np.zeros(0, dtype=np.int64)
    starts = np.arange(0, n_slots - length + 1, step, dtype=np.int64)
    if starts[-1] != n_slots - length:
        starts = np.append(starts, n_slots - length)
    return starts


def _best_windows(cands):
    """cands: list of (start, length, savings, term). Best disjoint subset."""
    if not cands:
        return 0.0, []
    value, idx = weighted_interval_schedule([(s, s + L, v) for s, L, v, _ in cands])
    return value, [cands[i] for i in idx]


def commit_reservations(cost_series, catalog: PricingCatalog | None = None,
                        terms=(RESERVED_1Y, RESERVED_3Y), window_step_slots: int = 168,
                        slot_hours: float = 1.0) -> list[Reservation]:
    """Reservation windows for one stacked unit.

    `cost_series[t]` is what the unit's used mass in slot t costs without a
    reservation. A term starting at a step-grid slot is worth buying when its
    price (rate x length) is below the non-reserved cost it displaces; among
    worthwhile windows of all terms, the disjoint set with the largest total
    saving is chosen, so a 3-year term is weighed against both 1-year terms
    and staying non-reserved.
    """
    catalog = catalog or default_catalog()
    cost = np.asarray(cost_series, dtype=float)
    n = len(cost)
    prefix = np.concatenate([[0.0], np.cumsum(cost)])
    cands = []
    for term in terms:
        W = term_slots(term, slot_hours)
        starts = window_starts(n, W, window_step_slots)
        sav = prefix[starts + W] - prefix[starts] - catalog.term_rate(term) * W
        cands += [(int(s), W, float(v), term) for s, v in zip(starts, sav) if v > 0]
    _, chosen = _best_windows(cands)
    return [Reservation(term, s, L, savings=v) for s, L, v, term in sorted(chosen)]


def _window_sums(keys, prefix, units, n_slots, starts, length):
    base = units[:, None] * n_slots + starts[None, :]
    lo = np.searchsorted(keys, base)
    hi = np.searchsorted(keys, base + length)
    return prefix[hi] - prefix[lo]


def _reservation_candidates(keys, cost, units, n_slots, catalog, terms, step, slot_hours):
    """Windows with positive saving per unit: {unit: [(start, length, saving, term)]}."""
    prefix = np.concatenate([[0.0], np.cumsum(cost)])
    per_unit = {int(u): [] for u in units}
    for term in terms:
        W = term_slots(term, slot_hours)
        starts = window_starts(n_slots, W, step)
        if not len(starts) or not len(units):
            continue
        sav = _window_sums(keys, prefix, units, n_slots, starts, W) - catalog.term_rate(term) * W
        ui, si = np.nonzero(sav > 0)
        for a, b in zip(ui, si):
            per_unit[int(units[a])].append((int(starts[b]), W, float(sav[a, b]), term))
    return per_unit


def _best_per_unit(cands, allowed):
    """{unit: (saving, chosen windows)} using only terms in `allowed`."""
    return {u: _best_windows([c for c in cs if c[3] in allowed]) for u, cs in cands.items()}


def _term_subsets(terms):
    out = []
    for k in range(len(terms), -1, -1):
        out += [frozenset(c) for c in itertools.combinations(terms, k)]
    return out


# -- scheduled reserved overlay -------------------------------------------------

def slot_calendar(start: int, n_slots: int):
    """Hour-of-week (Mon 00:00 = 0), hour-of-month cell (-1 past day 28), weekday flag."""
    t = start + np.arange(n_slots, dtype=np.int64) * 3600
    days = t // 86400
    hour = (t % 86400) // 3600
    dow = (days + 3) % 7  # 1970-01-01 was a Thursday
    dates = days.astype("datetime64[D]")
    dom = (dates - dates.astype("datetime64[M]")).astype(np.int64) + 1
    mcell = np.where(dom <= MONTH_DAYS, (dom - 1) * 24 + hour, -1)
    return dow * 24 + hour, mcell, dow < 5


def _mask_matrix(shells, width):
    M = np.zeros((len(shells), width), dtype=bool)
    for i, s in enumerate(shells):
        M[i, s.cells()] = True
    return M


@dataclass
class _Overlay:
    covered: np.ndarray                      # per record, covered by a kept schedule
    cost_by_unit: dict = field(default_factory=dict)
    chosen: list = field(default_factory=list)  # (unit, block, candidate, cost)


def scheduled_overlay(rec, eff, start, n_slots, catalog, cap=1000) -> _Overlay:
    """Pick scheduled-reserved windows per stacked unit for every full year of hourly slots."""
    unit, slot, usage = rec["unit"], rec["slot"], rec["usage"]
    ov = _Overlay(np.zeros(len(unit), dtype=bool))
    year = int(HOURS_PER_YEAR)
    n_blocks = n_slots // year
    if n_blocks == 0 or not len(unit):
        return ov
    how, mcell, weekday = slot_calendar(start, n_slots)
    slot_rate = np.where(weekday, catalog.scheduled_peak, catalog.scheduled_offpeak)
    week_shells = enumerate_daily(catalog) + enumerate_weekly(catalog)
    month_shells = enumerate_monthly(catalog, cap)
    families = [(week_shells, _mask_matrix(week_shells, 168), how, 168),
                (month_shells, _mask_matrix(month_shells, 24 * MONTH_DAYS), mcell, 24 * MONTH_DAYS)]
    for b in range(n_blocks):
        lo_s, hi_s = b * year, (b + 1) * year
        in_block = (slot >= lo_s) & (slot < hi_s)
        if not in_block.any():
            continue
        r_idx = np.nonzero(in_block)[0]
        units, ui = np.unique(unit[r_idx], return_inverse=True)
        annual_util = np.bincount(ui, weights=usage[r_idx], minlength=len(units)) / year
        ceiling = np.minimum(catalog.reserved_1y / np.maximum(annual_util, 1e-300), 1.0)
        priced = [[] for _ in units]
        for shells, M, cell, width in families:
            if not shells:
                continue
            bs = cell[lo_s:hi_s]
            valid = bs >= 0
            count = np.bincount(bs[valid], minlength=width).astype(float)
            rc = cell[slot[r_idx]]
            ok = rc >= 0
            U = np.bincount(ui[ok] * width + rc[ok], weights=usage[r_idx][ok],
                            minlength=len(units) * width).reshape(len(units), width)
            hours = M @ count
            util = (U @ M.T) / np.maximum(hours, 1)[None, :]
            blended = np.array([s.blended_rate for s in shells])
            annual = np.array([s.annual_hours for s in shells])
            with np.errstate(divide="ignore", invalid="ignore"):
                norm = blended[None, :] / util
            good = (util > 0) & (norm < ceiling[:, None])
            for a, c in zip(*np.nonzero(good)):
                s = shells[c]
                priced[a].append(ScheduleCandidate(
                    s.family, s.days, s.start_hour, s.length_hours, s.annual_hours, s.blended_rate,
                    float(util[a, c]), float(norm[a, c]),
                    float((ceiling[a] - norm[a, c]) * util[a, c] * annual[c])))
        for a, cands in enumerate(priced):
            if not cands:
                continue
            u = int(units[a])
            urec = r_idx[ui == a]
            for cand in select_schedules(cands):
                fam_cell = mcell if cand.family == "monthly" else how
                width = 24 * MONTH_DAYS if cand.family == "monthly" else 168
                member = np.zeros(width + 1, dtype=bool)
                member[cand.cells()] = True
                block_cells = fam_cell[lo_s:hi_s]
                cost = float(slot_rate[lo_s:hi_s][member[block_cells]].sum())
                rc = fam_cell[slot[urec]]
                hit = urec[member[rc]]
                if cost < eff[hit].sum() and not ov.covered[hit].any():
                    ov.covered[hit] = True
                    ov.cost_by_unit[u] = ov.cost_by_unit.get(u, 0.0) + cost
                    ov.chosen.append((u, b, cand, cost))
    return ov


# -- plan ------------------------------------------------------------------------

@dataclass
class ResourcePlan:
    name: str
    weight: float
    demand: np.ndarray
    served: dict                 # option -> per-slot served mass (resource units)
    hours: dict                  # option -> served resource-hours (resource units)
    cost: dict                   # option -> relative cost (resource units x rate x hours)
    reservations: list
    schedules: list
    sustained_months: list

    @property
    def total_cost(self) -> float:
        return float(sum(self.cost.values()))


@dataclass
class AllocationPlan:
    provider: str
    mode: str
    options: tuple
    slot_hours: float
    start: int
    n_slots: int
    trace_id: str
    resources: list
    warnings: list

    def option_hours(self) -> dict:
        """Served bundle-equivalent hours per option."""
        return {o: sum(r.hours.get(o, 0.0) * r.weight for r in self.resources) for o in MIX_OPTIONS}

    def option_cost(self) -> dict:
        return {o: sum(r.cost.get(o, 0.0) * r.weight for r in self.resources) for o in MIX_OPTIONS}

    @property
    def total_cost(self) -> float:
        return float(sum(self.option_cost().values()))

    @property
    def demanded_hours(self) -> float:
        return float(sum(r.demand.sum() * r.weight for r in self.resources) * self.slot_hours)

    def demand_series(self) -> np.ndarray:
        out = np.zeros(self.n_slots)
        for r in self.resources:
            out += r.demand * r.weight
        return out

    def option_series(self) -> dict:
        """Per-slot served bundle-equivalent demand by option (plot-ready)."""
        out = {}
        for o in MIX_OPTIONS:
            s = np.zeros(self.n_slots)
            for r in self.resources:
                if o in r.served:
                    s += r.served[o] * r.weight
            out[o] = s
        return out

    @property
    def reservations(self) -> list:
        return [res for r in self.resources for res in r.reservations]


def resource_amounts(trace: JobTrace, profile: ProviderProfile, catalog: PricingCatalog, mode: str):
    """(name, price weight per unit, per-job amounts) for each stacked resource."""
    if mode == "typed":
        _, _, _, _, rate = match_shapes(profile, catalog, trace.cores, trace.mem_gb)
        return [("bundle", 1.0, rate)]
    if mode != "fractional":
        raise ValueError(f"unknown mode {mode!r}")
    share = catalog.core_price_share
    cores = trace.cores.astype(float)
    mem = trace.mem_gb.astype(float)
    if profile.allows_customized:
        # per job: exact shape at the surcharge, or a standard type if that is cheaper
        k = catalog.customized_surcharge
        sc, sm, _ = standard_shapes(profile, cores, mem)
        frac_rate = k * (cores * share + mem * (1 - share) / 4)
        std_rate = sc * share + sm * (1 - share) / 4
        use_std = std_rate <= frac_rate
        cores = np.where(use_std, sc, k * cores)
        mem = np.where(use_std, sm, k * mem)
    return [("cores", share, cores), ("mem_gb", (1 - share) / 4, mem)]


def _solve_resource(name, weight, amounts, rates, options, trace, profile, catalog, start, n_slots,
                    slot_hours, step, sustained_adjust, schedule_cap, warnings):
    """Cheapest of a small family of plans for one resource.

    With sustained use offered, the ex-post monthly bill of the on-demand
    residual is not the sum of the per-unit rates that drove selection, so
    each plan is billed and the cheapest kept. The family (sustained-adjusted
    selection on/off x every subset of enabled reserved terms) contains the
    plan any smaller option set would produce, so adding options never raises
    the billed total.
    """
    st = StackedResource(name, weight, amounts, rates, options, trace, start, n_slots, slot_hours)
    rec = st.records()
    unit, slot, usage, cost = rec["unit"], rec["slot"], rec["usage"], rec["cost"]
    keys = unit * n_slots + slot
    units = np.unique(unit)

    sustained = profile.offers(SUSTAINED)
    terms = [t for t in (RESERVED_1Y, RESERVED_3Y)
             if profile.offers(t) and term_slots(t, slot_hours) <= n_slots]
    subsets = _term_subsets(terms) if sustained else [frozenset(terms)]
    adjusts = [True, False] if sustained and sustained_adjust and len(unit) else [False]
    scheduled = profile.offers(SCHEDULED)
    if scheduled and slot_hours != 1.0:
        warnings.append("scheduled-reserved skipped: requires 1-hour slots")
        scheduled = False

    best = None
    for adjust in adjusts:
        sust_flag = np.zeros(len(unit), dtype=bool)
        eff = cost
        if adjust:
            sust_cost = sustained_unit_rates(unit, slot, usage, slot_hours, catalog) * usage
            sust_flag = sust_cost < cost
            eff = np.where(sust_flag, sust_cost, cost)
        ov = scheduled_overlay(rec, eff, start, n_slots, catalog, schedule_cap) if scheduled else None
        if ov is not None and not ov.chosen:
            ov = None
        cand_a = _reservation_candidates(keys, eff, units, n_slots, catalog, terms, step, slot_hours)
        if ov is not None:
            eff_b = np.where(ov.covered, 0.0, eff)
            sunits = np.array(sorted(ov.cost_by_unit), dtype=np.int64)
            cand_b = _reservation_candidates(keys, eff_b, sunits, n_slots, catalog, terms, step, slot_hours)
        for allowed in subsets:
            plan_a = _best_per_unit(cand_a, allowed)
            chosen = {u: v[1] for u, v in plan_a.items() if v[1]}
            use_sched = set()
            if ov is not None:
                plan_b = _best_per_unit(cand_b, allowed)
                for u in sunits:
                    u = int(u)
                    lo, hi = np.searchsorted(unit, [u, u + 1])
                    sav_a = plan_a.get(u, (0.0, []))[0]
                    sav_b, win_b = plan_b.get(u, (0.0, []))
                    if ov.cost_by_unit[u] + eff_b[lo:hi].sum() - sav_b < eff[lo:hi].sum() - sav_a:
                        use_sched.add(u)
                        chosen[u] = win_b
            plan = _assign(name, weight, st.demand, rec, keys, sust_flag, ov, chosen, use_sched,
                           sustained, catalog, n_slots, slot_hours)
            if best is None or plan.total_cost < best.total_cost:
                best = plan
    return best


def _assign(name, weight, demand, rec, keys, sust_flag, ov, chosen, use_sched, sustained, catalog,
            n_slots, slot_hours) -> ResourcePlan:
    """Bill one plan: reserved windows, schedules, then the non-reserved residual."""
    unit, slot, usage = rec["unit"], rec["slot"], rec["usage"]
    # 0 non-reserved, 1 reserved-1y, 2 reserved-3y, 3 scheduled
    code = np.zeros(len(unit), dtype=np.int8)
    if use_sched:
        code[ov.covered & np.isin(unit, list(use_sched))] = 3
    reservations = []
    term_code = {RESERVED_1Y: 1, RESERVED_3Y: 2}
    res_cost = {RESERVED_1Y: 0.0, RESERVED_3Y: 0.0}
    for u in sorted(chosen):
        for s, L, v, term in sorted(chosen[u]):
            lo, hi = np.searchsorted(keys, [u * n_slots + s, u * n_slots + s + L])
            seg = code[lo:hi]
            seg[seg == 0] = term_code[term]
            res_cost[term] += catalog.term_rate(term) * L
            reservations.append(Reservation(term, s, L, u, name, v))

    served = {o: np.zeros(n_slots) for o in MIX_OPTIONS}
    hours, costs = {}, {}
    nonres = code == 0
    plain = nonres & ~sust_flag
    for o, opt in enumerate(JOB_OPTION_ORDER):
        if opt == ON_DEMAND:
            continue
        m = rec["opt_mass"][o] * plain
        served[opt] += np.bincount(slot, weights=m, minlength=n_slots)
        hours[opt] = float(m.sum()) * slot_hours
        costs[opt] = float((rec["opt_cost"][o] * plain).sum()) * slot_hours
    od_mass = np.where(sust_flag, usage, rec["opt_mass"][2]) * nonres
    od_series = np.bincount(slot, weights=od_mass, minlength=n_slots)
    sustained_months = []
    if sustained and len(unit):
        ms = month_slots(slot_hours)
        n_months = (n_slots + ms - 1) // ms
        pool = np.bincount(np.arange(n_slots) // ms, weights=od_series, minlength=n_months)
        od_c, sus_c, od_m, sus_m, A, bill = sustained_split(pool, slot_hours, catalog)
        costs[ON_DEMAND] = float(od_c.sum()) * slot_hours
        costs[SUSTAINED] = float(sus_c.sum()) * slot_hours
        hours[ON_DEMAND] = float(od_m.sum()) * slot_hours
        hours[SUSTAINED] = float(sus_m.sum()) * slot_hours
        # split each month's served series proportionally between the two categories
        share = np.where(pool > 0, od_m / np.maximum(pool, 1e-300), 1.0)
        per_slot_share = share[np.arange(n_slots) // ms]
        served[ON_DEMAND] += od_series * per_slot_share
        served[SUSTAINED] += od_series * (1 - per_slot_share)
        sustained_months = [
            {"month": i, "avg_units": float(A[i]), "bill": float(bill[i]) * slot_hours}
            for i in range(n_months)
        ]
    else:
        served[ON_DEMAND] += od_series
        hours[ON_DEMAND] = float(od_mass.sum()) * slot_hours
        costs[ON_DEMAND] = float(od_mass.sum()) * catalog.on_demand * slot_hours
    for term, c in term_code.items():
        m = usage * (code == c)
        served[term] += np.bincount(slot, weights=m, minlength=n_slots)
        hours[term] = float(m.sum()) * slot_hours
        costs[term] = res_cost[term] * slot_hours
    m = usage * (code == 3)
    served[SCHEDULED] += np.bincount(slot, weights=m, minlength=n_slots)
    hours[SCHEDULED] = float(m.sum()) * slot_hours
    costs[SCHEDULED] = 0.0
    schedules = []
    if ov is not None:
        for u, b, cand, c in ov.chosen:
            if u in use_sched:
                schedules.append((u, b, cand))
                costs[SCHEDULED] += c * slot_hours
    return ResourcePlan(name, weight, demand, served, hours, costs, reservations, schedules,
                        sustained_months)


def optimize_offline(trace: JobTrace, profile: ProviderProfile, catalog: PricingCatalog | None = None,
                     options=None, mode: str | None = None, slot_hours: float = 1.0,
                     window_step_slots: int = 168, sustained_adjust: bool = True,
                     schedule_cap: int = 1000):
    """Cheapest option mix under perfect knowledge and divisible demand.

    Returns (AllocationPlan, MixReport).
    """
    from .report import build_mix_report, compute_baselines

    catalog = catalog or default_catalog()
    if options is not None:
        profile = profile.with_options(options)
    mode = mode or default_mode(profile)
    warnings = []
    start, n_slots = slot_grid(trace.horizon, slot_hours)
    reserved_on = [t for t in (RESERVED_1Y, RESERVED_3Y) if profile.offers(t)]
    if len(trace) and reserved_on and all(term_slots(t, slot_hours) > n_slots for t in reserved_on):
        warnings.append("horizon shorter than every reserved term: reserved options skipped")
    if len(trace):
        choice, rates = job_rates(trace, profile, catalog)
    else:
        choice, rates = np.zeros(0, dtype=np.int64), np.zeros(0)
    resources = []
    for name, weight, amounts in resource_amounts(trace, profile, catalog, mode):
        resources.append(_solve_resource(
            name, weight, amounts, rates, choice, trace, profile, catalog, start, n_slots, slot_hours,
            window_step_slots, sustained_adjust, schedule_cap, warnings))
    plan = AllocationPlan(profile.id, mode, tuple(sorted(profile.enabled_options)), slot_hours, start,
                          n_slots, trace.fingerprint, resources, warnings)
    baselines = compute_baselines(trace, profile, catalog, slot_hours)
    return plan, build_mix_report(plan, baselines, catalog)
