"""Scheduled-reserved candidate enumeration and selection."""
from __future__ import annotations

import bisect
import itertools
import math
from dataclasses import dataclass, replace

from .catalog import PricingCatalog
from .costmodel import WEEKDAYS, scheduled_blended_rate

DAILY, WEEKLY, MONTHLY = "daily", "weekly", "monthly"
MONTH_DAYS = 28  # days 29-31 are absent from some months, so monthly schedules never use them


@dataclass(frozen=True)
class ScheduleCandidate:
    family: str
    days: tuple          # weekday names (daily/weekly) or day-of-month ints (monthly)
    start_hour: int
    length_hours: int
    annual_hours: float
    blended_rate: float
    utilization: float | None = None
    normalized_rate: float | None = None
    value: float | None = None

    @property
    def end_hour(self) -> int:
        return self.start_hour + self.length_hours

    def hour_mask(self) -> int:
        return ((1 << self.length_hours) - 1) << self.start_hour

    def slot_mask(self) -> int:
        """Bitmask of covered hour-of-week (daily/weekly) or hour-of-month (monthly) cells."""
        day_bits = self.hour_mask()
        if self.family == MONTHLY:
            idx = [d - 1 for d in self.days]
        else:
            idx = [WEEKDAYS.index(d) for d in self.days]
        mask = 0
        for i in idx:
            mask |= day_bits << (24 * i)
        return mask

    def cells(self) -> list[int]:
        """Indices of covered cells (same numbering as slot_mask)."""
        base = [d - 1 for d in self.days] if self.family == MONTHLY else [WEEKDAYS.index(d) for d in self.days]
        return [24 * i + h for i in base for h in range(self.start_hour, self.end_hour)]


def conflicts(a: ScheduleCandidate, b: ScheduleCandidate) -> bool:
    """Whether two schedules can ever cover the same hour.

    Monthly and weekday calendars drift against each other over a year, so a
    monthly schedule meets every weekday; mixed pairs conflict when their
    hour-of-day windows intersect.
    """
    if (a.family == MONTHLY) == (b.family == MONTHLY):
        return bool(a.slot_mask() & b.slot_mask())
    return bool(a.hour_mask() & b.hour_mask())


def _min_length(catalog: PricingCatalog, days_per_year: float) -> int:
    return max(1, math.ceil(catalog.scheduled_min_hours_per_year / days_per_year - 1e-9))


def enumerate_daily(catalog: PricingCatalog) -> list[ScheduleCandidate]:
    rate = scheduled_blended_rate(catalog, WEEKDAYS)
    out = []
    for length in range(_min_length(catalog, 365), 25):
        for start in range(0, 25 - length):
            out.append(ScheduleCandidate(DAILY, WEEKDAYS, start, length, 365.0 * length, rate))
    return out


def enumerate_weekly(catalog: PricingCatalog) -> list[ScheduleCandidate]:
    out = []
    for k in range(1, 8):
        lmin = _min_length(catalog, 52 * k)
        if lmin > 24:
            continue
        for days in itertools.combinations(WEEKDAYS, k):
            rate = scheduled_blended_rate(catalog, days)
            for length in range(lmin, 25):
                for start in range(0, 25 - length):
                    out.append(ScheduleCandidate(WEEKLY, days, start, length, 52.0 * k * length, rate))
    return out


def enumerate_monthly(catalog: PricingCatalog, cap: int = 1000) -> list[ScheduleCandidate]:
    """Monthly schedules, largest coverage (days x hours) first, truncated at `cap`.

    Ties in coverage are broken by more days first, then lexicographic day sets,
    then earlier start hour.
    """
    if cap <= 0:
        raise ValueError("cap must be > 0")
    # a day-of-month lands on a weekend ~2/7 of the time
    rate = scheduled_blended_rate(catalog, WEEKDAYS)
    pairs = [(k, L) for k in range(1, MONTH_DAYS + 1) for L in range(1, 25)
             if 12 * k * L >= catalog.scheduled_min_hours_per_year]
    pairs.sort(key=lambda kl: (-kl[0] * kl[1], -kl[0], -kl[1]))
    out = []
    for k, L in pairs:
        for days in itertools.combinations(range(1, MONTH_DAYS + 1), k):
            for start in range(0, 25 - L):
                out.append(ScheduleCandidate(MONTHLY, days, start, L, 12.0 * k * L, rate))
                if len(out) >= cap:
                    return out
    return out


def price_candidates(shells, utilization, competing_rate: float) -> list[ScheduleCandidate]:
    """Attach utilization, normalized rate and value; drop schedules that do not beat
    min(competing_rate, on-demand).

    `utilization` is a sequence aligned with `shells` or a callable on a shell.
    """
    if not competing_rate > 0:
        raise ValueError("competing_rate must be > 0")
    shells = list(shells)
    if callable(utilization):
        utils = [utilization(s) for s in shells]
    else:
        utils = list(utilization)
        if len(utils) != len(shells):
            raise ValueError("utilization must align with shells")
    ceiling = min(competing_rate, 1.0)
    out = []
    for shell, u in zip(shells, utils):
        if not u > 0:
            continue
        rate = shell.blended_rate / u
        if rate >= ceiling:
            continue
        out.append(replace(shell, utilization=float(u), normalized_rate=rate,
                           value=(ceiling - rate) * u * shell.annual_hours))
    return out


def weighted_interval_schedule(intervals):
    """Maximum-weight set of pairwise disjoint half-open intervals.

    `intervals` is a sequence of (start, end, weight). Returns (best total,
    chosen indices in input order). Sort by end, binary-search the last
    compatible predecessor, O(n log n).
    """
    n = len(intervals)
    if n == 0:
        return 0.0, []
    order = sorted(range(n), key=lambda i: (intervals[i][1], intervals[i][0], i))
    ends = [intervals[i][1] for i in order]
    best = [0.0] * (n + 1)
    take = [False] * (n + 1)
    pred = [0] * (n + 1)
    for k in range(1, n + 1):
        s, _, w = intervals[order[k - 1]]
        p = bisect.bisect_right(ends, s, 0, k - 1)
        pred[k] = p
        with_k = best[p] + w
        if with_k > best[k - 1]:
            best[k], take[k] = with_k, True
        else:
            best[k] = best[k - 1]
    chosen = []
    k = n
    while k > 0:
        if take[k]:
            chosen.append(order[k - 1])
            k = pred[k]
        else:
            k -= 1
    return best[n], sorted(chosen)


def select_schedules(candidates) -> list[ScheduleCandidate]:
    """Non-conflicting subset with high total value.

    Daily schedules are intervals on the day, solved exactly. Weekly and
    monthly schedules are then admitted greedily by value per annual hour
    against everything already chosen.
    """
    candidates = [c for c in candidates if c.value is not None and c.value > 0]
    daily = [c for c in candidates if c.family == DAILY]
    others = [c for c in candidates if c.family != DAILY]
    _, idx = weighted_interval_schedule([(c.start_hour, c.end_hour, c.value) for c in daily])
    chosen = [daily[i] for i in idx]
    ranked = sorted(range(len(others)),
                    key=lambda i: (-others[i].value / others[i].annual_hours, i))
    for i in ranked:
        c = others[i]
        if not any(conflicts(c, d) for d in chosen):
            chosen.append(c)
    return chosen


def total_value(chosen) -> float:
    return float(sum(c.value for c in chosen))
