"""Normalized cost of each purchasing option.

Two per-hour measures appear here. `normalized_rate` is expected cost divided
by expected *wall-clock* time including the restart, as in the transient cost
model. `effective_rate` is expected cost per *useful* job-hour; it is what
selection compares, because demand series count each job's actual runtime
once and a billed restart must not look cheaper than the on-demand run it
includes.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .catalog import (ON_DEMAND, SPOT_BLOCK, TRANSIENT, PricingCatalog, ProviderProfile,
                      RevocationModel, revocation_stats)

WEEKDAYS = ("Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun")
WEEKEND = frozenset({"Sat", "Sun"})


@dataclass(frozen=True)
class CostQuote:
    option: str
    normalized_rate: float
    effective_rate: float
    expected_cost: float | None = None
    expected_runtime_hours: float | None = None
    block_hours: int | None = None


def transient_terms(catalog: PricingCatalog, model: RevocationModel, runtime_hours):
    """Expected cost and expected wall-clock time under restart-once-on-demand."""
    T = np.asarray(runtime_hours, dtype=float)
    R, E = revocation_stats(model, T)
    p_t, p_od = catalog.transient, catalog.on_demand
    cost = (1 - R) * p_t * T + R * (p_t * E + p_od * T)
    wall = (1 - R) * T + R * (E + T)
    return cost, wall


def transient_quote(catalog: PricingCatalog, model: RevocationModel, runtime_hours: float) -> CostQuote:
    if not runtime_hours > 0:
        raise ValueError("runtime_hours must be > 0")
    cost, wall = transient_terms(catalog, model, runtime_hours)
    cost, wall = float(cost), float(wall)
    return CostQuote(TRANSIENT, cost / wall, cost / runtime_hours, cost, wall)


def transient_effective_rates(catalog: PricingCatalog, model: RevocationModel, runtime_hours):
    """Vectorized expected cost per useful hour."""
    T = np.asarray(runtime_hours, dtype=float)
    cost, _ = transient_terms(catalog, model, T)
    return cost / T


def spot_block_hours(catalog: PricingCatalog, runtime_hours):
    """Block length for a runtime, or 0 where no block is long enough."""
    b = np.ceil(np.asarray(runtime_hours, dtype=float) - 1e-12).astype(int)
    b = np.maximum(b, 1)
    return np.where(b <= catalog.spot_block_max_hours, b, 0)


def spot_block_quote(catalog: PricingCatalog, runtime_hours: float) -> CostQuote | None:
    """Quote the smallest block covering the runtime; None beyond the longest block."""
    if not runtime_hours > 0:
        raise ValueError("runtime_hours must be > 0")
    b = int(spot_block_hours(catalog, runtime_hours))
    if b == 0:
        return None
    rate = catalog.spot_block_rate(b)
    # early termination: only the held time is paid
    return CostQuote(SPOT_BLOCK, rate, rate, rate * runtime_hours, runtime_hours, b)


def on_demand_quote(catalog: PricingCatalog, runtime_hours: float | None = None) -> CostQuote:
    cost = None if runtime_hours is None else catalog.on_demand * runtime_hours
    return CostQuote(ON_DEMAND, catalog.on_demand, catalog.on_demand, cost, runtime_hours)


def sustained_tier_cost(usage_fraction, catalog: PricingCatalog | None = None):
    """Cost of one resource unit used `usage_fraction` of a month, in full-month on-demand units."""
    f = np.asarray(usage_fraction, dtype=float)
    if np.any((f < 0) | (f > 1)) or np.any(np.isnan(f)):
        raise ValueError("usage fraction must lie in [0, 1]")
    tiers = (catalog or PricingCatalog()).sustained_tiers
    total = np.zeros_like(f)
    prev = 0.0
    for brk, pay in tiers:
        total = total + pay * np.clip(f - prev, 0.0, brk - prev)
        prev = brk
    return float(total) if total.ndim == 0 else total


def sustained_monthly_bill(avg_demand, month_hours: float, catalog: PricingCatalog | None = None):
    """Month bill with usage packed onto whole units: floor units at the full rate, remainder tiered."""
    if not month_hours > 0:
        raise ValueError("month_hours must be > 0")
    A = np.asarray(avg_demand, dtype=float)
    if np.any(A < 0):
        raise ValueError("avg_demand must be >= 0")
    cat = catalog or PricingCatalog()
    whole = np.floor(A)
    bill = (whole * cat.full_month_sustained_rate()
            + sustained_tier_cost(np.clip(A - whole, 0.0, 1.0), cat)) * month_hours
    return float(bill) if np.ndim(bill) == 0 else bill


def packed_sustained_cost(cumulative_mass, catalog: PricingCatalog | None = None):
    """Bill (in full-month units) for the first `cumulative_mass` unit-months of packed usage."""
    x = np.asarray(cumulative_mass, dtype=float)
    cat = catalog or PricingCatalog()
    whole = np.floor(x)
    return whole * cat.full_month_sustained_rate() + sustained_tier_cost(np.clip(x - whole, 0, 1), cat)


def reserved_quote(term_rate: float, utilization: float) -> float | None:
    """Reserved price spread over the hours actually used; None when unused."""
    if not utilization > 0:
        return None
    return term_rate / utilization


def scheduled_blended_rate(catalog: PricingCatalog, day_set) -> float:
    days = set(day_set)
    if not days:
        raise ValueError("day_set must be non-empty")
    unknown = days - set(WEEKDAYS)
    if unknown:
        raise ValueError(f"unknown day names {sorted(unknown)}")
    n_peak = len(days - WEEKEND)
    n_off = len(days & WEEKEND)
    return (n_peak * catalog.scheduled_peak + n_off * catalog.scheduled_offpeak) / (n_peak + n_off)


def job_nonreserved_quotes(job, profile: ProviderProfile, catalog: PricingCatalog) -> list[CostQuote]:
    """Transient, spot-block and on-demand quotes for one job (enabled, applicable ones only)."""
    T = job.runtime_seconds / 3600.0
    quotes = []
    if profile.offers(TRANSIENT):
        quotes.append(transient_quote(catalog, profile.revocation, T))
    if profile.offers(SPOT_BLOCK):
        q = spot_block_quote(catalog, T)
        if q is not None:
            quotes.append(q)
    quotes.append(on_demand_quote(catalog, T))
    return quotes


# deterministic tie-break order among job-level options
JOB_OPTION_ORDER = (TRANSIENT, SPOT_BLOCK, ON_DEMAND)


def cheapest_job_options(runtime_hours, profile: ProviderProfile, catalog: PricingCatalog):
    """Vectorized cheapest job-level option per runtime.

    Returns (option index into JOB_OPTION_ORDER, effective rate, spot block hours).
    """
    T = np.asarray(runtime_hours, dtype=float)
    rates = np.full((3, len(T)), np.inf)
    if profile.offers(TRANSIENT):
        rates[0] = transient_effective_rates(catalog, profile.revocation, T)
    blocks = spot_block_hours(catalog, T)
    if profile.offers(SPOT_BLOCK):
        ok = blocks > 0
        rates[1, ok] = catalog.spot_block_base + catalog.spot_block_step * (blocks[ok] - 1)
    rates[2] = catalog.on_demand
    choice = np.argmin(rates, axis=0)  # first minimum wins ties
    return choice, rates[choice, np.arange(len(T))], blocks
