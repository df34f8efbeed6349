"""Acceptance gate: one test per criterion, each tagged for the summary printed at the end of the run."""
import math
import random
import time

import numpy as np
import pytest

from conftest import H, make_trace
from vmmix.catalog import (HOURS_PER_YEAR, ON_DEMAND, PROVIDER_IDS, RESERVED_3Y, TRANSIENT,
                           RevocationModel, default_catalog, provider_profile, revocation_stats,
                           sample_revocation)
from vmmix.cli import run
from vmmix.costmodel import WEEKDAYS, reserved_quote, sustained_tier_cost, transient_quote
from vmmix.offline import optimize_offline
from vmmix.online import SimConfig, simulate
from vmmix.report import compute_baselines
from vmmix.schedopt import DAILY, ScheduleCandidate, select_schedules, total_value
from vmmix.trace import SynthConfig, emit_trace, synth_trace

CAT = default_catalog()
SMALL_YEAR = SynthConfig(years=1.0, jobs_per_hour=20000 / HOURS_PER_YEAR)


@pytest.fixture(scope="module")
def default_trace():
    return synth_trace(SynthConfig(), seed=7)


def test_criterion_01_transient_worked_examples(record_property):
    record_property("criterion", "1 transient worked examples")
    t0 = time.perf_counter()
    q = transient_quote(CAT, RevocationModel.uniform(24), 18.0)
    assert q.expected_cost == pytest.approx(16.875, abs=1e-6)
    assert q.expected_runtime_hours == pytest.approx(24.75, abs=1e-6)
    assert q.normalized_rate == pytest.approx(0.681818, abs=1e-6)
    assert transient_quote(CAT, RevocationModel.uniform(24), 12.0).normalized_rate == pytest.approx(0.58, abs=1e-6)
    assert time.perf_counter() - t0 < 0.1


def test_criterion_02_sustained_tiers(record_property):
    record_property("criterion", "2 sustained tiers")
    assert sustained_tier_cost(1.0, CAT) == 0.70
    for f, rate in ((0.25, 1.0), (0.50, 0.90), (0.75, 0.80)):
        assert abs(sustained_tier_cost(f, CAT) / f - rate) <= 1e-9


def test_criterion_03_reserved_break_even(record_property):
    record_property("criterion", "3 reserved break-even")
    assert reserved_quote(0.60, 0.60) == 1.0
    for term in (CAT.reserved_1y, CAT.reserved_3y):
        for u in np.linspace(0.001, 1.0, 1000):
            assert (reserved_quote(term, u) < 1.0) == (u > term)


def _brute_daily(cands):
    """Exhaustive search over subsets with pairwise-disjoint hour ranges."""
    best = 0.0
    n = len(cands)

    def rec(i, used, value):
        nonlocal best
        if i == n:
            best = max(best, value)
            return
        rec(i + 1, used, value)
        c = cands[i]
        hours = set(range(c.start_hour, c.start_hour + c.length_hours))
        if not hours & used:
            rec(i + 1, used | hours, value + c.value)

    rec(0, frozenset(), 0.0)
    return best


def test_criterion_04_schedule_dp_oracle(record_property):
    record_property("criterion", "4 schedule DP oracle")
    r = random.Random(4)
    t0 = time.perf_counter()
    for _ in range(200):
        cands = []
        for _ in range(r.randint(0, 15)):
            L = r.randint(4, 12)
            s = r.randint(0, 24 - L)
            cands.append(ScheduleCandidate(DAILY, WEEKDAYS, s, L, 365.0 * L, 0.9357, 1.0, 0.9357,
                                           r.randint(1, 5000) / 8.0))
        assert total_value(select_schedules(cands)) == _brute_daily(cands)
    assert time.perf_counter() - t0 < 10


def test_criterion_05_offline_dominance(record_property):
    record_property("criterion", "5 offline dominance suite")
    t0 = time.perf_counter()
    for seed in range(20):
        tr = synth_trace(SMALL_YEAR, seed=seed)
        prof = provider_profile(PROVIDER_IDS[seed % 4])
        base = compute_baselines(tr, prof, CAT)
        bound = min(base.on_demand, base.reserved_peak)

        def cost(opts):
            return optimize_offline(tr, prof, CAT, options=opts)[0].total_cost

        full = cost(prof.enabled_options)
        singles = [frozenset({ON_DEMAND})] + [frozenset({ON_DEMAND, o})
                                              for o in sorted(prof.enabled_options - {ON_DEMAND})]
        for s in singles:
            c = cost(s)
            assert full <= c * (1 + 1e-9), (seed, sorted(s))
            assert c <= bound * (1 + 1e-9), (seed, sorted(s))
        assert full <= cost(prof.enabled_options - {TRANSIENT}) * (1 + 1e-9)
    assert time.perf_counter() - t0 < 300


def test_criterion_06_constant_demand_reserved(record_property):
    record_property("criterion", "6 constant-demand reserved")
    T = 3 * int(HOURS_PER_YEAR) * H
    tr = make_trace([(0, T, 1, 4.0)] * 5)
    for provider in ("aws", "gcp-standard"):
        prof = provider_profile(provider)
        plan, rep = optimize_offline(tr, prof, CAT)
        base = compute_baselines(tr, prof, CAT).on_demand
        assert abs(rep.mix_fractions[RESERVED_3Y] - 1.0) < 1e-12, provider
        assert abs(plan.total_cost - 0.40 * base) <= 1e-6 * base, provider


def test_criterion_07_google_24h_rule(record_property):
    record_property("criterion", "7 Google 24-hour rule")
    tr = synth_trace(SynthConfig(years=0.25, jobs_per_hour=2.0), seed=3)
    long_jobs = tr.runtime_hours > 24
    assert long_jobs.any()
    for provider in ("gcp-standard", "gcp-custom"):
        for seed in range(10):
            res = simulate(tr, provider_profile(provider), CAT, SimConfig(seed=seed, predictor="oracle"))
            opts = np.array([o.option for o in res.jobs])
            assert not np.any((opts == TRANSIENT) & long_jobs), (provider, seed)


def test_criterion_08_simulation_calibration(record_property):
    record_property("criterion", "8 simulation calibration")
    buckets = (1.0, 2.0, 4.0, 6.0, 9.0, 12.0)
    per_bucket = 20000
    total = 0
    for provider, model in (("gcp-standard", RevocationModel.uniform(24)),
                            ("azure", RevocationModel.exponential(48))):
        rows = [(i * 60, int(buckets[i % len(buckets)] * H), 1, 4.0) for i in range(per_bucket * len(buckets))]
        tr = make_trace(rows)
        prof = provider_profile(provider, model)
        res = simulate(tr, prof, CAT, SimConfig(seed=8, predictor="oracle"))
        runtime = tr.runtime_hours
        assigned = np.array([o.option == TRANSIENT for o in res.jobs])
        revoked = np.array([bool(o.revocations) for o in res.jobs])
        assert assigned.all()
        total += int(assigned.sum())
        for T in buckets:
            m = assigned & (runtime == T)
            n, k = int(m.sum()), int(revoked[m].sum())
            R, _ = revocation_stats(model, T)
            assert abs(k - n * R) <= 3 * math.sqrt(n * R * (1 - R)), (provider, T, k, n * R)
        draws = [sample_revocation(model, (8, j.job_id)) for j in tr]
        assert abs(np.mean(draws) / model.mean_hours - 1) < 0.01
    assert total >= 10**5


def test_criterion_09_conservation(record_property):
    record_property("criterion", "9 conservation and accounting")
    for seed in range(3):
        tr = synth_trace(SMALL_YEAR, seed=100 + seed)
        for provider in PROVIDER_IDS:
            prof = provider_profile(provider)
            plan, rep = optimize_offline(tr, prof, CAT)
            billed = sum(plan.option_hours().values())
            assert abs(billed - plan.demanded_hours) <= 1e-6 * plan.demanded_hours
            assert abs(sum(rep.mix_fractions.values()) - 1) <= 1e-9
            res = simulate(tr, prof, CAT, SimConfig(seed=seed))
            assert res.billed_hours >= res.demanded_hours
            assert abs(sum(res.mix_fractions().values()) - 1) <= 1e-9


def test_criterion_10_qualitative_trends(record_property, default_trace):
    record_property("criterion", "10 qualitative trend reproduction")
    for provider in PROVIDER_IDS:
        prof = provider_profile(provider)
        plan, rep = optimize_offline(default_trace, prof, CAT)
        base = rep.baselines
        assert base["reserved_peak"] > base["on_demand"], provider
        assert plan.total_cost < 0.60 * base["on_demand"], (provider, rep.pct_of_on_demand)
        online = [simulate(default_trace, prof, CAT, SimConfig(seed=s)).total_cost for s in range(10)]
        assert np.mean(online) >= plan.total_cost, provider


def test_criterion_11_performance(record_property):
    record_property("criterion", "11 performance")
    tr = synth_trace(SynthConfig(years=1.0, jobs_per_hour=50000 / HOURS_PER_YEAR), seed=11)
    assert abs(len(tr) - 50000) < 1000
    prof = provider_profile("aws")
    t0 = time.perf_counter()
    optimize_offline(tr, prof, CAT)
    t1 = time.perf_counter()
    simulate(tr, prof, CAT)
    t2 = time.perf_counter()
    assert t1 - t0 < 60 and t2 - t1 < 60, (t1 - t0, t2 - t1)


def test_criterion_12_determinism(record_property, tmp_path):
    record_property("criterion", "12 determinism")
    trace = tmp_path / "t.csv"
    trace.write_text(emit_trace(synth_trace(SMALL_YEAR, seed=12)))
    providers = [a for p in PROVIDER_IDS for a in ("--provider", p)]
    for cmd in (["offline"], ["simulate", "--seed", "5"]):
        outs = []
        for i, workers in enumerate((1, 1, 4)):
            out = tmp_path / f"{cmd[0]}{i}.json"
            assert run(cmd + ["--trace", str(trace), *providers, "--workers", str(workers), "--out", str(out)]) == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1] == outs[2]
