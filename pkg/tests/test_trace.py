import numpy as np
import pytest
from hypothesis import given, strategies as st

from vmmix.trace import (CATEGORY_NAMES, DemandSeries, JobRecord, JobTrace, SynthConfig, TraceError, build_demand,
                         emit_trace, parse_trace, synth_trace, trace_stats, unit_utilization, utilization_cdf)

from conftest import H, make_trace, random_trace

HEADER = "job_id,submit_time,runtime_seconds,cores,mem_gb,class\n"


def test_parse_header_only():
    t = parse_trace(HEADER)
    assert len(t) == 0 and t.horizon == (0, 0)


def test_parse_one_row():
    t = parse_trace(HEADER + "j1,0,7200,2,8,grpA\n")
    assert len(t) == 1
    j = t.jobs[0]
    assert (j.cores, j.runtime_hours, j.mem_gb, j.class_key) == (2, 2.0, 8.0, "grpA")


@pytest.mark.parametrize("body, line", [
    ("j1,0,7200,0,8,a\n", "line 2"),
    ("j1,0,7200,1,8,a\nj2,0,-5,1,8,a\n", "line 3"),
    ("j1,0,abc,1,8,a\n", "line 2"),
    ("j1,0,7200,1,0,a\n", "line 2"),
    ("j1,0,7200\n", "line 2"),
])
def test_parse_errors(body, line):
    with pytest.raises(TraceError, match=line):
        parse_trace(HEADER + body)


def test_parse_missing_column():
    with pytest.raises(TraceError, match="missing"):
        parse_trace("job_id,submit_time\n")


def test_duplicate_ids_rejected():
    with pytest.raises(TraceError, match="duplicate"):
        parse_trace(HEADER + "a,0,10,1,4,\na,5,10,1,4,\n")


def test_sorted_by_submit():
    t = parse_trace(HEADER + "b,50,10,1,4,\na,10,10,1,4,\n")
    assert [j.job_id for j in t] == ["a", "b"]
    assert t.horizon == (10, 60)


def test_build_demand_examples():
    t = make_trace([(0, 2 * H, 1, 4.0)])
    assert list(build_demand(t, 1.0).values) == [1.0, 1.0]
    t = make_trace([(H // 2, H, 1, 4.0)])
    d = build_demand(t, 1.0)
    assert d.start == 0
    assert list(d.values) == [0.5, 0.5]


def brute_force_demand(trace, slot_s):
    start = (trace.horizon[0] // slot_s) * slot_s
    n = -(-(trace.horizon[1] - start) // slot_s)
    acc = np.zeros(n)
    for j in trace:
        for s in range(j.submit_time, j.submit_time + j.runtime_seconds):
            acc[(s - start) // slot_s] += j.cores
    return acc / slot_s


def test_build_demand_per_second_oracle(rng):
    t = random_trace(rng, n=50, span_h=30, max_run_h=6)
    d = build_demand(t, 1.0)
    assert np.allclose(d.values, brute_force_demand(t, H), atol=1e-9)
    d2 = build_demand(t, 0.5)
    assert np.allclose(d2.values, brute_force_demand(t, H // 2), atol=1e-9)


@given(st.integers(0, 10**6), st.sampled_from([0.25, 1.0, 3.0]))
def test_demand_conservation_and_order_invariance(seed, slot):
    rng = np.random.default_rng(seed)
    t = random_trace(rng, n=30)
    d = build_demand(t, slot)
    expect = float(np.sum(t.cores * t.runtime_hours))
    assert d.values.sum() * slot == pytest.approx(expect, rel=1e-9)
    jobs = list(t.jobs)
    rng.shuffle(jobs)
    assert np.array_equal(build_demand(JobTrace(jobs), slot).values, d.values)
    mem = build_demand(t, slot, "mem_gb")
    assert mem.values.sum() * slot == pytest.approx(float(np.sum(t.mem_gb * t.runtime_hours)), rel=1e-9)


def series(values):
    return DemandSeries("cores", 1.0, 0, np.asarray(values, dtype=float))


def test_utilization_examples():
    cdf = utilization_cdf(series([5.0] * 7))
    assert [cdf(u) for u in range(1, 7)] == [1, 1, 1, 1, 1, 0]
    cdf = utilization_cdf(series([0, 10] * 6))
    assert all(cdf(u) == 0.5 for u in range(1, 11)) and cdf(11) == 0
    assert cdf.largest_unit_with(0.6) == 0 and cdf.largest_unit_with(0.4) == 10
    with pytest.raises(ValueError):
        utilization_cdf(series([1, 2]), (1, 1))


def test_utilization_dense_oracle(rng):
    v = rng.gamma(2.0, 3.0, size=100)
    peak = int(np.ceil(v.max()))
    dense = np.array([np.mean(np.clip(v - (u - 1), 0, 1)) for u in range(1, peak + 1)])
    assert np.allclose(unit_utilization(v), dense, atol=1e-12)
    w = utilization_cdf(series(v), (10, 60))
    dense_w = [np.mean(np.clip(v[10:60] - (u - 1), 0, 1)) for u in range(1, len(w.util) + 1)]
    assert np.allclose(w.util, dense_w, atol=1e-12)


@given(st.lists(st.floats(0, 50), min_size=1, max_size=80))
def test_utilization_properties(vals):
    v = np.array(vals)
    u = unit_utilization(v)
    assert u.sum() == pytest.approx(v.mean(), rel=1e-9, abs=1e-12)
    assert np.all(np.diff(u) <= 1e-12)
    assert np.all(u <= 1 + 1e-12)


def test_synth_rate_zero_and_determinism():
    assert len(synth_trace(SynthConfig(years=0.1, jobs_per_hour=0), seed=1)) == 0
    cfg = SynthConfig(years=0.05)
    assert synth_trace(cfg, 3) == synth_trace(cfg, 3)
    assert synth_trace(cfg, 3) != synth_trace(cfg, 4)


def test_synth_invalid_config():
    with pytest.raises(ValueError):
        synth_trace(SynthConfig(years=0))
    with pytest.raises(ValueError):
        synth_trace(SynthConfig(diurnal_amplitude=1.5))


def test_synth_category_shares():
    t = synth_trace(SynthConfig(years=1), seed=7)
    s = trace_stats(t)
    jobs = np.cumsum([s.job_share[k] for k in CATEGORY_NAMES])[:3] * 100
    cpu = np.cumsum([s.cpu_hour_share[k] for k in CATEGORY_NAMES])[:3] * 100
    assert np.all(np.abs(jobs - [96, 99, 99.9]) <= 3)
    assert np.all(np.abs(cpu - [25, 52, 82]) <= 3)
    assert s.peak_to_mean > 1.67


def test_synth_round_trip():
    t = synth_trace(SynthConfig(years=0.05), seed=11)
    assert parse_trace(emit_trace(t)) == t


def test_trace_stats_examples():
    s = trace_stats(JobTrace([]))
    assert all(v == 0 for v in s.job_share.values()) and s.n_jobs == 0
    t = make_trace([(0, H, 1, 4.0), (0, 100 * H, 1, 4.0)])
    s = trace_stats(t)
    assert [s.job_share[k] for k in CATEGORY_NAMES] == [0.5, 0, 0, 0.5]
    assert s.cpu_hour_share["<=6h"] == pytest.approx(1 / 101)
    assert s.cpu_hour_share[">96h"] == pytest.approx(100 / 101)
    assert sum(s.cpu_hour_share.values()) == pytest.approx(1.0)
    assert s.peak_cores >= s.mean_cores


def test_job_record_validation():
    with pytest.raises(TraceError):
        JobTrace([JobRecord("a", 0, 0, 1, 4.0)])
