import numpy as np
import pytest
from hypothesis import settings

from vmmix.trace import JobRecord, JobTrace

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

H = 3600


def make_trace(rows):
    """rows: (submit_s, runtime_s, cores, mem_gb[, class_key])."""
    return JobTrace([JobRecord(f"j{i}", *r) for i, r in enumerate(rows)])


def random_trace(rng, n=40, span_h=200, max_run_h=30, cores=(1, 2, 3, 4, 8), mpc=(2, 4, 6, 8)):
    rows = []
    for _ in range(n):
        rows.append((int(rng.integers(0, span_h * H)), int(rng.integers(60, max_run_h * H)),
                     int(rng.choice(cores)), float(rng.choice(mpc)) * 1.0))
    rows = [(s, r, c, c * m) for s, r, c, m in rows]
    return make_trace(rows)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    """One pass/fail line per acceptance criterion, taken from record_property('criterion', ...)."""
    lines = []
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            props = dict(getattr(rep, "user_properties", ()))
            if "criterion" in props and (rep.when == "call" or outcome == "error"):
                lines.append((props["criterion"], "PASS" if outcome == "passed" else "FAIL"))
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for name, verdict in sorted(lines, key=lambda x: int(x[0].split()[0])):
        terminalreporter.write_line(f"criterion {name}: {verdict}")
