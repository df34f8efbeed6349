"""Write a plot-ready per-slot series of demand split by option for one provider."""
import sys

from vmmix.catalog import default_catalog, provider_profile
from vmmix.offline import optimize_offline
from vmmix.report import emit_series
from vmmix.trace import SynthConfig, synth_trace

out = sys.argv[1] if len(sys.argv) > 1 else "series.csv"
trace = synth_trace(SynthConfig(years=1.0, jobs_per_hour=1.0), seed=3)
plan, rep = optimize_offline(trace, provider_profile("gcp-standard"), default_catalog(), slot_hours=24.0)
times = [plan.start + i * int(plan.slot_hours * 3600) for i in range(plan.n_slots)]
with open(out, "w") as f:
    f.write(emit_series(times, plan.demand_series(), plan.option_series()))
print(f"{plan.n_slots} daily slots -> {out}; offline cost {rep.pct_of_on_demand:.1f}% of on-demand")
