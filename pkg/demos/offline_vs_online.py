"""Offline optimum against the online policy on a synthetic year, per provider."""
import sys

from vmmix.catalog import PROVIDER_IDS, TRANSIENT, default_catalog, provider_profile
from vmmix.offline import optimize_offline
from vmmix.online import SimConfig, simulate
from vmmix.report import build_mix_report, compute_baselines
from vmmix.trace import SynthConfig, synth_trace, trace_stats

years = float(sys.argv[1]) if len(sys.argv) > 1 else 1.0
cat = default_catalog()
trace = synth_trace(SynthConfig(years=years, jobs_per_hour=20000 / 8760), seed=7)
st = trace_stats(trace)
print(f"{len(trace)} jobs, peak/mean demand {st.peak_to_mean:.2f}")

for pid in PROVIDER_IDS:
    prof = provider_profile(pid)
    base = compute_baselines(trace, prof, cat)
    _, off = optimize_offline(trace, prof, cat)
    _, off_nt = optimize_offline(trace, prof, cat, options=prof.enabled_options - {TRANSIENT})
    on = build_mix_report(simulate(trace, prof, cat, SimConfig(seed=1)), base, cat)
    mix = ", ".join(f"{o} {f:.0%}" for o, f in off.mix_fractions.items() if f >= 0.005)
    print(f"{pid:>13}: offline {off.pct_of_on_demand:5.1f}%  no-transient {off_nt.pct_of_on_demand:5.1f}%  "
          f"online {on.pct_of_on_demand:5.1f}%  reserved-peak {100 * base.reserved_peak / base.on_demand:5.1f}%")
    print(f"{'':>15}offline mix: {mix}")
