"""Cost-minimizing mixes of cloud VM purchasing options for batch workloads."""
from .catalog import (ALL_OPTIONS, ON_DEMAND, RESERVED_1Y, RESERVED_3Y, SCHEDULED, SPOT_BLOCK, SUSTAINED,
                      TRANSIENT, PricingCatalog, ProviderProfile, RevocationModel, default_catalog,
                      load_catalog, provider_profile, rate_for_shape, revocation_stats, sample_revocation)
from .costmodel import reserved_quote, spot_block_quote, sustained_tier_cost, transient_quote
from .matching import match_vm
from .offline import (AllocationPlan, build_slot_cost_stack, commit_reservations, nonreserved_rate,
                      optimize_offline)
from .online import SimConfig, SimResult, simulate
from .report import MixReport, baseline_on_demand, baseline_reserved_peak, build_mix_report, emit_report
from .trace import JobRecord, JobTrace, SynthConfig, build_demand, parse_trace, synth_trace

__version__ = "0.1.0"
