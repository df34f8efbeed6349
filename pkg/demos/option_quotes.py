"""Per-job option quotes: how runtime decides between transient, spot block and on-demand."""
from vmmix.catalog import RevocationModel, default_catalog
from vmmix.costmodel import on_demand_quote, spot_block_quote, transient_quote

cat = default_catalog()
models = {"uniform(24)": RevocationModel.uniform(24), "exponential(48)": RevocationModel.exponential(48)}

print(f"{'hours':>6} {'on-demand':>10} {'spot-block':>11} " + " ".join(f"{k:>16}" for k in models))
for T in (1, 3, 6, 12, 18, 24, 36, 72):
    sb = spot_block_quote(cat, T)
    row = [f"{T:>6}", f"{on_demand_quote(cat, T).effective_rate:>10.3f}",
           f"{sb.effective_rate:>11.3f}" if sb else f"{'-':>11}"]
    row += [f"{transient_quote(cat, m, T).effective_rate:>16.3f}" for m in models.values()]
    print(" ".join(row))

# past 24 h a uniform(24) transient VM is certain to be revoked, so on-demand wins
