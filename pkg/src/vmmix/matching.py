"""Mapping job resource requests onto VM shapes."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .catalog import PricingCatalog, ProviderProfile, default_catalog, rate_for_shape


@dataclass(frozen=True)
class VmShape:
    cores: int          # total over all instances
    mem_gb: float       # total over all instances
    customized: bool
    instances: int
    rate: float         # on-demand bundle units per hour


def standard_shapes(profile: ProviderProfile, cores, mem_gb):
    """Smallest menu type that fits each request; oversize requests take several of the largest.

    Returns (cores, mem_gb, instances) arrays.
    """
    cores = np.asarray(cores, dtype=float)
    mem = np.asarray(mem_gb, dtype=float)
    types = sorted(profile.vm_types, key=lambda t: (t.cores, t.mem_gb))
    out_c = np.zeros_like(cores)
    out_m = np.zeros_like(mem)
    done = np.zeros(cores.shape, dtype=bool)
    for t in types:
        fit = ~done & (t.cores >= cores) & (t.mem_gb >= mem)
        out_c[fit], out_m[fit] = t.cores, t.mem_gb
        done |= fit
    inst = np.ones(cores.shape, dtype=np.int64)
    if not done.all():
        big = max(types, key=lambda t: (t.cores, t.mem_gb))
        k = np.maximum(np.ceil(cores[~done] / big.cores), np.ceil(mem[~done] / big.mem_gb)).astype(np.int64)
        out_c[~done], out_m[~done], inst[~done] = k * big.cores, k * big.mem_gb, k
    return out_c, out_m, inst


def custom_cores(profile: ProviderProfile, cores, mem_gb):
    """Even core count (1 stays 1) large enough for the memory-per-core ceiling."""
    cores = np.asarray(cores, dtype=float)
    need = np.maximum(cores, np.ceil(np.asarray(mem_gb, dtype=float) / profile.customized_max_gb_per_core - 1e-12))
    return np.where(need <= 1, 1.0, 2.0 * np.ceil(need / 2.0))


def match_shapes(profile: ProviderProfile, catalog: PricingCatalog, cores, mem_gb):
    """Vectorized matching. Returns (cores, mem_gb, customized, instances, rate) arrays."""
    mem = np.asarray(mem_gb, dtype=float)
    sc, sm, inst = standard_shapes(profile, cores, mem)
    rate = rate_for_shape(catalog, sc, sm)
    custom = np.zeros(sc.shape, dtype=bool)
    if profile.allows_customized:
        cc = custom_cores(profile, cores, mem)
        crate = rate_for_shape(catalog, cc, mem, customized=True)
        custom = crate < rate
        sc = np.where(custom, cc, sc)
        sm = np.where(custom, mem, sm)
        rate = np.where(custom, crate, rate)
        inst = np.where(custom, 1, inst)
    return sc, sm, custom, inst, np.asarray(rate, dtype=float)


def match_vm(profile: ProviderProfile, cores: int, mem_gb: float,
             catalog: PricingCatalog | None = None) -> VmShape:
    if cores < 1 or not mem_gb > 0:
        raise ValueError("cores >= 1 and mem_gb > 0 required")
    cat = catalog or default_catalog()
    c, m, cu, inst, rate = match_shapes(profile, cat, np.array([cores]), np.array([mem_gb]))
    return VmShape(int(c[0]), float(m[0]), bool(cu[0]), int(inst[0]), float(rate[0]))
