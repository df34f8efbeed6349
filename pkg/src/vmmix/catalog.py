"""Pricing constants, provider profiles, VM menus and transient revocation models.

All rates are relative to the on-demand price of one 1-core/4-GB bundle per hour.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass

import numpy as np

ON_DEMAND = "on-demand"
RESERVED_1Y = "reserved-1y"
RESERVED_3Y = "reserved-3y"
TRANSIENT = "transient"
SPOT_BLOCK = "spot-block"
SUSTAINED = "sustained-use"
SCHEDULED = "scheduled-reserved"

ALL_OPTIONS = (ON_DEMAND, RESERVED_1Y, RESERVED_3Y, TRANSIENT, SPOT_BLOCK,
               SUSTAINED, SCHEDULED)

HOURS_PER_YEAR = 8760.0


class CatalogError(ValueError):
    pass


@dataclass(frozen=True)
class PricingCatalog:
    on_demand: float = 1.0
    reserved_1y: float = 0.60
    reserved_3y: float = 0.40
    transient: float = 0.30
    spot_block_base: float = 0.55
    spot_block_step: float = 0.03
    spot_block_max_hours: int = 6
    scheduled_peak: float = 0.95
    scheduled_offpeak: float = 0.90
    scheduled_min_hours_per_year: int = 1200
    sustained_tiers: tuple = ((0.25, 1.00), (0.50, 0.80), (0.75, 0.60), (1.00, 0.40))
    customized_surcharge: float = 1.05
    base_dollar_rate: float = 0.0481
    core_price_share: float = 0.75

    def __post_init__(self):
        tiers = tuple((float(b), float(p)) for b, p in self.sustained_tiers)
        object.__setattr__(self, "sustained_tiers", tiers)
        validate_catalog(self)

    def spot_block_rate(self, block_hours: int) -> float:
        return self.spot_block_base + self.spot_block_step * (block_hours - 1)

    def term_rate(self, option: str) -> float:
        return {RESERVED_1Y: self.reserved_1y, RESERVED_3Y: self.reserved_3y}[option]

    def full_month_sustained_rate(self) -> float:
        """Pay fraction for a resource used the entire month (0.70 with defaults)."""
        total, prev = 0.0, 0.0
        for brk, pay in self.sustained_tiers:
            total += (brk - prev) * pay
            prev = brk
        return total


def validate_catalog(cat: PricingCatalog) -> None:
    rates = {
        "on_demand": cat.on_demand,
        "reserved_1y": cat.reserved_1y,
        "reserved_3y": cat.reserved_3y,
        "transient": cat.transient,
        "spot_block_base": cat.spot_block_base,
        "scheduled_peak": cat.scheduled_peak,
        "scheduled_offpeak": cat.scheduled_offpeak,
        "customized_surcharge": cat.customized_surcharge,
    }
    for name, value in rates.items():
        if not value > 0:
            raise CatalogError(f"invariant violated: {name} must be > 0 (got {value})")
    if cat.on_demand != 1.0:
        raise CatalogError("invariant violated: on_demand is the 1.0 reference rate")
    for name in ("reserved_1y", "reserved_3y", "transient", "spot_block_base",
                 "scheduled_peak", "scheduled_offpeak"):
        if rates[name] > 1.0:
            raise CatalogError(f"invariant violated: discounted rate {name} must be <= 1.0")
    if not cat.reserved_3y <= cat.reserved_1y <= cat.on_demand:
        raise CatalogError("invariant violated: reserved_3y <= reserved_1y <= on_demand")
    if cat.spot_block_step < 0:
        raise CatalogError("invariant violated: spot_block_step must be >= 0")
    if int(cat.spot_block_max_hours) != cat.spot_block_max_hours or cat.spot_block_max_hours < 1:
        raise CatalogError("invariant violated: spot_block_max_hours must be a positive integer")
    if cat.spot_block_rate(cat.spot_block_max_hours) > 1.0:
        raise CatalogError("invariant violated: longest spot block rate must be <= 1.0")
    if cat.scheduled_min_hours_per_year <= 0:
        raise CatalogError("invariant violated: scheduled_min_hours_per_year must be > 0")
    tiers = cat.sustained_tiers
    if not tiers:
        raise CatalogError("invariant violated: sustained_tiers must be non-empty")
    brks = [b for b, _ in tiers]
    pays = [p for _, p in tiers]
    if any(b2 <= b1 for b1, b2 in zip([0.0] + brks, brks)):
        raise CatalogError("invariant violated: sustained tier breakpoints must be strictly increasing")
    if not math.isclose(brks[-1], 1.0):
        raise CatalogError("invariant violated: sustained tier breakpoints must end at 1.00")
    if any(p2 > p1 for p1, p2 in zip(pays, pays[1:])) or pays[0] > 1.0 or pays[-1] <= 0:
        raise CatalogError("invariant violated: sustained pay-fractions must be non-increasing in (0, 1]")
    if cat.base_dollar_rate <= 0:
        raise CatalogError("invariant violated: base_dollar_rate must be > 0")
    if not 0.0 < cat.core_price_share < 1.0:
        raise CatalogError("invariant violated: core_price_share must be in (0, 1)")


def default_catalog() -> PricingCatalog:
    return PricingCatalog()


_CATALOG_FIELDS = {f.name: f for f in dataclasses.fields(PricingCatalog)}

# Top-level config sections owned by other modules; ignored here.
_FOREIGN_SECTIONS = ("simulation", "revocation")


def load_catalog(config_text: str) -> PricingCatalog:
    """Build a catalog from a flat JSON document of field overrides.

    An empty (or whitespace-only) document yields the defaults.
    """
    if not config_text.strip():
        return default_catalog()
    try:
        doc = json.loads(config_text)
    except json.JSONDecodeError as exc:
        raise CatalogError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise CatalogError("config document must be a JSON object")
    overrides = {}
    for key, value in doc.items():
        if key in _FOREIGN_SECTIONS:
            continue
        if key not in _CATALOG_FIELDS:
            raise CatalogError(f"unknown catalog key {key!r}")
        if key == "sustained_tiers":
            try:
                value = tuple((float(b), float(p)) for b, p in value)
            except (TypeError, ValueError) as exc:
                raise CatalogError(f"bad value for key 'sustained_tiers': {value!r}") from exc
        elif key in ("spot_block_max_hours", "scheduled_min_hours_per_year"):
            if isinstance(value, bool) or not isinstance(value, (int, float)) or value != int(value):
                raise CatalogError(f"bad value for key {key!r}: expected integer, got {value!r}")
            value = int(value)
        else:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise CatalogError(f"bad value for key {key!r}: expected number, got {value!r}")
            value = float(value)
        overrides[key] = value
    return PricingCatalog(**overrides)


def emit_catalog(cat: PricingCatalog) -> str:
    doc = dataclasses.asdict(cat)
    doc["sustained_tiers"] = [list(t) for t in cat.sustained_tiers]
    return json.dumps(doc, indent=2, sort_keys=True)


# -- revocation ---------------------------------------------------------------

@dataclass(frozen=True)
class RevocationModel:
    """Time-to-revocation distribution of a transient VM.

    kind is "none", "uniform" (param = maximum lifetime in hours) or
    "exponential" (param = mean hours).
    """
    kind: str = "none"
    param: float = 0.0

    def __post_init__(self):
        if self.kind not in ("none", "uniform", "exponential"):
            raise CatalogError(f"unknown revocation model {self.kind!r}")
        if self.kind != "none" and not self.param > 0:
            raise CatalogError(f"{self.kind} revocation parameter must be > 0")

    @classmethod
    def none(cls) -> "RevocationModel":
        return cls("none", 0.0)

    @classmethod
    def uniform(cls, max_hours: float) -> "RevocationModel":
        return cls("uniform", float(max_hours))

    @classmethod
    def exponential(cls, mean_hours: float) -> "RevocationModel":
        return cls("exponential", float(mean_hours))

    @property
    def mean_hours(self) -> float:
        if self.kind == "uniform":
            return self.param / 2.0
        if self.kind == "exponential":
            return self.param
        return math.inf


def revocation_stats(model: RevocationModel, runtime_hours):
    """Return (probability of revocation before runtime T, mean runtime given revoked).

    Works elementwise on numpy arrays as well as scalars.
    """
    T = np.asarray(runtime_hours, dtype=float)
    if np.any(~(T > 0)):
        raise ValueError("runtime_hours must be > 0")
    if model.kind == "none":
        prob = np.zeros_like(T)
        cond = np.zeros_like(T)
    elif model.kind == "uniform":
        L = model.param
        prob = np.minimum(T / L, 1.0)
        cond = np.minimum(T, L) / 2.0
    else:
        m = model.param
        x = T / m
        prob = -np.expm1(-x)
        # m - T e^{-x} / (1 - e^{-x}); series form for tiny x avoids cancellation
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            big = m - T / np.expm1(x)
        small = T / 2.0 - T * x / 12.0 + T * x**3 / 720.0
        cond = np.where(x < 1e-4, small, big)
    if prob.ndim == 0:
        return float(prob), float(cond)
    return prob, cond


def _stream_uniform(seed: int, job_id: str) -> float:
    digest = hashlib.blake2b(f"{seed}\x1f{job_id}".encode(), digest_size=8).digest()
    # 53 random bits, shifted into the open interval (0, 1)
    return ((int.from_bytes(digest, "little") >> 11) + 0.5) / 9007199254740992.0


def sample_revocation(model: RevocationModel, stream_key) -> float:
    """Time-to-revocation in hours for one (seed, job_id) key; math.inf means never."""
    seed, job_id = stream_key
    if model.kind == "none":
        return math.inf
    u = _stream_uniform(int(seed), str(job_id))
    if model.kind == "uniform":
        return u * model.param
    return -model.param * math.log1p(-u)


# -- VM types and providers ---------------------------------------------------

@dataclass(frozen=True)
class VmType:
    cores: int
    mem_gb: float

    def __post_init__(self):
        if self.cores < 1 or not self.mem_gb > 0:
            raise CatalogError("VmType needs cores >= 1 and mem_gb > 0")


DEFAULT_VM_TYPES = tuple(VmType(c, 4.0 * c) for c in (1, 2, 4, 8, 16, 32, 64))

PROVIDER_IDS = ("aws", "azure", "gcp-standard", "gcp-custom")

_BASE_OPTIONS = frozenset({ON_DEMAND, RESERVED_1Y, RESERVED_3Y, TRANSIENT})
_PROVIDER_OPTIONS = {
    "aws": _BASE_OPTIONS | {SPOT_BLOCK, SCHEDULED},
    "azure": _BASE_OPTIONS,
    "gcp-standard": _BASE_OPTIONS | {SUSTAINED},
    "gcp-custom": _BASE_OPTIONS | {SUSTAINED},
}


@dataclass(frozen=True)
class ProviderProfile:
    id: str
    enabled_options: frozenset
    revocation: RevocationModel
    vm_types: tuple = DEFAULT_VM_TYPES
    allows_customized: bool = False
    customized_max_gb_per_core: float = 6.5
    sustained_use: bool = False

    def with_options(self, options) -> "ProviderProfile":
        options = frozenset(options)
        extra = options - _PROVIDER_OPTIONS[self.id]
        if extra:
            raise CatalogError(f"options {sorted(extra)} not offered by {self.id}")
        if ON_DEMAND not in options:
            raise CatalogError("on-demand cannot be disabled")
        return dataclasses.replace(self, enabled_options=options,
                                   sustained_use=SUSTAINED in options)

    def without(self, *names) -> "ProviderProfile":
        return self.with_options(self.enabled_options - expand_option_names(names))

    def offers(self, option: str) -> bool:
        return option in self.enabled_options


def expand_option_names(names) -> frozenset:
    """Map user-facing option names to tags; "reserved" means both terms."""
    out = set()
    for name in names:
        if name == "reserved":
            out |= {RESERVED_1Y, RESERVED_3Y}
        elif name in ALL_OPTIONS:
            out.add(name)
        else:
            raise CatalogError(f"unknown option {name!r}")
    return frozenset(out)


def provider_profile(provider_id: str, revocation: RevocationModel | None = None) -> ProviderProfile:
    if provider_id not in PROVIDER_IDS:
        raise CatalogError(f"unknown provider {provider_id!r}; expected one of {PROVIDER_IDS}")
    gcp = provider_id.startswith("gcp")
    if revocation is None:
        revocation = RevocationModel.uniform(24.0) if gcp else RevocationModel.exponential(48.0)
    return ProviderProfile(
        id=provider_id,
        enabled_options=_PROVIDER_OPTIONS[provider_id],
        revocation=revocation,
        allows_customized=provider_id == "gcp-custom",
        sustained_use=gcp,
    )


def rate_for_shape(catalog: PricingCatalog, cores, mem_gb, customized: bool = False):
    """On-demand rate of a (cores, mem_gb) shape in 1-core/4-GB bundle units."""
    share = catalog.core_price_share
    rate = np.asarray(cores, dtype=float) * share + np.asarray(mem_gb, dtype=float) * (1.0 - share) / 4.0
    if customized:
        rate = rate * catalog.customized_surcharge
    return float(rate) if np.ndim(rate) == 0 else rate
