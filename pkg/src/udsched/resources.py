"""VM catalog, pricing classes, interruption hazards and performance variation."""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

ONE_HOUR = 3600.0


class Pricing(str, enum.Enum):
    RELIABLE = "reliable"
    UNRELIABLE = "unreliable"

    @property
    def short(self) -> str:
        return "R" if self is Pricing.RELIABLE else "U"


class VmState(enum.Enum):
    UNPROVISIONED = "unprovisioned"
    PROVISIONING = "provisioning"
    ACTIVE = "active"
    REVOKED = "revoked"


@dataclass(frozen=True)
class VmType:
    name: str
    vcpus: int
    speed_mips: float
    price_reliable: float
    price_unreliable: float
    p_hourly: float

    def __post_init__(self):
        if self.speed_mips <= 0:
            raise ValueError(f"{self.name}: speed must be positive")
        if not self.price_unreliable < self.price_reliable:
            raise ValueError(f"{self.name}: unreliable price must undercut the reliable one")
        if not 0.0 <= self.p_hourly <= 1.0:
            raise ValueError(f"{self.name}: p_hourly outside [0, 1]")

    def price(self, pricing: Pricing) -> float:
        return self.price_reliable if pricing is Pricing.RELIABLE else self.price_unreliable

    def hazard(self, pricing: Pricing) -> float:
        # on-demand leases are never revoked
        return self.p_hourly if pricing is Pricing.UNRELIABLE else 0.0


@dataclass(frozen=True)
class PoolVm:
    """One leasable slot of the pool: a VM type under one pricing class."""

    vm_id: str
    vm_type: VmType
    pricing: Pricing

    @property
    def speed(self) -> float:
        return self.vm_type.speed_mips

    @property
    def price(self) -> float:
        return self.vm_type.price(self.pricing)

    @property
    def p_hourly(self) -> float:
        return self.vm_type.hazard(self.pricing)

    @property
    def reliable(self) -> bool:
        return self.pricing is Pricing.RELIABLE


@dataclass(frozen=True)
class VmCatalog:
    types: tuple[VmType, ...]
    pool: tuple[PoolVm, ...] = field(init=False)

    def __post_init__(self):
        if not self.types:
            raise ValueError("catalog has no VM types")
        pool = tuple(PoolVm(f"{t.name}:{p.short}", t, p)
                     for t in self.types for p in (Pricing.RELIABLE, Pricing.UNRELIABLE))
        object.__setattr__(self, "pool", pool)

    def vm(self, vm_id: str) -> PoolVm:
        for v in self.pool:
            if v.vm_id == vm_id:
                return v
        raise KeyError(vm_id)

    @property
    def slowest_speed(self) -> float:
        return min(t.speed_mips for t in self.types)

    def without_interruptions(self) -> "VmCatalog":
        return VmCatalog(tuple(replace(t, p_hourly=0.0) for t in self.types))


# (name, vCPUs, reliable $/h, unreliable $/h, hourly interruption probability)
AWS_A1_ROWS = (
    ("a1.medium", 2, 0.0255, 0.005, 0.30),
    ("a1.large", 4, 0.051, 0.0098, 0.28),
    ("a1.xlarge", 8, 0.102, 0.0197, 0.25),
    ("a1.2xlarge", 16, 0.204, 0.0394, 0.22),
    ("a1.4xlarge", 32, 0.408, 0.0788, 0.20),
)


def default_catalog(base_mips: float = 1000.0) -> VmCatalog:
    """The five AWS a1 instance types; speed scales linearly with vCPUs."""
    return VmCatalog(tuple(VmType(name, cpus, cpus * base_mips, pr, pu, p)
                           for name, cpus, pr, pu, p in AWS_A1_ROWS))


def load_catalog(path: str, base_mips: float = 1000.0) -> VmCatalog:
    """Read a catalog CSV with columns name,vcpus,price_reliable,price_unreliable,p_hourly.

    An optional speed_mips column overrides ``vcpus * base_mips``.
    """
    types = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            vcpus = int(row["vcpus"])
            speed = float(row["speed_mips"]) if row.get("speed_mips") else vcpus * base_mips
            types.append(VmType(row["name"].strip(), vcpus, speed, float(row["price_reliable"]),
                                float(row["price_unreliable"]), float(row["p_hourly"])))
    return VmCatalog(tuple(types))


@dataclass
class VmInstance:
    """A single lease of a pool slot."""

    vm: PoolVm
    lease: int
    state: VmState = VmState.UNPROVISIONED
    requested_at: Optional[float] = None
    active_since: Optional[float] = None
    ready_at: float = 0.0
    revoked_at: Optional[float] = None

    @property
    def vm_id(self) -> str:
        return self.vm.vm_id

    @property
    def alive(self) -> bool:
        return self.state in (VmState.PROVISIONING, VmState.ACTIVE)


def exec_time(demand_mi: float, speed_mips: float) -> float:
    if speed_mips <= 0:
        raise ValueError("speed must be positive")
    return demand_mi / speed_mips


def transfer_time(data_mbit: float, same_vm: bool, bandwidth_mbps: float) -> float:
    if bandwidth_mbps <= 0:
        raise ValueError("bandwidth must be positive")
    return 0.0 if same_vm else data_mbit / bandwidth_mbps


def per_slot_hazard(p_hourly: float, slot_seconds: float) -> float:
    """Per-slot interruption probability whose survival over one hour of slots
    equals ``1 - p_hourly``."""
    if not 0.0 <= p_hourly < 1.0:
        raise ValueError("p_hourly must lie in [0, 1); certain loss is the forced one-hour revocation")
    if slot_seconds <= 0:
        raise ValueError("slot length must be positive")
    return -math.expm1(math.log1p(-p_hourly) * slot_seconds / ONE_HOUR)


def slots_until_interruption(rng: np.random.Generator, hazard: float) -> float:
    """Index (1-based) of the first slot whose Bernoulli(hazard) draw fires.

    Equivalent in law to drawing every slot in turn; ``inf`` if hazard is 0.
    """
    if hazard <= 0.0:
        return math.inf
    return int(rng.geometric(hazard))


@dataclass(frozen=True)
class Variation:
    """Truncated-normal slowdown applied to every execution attempt."""

    enabled: bool = True
    mean: float = 0.095
    stdev: float = 0.05
    cap: float = 0.19


def sample_variation(rng, variation: Variation = Variation()) -> float:
    """Multiplier ``1 + delta`` with delta ~ Normal(mean, stdev) resampled into [0, cap]."""
    if not variation.enabled:
        return 1.0
    for _ in range(10_000):
        delta = rng.normal(variation.mean, variation.stdev)
        if 0.0 <= delta <= variation.cap:
            return 1.0 + float(delta)
    raise RuntimeError("variation distribution has negligible mass inside [0, cap]")
