"""Security function performance model: what a function filters and what it costs."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .traffic import TrafficComposition

# Relative slack so ceil() at an exact capacity multiple is not pushed to the
# next instance by float rounding (e.g. 0.3/0.1 -> 3.0000000000000004).
_CEIL_SLACK = 1e-12


@dataclass(frozen=True)
class DemandModel:
    """Resource demand per processed unit: a flat per-packet part plus a size part.

    A real function has at least one positive coefficient; both-zero is allowed
    only for pass-through test functions.
    """

    per_unit_cost: float = 0.0  # demand-units per packet
    per_byte_cost: float = 0.0  # demand-units per byte

    def __post_init__(self) -> None:
        if self.per_unit_cost < 0 or self.per_byte_cost < 0:
            raise ValueError("demand coefficients must be >= 0")


@dataclass(frozen=True)
class SecurityFunctionSpec:
    """One deployable security function group: filtering effect plus capacity."""

    id: str
    display_name: str
    filtered_classes: frozenset[str]
    per_instance_throughput: float  # Mbit/s
    demand: DemandModel = field(default_factory=DemandModel)

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("function id must be non-empty")
        if self.per_instance_throughput <= 0:
            raise ValueError(
                f"per-instance throughput must be > 0, got {self.per_instance_throughput}"
            )
        # filtered_classes may be empty (pass-through test function)
        object.__setattr__(self, "filtered_classes", frozenset(self.filtered_classes))


def instances_required(spec: SecurityFunctionSpec, offered_load: TrafficComposition) -> int:
    """Instances needed to carry the offered (pre-filter) load.

    ceil(total bandwidth / per-instance throughput), but a deployed chain
    position always has at least one instance, even at zero load.
    """
    total = offered_load.total_bandwidth
    if total < 0:
        raise ValueError(f"offered load must be >= 0, got {total}")
    quotient = total / spec.per_instance_throughput
    return max(1, math.ceil(quotient * (1.0 - _CEIL_SLACK)))


def resource_demand(spec: SecurityFunctionSpec, packets: float, byte_count: float) -> float:
    """Abstract demand-units for processing a batch of packets totalling byte_count bytes."""
    if packets < 0 or byte_count < 0:
        raise ValueError("packet and byte counts must be >= 0")
    return packets * spec.demand.per_unit_cost + byte_count * spec.demand.per_byte_cost
