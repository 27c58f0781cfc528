"""Traffic described as workload classes, and how filtering functions reshape it.

Each link in a chain carries a mix of one benign class and any number of
attack classes. Per class we track the packet rate and the used bandwidth;
relative shares are always derived from the absolute bandwidths, so filtering
a class never accumulates normalization error along a chain.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

SHARE_TOLERANCE = 1e-9


class TrafficError(Exception):
    """Base class for traffic model errors."""


class UnknownClass(TrafficError):
    """A class id was referenced that the composition does not carry."""


class ClassKind(enum.Enum):
    BENIGN = "benign"
    ATTACK = "attack"


@dataclass(frozen=True)
class TrafficClass:
    """A workload class: the benign baseline or one attack type."""

    id: str
    kind: ClassKind

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("traffic class id must be non-empty")

    @property
    def is_attack(self) -> bool:
        return self.kind is ClassKind.ATTACK


def validate_universe(classes: Sequence[TrafficClass]) -> None:
    """Check scenario-level class constraints: unique ids, exactly one benign class."""
    ids = [c.id for c in classes]
    if len(set(ids)) != len(ids):
        raise ValueError(f"duplicate traffic class ids: {ids}")
    benign = [c for c in classes if c.kind is ClassKind.BENIGN]
    if len(benign) != 1:
        raise ValueError(f"expected exactly one benign class, got {len(benign)}")


@dataclass(frozen=True)
class ClassTraffic:
    """Absolute traffic of one class on one link."""

    class_id: str
    packet_rate: float  # packets/s
    bandwidth: float  # Mbit/s

    def __post_init__(self) -> None:
        if self.packet_rate < 0:
            raise ValueError(f"packet rate must be >= 0, got {self.packet_rate}")
        if self.bandwidth < 0:
            raise ValueError(f"bandwidth must be >= 0, got {self.bandwidth}")


@dataclass(frozen=True)
class TrafficComposition:
    """Per-class traffic on a link.

    The all-zero-bandwidth composition is the designated EMPTY value; it is
    what filtering returns when a drop removes the entire load, so the share
    normalization never divides by zero.
    """

    entries: tuple[ClassTraffic, ...]

    def __post_init__(self) -> None:
        ids = [e.class_id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate class ids in composition: {ids}")

    @classmethod
    def build(cls, traffic: Iterable[tuple[str, float, float]]) -> TrafficComposition:
        """From (class_id, packet_rate, bandwidth) triples."""
        return cls(tuple(ClassTraffic(c, p, b) for c, p, b in traffic))

    @classmethod
    def from_shares(
        cls,
        total_bandwidth: float,
        shares: dict[str, float],
        total_packet_rate: float = 0.0,
    ) -> TrafficComposition:
        """From fractional shares of a total load; packet rate split by the same shares."""
        if total_bandwidth < 0 or total_packet_rate < 0:
            raise ValueError("totals must be >= 0")
        total_share = sum(shares.values())
        if total_bandwidth > 0 and not math.isclose(total_share, 1.0, abs_tol=SHARE_TOLERANCE):
            raise ValueError(f"shares must sum to 1, got {total_share}")
        return cls.build(
            (cid, share * total_packet_rate, share * total_bandwidth)
            for cid, share in shares.items()
        )

    @property
    def class_ids(self) -> tuple[str, ...]:
        return tuple(e.class_id for e in self.entries)

    @property
    def total_bandwidth(self) -> float:
        return sum(e.bandwidth for e in self.entries)

    @property
    def total_packet_rate(self) -> float:
        return sum(e.packet_rate for e in self.entries)

    @property
    def is_empty(self) -> bool:
        return self.total_bandwidth == 0.0

    def entry(self, class_id: str) -> ClassTraffic:
        for e in self.entries:
            if e.class_id == class_id:
                return e
        raise UnknownClass(f"class {class_id!r} not in composition {self.class_ids}")

    def share(self, class_id: str) -> float:
        """Bandwidth share of a class; 0 for every class of the EMPTY composition."""
        e = self.entry(class_id)
        total = self.total_bandwidth
        return e.bandwidth / total if total > 0 else 0.0

    def shares(self) -> dict[str, float]:
        return {e.class_id: self.share(e.class_id) for e in self.entries}


def filter_class(comp: TrafficComposition, dropped: str) -> TrafficComposition:
    """Remove every packet of one class; surviving classes keep their absolute traffic.

    The surviving shares renormalize to old_share / (1 - dropped_share), which
    falls out of keeping absolute bandwidths fixed while the total shrinks.
    Dropping a class that carries all traffic yields the EMPTY composition.
    """
    comp.entry(dropped)  # raises UnknownClass if absent
    return TrafficComposition(
        tuple(
            ClassTraffic(e.class_id, 0.0, 0.0) if e.class_id == dropped else e
            for e in comp.entries
        )
    )


def apply_function(comp: TrafficComposition, spec) -> TrafficComposition:
    """Run traffic through one security function: drop every class it filters.

    Equal to sequentially filtering each class; the drop order does not matter.
    `spec` is a function_model.SecurityFunctionSpec (duck-typed to avoid a cycle).
    """
    out = comp
    for cid in sorted(spec.filtered_classes):
        if cid in comp.class_ids:
            out = filter_class(out, cid)
    return out


def propagate_chain(comp: TrafficComposition, chain) -> list[TrafficComposition]:
    """Feed traffic through an ordered chain of function specs.

    Returns N+1 compositions: the input, then the traffic on each
    inter-function link, ending with the link to the protected service.
    """
    chain = list(chain)
    if not chain:
        raise ValueError("chain must contain at least one function")
    ids = [s.id for s in chain]
    if len(set(ids)) != len(ids):
        raise ValueError(f"duplicate function ids in chain: {ids}")
    links = [comp]
    for spec in chain:
        links.append(apply_function(links[-1], spec))
    return links
