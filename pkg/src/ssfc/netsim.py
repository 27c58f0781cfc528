"""Simulated SDN data plane chaining security functions in a configurable order.

A single logical switch carries all attachments: an external ingress port, an
in/out port pair per security function, and the protected service port. Flow
rules match on (ingress port, optional epoch stamp) and forward to the next
hop; probes are traced by walking the flow table port by port.

Reconfiguration comes in two flavors:

* ``legacy`` replaces the epoch-agnostic rules in place. In-flight packets
  then complete against a partially or fully mutated table, which is exactly
  what produces the three hazards (drop, duplicate traversal, skip).
* ``epoch_counter`` adds a parallel rule set stamped with an incremented
  counter and switches ingress stamping to it. In-flight packets keep their
  old stamp and finish on the old rules, so a function skip cannot occur.
"""

from __future__ import annotations

import enum
import itertools
import threading
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .clock import LogicalClock
from .evaluator import ChainOrder

EPOCH_MODULUS = 256  # stamp width mirrors a one-byte IP-options counter
EPOCH_RULE_PRIORITY = 200
LEGACY_RULE_PRIORITY = 100
DEFAULT_IDLE_EXPIRY = 30.0  # simulated seconds


class TopologyError(Exception):
    """A chain order references a function the topology does not attach."""


class EpochCollision(Exception):
    """A wrapped epoch stamp would overwrite rules of a still-live epoch."""


class ReconfigMode(enum.Enum):
    LEGACY = "legacy"
    EPOCH_COUNTER = "epoch_counter"


class Outcome(enum.Enum):
    DELIVERED = "delivered"
    DROPPED_NO_FLOW = "dropped_no_flow"
    DROPPED_BY_FUNCTION = "dropped_by_function"


class HazardKind(enum.Enum):
    DROP = "drop"
    DUPLICATE_TRAVERSAL = "duplicate_traversal"
    SKIP = "skip"


@dataclass(frozen=True)
class Hazard:
    kind: HazardKind
    packet_id: str
    detail: str


@dataclass(frozen=True)
class Attachment:
    """Switch ports wiring one security function: egress toward it, ingress back."""

    function_id: str
    to_function_port: int
    from_function_port: int


@dataclass(frozen=True)
class Topology:
    switch: str
    ingress_port: int
    service_port: int
    attachments: tuple[Attachment, ...]

    def __post_init__(self) -> None:
        ports = [self.ingress_port, self.service_port]
        for a in self.attachments:
            ports += [a.to_function_port, a.from_function_port]
        if len(set(ports)) != len(ports):
            raise ValueError(f"overlapping port assignments: {ports}")
        ids = [a.function_id for a in self.attachments]
        if len(set(ids)) != len(ids):
            raise ValueError(f"function attached twice: {ids}")

    @classmethod
    def single_switch(cls, function_ids: Sequence[str], switch: str = "s1") -> Topology:
        attachments = tuple(
            Attachment(fid, to_function_port=10 + 2 * i, from_function_port=11 + 2 * i)
            for i, fid in enumerate(function_ids)
        )
        return cls(switch=switch, ingress_port=1, service_port=2, attachments=attachments)

    def attachment(self, function_id: str) -> Attachment:
        for a in self.attachments:
            if a.function_id == function_id:
                return a
        raise TopologyError(f"function {function_id!r} is not attached to {self.switch}")

    def function_ids(self) -> tuple[str, ...]:
        return tuple(a.function_id for a in self.attachments)


@dataclass
class FlowRule:
    """Match (in_port, epoch) -> forward out_port. epoch=None matches any stamp."""

    in_port: int
    epoch: int | None
    out_port: int
    priority: int
    idle_expiry: float
    last_used: float = field(compare=False, default=0.0)

    def matches(self, in_port: int, stamp: int | None) -> bool:
        if self.in_port != in_port:
            return False
        return self.epoch is None or self.epoch == stamp


@dataclass(frozen=True)
class FlowDelta:
    added: tuple[FlowRule, ...] = ()
    removed: tuple[FlowRule, ...] = ()

    @property
    def empty(self) -> bool:
        return not self.added and not self.removed


@dataclass(frozen=True)
class HopRecord:
    switch: str
    in_port: int
    function_id: str | None  # function the hop forwards toward, None for the service
    out_port: int


@dataclass(frozen=True)
class PacketTrace:
    packet_id: str
    injected_epoch: int | None
    visited: tuple[str, ...]
    outcome: Outcome
    hops: tuple[HopRecord, ...]


@dataclass(frozen=True)
class InFlightPacket:
    """A packet caught mid-chain by a reconfiguration.

    ``at_port`` is the switch ingress port where its next lookup happens;
    ``visited`` are the functions it already traversed under the old rules.
    """

    packet_id: str
    at_port: int
    visited: tuple[str, ...] = ()
    stamp: int | None = None
    traffic_class: str | None = None


# One delta step: ("add", rule) or ("del", rule). Legacy reconfiguration applies
# these one at a time; an interleave index freezes the table mid-sequence.
_DeltaOp = tuple[str, FlowRule]


class Network:
    """Flow tables plus probe tracing for one simulated chain segment.

    Single-writer/multi-reader: rule mutations serialize through one lock,
    walks read a consistent snapshot of the table.
    """

    def __init__(
        self,
        topology: Topology,
        clock: LogicalClock | None = None,
        idle_expiry: float = DEFAULT_IDLE_EXPIRY,
        drop_classes: Mapping[str, Iterable[str]] | None = None,
    ) -> None:
        self.topology = topology
        self.clock = clock or LogicalClock()
        self.idle_expiry = idle_expiry
        self.drop_classes = {fid: set(cls) for fid, cls in (drop_classes or {}).items()}
        self.rules: list[FlowRule] = []
        self.current_epoch: int | None = None  # stamp new ingress packets receive
        self.epoch_orders: dict[int, ChainOrder] = {}
        self.legacy_order: ChainOrder | None = None
        self.hop_log: list[str] = []
        self._lock = threading.Lock()
        self._probe_seq = itertools.count()

    # ------------------------------------------------------------------ rules

    def _desired_rules(self, order: ChainOrder, stamp: int | None) -> list[FlowRule]:
        """The per-port forwarding rules that realize ingress -> chain -> service."""
        for fid in order:
            self.topology.attachment(fid)
        priority = LEGACY_RULE_PRIORITY if stamp is None else EPOCH_RULE_PRIORITY
        now = self.clock.now()
        hops: list[tuple[int, int]] = []
        in_port = self.topology.ingress_port
        for fid in order:
            att = self.topology.attachment(fid)
            hops.append((in_port, att.to_function_port))
            in_port = att.from_function_port
        hops.append((in_port, self.topology.service_port))
        return [
            FlowRule(p_in, stamp, p_out, priority, self.idle_expiry, last_used=now)
            for p_in, p_out in hops
        ]

    def install_order(self, order: ChainOrder, epoch: int | None = None) -> FlowDelta:
        """Install flows so packets stamped with ``epoch`` traverse ``order``.

        epoch=None installs epoch-agnostic (legacy) rules, replacing the
        previous legacy configuration. Stamped installs leave older epochs in
        place until they idle out. Reinstalling an identical configuration is
        a no-op with an empty delta.
        """
        stamp = None if epoch is None else epoch % EPOCH_MODULUS
        with self._lock:
            desired = self._desired_rules(order, stamp)
            existing = [r for r in self.rules if r.epoch == stamp]
            if stamp is not None and existing and self.epoch_orders.get(stamp) != order:
                raise EpochCollision(
                    f"stamp {stamp} still live for order {self.epoch_orders.get(stamp)}"
                )
            added = []
            removed = []
            by_port = {r.in_port: r for r in existing}
            for rule in desired:
                old = by_port.pop(rule.in_port, None)
                if old is not None and old.out_port == rule.out_port:
                    continue
                if old is not None:
                    removed.append(old)
                    self.rules.remove(old)
                added.append(rule)
                self.rules.append(rule)
            for stale in by_port.values():  # ports the new chain no longer uses
                removed.append(stale)
                self.rules.remove(stale)
            if stamp is None:
                self.legacy_order = order
            else:
                self.epoch_orders[stamp] = order
                self.current_epoch = stamp
            return FlowDelta(tuple(added), tuple(removed))

    def expire_flows(self, now: float | None = None) -> int:
        """Drop rules idle past their expiry; the current epoch never expires."""
        now = self.clock.now() if now is None else now
        with self._lock:
            keep: list[FlowRule] = []
            removed = 0
            for r in self.rules:
                stale = (
                    r.epoch is not None
                    and r.epoch != self.current_epoch
                    and now - r.last_used > r.idle_expiry
                )
                if stale:
                    removed += 1
                else:
                    keep.append(r)
            self.rules = keep
            live = {r.epoch for r in self.rules if r.epoch is not None}
            self.epoch_orders = {s: o for s, o in self.epoch_orders.items() if s in live}
            return removed

    def live_epochs(self) -> set[int]:
        with self._lock:
            return {r.epoch for r in self.rules if r.epoch is not None}

    # ------------------------------------------------------------------ walks

    def _lookup(self, rules: list[FlowRule], in_port: int, stamp: int | None) -> FlowRule | None:
        matches = [r for r in rules if r.matches(in_port, stamp)]
        if not matches:
            return None
        return max(matches, key=lambda r: r.priority)

    def _walk(
        self,
        packet_id: str,
        stamp: int | None,
        start_port: int,
        visited: tuple[str, ...],
        traffic_class: str | None,
        rules: list[FlowRule] | None = None,
    ) -> PacketTrace:
        if rules is None:
            with self._lock:
                rules = list(self.rules)
        by_to_port = {a.to_function_port: a for a in self.topology.attachments}
        seen = list(visited)
        hops: list[HopRecord] = []
        port = start_port
        now = self.clock.now()
        max_hops = 4 * max(1, len(self.topology.attachments))
        outcome = Outcome.DROPPED_NO_FLOW  # loop guard default
        for _ in range(max_hops):
            rule = self._lookup(rules, port, stamp)
            if rule is None:
                outcome = Outcome.DROPPED_NO_FLOW
                break
            rule.last_used = now
            att = by_to_port.get(rule.out_port)
            hop = HopRecord(self.topology.switch, port, att.function_id if att else None, rule.out_port)
            hops.append(hop)
            self.hop_log.append(
                f"{packet_id} {stamp if stamp is not None else '-'} "
                f"{hop.switch} {hop.in_port} {hop.function_id or '-'} {hop.out_port}"
            )
            if rule.out_port == self.topology.service_port:
                outcome = Outcome.DELIVERED
                break
            if att is None:
                outcome = Outcome.DROPPED_NO_FLOW  # forwarded into a dead port
                break
            seen.append(att.function_id)
            if traffic_class is not None and traffic_class in self.drop_classes.get(att.function_id, ()):
                outcome = Outcome.DROPPED_BY_FUNCTION
                break
            port = att.from_function_port
        return PacketTrace(packet_id, stamp, tuple(seen), outcome, tuple(hops))

    def inject_probe(
        self,
        stamped_epoch: int | None = None,
        packet_id: str | None = None,
        traffic_class: str | None = None,
    ) -> PacketTrace:
        """Trace one packet from the external ingress to wherever the flows take it.

        With no explicit stamp the ingress switch applies the current epoch
        counter, mirroring the header-rewrite rule on the inbound switch; in
        legacy operation there is no counter and the walk stays unstamped.
        """
        if stamped_epoch is not None:
            stamp = stamped_epoch % EPOCH_MODULUS
        else:
            stamp = self.current_epoch
        pid = packet_id or f"probe-{next(self._probe_seq)}"
        return self._walk(pid, stamp, self.topology.ingress_port, (), traffic_class)

    # -------------------------------------------------------------- reconfig

    def _expected_functions(self, stamp: int | None) -> set[str]:
        if stamp is not None and stamp in self.epoch_orders:
            return set(self.epoch_orders[stamp].function_ids)
        if self.legacy_order is not None:
            return set(self.legacy_order.function_ids)
        return set()

    def hazards_from_trace(self, trace: PacketTrace) -> list[Hazard]:
        """Classify one finished trace against the order its stamp belongs to."""
        hazards: list[Hazard] = []
        repeats = [f for f, n in Counter(trace.visited).items() if n > 1]
        if repeats:
            hazards.append(
                Hazard(HazardKind.DUPLICATE_TRAVERSAL, trace.packet_id, f"revisited {sorted(repeats)}")
            )
        if trace.outcome is Outcome.DROPPED_NO_FLOW:
            hazards.append(Hazard(HazardKind.DROP, trace.packet_id, "no matching flow"))
        expected = self._expected_functions(trace.injected_epoch)
        if trace.outcome is Outcome.DELIVERED:
            missing = expected - set(trace.visited)
            if missing:
                hazards.append(
                    Hazard(HazardKind.SKIP, trace.packet_id, f"delivered without {sorted(missing)}")
                )
        return hazards

    def _legacy_delta_ops(self, new: ChainOrder) -> list[_DeltaOp]:
        desired = self._desired_rules(new, None)
        current = {r.in_port: r for r in self.rules if r.epoch is None}
        ops: list[_DeltaOp] = []
        for rule in sorted(desired, key=lambda r: r.in_port):
            old = current.pop(rule.in_port, None)
            if old is not None and old.out_port == rule.out_port:
                continue
            if old is not None:
                ops.append(("del", old))
            ops.append(("add", rule))
        for stale in sorted(current.values(), key=lambda r: r.in_port):
            ops.append(("del", stale))
        return ops

    def _apply_ops(self, ops: Iterable[_DeltaOp]) -> None:
        for kind, rule in ops:
            if kind == "add":
                self.rules.append(rule)
            else:
                self.rules.remove(rule)

    def reconfigure(
        self,
        old: ChainOrder,
        new: ChainOrder,
        in_flight: Sequence[InFlightPacket] = (),
        mode: ReconfigMode = ReconfigMode.EPOCH_COUNTER,
        interleave: int | None = None,
    ) -> tuple[FlowDelta, list[Hazard]]:
        """Switch the chain from ``old`` to ``new`` with packets still in transit.

        ``interleave`` freezes the rule-update sequence after that many single
        rule operations; the in-flight packets then complete against the frozen
        table before the remaining updates land. The default replays against
        the fully mutated table. Epoch mode leaves the old epoch's rules
        untouched, so old-stamped packets cannot skip a function regardless of
        the interleaving.
        """
        if old == new:
            return FlowDelta(), []

        hazards: list[Hazard] = []
        if mode is ReconfigMode.LEGACY:
            with self._lock:
                ops = self._legacy_delta_ops(new)
                cut = len(ops) if interleave is None else max(0, min(interleave, len(ops)))
                self._apply_ops(ops[:cut])
                table = list(self.rules)
            for pkt in in_flight:
                trace = self._walk(
                    pkt.packet_id, pkt.stamp, pkt.at_port, pkt.visited, pkt.traffic_class, table
                )
                hazards.extend(self.hazards_from_trace(trace))
            with self._lock:
                self._apply_ops(ops[cut:])
                self.legacy_order = new
            added = tuple(r for k, r in ops if k == "add")
            removed = tuple(r for k, r in ops if k == "del")
            return FlowDelta(added, removed), hazards

        # epoch_counter: pure addition of the next epoch's rules
        prev_stamp = self.current_epoch if self.current_epoch is not None else -1
        next_epoch = prev_stamp + 1
        with self._lock:
            stamp = next_epoch % EPOCH_MODULUS
            desired = self._desired_rules(new, stamp)
            if any(r.epoch == stamp for r in self.rules):
                raise EpochCollision(f"stamp {stamp} wrapped onto live rules")
            cut = len(desired) if interleave is None else max(0, min(interleave, len(desired)))
            self.rules.extend(desired[:cut])
            table = list(self.rules)
        for pkt in in_flight:
            trace = self._walk(
                pkt.packet_id, pkt.stamp, pkt.at_port, pkt.visited, pkt.traffic_class, table
            )
            pkt_hazards = self.hazards_from_trace(trace)
            skips = [h for h in pkt_hazards if h.kind is HazardKind.SKIP]
            assert not skips, f"epoch-counter reconfiguration produced a skip: {skips}"
            hazards.extend(pkt_hazards)
        with self._lock:
            self.rules.extend(desired[cut:])
            self.epoch_orders[stamp] = new
            self.current_epoch = stamp
        return FlowDelta(tuple(desired), ()), hazards

    # ----------------------------------------------------------------- helpers

    def in_flight_after(
        self,
        packet_id: str,
        last_function: str | None,
        order: ChainOrder,
        stamp: int | None = None,
        traffic_class: str | None = None,
    ) -> InFlightPacket:
        """A packet paused right after ``last_function`` of ``order`` (ingress if None)."""
        if last_function is None:
            return InFlightPacket(packet_id, self.topology.ingress_port, (), stamp, traffic_class)
        idx = order.function_ids.index(last_function)
        visited = order.function_ids[: idx + 1]
        port = self.topology.attachment(last_function).from_function_port
        return InFlightPacket(packet_id, port, visited, stamp, traffic_class)

    def export_trace_log(self) -> str:
        """One hop per line: packet_id epoch switch in_port function_id out_port."""
        return "\n".join(self.hop_log)
