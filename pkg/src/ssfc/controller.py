"""Function chaining controller: wrapper sessions, attack counters, reorder decisions.

The controller keeps one counter per security function group, counting attack
reports accepted since the last applied configuration change. Two periodic
checks act on the counters: a fast imminent check that only fires when a group
crosses a multiple of the regular threshold, and a slow regular check that
fires on the plain threshold and otherwise restores the default order. Every
applied change resets all counters.

Wrapper sessions are bearer-token based: tokens are HMAC-signed, carry a
per-function serial, and rotate on every keepalive. A rotated-away token is
never accepted again.
"""

from __future__ import annotations

import base64
import hashlib
import hmac
import json
import secrets
import threading
from dataclasses import dataclass, field
from typing import Callable

from .clock import LogicalClock
from .evaluator import ChainOrder


class ControllerError(Exception):
    pass


class DuplicateRegistration(ControllerError):
    pass


class UnknownFunction(ControllerError):
    pass


class InvalidToken(ControllerError):
    pass


class SessionExpired(ControllerError):
    pass


class ImplausibleStrength(ControllerError):
    """Reported attack strength exceeds what the reporter's link can carry."""


class NotAPermutation(ControllerError):
    """A requested order is not a permutation of the registered groups."""


@dataclass
class RegisteredFunction:
    function_id: str
    group_id: str
    link_capacity: float  # Mbit/s
    serial: int
    last_keepalive: float
    attack_counter: int = 0
    attack_bandwidth_accum: float = 0.0  # Mbit/s summed over accepted reports


@dataclass(frozen=True)
class AttackReport:
    function_id: str
    attack_class: str
    strength: float  # Mbit/s
    timestamp: float
    token: str

    def __post_init__(self) -> None:
        if self.strength <= 0:
            raise ValueError(f"attack strength must be > 0, got {self.strength}")


@dataclass(frozen=True)
class ControllerConfig:
    default_order: ChainOrder
    regular_threshold: int = 100
    imminent_multiplier: int = 3
    imminent_check_period: float = 10.0  # seconds
    regular_check_period: float = 300.0
    keepalive_timeout: float = 30.0

    def __post_init__(self) -> None:
        if self.regular_threshold <= 0:
            raise ValueError("regular_threshold must be > 0")
        if self.imminent_multiplier * self.regular_threshold <= self.regular_threshold:
            raise ValueError("imminent threshold must exceed the regular threshold")
        for name in ("imminent_check_period", "regular_check_period", "keepalive_timeout"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")

    @property
    def imminent_threshold(self) -> int:
        return self.imminent_multiplier * self.regular_threshold


@dataclass(frozen=True)
class ReorderEvent:
    time: float
    order: ChainOrder
    trigger: str  # imminent | regular | reset | manual | evict
    epoch: int
    counters: dict[str, int] = field(default_factory=dict)  # at decision time, pre-reset


class FunctionChainingController:
    """Single logical state machine behind the wrapper-facing API.

    Mutations serialize through one lock; decide+apply run atomically with
    respect to counter reads and resets. ``enforce`` is the hook into the data
    plane: called with (order, epoch) for every applied configuration change.
    """

    def __init__(
        self,
        config: ControllerConfig,
        clock: LogicalClock | None = None,
        enforce: Callable[[ChainOrder, int], None] | None = None,
        secret: bytes | None = None,
    ) -> None:
        self.config = config
        self.clock = clock or LogicalClock()
        self._enforce = enforce or (lambda order, epoch: None)
        self._secret = secret or secrets.token_bytes(32)
        self._lock = threading.RLock()
        self.registry: dict[str, RegisteredFunction] = {}
        self.current_order: ChainOrder = config.default_order
        self.epoch = 0
        self.events: list[ReorderEvent] = []
        self._manual_hold = False
        self._next_imminent = self.clock.now() + config.imminent_check_period
        self._next_regular = self.clock.now() + config.regular_check_period

    # ----------------------------------------------------------------- tokens

    def _sign(self, payload: bytes) -> str:
        return hmac.new(self._secret, payload, hashlib.sha256).hexdigest()

    def _issue_token(self, function_id: str, serial: int) -> str:
        payload = base64.urlsafe_b64encode(
            json.dumps(
                {"fid": function_id, "serial": serial, "iat": self.clock.now()},
                sort_keys=True,
            ).encode()
        ).decode()
        return f"{payload}.{self._sign(payload.encode())}"

    def _validate_token(self, function_id: str, token: str) -> RegisteredFunction:
        """Check signature, binding, serial currency, and session liveness."""
        try:
            payload, sig = token.rsplit(".", 1)
        except ValueError:
            raise InvalidToken("malformed token") from None
        if not hmac.compare_digest(sig, self._sign(payload.encode())):
            raise InvalidToken("bad signature")
        claims = json.loads(base64.urlsafe_b64decode(payload.encode()))
        if claims["fid"] != function_id:
            raise InvalidToken("token bound to a different function")
        func = self.registry.get(function_id)
        if func is None:
            raise UnknownFunction(f"{function_id!r} is not registered")
        if self.clock.now() - func.last_keepalive > self.config.keepalive_timeout:
            self._evict(function_id)
            raise SessionExpired(f"{function_id!r} missed its keepalive window")
        if claims["serial"] != func.serial:
            raise InvalidToken("token superseded by a later keepalive")
        return func

    # --------------------------------------------------------------- sessions

    def register(self, function_id: str, group_id: str, link_capacity: float) -> str:
        if link_capacity <= 0:
            raise ValueError(f"link capacity must be > 0, got {link_capacity}")
        with self._lock:
            self._sweep_evictions()
            if function_id in self.registry:
                raise DuplicateRegistration(f"{function_id!r} is already registered")
            self.registry[function_id] = RegisteredFunction(
                function_id=function_id,
                group_id=group_id,
                link_capacity=link_capacity,
                serial=0,
                last_keepalive=self.clock.now(),
            )
            return self._issue_token(function_id, 0)

    def keepalive(self, function_id: str, token: str) -> str:
        with self._lock:
            func = self._validate_token(function_id, token)
            func.serial += 1
            func.last_keepalive = self.clock.now()
            return self._issue_token(function_id, func.serial)

    def deregister(self, function_id: str, token: str) -> None:
        with self._lock:
            self._validate_token(function_id, token)
            group = self.registry[function_id].group_id
            del self.registry[function_id]
            self._dechain_if_gone(group)

    def report_attack(self, report: AttackReport) -> bool:
        """Accept a validated report and bump the reporter's group counter."""
        with self._lock:
            func = self._validate_token(report.function_id, report.token)
            if report.strength > func.link_capacity:
                raise ImplausibleStrength(
                    f"{report.strength} Mbit/s exceeds the {func.link_capacity} Mbit/s link"
                )
            func.attack_counter += 1
            func.attack_bandwidth_accum += report.strength
            return True

    # -------------------------------------------------------------- evictions

    def _evict(self, function_id: str) -> None:
        group = self.registry[function_id].group_id
        del self.registry[function_id]
        self._dechain_if_gone(group)

    def _sweep_evictions(self) -> None:
        now = self.clock.now()
        expired = [
            fid
            for fid, f in self.registry.items()
            if now - f.last_keepalive > self.config.keepalive_timeout
        ]
        for fid in expired:
            self._evict(fid)

    def _dechain_if_gone(self, group_id: str) -> None:
        if any(f.group_id == group_id for f in self.registry.values()):
            return
        if group_id in self.current_order.function_ids:
            remaining = tuple(g for g in self.current_order if g != group_id)
            self._apply(ChainOrder(remaining), trigger="evict")

    # -------------------------------------------------------------- decisions

    def _active_groups(self) -> list[str]:
        """Registered groups, ordered by default-order position (extras last)."""
        seen: list[str] = []
        for f in self.registry.values():
            if f.group_id not in seen:
                seen.append(f.group_id)
        defaults = [g for g in self.config.default_order if g in seen]
        extras = sorted(g for g in seen if g not in self.config.default_order.function_ids)
        return defaults + extras

    def group_counters(self) -> dict[str, int]:
        with self._lock:
            counters = {g: 0 for g in self._active_groups()}
            for f in self.registry.values():
                counters[f.group_id] += f.attack_counter
            return counters

    def _ranked_order(self, counters: dict[str, int]) -> ChainOrder:
        """Most-attacked group first; ties keep their default-order position."""
        position = {g: i for i, g in enumerate(self._active_groups())}
        ranked = sorted(counters, key=lambda g: (-counters[g], position[g]))
        return ChainOrder(tuple(ranked))

    def _effective_default(self) -> ChainOrder:
        return ChainOrder(tuple(self._active_groups()))

    def decide(self, trigger: str) -> ChainOrder | None:
        """Run one check; returns the order to apply or None for no change.

        trigger="imminent" fires only on a counter at or above the imminent
        threshold. trigger="regular" fires on the regular threshold, and with
        every counter below it decides the default order (a manual override
        holds until some counter crosses the threshold).
        """
        if trigger not in ("imminent", "regular"):
            raise ValueError(f"unknown trigger {trigger!r}")
        with self._lock:
            self._sweep_evictions()
            counters = self.group_counters()
            if not counters:
                return None
            peak = max(counters.values())
            if trigger == "imminent":
                if peak < self.config.imminent_threshold:
                    return None
                new = self._ranked_order(counters)
            else:
                if peak >= self.config.regular_threshold:
                    new = self._ranked_order(counters)
                elif self._manual_hold:
                    return None
                else:
                    new = self._effective_default()
            return new if new != self.current_order else None

    def _apply(self, order: ChainOrder, trigger: str) -> int:
        if order == self.current_order:
            return self.epoch
        counters = self.group_counters()
        self.epoch += 1
        self._enforce(order, self.epoch)
        self.current_order = order
        for f in self.registry.values():
            f.attack_counter = 0
            f.attack_bandwidth_accum = 0.0
        self._manual_hold = trigger == "manual"
        self.events.append(ReorderEvent(self.clock.now(), order, trigger, self.epoch, counters))
        return self.epoch

    def apply_order(self, order: ChainOrder, trigger: str = "manual") -> int:
        """Enforce an order on the data plane; counters reset on a real change."""
        with self._lock:
            if trigger == "manual":
                active = set(self._active_groups())
                if set(order.function_ids) != active or len(order) != len(active):
                    raise NotAPermutation(
                        f"{order} is not a permutation of the registered groups {sorted(active)}"
                    )
            return self._apply(order, trigger)

    def run_check(self, trigger: str) -> ReorderEvent | None:
        """decide() + apply, labelling a below-threshold default restore as a reset."""
        with self._lock:
            self._sweep_evictions()
            counters = self.group_counters()
            order = self.decide(trigger)
            if order is None:
                return None
            label = trigger
            if trigger == "regular" and counters and max(counters.values()) < self.config.regular_threshold:
                label = "reset"
            self._apply(order, label)
            return self.events[-1]

    def process_timers(self, now: float | None = None) -> list[ReorderEvent]:
        """Fire whichever periodic checks are due at ``now``. Imminent runs first."""
        now = self.clock.now() if now is None else now
        fired: list[ReorderEvent] = []
        with self._lock:
            if now >= self._next_imminent:
                self._next_imminent = now + self.config.imminent_check_period
                event = self.run_check("imminent")
                if event:
                    fired.append(event)
            if now >= self._next_regular:
                self._next_regular = now + self.config.regular_check_period
                event = self.run_check("regular")
                if event:
                    fired.append(event)
        return fired

    # ----------------------------------------------------------------- status

    def status(self) -> dict:
        """Read-only snapshot of orders, counters, registry, and recent events."""
        with self._lock:
            self._sweep_evictions()
            counters = self.group_counters()
            return {
                "time": self.clock.now(),
                "current_order": list(self.current_order),
                "default_order": list(self.config.default_order),
                "epoch": self.epoch,
                "groups": {
                    g: {
                        "attack_counter": counters[g],
                        "functions": sorted(
                            f.function_id for f in self.registry.values() if f.group_id == g
                        ),
                    }
                    for g in counters
                },
                "registry": {
                    f.function_id: {
                        "group_id": f.group_id,
                        "link_capacity_mbps": f.link_capacity,
                        "last_keepalive": f.last_keepalive,
                        "attack_counter": f.attack_counter,
                        "attack_bandwidth_mbps": f.attack_bandwidth_accum,
                    }
                    for f in self.registry.values()
                },
                "thresholds": {
                    "regular": self.config.regular_threshold,
                    "imminent": self.config.imminent_threshold,
                },
                "events": [
                    {
                        "time": e.time,
                        "order": list(e.order),
                        "trigger": e.trigger,
                        "epoch": e.epoch,
                        "counters": dict(e.counters),
                    }
                    for e in self.events[-100:]
                ],
            }
