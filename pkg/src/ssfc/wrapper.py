"""Security function wrapper: the agent co-located with each security function.

Validates its configuration, registers with the chaining controller, keeps the
session alive (rotating its bearer token), and forwards attack observations
after sanity-checking them against the local link capacity. The wrapped
"detector" is a seeded per-class report generator, so whole runs replay
deterministically.
"""

from __future__ import annotations

import enum
import random
import threading
from dataclasses import dataclass, field
from typing import Protocol

import httpx

from .clock import LogicalClock
from .controller import AttackReport, ControllerError, FunctionChainingController, InvalidToken, SessionExpired

REGISTRATION_ATTEMPTS = 3
REGISTRATION_BACKOFF = 0.5  # seconds, doubled per retry


class LifecycleStatus(enum.Enum):
    COMPLETED = "completed"
    CONFIG_INVALID = "config_invalid"
    REGISTRATION_FAILED = "registration_failed"
    TOKEN_REJECTED = "token_rejected"


class WrapperError(Exception):
    pass


class ConfigInvalid(WrapperError):
    pass


class TransportUnavailable(WrapperError):
    """The controller endpoint could not be reached."""


class TokenRejected(WrapperError):
    pass


class ReportRejected(WrapperError):
    """Controller refused the report content (implausible strength)."""


@dataclass(frozen=True)
class ClassReportSpec:
    """Per-tick report behavior for one attack class."""

    probability: float
    strength_mbps: float


@dataclass(frozen=True)
class WrapperConfig:
    function_id: str
    group_id: str
    fcc_endpoint: str
    link_capacity: float  # Mbit/s
    keepalive_period: float = 5.0  # seconds
    attack_source: dict[str, ClassReportSpec] = field(default_factory=dict)


def validate_config(config: WrapperConfig) -> None:
    """First lifecycle step: refuse to start on a bad config, before any network call."""
    if not config.function_id or not config.group_id:
        raise ConfigInvalid("function_id and group_id must be non-empty")
    if not config.fcc_endpoint:
        raise ConfigInvalid("fcc_endpoint must be set")
    if config.link_capacity <= 0:
        raise ConfigInvalid(f"link_capacity must be > 0, got {config.link_capacity}")
    if config.keepalive_period <= 0:
        raise ConfigInvalid(f"keepalive_period must be > 0, got {config.keepalive_period}")
    for cls, spec in config.attack_source.items():
        if not 0.0 <= spec.probability <= 1.0:
            raise ConfigInvalid(f"probability for {cls!r} must be in [0,1], got {spec.probability}")
        if spec.strength_mbps <= 0:
            raise ConfigInvalid(f"strength for {cls!r} must be > 0, got {spec.strength_mbps}")


@dataclass(frozen=True)
class AttackObservation:
    attack_class: str
    strength_mbps: float
    tick: int


def validate_report(observed: AttackObservation, config: WrapperConfig) -> bool:
    """A report is plausible iff its strength fits on the local link (boundary inclusive)."""
    return observed.strength_mbps <= config.link_capacity


def draw_observations(
    rng: random.Random, source: dict[str, ClassReportSpec], tick: int
) -> list[AttackObservation]:
    """One tick of the simulated detector. Classes fire independently."""
    observations = []
    for cls in sorted(source):
        spec = source[cls]
        if rng.random() < spec.probability:
            observations.append(AttackObservation(cls, spec.strength_mbps, tick))
    return observations


def simulate_attacks(config: WrapperConfig, ticks: int, rng_seed: int) -> list[AttackObservation]:
    """The full observation stream for a run; identical seed => identical stream."""
    rng = random.Random(rng_seed)
    stream: list[AttackObservation] = []
    for tick in range(ticks):
        stream.extend(draw_observations(rng, config.attack_source, tick))
    return stream


# --------------------------------------------------------------------- transports


class FccTransport(Protocol):
    def register(self, function_id: str, group_id: str, link_capacity: float) -> str: ...

    def keepalive(self, function_id: str, token: str) -> str: ...

    def report(self, function_id: str, token: str, attack_class: str, strength: float) -> None: ...

    def deregister(self, function_id: str, token: str) -> None: ...


class HttpTransport:
    """httpx client speaking the controller's /api endpoints."""

    def __init__(self, base_url: str, timeout: float = 5.0) -> None:
        self._client = httpx.Client(base_url=base_url, timeout=timeout)

    def _post(self, path: str, payload: dict, expected: int) -> httpx.Response:
        try:
            response = self._client.post(path, json=payload)
        except httpx.HTTPError as exc:
            raise TransportUnavailable(str(exc)) from exc
        if response.status_code == 401:
            raise TokenRejected(response.text)
        if response.status_code == 422:
            raise ReportRejected(response.text)
        if response.status_code != expected:
            raise TransportUnavailable(f"{path} -> {response.status_code}: {response.text}")
        return response

    def register(self, function_id: str, group_id: str, link_capacity: float) -> str:
        response = self._post(
            "/api/register",
            {"function_id": function_id, "group_id": group_id, "link_capacity_mbps": link_capacity},
            expected=200,
        )
        return response.json()["token"]

    def keepalive(self, function_id: str, token: str) -> str:
        response = self._post(
            "/api/keepalive", {"function_id": function_id, "token": token}, expected=200
        )
        return response.json()["token"]

    def report(self, function_id: str, token: str, attack_class: str, strength: float) -> None:
        self._post(
            "/api/attack",
            {
                "function_id": function_id,
                "token": token,
                "attack_class": attack_class,
                "strength_mbps": strength,
            },
            expected=202,
        )

    def deregister(self, function_id: str, token: str) -> None:
        try:
            response = self._client.request(
                "DELETE", "/api/register", json={"function_id": function_id, "token": token}
            )
        except httpx.HTTPError as exc:
            raise TransportUnavailable(str(exc)) from exc
        if response.status_code == 401:
            raise TokenRejected(response.text)

    def close(self) -> None:
        self._client.close()


class InProcTransport:
    """Direct calls into a controller instance; used by the scenario runner and tests."""

    def __init__(self, controller: FunctionChainingController) -> None:
        self.controller = controller

    def register(self, function_id: str, group_id: str, link_capacity: float) -> str:
        try:
            return self.controller.register(function_id, group_id, link_capacity)
        except ControllerError as exc:
            raise TransportUnavailable(str(exc)) from exc

    def keepalive(self, function_id: str, token: str) -> str:
        try:
            return self.controller.keepalive(function_id, token)
        except (InvalidToken, SessionExpired) as exc:
            raise TokenRejected(str(exc)) from exc

    def report(self, function_id: str, token: str, attack_class: str, strength: float) -> None:
        try:
            self.controller.report_attack(
                AttackReport(
                    function_id=function_id,
                    attack_class=attack_class,
                    strength=strength,
                    timestamp=self.controller.clock.now(),
                    token=token,
                )
            )
        except (InvalidToken, SessionExpired) as exc:
            raise TokenRejected(str(exc)) from exc
        except ControllerError as exc:
            raise ReportRejected(str(exc)) from exc

    def deregister(self, function_id: str, token: str) -> None:
        try:
            self.controller.deregister(function_id, token)
        except (InvalidToken, SessionExpired) as exc:
            raise TokenRejected(str(exc)) from exc


# ---------------------------------------------------------------------- lifecycle


class _TokenCell:
    """Current session token shared by the keepalive and report loops.

    Rotation is atomic: a reader never sees a half-updated value, and after a
    refresh completes every subsequent call uses the new token.
    """

    def __init__(self) -> None:
        self._token: str | None = None
        self._lock = threading.Lock()

    def get(self) -> str:
        with self._lock:
            if self._token is None:
                raise WrapperError("no session token held")
            return self._token

    def set(self, token: str) -> None:
        with self._lock:
            self._token = token


class WrapperAgent:
    """Drives one wrapper session; step() advances one tick of logical time."""

    def __init__(
        self,
        config: WrapperConfig,
        transport: FccTransport,
        clock: LogicalClock | None = None,
        rng_seed: int = 0,
    ) -> None:
        self.config = config
        self.transport = transport
        self.clock = clock or LogicalClock()
        self.rng = random.Random(rng_seed)
        self.token = _TokenCell()
        self.registered = False
        self.sent_reports: list[AttackObservation] = []
        self._next_keepalive = 0.0

    def start(self) -> None:
        """Register with bounded exponential retry."""
        validate_config(self.config)
        delay = REGISTRATION_BACKOFF
        last: Exception | None = None
        for attempt in range(REGISTRATION_ATTEMPTS):
            try:
                token = self.transport.register(
                    self.config.function_id, self.config.group_id, self.config.link_capacity
                )
            except WrapperError as exc:
                last = exc
                if attempt < REGISTRATION_ATTEMPTS - 1:
                    self.clock.advance(delay)
                    delay *= 2
                continue
            self.token.set(token)
            self.registered = True
            self._next_keepalive = self.clock.now() + self.config.keepalive_period
            return
        raise TransportUnavailable(f"registration failed after {REGISTRATION_ATTEMPTS} attempts: {last}")

    def _reregister_once(self) -> bool:
        try:
            token = self.transport.register(
                self.config.function_id, self.config.group_id, self.config.link_capacity
            )
        except WrapperError:
            self.registered = False
            return False
        self.token.set(token)
        return True

    def keepalive_if_due(self) -> None:
        if self.clock.now() < self._next_keepalive:
            return
        try:
            self.token.set(self.transport.keepalive(self.config.function_id, self.token.get()))
        except TokenRejected:
            if not self._reregister_once():
                raise
        self._next_keepalive = self.clock.now() + self.config.keepalive_period

    def observe_and_report(self, tick: int, source: dict[str, ClassReportSpec] | None = None) -> None:
        """Draw this tick's observations, validate, and forward the plausible ones."""
        if not self.registered:
            raise WrapperError("cannot report before registration")
        for obs in draw_observations(self.rng, source if source is not None else self.config.attack_source, tick):
            if not validate_report(obs, self.config):
                continue
            try:
                self.transport.report(
                    self.config.function_id, self.token.get(), obs.attack_class, obs.strength_mbps
                )
            except ReportRejected:
                continue  # server-side plausibility mirror; drop and move on
            except TokenRejected:
                if not self._reregister_once():
                    raise
                continue
            self.sent_reports.append(obs)

    def stop(self) -> None:
        if self.registered:
            try:
                self.transport.deregister(self.config.function_id, self.token.get())
            finally:
                self.registered = False


def run_lifecycle(
    config: WrapperConfig,
    clock: LogicalClock,
    transport: FccTransport,
    ticks: int = 10,
    tick_seconds: float = 1.0,
    rng_seed: int = 0,
    shutdown: threading.Event | None = None,
) -> LifecycleStatus:
    """validate -> register -> (keepalive loop || report loop) -> deregister.

    Returns the terminal status instead of raising: the caller is an agent
    supervisor, not a request handler.
    """
    try:
        validate_config(config)
    except ConfigInvalid:
        return LifecycleStatus.CONFIG_INVALID

    agent = WrapperAgent(config, transport, clock, rng_seed)
    try:
        agent.start()
    except WrapperError:
        return LifecycleStatus.REGISTRATION_FAILED

    try:
        for tick in range(ticks):
            if shutdown is not None and shutdown.is_set():
                break
            agent.keepalive_if_due()
            agent.observe_and_report(tick)
            clock.advance(tick_seconds)
    except TokenRejected:
        return LifecycleStatus.TOKEN_REJECTED
    finally:
        try:
            agent.stop()
        except WrapperError:
            pass
    return LifecycleStatus.COMPLETED
