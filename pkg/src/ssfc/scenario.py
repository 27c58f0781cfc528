"""Scenario files: one YAML document describing classes, traffic, functions,
controller settings, wrappers, and the phased attack schedule for a run.

Canonical scenarios ship inside the package (``examples/``): a three-function
instance-count calculator setup, a five-class composition walk, a
threshold-driven reordering run, and a four-function trace fixture. A scenario
argument resolves against the filesystem first and the bundle second, so
``ssfc table1 examples/table1`` works from any directory.
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass
from pathlib import Path

import yaml

from .controller import ControllerConfig
from .evaluator import ChainOrder
from .functions import DemandModel, SecurityFunctionSpec
from .netsim import ReconfigMode
from .traffic import ClassKind, TrafficClass, TrafficComposition, validate_universe
from .wrapper import ClassReportSpec, WrapperConfig


class ScenarioError(Exception):
    """Validation failure, addressed to a file location when one is known."""

    def __init__(self, message: str, path: str | None = None, line: int | None = None) -> None:
        self.message = message
        self.path = path
        self.line = line
        where = f"{path or '<scenario>'}:{line if line is not None else '?'}"
        super().__init__(f"{where}: {message}")


@dataclass(frozen=True)
class PhaseReport:
    wrapper_id: str
    attack_class: str
    probability: float
    strength_mbps: float


@dataclass(frozen=True)
class Phase:
    name: str
    duration: float  # seconds
    reports: tuple[PhaseReport, ...] = ()

    def source_for(self, wrapper_id: str) -> dict[str, ClassReportSpec]:
        return {
            r.attack_class: ClassReportSpec(r.probability, r.strength_mbps)
            for r in self.reports
            if r.wrapper_id == wrapper_id
        }


@dataclass(frozen=True)
class Scenario:
    name: str
    seed: int
    classes: tuple[TrafficClass, ...]
    input_composition: TrafficComposition
    functions: dict[str, SecurityFunctionSpec]
    default_order: ChainOrder
    controller: ControllerConfig | None = None
    wrappers: tuple[WrapperConfig, ...] = ()
    phases: tuple[Phase, ...] = ()
    tick_seconds: float = 1.0
    probe_period: float = 10.0
    idle_expiry: float = 30.0
    reconfig_mode: ReconfigMode = ReconfigMode.EPOCH_COUNTER
    path: str = "<inline>"

    @property
    def duration(self) -> float:
        return sum(p.duration for p in self.phases)

    def attack_class_ids(self) -> set[str]:
        return {c.id for c in self.classes if c.is_attack}

    def phase_at(self, now: float) -> Phase | None:
        start = 0.0
        for phase in self.phases:
            if start <= now < start + phase.duration:
                return phase
            start += phase.duration
        return None


def _locate(raw: str, *needles: str) -> int | None:
    """Best-effort line number: first line containing any needle."""
    for i, line in enumerate(raw.splitlines(), start=1):
        if any(n in line for n in needles):
            return i
    return None


class _Loader:
    def __init__(self, doc: dict, raw: str, path: str) -> None:
        self.doc = doc
        self.raw = raw
        self.path = path

    def fail(self, message: str, *needles: str) -> ScenarioError:
        return ScenarioError(message, self.path, _locate(self.raw, *needles))

    def require(self, mapping: dict, key: str, context: str) -> object:
        if key not in mapping:
            raise self.fail(f"{context} is missing required key {key!r}", key, context)
        return mapping[key]

    def classes(self) -> tuple[TrafficClass, ...]:
        entries = self.require(self.doc, "classes", "scenario")
        classes = []
        for entry in entries:
            cid = str(self.require(entry, "id", "class"))
            kind = str(entry.get("kind", "attack"))
            try:
                classes.append(TrafficClass(cid, ClassKind(kind)))
            except ValueError:
                raise self.fail(f"class {cid!r} has unknown kind {kind!r}", cid)
        try:
            validate_universe(classes)
        except ValueError as exc:
            raise self.fail(str(exc), "classes")
        return tuple(classes)

    def input_composition(self, classes: tuple[TrafficClass, ...]) -> TrafficComposition:
        section = self.require(self.doc, "input", "scenario")
        known = {c.id for c in classes}
        triples = []
        for entry in self.require(section, "traffic", "input"):
            cid = str(self.require(entry, "class", "traffic entry"))
            if cid not in known:
                raise self.fail(f"input traffic references unknown class {cid!r}", cid)
            bandwidth = float(self.require(entry, "bandwidth_mbps", f"traffic for {cid}"))
            rate = float(entry.get("packet_rate_pps", 0.0))
            if bandwidth < 0 or rate < 0:
                raise self.fail(f"traffic for {cid!r} must be non-negative", cid)
            triples.append((cid, rate, bandwidth))
        listed = {c for c, _, _ in triples}
        triples += [(c.id, 0.0, 0.0) for c in classes if c.id not in listed]
        return TrafficComposition.build(triples)

    def functions(self, classes: tuple[TrafficClass, ...]) -> dict[str, SecurityFunctionSpec]:
        entries = self.require(self.doc, "functions", "scenario")
        attack_ids = {c.id for c in classes if c.is_attack}
        specs: dict[str, SecurityFunctionSpec] = {}
        for entry in entries:
            fid = str(self.require(entry, "id", "function"))
            if fid in specs:
                raise self.fail(f"function {fid!r} defined twice", fid)
            filters = [str(f) for f in entry.get("filters", [])]
            for f in filters:
                if f not in attack_ids:
                    raise self.fail(
                        f"function {fid!r} filters {f!r}, which is not an attack class", fid
                    )
            try:
                specs[fid] = SecurityFunctionSpec(
                    id=fid,
                    display_name=str(entry.get("display_name", fid)),
                    filtered_classes=frozenset(filters),
                    per_instance_throughput=float(
                        self.require(entry, "throughput_mbps", f"function {fid}")
                    ),
                    demand=DemandModel(
                        per_unit_cost=float(entry.get("demand_per_packet", 0.0)),
                        per_byte_cost=float(entry.get("demand_per_byte", 0.0)),
                    ),
                )
            except ValueError as exc:
                raise self.fail(str(exc), fid)
        if not specs:
            raise self.fail("scenario defines no functions", "functions")
        return specs

    def default_order(self, functions: dict[str, SecurityFunctionSpec]) -> ChainOrder:
        section = self.doc.get("controller", {})
        ids = [str(g) for g in section.get("default_order", sorted(functions))]
        if sorted(ids) != sorted(functions):
            raise self.fail(
                f"default_order {ids} is not a permutation of the functions {sorted(functions)}",
                "default_order",
            )
        return ChainOrder(tuple(ids))

    def controller(self, order: ChainOrder) -> ControllerConfig | None:
        section = self.doc.get("controller")
        if section is None:
            return None
        try:
            return ControllerConfig(
                default_order=order,
                regular_threshold=int(section.get("regular_threshold", 100)),
                imminent_multiplier=int(section.get("imminent_multiplier", 3)),
                imminent_check_period=float(section.get("imminent_check_period_s", 10.0)),
                regular_check_period=float(section.get("regular_check_period_s", 300.0)),
                keepalive_timeout=float(section.get("keepalive_timeout_s", 30.0)),
            )
        except ValueError as exc:
            raise self.fail(str(exc), "controller")

    def wrappers(self, functions: dict[str, SecurityFunctionSpec]) -> tuple[WrapperConfig, ...]:
        configs = []
        seen = set()
        for entry in self.doc.get("wrappers", []):
            fid = str(self.require(entry, "function_id", "wrapper"))
            if fid in seen:
                raise self.fail(f"wrapper {fid!r} defined twice", fid)
            seen.add(fid)
            group = str(self.require(entry, "group", f"wrapper {fid}"))
            if group not in functions:
                raise self.fail(f"wrapper {fid!r} references unknown group {group!r}", fid)
            capacity = float(self.require(entry, "link_capacity_mbps", f"wrapper {fid}"))
            if capacity <= 0:
                raise self.fail(f"wrapper {fid!r} link capacity must be > 0", fid)
            period = float(entry.get("keepalive_period_s", 5.0))
            if period <= 0:
                raise self.fail(f"wrapper {fid!r} keepalive period must be > 0", fid)
            configs.append(
                WrapperConfig(
                    function_id=fid,
                    group_id=group,
                    fcc_endpoint="inproc",
                    link_capacity=capacity,
                    keepalive_period=period,
                )
            )
        return tuple(configs)

    def phases(
        self, wrappers: tuple[WrapperConfig, ...], classes: tuple[TrafficClass, ...]
    ) -> tuple[Phase, ...]:
        wrapper_ids = {w.function_id for w in wrappers}
        attack_ids = {c.id for c in classes if c.is_attack}
        phases = []
        for i, entry in enumerate(self.doc.get("phases", [])):
            name = str(entry.get("name", f"phase-{i}"))
            duration = float(self.require(entry, "duration_s", f"phase {name}"))
            if duration <= 0:
                raise self.fail(f"phase {name!r} duration must be > 0", name, "duration_s")
            reports = []
            for r in entry.get("reports", []):
                wid = str(self.require(r, "wrapper", f"phase {name} report"))
                if wid not in wrapper_ids:
                    raise self.fail(f"phase {name!r} references unknown wrapper {wid!r}", wid)
                cls = str(self.require(r, "class", f"phase {name} report"))
                if cls not in attack_ids:
                    raise self.fail(f"phase {name!r} report class {cls!r} is not an attack class", cls)
                probability = float(self.require(r, "probability", f"phase {name} report"))
                if not 0.0 <= probability <= 1.0:
                    raise self.fail(f"phase {name!r} probability must be in [0,1]", name)
                strength = float(self.require(r, "strength_mbps", f"phase {name} report"))
                if strength <= 0:
                    raise self.fail(f"phase {name!r} strength must be > 0", name)
                reports.append(PhaseReport(wid, cls, probability, strength))
            phases.append(Phase(name, duration, tuple(reports)))
        return tuple(phases)

    def load(self) -> Scenario:
        classes = self.classes()
        input_comp = self.input_composition(classes)
        functions = self.functions(classes)
        order = self.default_order(functions)
        controller = self.controller(order)
        wrappers = self.wrappers(functions)
        if wrappers and controller is None:
            raise self.fail("wrappers need a controller section", "wrappers")
        phases = self.phases(wrappers, classes)
        sim = self.doc.get("simulation", {})
        mode_name = str(sim.get("reconfig_mode", "epoch_counter"))
        try:
            mode = ReconfigMode(mode_name)
        except ValueError:
            raise self.fail(f"unknown reconfig_mode {mode_name!r}", "reconfig_mode")
        tick = float(sim.get("tick_seconds", 1.0))
        probe = float(sim.get("probe_period_s", 10.0))
        expiry = float(sim.get("idle_expiry_s", 30.0))
        if min(tick, probe, expiry) <= 0:
            raise self.fail("simulation periods must be > 0", "simulation")
        return Scenario(
            name=str(self.doc.get("name", Path(self.path).stem)),
            seed=int(self.doc.get("seed", 0)),
            classes=classes,
            input_composition=input_comp,
            functions=functions,
            default_order=order,
            controller=controller,
            wrappers=wrappers,
            phases=phases,
            tick_seconds=tick,
            probe_period=probe,
            idle_expiry=expiry,
            reconfig_mode=mode,
            path=self.path,
        )


def parse_scenario(raw: str, path: str = "<inline>") -> Scenario:
    try:
        doc = yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ScenarioError(f"not valid YAML: {exc}", path, mark.line + 1 if mark else None)
    if not isinstance(doc, dict):
        raise ScenarioError("scenario must be a mapping", path, 1)
    return _Loader(doc, raw, path).load()


def resolve_scenario_text(ref: str | Path) -> tuple[str, str]:
    """Return (raw text, display path) for a path or a bundled scenario name."""
    p = Path(ref)
    if p.is_file():
        return p.read_text(), str(p)
    name = p.name if p.parent.name in ("examples", "") else None
    if name is not None:
        if not name.endswith(".yaml"):
            name += ".yaml"
        resource = importlib.resources.files("ssfc").joinpath("examples", name)
        if resource.is_file():
            return resource.read_text(), f"examples/{name}"
    raise ScenarioError(f"scenario {str(ref)!r} not found on disk or in the bundled examples", str(ref))


def load_scenario(ref: str | Path) -> Scenario:
    raw, path = resolve_scenario_text(ref)
    return parse_scenario(raw, path)
