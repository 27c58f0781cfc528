"""Scenario execution: one logical clock drives wrappers, controller, and data plane.

Components advance tick by tick in a fixed order (wrapper keepalives and
reports, controller timer checks, probe injection, flow expiry), so a run is
fully determined by the scenario file and the seed. Live mode replays the same
loop paced by wall time with the controller API served alongside.
"""

from __future__ import annotations

import hashlib
import json
import random
import threading
import time
from collections import Counter
from dataclasses import dataclass, field

from .clock import LogicalClock
from .controller import ControllerConfig, FunctionChainingController, ReorderEvent
from .evaluator import ChainOrder, rank_orders
from .netsim import Network, PacketTrace, ReconfigMode, Topology
from .scenario import Scenario
from .wrapper import InProcTransport, WrapperAgent

IN_FLIGHT_PER_RECONFIG = 3


class SimDataPlane:
    """Enforcement hook handed to the controller.

    Every applied order becomes a network reconfiguration run against a small
    set of synthesized in-flight packets, so each run also measures what the
    reconfiguration mode does to packets caught mid-chain.
    """

    def __init__(self, network: Network, mode: ReconfigMode, rng: random.Random) -> None:
        self.network = network
        self.mode = mode
        self.rng = rng
        self.current: ChainOrder | None = None
        self.hazard_counts: Counter[str] = Counter()
        self.reconfig_count = 0

    def install_initial(self, order: ChainOrder) -> None:
        epoch = None if self.mode is ReconfigMode.LEGACY else 0
        self.network.install_order(order, epoch)
        self.current = order

    def _synth_in_flight(self, old: ChainOrder):
        stamp = None if self.mode is ReconfigMode.LEGACY else self.network.current_epoch
        packets = []
        positions = [None, *old.function_ids]
        for i in range(IN_FLIGHT_PER_RECONFIG):
            last = self.rng.choice(positions)
            packets.append(
                self.network.in_flight_after(
                    f"ifly-{self.reconfig_count}-{i}", last, old, stamp=stamp
                )
            )
        return packets

    def enforce(self, order: ChainOrder, epoch: int) -> None:
        old = self.current
        if old is None:
            self.install_initial(order)
            return
        in_flight = self._synth_in_flight(old)
        interleave = self.rng.randint(0, 2 * (len(order) + 1))
        _, hazards = self.network.reconfigure(
            old, order, in_flight, mode=self.mode, interleave=interleave
        )
        for hazard in hazards:
            self.hazard_counts[hazard.kind.value] += 1
        self.current = order
        self.reconfig_count += 1


@dataclass
class RunArtifacts:
    scenario_name: str
    seed: int
    timeline: list[dict] = field(default_factory=list)
    traces: list[PacketTrace] = field(default_factory=list)
    hazard_counts: dict[str, int] = field(default_factory=dict)
    final_status: dict = field(default_factory=dict)
    trace_log: str = ""

    def timeline_csv(self) -> str:
        lines = ["time,trigger,epoch,order"]
        for e in self.timeline:
            lines.append(f"{e['time']:.3f},{e['trigger']},{e['epoch']},{e['order']}")
        return "\n".join(lines) + "\n"

    def event_log(self) -> str:
        lines = []
        for e in self.timeline:
            counters = " ".join(f"{g}={c}" for g, c in sorted(e.get("counters", {}).items()))
            lines.append(
                f"t={e['time']:.3f} trigger={e['trigger']} epoch={e['epoch']} "
                f"order={e['order']} counters[{counters}]"
            )
        return "\n".join(lines) + "\n"

    def summary(self) -> dict:
        outcomes = Counter(t.outcome.value for t in self.traces)
        return {
            "scenario": self.scenario_name,
            "seed": self.seed,
            "reorders": {
                trigger: sum(1 for e in self.timeline if e["trigger"] == trigger)
                for trigger in sorted({e["trigger"] for e in self.timeline})
            },
            "hazards": dict(sorted(self.hazard_counts.items())),
            "probes": dict(sorted(outcomes.items())),
            "final_order": self.final_status.get("current_order", []),
            "epoch": self.final_status.get("epoch", 0),
            "timeline": self.timeline,
        }

    def summary_json(self) -> str:
        return json.dumps(self.summary(), sort_keys=True, indent=2) + "\n"


def _timeline_entry(event: ReorderEvent) -> dict:
    return {
        "time": event.time,
        "order": str(event.order),
        "trigger": event.trigger,
        "epoch": event.epoch,
        "counters": dict(event.counters),
    }


class ScenarioRun:
    """Wires one scenario into live components; tick() advances everything once."""

    def __init__(self, scenario: Scenario, seed: int | None = None) -> None:
        self.scenario = scenario
        self.seed = scenario.seed if seed is None else seed
        self.clock = LogicalClock()
        order_ids = tuple(scenario.default_order)
        self.network = Network(
            Topology.single_switch(order_ids),
            clock=self.clock,
            idle_expiry=scenario.idle_expiry,
            drop_classes={fid: spec.filtered_classes for fid, spec in scenario.functions.items()},
        )
        self.data_plane = SimDataPlane(
            self.network, scenario.reconfig_mode, random.Random(self.seed ^ 0x5AFE)
        )
        config = scenario.controller or ControllerConfig(default_order=scenario.default_order)
        self.controller = FunctionChainingController(
            config,
            clock=self.clock,
            enforce=self.data_plane.enforce,
            secret=hashlib.sha256(f"ssfc-{self.seed}".encode()).digest(),
        )
        self.data_plane.install_initial(scenario.default_order)
        self.agents: list[WrapperAgent] = []
        transport = InProcTransport(self.controller)
        for i, wcfg in enumerate(sorted(scenario.wrappers, key=lambda w: w.function_id)):
            agent = WrapperAgent(wcfg, transport, self.clock, rng_seed=self.seed + 1 + i)
            agent.start()
            self.agents.append(agent)
        self.traces: list[PacketTrace] = []
        self._tick_index = 0
        self._next_probe = 0.0

    def tick(self, loop_phases: bool = False) -> None:
        now = self.clock.now()
        duration = self.scenario.duration
        phase_time = now % duration if (loop_phases and duration > 0) else now
        phase = self.scenario.phase_at(phase_time)
        for agent in self.agents:
            agent.keepalive_if_due()
            source = phase.source_for(agent.config.function_id) if phase else {}
            agent.observe_and_report(self._tick_index, source)
        self.controller.process_timers()
        if now + 1e-9 >= self._next_probe:
            self.traces.append(self.network.inject_probe())
            self._next_probe += self.scenario.probe_period
        self.network.expire_flows()
        self.clock.advance(self.scenario.tick_seconds)
        self._tick_index += 1

    def shutdown(self) -> None:
        for agent in self.agents:
            agent.stop()

    def artifacts(self) -> RunArtifacts:
        timeline = [
            {
                "time": 0.0,
                "order": str(self.scenario.default_order),
                "trigger": "initial",
                "epoch": 0,
                "counters": {},
            }
        ]
        timeline += [_timeline_entry(e) for e in self.controller.events]
        return RunArtifacts(
            scenario_name=self.scenario.name,
            seed=self.seed,
            timeline=timeline,
            traces=list(self.traces),
            hazard_counts=dict(self.data_plane.hazard_counts),
            final_status=self.controller.status(),
            trace_log=self.network.export_trace_log(),
        )


def run_scenario(scenario: Scenario, seed: int | None = None, realtime: bool = False) -> RunArtifacts:
    """Execute all phases; deterministic for a fixed scenario + seed."""
    run = ScenarioRun(scenario, seed)
    total_ticks = int(round(scenario.duration / scenario.tick_seconds))
    for _ in range(total_ticks):
        run.tick()
        if realtime:
            time.sleep(scenario.tick_seconds)
    artifacts = run.artifacts()  # before shutdown: deregistrations de-chain groups
    run.shutdown()
    return artifacts


def drive_realtime(run: ScenarioRun, stop: threading.Event, loop_phases: bool = True) -> None:
    """Run the tick loop at wall pace until asked to stop (live serve mode)."""
    while not stop.is_set():
        run.tick(loop_phases=loop_phases)
        time.sleep(run.scenario.tick_seconds)


# ------------------------------------------------------------------ reports


def table1_report(scenario: Scenario) -> str:
    """All permutations with per-position instance counts, cheapest first."""
    evaluations = rank_orders(scenario.input_composition, scenario.functions)
    best = evaluations[0].total_instances
    lines = []
    for ev in evaluations:
        counts = " ".join(f"{fid}={n}" for fid, n in ev.per_function_instances)
        marker = " *" if ev.total_instances == best else ""
        lines.append(f"{ev.order}: {counts} total={ev.total_instances}{marker}")
    optimal = [str(ev.order) for ev in evaluations if ev.total_instances == best]
    lines.append(f"co-optimal: {', '.join(optimal)} (total {best})")
    return "\n".join(lines) + "\n"


def trace_report(scenario: Scenario) -> tuple[str, bool]:
    """Install and probe every permutation; returns (matrix text, all passed)."""
    import itertools

    ids = sorted(scenario.functions)
    network = Network(Topology.single_switch(tuple(ids)), idle_expiry=float("inf"))
    lines = []
    passed = 0
    permutations = list(itertools.permutations(ids))
    for epoch, perm in enumerate(permutations):
        order = ChainOrder(perm)
        network.install_order(order, epoch)
        trace = network.inject_probe(stamped_epoch=epoch)
        ok = trace.visited == perm and trace.outcome.value == "delivered"
        passed += ok
        lines.append(f"{order}: visited={'-'.join(trace.visited) or 'none'} {'ok' if ok else 'MISMATCH'}")
    lines.append(f"{passed}/{len(permutations)} orders traced correctly")
    return "\n".join(lines) + "\n", passed == len(permutations)
