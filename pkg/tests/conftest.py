from __future__ import annotations

import pytest

from ssfc.functions import DemandModel, SecurityFunctionSpec
from ssfc.traffic import TrafficComposition

_ACCEPTANCE_RESULTS: list[tuple[str, str]] = []


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance.py" in report.nodeid:
        name = report.nodeid.split("::")[-1].removeprefix("test_")
        _ACCEPTANCE_RESULTS.append((name, "PASS" if report.passed else "FAIL"))


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for name, outcome in _ACCEPTANCE_RESULTS:
            terminalreporter.write_line(f"{name}: {outcome}")


def comp(**bandwidth_by_class: float) -> TrafficComposition:
    """Composition with the given absolute bandwidths and proportional packet rates."""
    return TrafficComposition.build(
        (cid, bw * 100.0, bw) for cid, bw in bandwidth_by_class.items()
    )


def spec(fid: str, filters: set[str] | None = None, throughput: float = 100.0) -> SecurityFunctionSpec:
    return SecurityFunctionSpec(
        id=fid,
        display_name=fid,
        filtered_classes=frozenset(filters or set()),
        per_instance_throughput=throughput,
        demand=DemandModel(per_unit_cost=1.0),
    )


@pytest.fixture
def table1_specs() -> dict[str, SecurityFunctionSpec]:
    """Three color-coded functions: caps 100/200/150 Mbit/s."""
    return {
        "red": spec("red", {"red-attack"}, 100.0),
        "white": spec("white", {"white-attack"}, 200.0),
        "blue": spec("blue", {"blue-attack"}, 150.0),
    }


@pytest.fixture
def table1_load() -> TrafficComposition:
    """950 Mbit/s blue-class attack plus 50 Mbit/s benign."""
    return comp(**{"benign": 50.0, "blue-attack": 950.0, "red-attack": 0.0, "white-attack": 0.0})
