"""Attack-aware security service function chain reordering, desk-scale.

Traffic/function/chain performance model, a simulated SDN data plane with
flow-based chaining, a function chaining controller with wrapper agents and
threshold-driven reordering, and a scenario harness tying them together.
"""

from .evaluator import ChainOrder, OrderEvaluation, evaluate_order, rank_orders
from .functions import DemandModel, SecurityFunctionSpec, instances_required, resource_demand
from .traffic import (
    ClassKind,
    TrafficClass,
    TrafficComposition,
    apply_function,
    filter_class,
    propagate_chain,
)

__all__ = [
    "ChainOrder",
    "ClassKind",
    "DemandModel",
    "OrderEvaluation",
    "SecurityFunctionSpec",
    "TrafficClass",
    "TrafficComposition",
    "apply_function",
    "evaluate_order",
    "filter_class",
    "instances_required",
    "propagate_chain",
    "rank_orders",
    "resource_demand",
]
