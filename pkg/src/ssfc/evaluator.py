"""Evaluate and rank chain orders by the total instance count they require.

With no attack traffic every permutation costs the same; once an attack class
dominates the load, orders that drop it early need far fewer instances
downstream. Chains are short (2-3 functions in practice), so ranking is an
exhaustive enumeration with a hard bound, not a heuristic search.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Mapping

from .functions import SecurityFunctionSpec, instances_required
from .traffic import TrafficComposition, propagate_chain

MAX_ENUMERATED_FUNCTIONS = 8  # 8! = 40320 evaluations


class EvaluationError(Exception):
    pass


class UnknownFunction(EvaluationError):
    """An order referenced a function id that is not registered."""


class InvalidOrder(EvaluationError):
    """An order is not a permutation of the registered function set."""


class TooManyFunctions(EvaluationError):
    """Exhaustive ranking refused above the enumeration bound."""


@dataclass(frozen=True)
class ChainOrder:
    """A permutation of the registered function (group) ids."""

    function_ids: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(set(self.function_ids)) != len(self.function_ids):
            raise InvalidOrder(f"duplicate ids in order: {self.function_ids}")

    @classmethod
    def of(cls, *ids: str) -> ChainOrder:
        return cls(tuple(ids))

    def __str__(self) -> str:
        return "-".join(self.function_ids)

    def __len__(self) -> int:
        return len(self.function_ids)

    def __iter__(self):
        return iter(self.function_ids)


@dataclass(frozen=True)
class OrderEvaluation:
    """Instance demand of one chain order under a fixed input load."""

    order: ChainOrder
    per_function_instances: tuple[tuple[str, int], ...]  # in chain position order
    total_instances: int
    link_compositions: tuple[TrafficComposition, ...]

    def __post_init__(self) -> None:
        if self.total_instances != sum(n for _, n in self.per_function_instances):
            raise ValueError("total_instances must equal the sum of per-function counts")


def _spec_index(specs: Iterable[SecurityFunctionSpec]) -> dict[str, SecurityFunctionSpec]:
    index = {s.id: s for s in specs}
    return index


def evaluate_order(
    order: ChainOrder,
    input_comp: TrafficComposition,
    specs: Iterable[SecurityFunctionSpec] | Mapping[str, SecurityFunctionSpec],
) -> OrderEvaluation:
    """Instance counts per chain position, each computed on the load offered to it.

    Position i sees the input after every upstream function has filtered it;
    its instance count uses that offered (pre-filter) load.
    """
    index = dict(specs) if isinstance(specs, Mapping) else _spec_index(specs)
    for fid in order:
        if fid not in index:
            raise UnknownFunction(f"order references unregistered function {fid!r}")
    if set(order.function_ids) != set(index):
        missing = sorted(set(index) - set(order.function_ids))
        raise InvalidOrder(f"order {order} does not cover functions {missing}")

    chain = [index[fid] for fid in order]
    links = propagate_chain(input_comp, chain)
    per_function = tuple(
        (fid, instances_required(index[fid], links[pos])) for pos, fid in enumerate(order)
    )
    return OrderEvaluation(
        order=order,
        per_function_instances=per_function,
        total_instances=sum(n for _, n in per_function),
        link_compositions=tuple(links),
    )


def rank_orders(
    input_comp: TrafficComposition,
    specs: Iterable[SecurityFunctionSpec] | Mapping[str, SecurityFunctionSpec],
) -> list[OrderEvaluation]:
    """Evaluate every permutation, cheapest first.

    Ties break lexicographically on the function id sequence, so the ranking
    is deterministic no matter how the evaluations are produced.
    """
    index = dict(specs) if isinstance(specs, Mapping) else _spec_index(specs)
    if not index:
        raise TooManyFunctions("cannot rank an empty function set")
    if len(index) > MAX_ENUMERATED_FUNCTIONS:
        raise TooManyFunctions(
            f"{len(index)} functions exceed the enumeration bound of {MAX_ENUMERATED_FUNCTIONS}"
        )
    evaluations = [
        evaluate_order(ChainOrder(perm), input_comp, index)
        for perm in itertools.permutations(sorted(index))
    ]
    evaluations.sort(key=lambda ev: (ev.total_instances, ev.order.function_ids))
    return evaluations
