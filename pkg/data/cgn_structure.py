"""
CGN Structure
Directed acyclic graph over mixed discrete/continuous variables with a class node
"""

from dataclasses import dataclass
from enum import Enum
from graphlib import CycleError, TopologicalSorter
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from data.dataset import VariableKind, VariableMeta


class ViolationKind(Enum):
    """Ways a structure can fail to be a CGN"""
    CYCLE = "cycle"
    CONTINUOUS_PARENT_OF_DISCRETE = "continuous-parent-of-discrete"
    UNKNOWN_PARENT = "unknown-parent"
    MISSING_CLASS = "missing-class"


@dataclass(frozen=True)
class StructureViolation:
    """One reason a structure is not a valid CGN"""
    kind: ViolationKind
    nodes: Tuple[int, ...]
    message: str


@dataclass(frozen=True)
class CgnStructure:
    """
    Structure of a conditional Gaussian network

    variables lists the metadata of the nodes in the structure (a subset of
    a dataset's variables; indexes are dataset variable indexes). parents
    maps each node to its parent indexes sorted ascending.
    """
    variables: Tuple[VariableMeta, ...]
    parents: Mapping[int, Tuple[int, ...]]
    class_index: Optional[int] = None

    def __post_init__(self):
        variables = tuple(sorted(self.variables, key=lambda m: m.index))
        object.__setattr__(self, "variables", variables)
        parents = {m.index: tuple(sorted(int(p) for p in self.parents.get(m.index, ())))
                   for m in variables}
        object.__setattr__(self, "parents", parents)
        object.__setattr__(self, "_meta", {m.index: m for m in variables})

    @classmethod
    def from_edges(cls, variables: Iterable[VariableMeta], edges: Iterable[Tuple[int, int]],
                   class_index: Optional[int] = None) -> "CgnStructure":
        """Build a structure from (parent, child) pairs"""
        variables = tuple(variables)
        parents: Dict[int, List[int]] = {m.index: [] for m in variables}
        for parent, child in edges:
            parents.setdefault(child, []).append(parent)
        return cls(variables, {k: tuple(v) for k, v in parents.items()}, class_index)

    @property
    def nodes(self) -> Tuple[int, ...]:
        return tuple(m.index for m in self.variables)

    @property
    def discrete_nodes(self) -> Tuple[int, ...]:
        return tuple(m.index for m in self.variables if m.is_discrete)

    @property
    def continuous_nodes(self) -> Tuple[int, ...]:
        return tuple(m.index for m in self.variables if m.is_continuous)

    def meta(self, index: int) -> VariableMeta:
        return self._meta[index]

    def has_node(self, index: int) -> bool:
        return index in self._meta

    def pa(self, index: int) -> Tuple[int, ...]:
        return self.parents[index]

    def pd(self, index: int) -> Tuple[int, ...]:
        """Discrete parents"""
        return tuple(p for p in self.parents[index]
                     if p in self._meta and self._meta[p].is_discrete)

    def pc(self, index: int) -> Tuple[int, ...]:
        """Continuous parents, sorted by variable index"""
        return tuple(p for p in self.parents[index]
                     if p in self._meta and self._meta[p].is_continuous)

    def edges(self) -> List[Tuple[int, int]]:
        return [(p, child) for child in self.nodes for p in self.parents[child]]

    def cardinalities(self, indexes: Sequence[int]) -> Tuple[int, ...]:
        return tuple(self._meta[i].cardinality for i in indexes)

    def __eq__(self, other) -> bool:
        if not isinstance(other, CgnStructure):
            return NotImplemented
        return (self.variables == other.variables and self.parents == other.parents
                and self.class_index == other.class_index)

    def __hash__(self) -> int:
        return hash((self.variables, tuple(sorted(self.parents.items())), self.class_index))


def validate_structure(structure: CgnStructure) -> List[StructureViolation]:
    """
    Check that a structure is a CGN

    Args:
        structure: Structure to check

    Returns:
        List of violations; empty when the structure is valid
    """
    violations: List[StructureViolation] = []

    if structure.class_index is not None and not structure.has_node(structure.class_index):
        violations.append(StructureViolation(
            ViolationKind.MISSING_CLASS, (structure.class_index,),
            f"class variable {structure.class_index} is not a node of the structure"))

    graph: Dict[int, Tuple[int, ...]] = {}
    for node in structure.nodes:
        known = []
        for parent in structure.pa(node):
            if not structure.has_node(parent) or parent == node:
                violations.append(StructureViolation(
                    ViolationKind.UNKNOWN_PARENT, (parent, node),
                    f"node {node} lists invalid parent {parent}"))
                continue
            known.append(parent)
            if structure.meta(node).is_discrete and structure.meta(parent).is_continuous:
                violations.append(StructureViolation(
                    ViolationKind.CONTINUOUS_PARENT_OF_DISCRETE, (parent, node),
                    f"discrete node {node} ('{structure.meta(node).name}') has continuous "
                    f"parent {parent} ('{structure.meta(parent).name}')"))
        graph[node] = tuple(known)

    try:
        tuple(TopologicalSorter(graph).static_order())
    except CycleError as error:
        cycle = tuple(error.args[1]) if len(error.args) > 1 else ()
        violations.append(StructureViolation(
            ViolationKind.CYCLE, cycle, f"structure has a directed cycle through {list(cycle)}"))

    return violations


def topological_order(structure: CgnStructure) -> Tuple[int, ...]:
    """Nodes ordered parents-first, ties by index"""
    sorter = TopologicalSorter({n: structure.pa(n) for n in structure.nodes})
    sorter.prepare()
    order: List[int] = []
    while sorter.is_active():
        ready = sorted(sorter.get_ready())
        order.extend(ready)
        sorter.done(*ready)
    return tuple(order)


def class_only_structure(variables: Sequence[VariableMeta], class_index: int) -> CgnStructure:
    """Structure made of the class node alone"""
    meta = [m for m in variables if m.index == class_index]
    return CgnStructure(tuple(meta), {class_index: ()}, class_index)


def default_class_meta(cardinality: int = 2, index: int = 0) -> VariableMeta:
    return VariableMeta("class", VariableKind.DISCRETE, index, cardinality=cardinality)
