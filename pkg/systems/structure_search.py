"""
Structure Search
JAN partitions, the greedy wrapper search with its fw/bw/wc candidate generators,
and the k-BOX / k-BAND structure families
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from core.exceptions import ContractViolation, SearchError
from data.cgn_structure import CgnStructure, default_class_meta
from data.dataset import Dataset, VariableKind, VariableMeta
from systems.cgn_core import count_parameters, fit_ml, is_acceptable
from systems.classifier import class_posteriors_ml
from systems.cross_validation import Fold, stratified_kfold

logger = logging.getLogger(__name__)

Group = Tuple[int, ...]


class Generator(Enum):
    """Candidate generation strategy of the wrapper search"""
    FW = "fw"
    BW = "bw"
    WC = "wc"


@dataclass(frozen=True)
class JanPartition:
    """
    Class-conditional partition of continuous attributes into dependent groups

    Groups are stored canonically: each sorted ascending, the groups ordered by
    their smallest member, so equal partitions compare equal.
    """
    groups: Tuple[Group, ...]
    class_index: int = 0

    def __post_init__(self):
        groups = tuple(sorted((tuple(sorted(int(a) for a in g)) for g in self.groups),
                              key=lambda g: g[0] if g else -1))
        seen = set()
        for group in groups:
            if not group:
                raise ContractViolation("JAN groups must be nonempty")
            if seen.intersection(group):
                raise ContractViolation(f"JAN groups overlap: {groups}")
            seen.update(group)
        if self.class_index in seen:
            raise ContractViolation(f"class variable {self.class_index} cannot be in a group")
        object.__setattr__(self, "groups", groups)

    @property
    def attributes(self) -> Tuple[int, ...]:
        return tuple(sorted(a for g in self.groups for a in g))

    def __str__(self) -> str:
        return " ".join("{" + ",".join(str(a) for a in g) + "}" for g in self.groups) or "{}"


@dataclass(frozen=True)
class SearchIteration:
    """One pass of the wrapper loop; best_score and partition describe the incumbent after it"""
    candidate_count: int
    candidate_score: float
    best_score: float
    partition: JanPartition


@dataclass(frozen=True)
class SearchTrace:
    initial: JanPartition
    initial_score: float
    iterations: Tuple[SearchIteration, ...]
    final: JanPartition
    folds: Tuple[Fold, ...]

    @property
    def final_score(self) -> float:
        return self.iterations[-1].best_score if self.iterations else self.initial_score


def default_meta(n_attrs: int, class_cardinality: int = 2) -> Tuple[VariableMeta, ...]:
    """Class at index 0 followed by continuous attributes x1..xn at indexes 1..n"""
    attrs = tuple(VariableMeta(f"x{i}", VariableKind.CONTINUOUS, i) for i in range(1, n_attrs + 1))
    return (default_class_meta(class_cardinality),) + attrs


def _meta_for(p: JanPartition, meta: Optional[Sequence[VariableMeta]]) -> Dict[int, VariableMeta]:
    if meta is None:
        needed = max(p.attributes, default=0)
        meta = default_meta(needed)
        if p.class_index != 0:
            raise ContractViolation("variable metadata is required when the class is not index 0")
    by_index = {m.index: m for m in meta}
    if p.class_index not in by_index or not by_index[p.class_index].is_discrete:
        raise ContractViolation(f"class variable {p.class_index} must be a discrete variable")
    for a in p.attributes:
        if a not in by_index or not by_index[a].is_continuous:
            raise ContractViolation(f"JAN attribute {a} must be a continuous variable")
    return by_index


def jan_to_structure(p: JanPartition, meta: Optional[Sequence[VariableMeta]] = None) -> CgnStructure:
    """
    CGN structure of a JAN partition

    The class is a parent of every grouped attribute; inside a group each
    attribute has all smaller-index members as continuous parents. Attributes
    outside every group are left out of the structure.

    Args:
        p: Partition
        meta: Variable metadata by index; defaults to the layout of default_meta

    Returns:
        CgnStructure over the class and the grouped attributes
    """
    by_index = _meta_for(p, meta)
    c = p.class_index
    parents: Dict[int, Tuple[int, ...]] = {c: ()}
    for group in p.groups:
        for position, a in enumerate(group):
            parents[a] = (c,) + group[:position]
    variables = tuple(by_index[i] for i in sorted(parents))
    return CgnStructure(variables, parents, c)


def _dedupe(candidates: Iterable[JanPartition]) -> List[JanPartition]:
    seen = set()
    unique = []
    for candidate in candidates:
        if candidate not in seen:
            seen.add(candidate)
            unique.append(candidate)
    return unique


def fw_candidates(p: JanPartition, all_attrs: Iterable[int]) -> List[JanPartition]:
    """Each absent attribute added to every existing group, or as a new singleton group"""
    present = set(p.attributes)
    candidates = []
    for a in sorted(set(all_attrs) - present):
        for i in range(len(p.groups)):
            groups = list(p.groups)
            groups[i] = groups[i] + (a,)
            candidates.append(JanPartition(tuple(groups), p.class_index))
        candidates.append(JanPartition(p.groups + ((a,),), p.class_index))
    return _dedupe(candidates)


def _without(p: JanPartition, a: int) -> JanPartition:
    groups = tuple(tuple(x for x in g if x != a) for g in p.groups)
    return JanPartition(tuple(g for g in groups if g), p.class_index)


def bw_candidates(p: JanPartition) -> List[JanPartition]:
    """Every single-attribute removal, then every merge of two groups"""
    candidates = [_without(p, a) for a in p.attributes]
    for i in range(len(p.groups)):
        for j in range(i + 1, len(p.groups)):
            rest = tuple(g for k, g in enumerate(p.groups) if k not in (i, j))
            candidates.append(JanPartition(rest + (p.groups[i] + p.groups[j],), p.class_index))
    return _dedupe(candidates)


def wc_candidates(p: JanPartition) -> List[JanPartition]:
    """Every single-attribute removal"""
    return _dedupe(_without(p, a) for a in p.attributes)


def initial_partition(generator: Generator, attrs: Sequence[int], class_index: int = 0) -> JanPartition:
    """Starting point of the search: empty (fw), naive Bayes (bw) or one complete group (wc)"""
    generator = Generator(generator)
    attrs = tuple(sorted(attrs))
    if generator is Generator.FW:
        return JanPartition((), class_index)
    if generator is Generator.BW:
        return JanPartition(tuple((a,) for a in attrs), class_index)
    return JanPartition((attrs,) if attrs else (), class_index)


def _candidate_generator(generator: Generator, attrs: Sequence[int]) -> Callable[[JanPartition], List[JanPartition]]:
    if generator is Generator.FW:
        return lambda p: fw_candidates(p, attrs)
    if generator is Generator.BW:
        return bw_candidates
    return wc_candidates


def cv_accuracy(structure: CgnStructure, data: Dataset, folds: Sequence[Fold]) -> float:
    """Mean ML accuracy over the folds; -inf when the structure is unacceptable on any training split"""
    accuracies = []
    for train_rows, test_rows in folds:
        train = data.take(train_rows)
        if not is_acceptable(structure, train).acceptable:
            return -math.inf
        model = fit_ml(structure, train)
        test = data.take(test_rows)
        predicted = np.array([int(np.argmax(p.log_probs))
                              for p in class_posteriors_ml(model, test.values)])
        accuracies.append(float(np.mean(predicted == test.labels)))
    return float(np.mean(accuracies))


def wrapper_search(data: Dataset, generator, cv_folds: int = 10,
                   seed: int = 0) -> Tuple[JanPartition, SearchTrace]:
    """
    Greedy wrapper search over JAN partitions

    Every candidate is scored by mean cross-validated accuracy of the ML
    classifier on one fold split fixed for the whole search. The best
    candidate (ties: fewer parameters, then generation order) replaces the
    incumbent only when it strictly improves on it.

    Args:
        data: Training data; its continuous attributes are the search space
        generator: fw, bw or wc
        cv_folds: Inner folds, reduced to the smallest class count if needed
        seed: Fold split seed

    Returns:
        (final partition, trace)
    """
    generator = Generator(generator)
    attrs = tuple(i for i in data.continuous_indexes if i != data.class_index)
    counts = data.class_counts()
    smallest = int(counts[counts > 0].min())
    folds_used = min(cv_folds, smallest)
    if folds_used < 2:
        raise SearchError(f"smallest class has {smallest} rows; cannot cross-validate")
    if folds_used < cv_folds:
        logger.warning(f"Wrapper folds reduced from {cv_folds} to {folds_used} "
                       f"(smallest class has {smallest} rows)")
    folds = tuple(stratified_kfold(data, folds_used, seed))

    cache: Dict[JanPartition, float] = {}

    def score(partition: JanPartition) -> float:
        if partition not in cache:
            cache[partition] = cv_accuracy(jan_to_structure(partition, data.meta), data, folds)
            logger.debug(f"Candidate {partition}: {cache[partition]:.4f}")
        return cache[partition]

    incumbent = initial_partition(generator, attrs, data.class_index)
    best = score(incumbent)
    if best == -math.inf:
        raise SearchError(f"initial {generator.value} structure {incumbent} is not acceptable "
                          f"on every wrapper training fold")
    initial_score = best

    candidates_of = _candidate_generator(generator, attrs)
    iterations: List[SearchIteration] = []
    while True:
        candidates = candidates_of(incumbent)
        if not candidates:
            break
        ranked = min(enumerate(candidates),
                     key=lambda item: (-score(item[1]),
                                       count_parameters(jan_to_structure(item[1], data.meta)),
                                       item[0]))
        winner = ranked[1]
        winner_score = score(winner)
        improved = winner_score > best
        if improved:
            incumbent, best = winner, winner_score
        iterations.append(SearchIteration(len(candidates), winner_score, best, incumbent))
        if not improved:
            break

    logger.info(f"Wrapper search ({generator.value}) selected {incumbent} with CV accuracy "
                f"{best:.4f} after {len(iterations)} iterations")
    return incumbent, SearchTrace(initial_partition(generator, attrs, data.class_index),
                                  initial_score, tuple(iterations), incumbent, folds)


def _attributes(n_attrs: int, k: int, meta: Optional[Sequence[VariableMeta]],
                class_index: int) -> Tuple[Tuple[int, ...], Sequence[VariableMeta]]:
    if n_attrs < 1:
        raise ContractViolation(f"need at least one attribute, got {n_attrs}")
    if not 1 <= k <= n_attrs:
        raise ContractViolation(f"k must be in [1, {n_attrs}], got {k}")
    if meta is None:
        if class_index != 0:
            raise ContractViolation("variable metadata is required when the class is not index 0")
        meta = default_meta(n_attrs)
    attrs = tuple(m.index for m in meta if m.is_continuous and m.index != class_index)
    if len(attrs) != n_attrs:
        raise ContractViolation(f"metadata has {len(attrs)} continuous attributes, expected {n_attrs}")
    return attrs, meta


def kbox_partition(n_attrs: int, k: int, meta: Optional[Sequence[VariableMeta]] = None,
                   class_index: int = 0) -> JanPartition:
    """Consecutive blocks of k attributes in index order; the last block may be smaller"""
    attrs, _ = _attributes(n_attrs, k, meta, class_index)
    return JanPartition(tuple(attrs[i:i + k] for i in range(0, n_attrs, k)), class_index)


def kbox_structure(n_attrs: int, k: int, meta: Optional[Sequence[VariableMeta]] = None,
                   class_index: int = 0) -> CgnStructure:
    """JAN structure of the k-BOX partition"""
    partition = kbox_partition(n_attrs, k, meta, class_index)
    _, meta = _attributes(n_attrs, k, meta, class_index)
    return jan_to_structure(partition, meta)


def kband_structure(n_attrs: int, k: int, meta: Optional[Sequence[VariableMeta]] = None,
                    class_index: int = 0) -> CgnStructure:
    """
    k-BAND structure

    Each attribute has the class and its k-1 predecessors (in index order) as parents.
    """
    attrs, meta = _attributes(n_attrs, k, meta, class_index)
    by_index = {m.index: m for m in meta}
    parents: Dict[int, Tuple[int, ...]] = {class_index: ()}
    for position, a in enumerate(attrs):
        parents[a] = (class_index,) + attrs[max(0, position - k + 1):position]
    variables = tuple(by_index[i] for i in sorted(parents))
    return CgnStructure(variables, parents, class_index)


def naive_bayes_structure(meta: Sequence[VariableMeta], class_index: int) -> CgnStructure:
    """Every continuous attribute with the class as its only parent"""
    attrs = tuple(m.index for m in meta if m.is_continuous and m.index != class_index)
    return jan_to_structure(JanPartition(tuple((a,) for a in attrs), class_index), meta)
