"""
CGN Maximum Likelihood Core
Acceptability checking, maximum likelihood fitting and the factorized joint density
"""

import itertools
import logging
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Dict, List, Mapping, Sequence, Tuple

import numpy as np
from scipy import linalg, stats

from core.exceptions import ContractViolation, PreconditionError
from data.cgn_structure import CgnStructure, validate_structure
from data.dataset import Cell, Dataset, SufficientStats
from data.parameters import GaussLinRegParams, MultinomialParams, is_positive_definite

logger = logging.getLogger(__name__)

# smallest accepted Cholesky pivot of a cell's centered scatter matrix
PD_TOLERANCE = 1e-10

CellKey = Tuple[int, ...]


class ViolationReason(Enum):
    """Why a node/cell pair makes a sample unacceptable"""
    EMPTY_CELL = "empty-cell"
    SINGULAR_SSD = "singular-ssd"


@dataclass(frozen=True)
class AcceptabilityViolation:
    node: int
    cell: Cell
    reason: ViolationReason


@dataclass(frozen=True)
class AcceptabilityReport:
    """Result of checking whether a sample supports ML estimation for a structure"""
    violations: Tuple[AcceptabilityViolation, ...] = ()

    @property
    def acceptable(self) -> bool:
        return not self.violations

    def summary(self) -> str:
        if self.acceptable:
            return "acceptable"
        parts = [f"node {v.node} cell {dict(zip(v.cell.indexes, v.cell.values))}: {v.reason.value}"
                 for v in self.violations[:5]]
        more = len(self.violations) - len(parts)
        return "; ".join(parts) + (f"; and {more} more" if more > 0 else "")


def cell_space(cardinalities: Sequence[int]) -> List[CellKey]:
    """Every cell of a product space in C order"""
    return [tuple(cell) for cell in itertools.product(*(range(c) for c in cardinalities))]


@dataclass(frozen=True)
class DiscreteCpt:
    """Conditional probability table of one discrete node"""
    node: int
    parents: Tuple[int, ...]
    parent_cardinalities: Tuple[int, ...]
    cardinality: int
    table: Mapping[CellKey, MultinomialParams]

    def row(self, cell: CellKey) -> MultinomialParams:
        return self.table[tuple(cell)]

    @cached_property
    def log_table(self) -> np.ndarray:
        """(number of parent cells) x cardinality array of ln theta, C order over parent cells"""
        cells = cell_space(self.parent_cardinalities)
        return np.log(np.vstack([self.table[cell].theta for cell in cells]))


@dataclass(frozen=True)
class ContinuousCpd:
    """Per-cell Gaussian linear regressions of one continuous node"""
    node: int
    discrete_parents: Tuple[int, ...]
    continuous_parents: Tuple[int, ...]
    parent_cardinalities: Tuple[int, ...]
    table: Mapping[CellKey, GaussLinRegParams]

    def regression(self, cell: CellKey) -> GaussLinRegParams:
        return self.table[tuple(cell)]

    @cached_property
    def stacked(self) -> Tuple[np.ndarray, np.ndarray]:
        """(cells x p coefficient matrix, cells vector of variances) in C order"""
        cells = cell_space(self.parent_cardinalities)
        betas = np.vstack([self.table[cell].beta for cell in cells])
        variances = np.array([self.table[cell].sigma2 for cell in cells])
        return betas, variances


@dataclass(frozen=True)
class CgnModel:
    """A CGN structure with point-estimate parameters for every node and cell"""
    structure: CgnStructure
    discrete: Mapping[int, DiscreteCpt] = field(default_factory=dict)
    continuous: Mapping[int, ContinuousCpd] = field(default_factory=dict)


def _family_stats(data: Dataset, rows: np.ndarray, block: Sequence[int]) -> SufficientStats:
    return SufficientStats.from_values(rows, data.values[np.ix_(rows, list(block))])


def _rows_by_cell(data: Dataset, indexes: Sequence[int], n_cells: int) -> List[np.ndarray]:
    """Row positions of every cell of the product space, C order"""
    ids = data.cell_ids(indexes)
    order = np.argsort(ids, kind="stable")
    bounds = np.searchsorted(ids[order], np.arange(n_cells + 1))
    return [order[bounds[c]:bounds[c + 1]] for c in range(n_cells)]


def is_acceptable(structure: CgnStructure, data: Dataset) -> AcceptabilityReport:
    """
    Check whether data supports ML estimation for the structure

    Every discrete family cell must be observed, and for every continuous node
    each discrete-parent cell needs rows whose centered scatter matrix over
    pc(node) and the node is positive definite.

    Args:
        structure: Valid CGN structure
        data: Sample

    Returns:
        AcceptabilityReport listing offending node/cell pairs
    """
    require_valid(structure)
    violations: List[AcceptabilityViolation] = []

    for delta in structure.discrete_nodes:
        family = structure.pa(delta) + (delta,)
        cards = structure.cardinalities(family)
        counts = np.bincount(data.cell_ids(family), minlength=int(np.prod(cards)))
        for flat in np.flatnonzero(counts == 0):
            values = np.unravel_index(flat, cards)
            violations.append(AcceptabilityViolation(delta, Cell(family, values),
                                                     ViolationReason.EMPTY_CELL))

    for gamma in structure.continuous_nodes:
        pd_nodes = structure.pd(gamma)
        block = structure.pc(gamma) + (gamma,)
        cells = cell_space(structure.cardinalities(pd_nodes))
        for cell, rows in zip(cells, _rows_by_cell(data, pd_nodes, len(cells))):
            if rows.size == 0:
                reason = ViolationReason.EMPTY_CELL
            elif not is_positive_definite(_family_stats(data, rows, block).ssd, PD_TOLERANCE):
                reason = ViolationReason.SINGULAR_SSD
            else:
                continue
            violations.append(AcceptabilityViolation(gamma, Cell(pd_nodes, cell), reason))

    return AcceptabilityReport(tuple(violations))


def _fit_regression(family: SufficientStats, n_parents: int) -> GaussLinRegParams:
    """ML regression of the last block variable on the first n_parents ones"""
    M = family.sigma_hat
    mean = family.mean
    if n_parents == 0:
        return GaussLinRegParams(np.array([mean[0]]), M[0, 0])
    M_pp = M[:n_parents, :n_parents]
    M_pg = M[:n_parents, n_parents]
    r = linalg.cho_solve(linalg.cho_factor(M_pp, lower=True), M_pg)
    intercept = mean[n_parents] - r @ mean[:n_parents]
    sigma2 = M[n_parents, n_parents] - r @ M_pg
    return GaussLinRegParams(np.concatenate([[intercept], r]), sigma2)


def fit_ml(structure: CgnStructure, data: Dataset) -> CgnModel:
    """
    Maximum likelihood parameters of a CGN

    Args:
        structure: Valid CGN structure
        data: Sample acceptable for the structure

    Returns:
        Fitted CgnModel
    """
    report = is_acceptable(structure, data)
    if not report.acceptable:
        raise PreconditionError(f"sample of {data.n} rows is not acceptable: {report.summary()}",
                                report)

    discrete: Dict[int, DiscreteCpt] = {}
    for delta in structure.discrete_nodes:
        parents = structure.pa(delta)
        parent_cards = structure.cardinalities(parents)
        card = structure.meta(delta).cardinality
        family_cards = parent_cards + (card,)
        counts = np.bincount(data.cell_ids(parents + (delta,)),
                             minlength=int(np.prod(family_cards))).reshape(-1, card)
        table = {cell: MultinomialParams(row / row.sum())
                 for cell, row in zip(cell_space(parent_cards), counts)}
        discrete[delta] = DiscreteCpt(delta, parents, parent_cards, card, table)

    continuous: Dict[int, ContinuousCpd] = {}
    for gamma in structure.continuous_nodes:
        pd_nodes = structure.pd(gamma)
        pc_nodes = structure.pc(gamma)
        cards = structure.cardinalities(pd_nodes)
        cells = cell_space(cards)
        table = {}
        for cell, rows in zip(cells, _rows_by_cell(data, pd_nodes, len(cells))):
            family = _family_stats(data, rows, pc_nodes + (gamma,))
            table[cell] = _fit_regression(family, len(pc_nodes))
        continuous[gamma] = ContinuousCpd(gamma, pd_nodes, pc_nodes, cards, table)

    logger.debug(f"Fitted ML model with {len(discrete)} discrete and "
                 f"{len(continuous)} continuous nodes on {data.n} rows")
    return CgnModel(structure, discrete, continuous)


def check_assignments(structure: CgnStructure, X: np.ndarray) -> np.ndarray:
    """Validate a matrix of full assignments (one row per observation)"""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    needed = max(structure.nodes) + 1 if structure.nodes else 0
    if X.shape[1] < needed:
        raise ContractViolation(f"assignments have {X.shape[1]} entries, "
                                f"structure needs {needed}")
    for delta in structure.discrete_nodes:
        codes = X[:, delta]
        card = structure.meta(delta).cardinality
        if np.any(codes != np.round(codes)) or np.any(codes < 0) or np.any(codes >= card):
            raise ContractViolation(f"value of discrete variable {delta} outside [0, {card})")
    return X


def flat_cells(X: np.ndarray, indexes: Sequence[int], cardinalities: Sequence[int]) -> np.ndarray:
    """Flat C-order cell number of each assignment row"""
    if not indexes:
        return np.zeros(X.shape[0], dtype=int)
    codes = X[:, list(indexes)].astype(int)
    return np.ravel_multi_index(tuple(codes.T), tuple(cardinalities))


def regressors(X: np.ndarray, continuous_parents: Sequence[int]) -> np.ndarray:
    """Design rows z = [1, y_pc] in continuous-parent index order"""
    return np.column_stack([np.ones(X.shape[0]), X[:, list(continuous_parents)]])


def node_logdensities(model: CgnModel, X: np.ndarray) -> Dict[int, np.ndarray]:
    """Per-node log-density terms for each assignment row"""
    terms: Dict[int, np.ndarray] = {}
    for delta, cpt in model.discrete.items():
        parent_cells = flat_cells(X, cpt.parents, cpt.parent_cardinalities)
        terms[delta] = cpt.log_table[parent_cells, X[:, delta].astype(int)]
    for gamma, cpd in model.continuous.items():
        betas, variances = cpd.stacked
        cells = flat_cells(X, cpd.discrete_parents, cpd.parent_cardinalities)
        mean = np.einsum("ij,ij->i", regressors(X, cpd.continuous_parents), betas[cells])
        terms[gamma] = stats.norm.logpdf(X[:, gamma], loc=mean, scale=np.sqrt(variances[cells]))
    return terms


def joint_logdensities(model: CgnModel, X) -> np.ndarray:
    """Joint log-density of each row of a matrix of full assignments"""
    X = check_assignments(model.structure, X)
    total = np.zeros(X.shape[0])
    for term in node_logdensities(model, X).values():
        total += term
    return total


def joint_logdensity(model: CgnModel, x) -> float:
    """
    Joint log-density of one full assignment

    Args:
        model: Fitted CGN
        x: Values indexed by variable index (discrete entries are category codes)

    Returns:
        Sum over nodes of ln theta and Gaussian regression log-densities
    """
    return float(joint_logdensities(model, np.asarray(x, dtype=float)[None, :])[0])


def log_likelihood(model: CgnModel, data: Dataset) -> float:
    """Total log-likelihood of a sample"""
    return float(joint_logdensities(model, data.values).sum())


def count_parameters(structure: CgnStructure) -> int:
    """
    Number of free parameters of a CGN structure

    A discrete node has (|I| - 1) probabilities per parent cell; a continuous
    node has |pc| + 1 regression weights and one variance per discrete-parent cell.
    """
    total = 0
    for delta in structure.discrete_nodes:
        cells = int(np.prod(structure.cardinalities(structure.pa(delta))))
        total += (structure.meta(delta).cardinality - 1) * cells
    for gamma in structure.continuous_nodes:
        cells = int(np.prod(structure.cardinalities(structure.pd(gamma))))
        total += (len(structure.pc(gamma)) + 2) * cells
    return total


def require_valid(structure: CgnStructure) -> None:
    """Raise if the structure is not a valid CGN"""
    violations = validate_structure(structure)
    if violations:
        raise ContractViolation("invalid structure: " + "; ".join(v.message for v in violations))
