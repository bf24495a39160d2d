"""
Bayesian CGN
DHDNIG hyper-distribution over CGN parameters: suggested prior, conjugate
posterior update and the exact Bayesian-averaged predictive density
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Sequence, Tuple

import numpy as np

from core.exceptions import ContractViolation, DegeneratePriorError
from data.cgn_structure import CgnStructure
from data.dataset import Dataset
from data.parameters import DirichletParams, NigParams
from systems.cgn_core import (
    CellKey, check_assignments, flat_cells, regressors, require_valid,
)
from systems.distributions import dirichlet_posterior, nig_posterior, student_logpdf_rows

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PriorConfig:
    """Settings of the suggested DHDNIG prior"""
    dirichlet_pseudocount: float = 0.01
    rho_base: float = 1.1

    def __post_init__(self):
        if not self.dirichlet_pseudocount > 0:
            raise ContractViolation(f"dirichlet_pseudocount must be positive, "
                                    f"got {self.dirichlet_pseudocount}")
        if not self.rho_base > 0:
            raise ContractViolation(f"rho_base must be positive, got {self.rho_base}")


@dataclass(frozen=True)
class DirichletTable:
    """
    Dirichlet hyperparameters of one discrete node, one entry per parent cell

    Cells missing from `cells` carry the `default` hyperparameters.
    """
    node: int
    parents: Tuple[int, ...]
    parent_cardinalities: Tuple[int, ...]
    default: DirichletParams
    cells: Mapping[CellKey, DirichletParams] = field(default_factory=dict)

    def lookup(self, cell: Sequence[int]) -> DirichletParams:
        return self.cells.get(tuple(int(v) for v in cell), self.default)


@dataclass(frozen=True)
class NigTable:
    """
    NIG hyperparameters of one continuous node, one entry per discrete-parent cell

    Cells missing from `cells` carry the `default` hyperparameters.
    """
    node: int
    discrete_parents: Tuple[int, ...]
    continuous_parents: Tuple[int, ...]
    parent_cardinalities: Tuple[int, ...]
    default: NigParams
    cells: Mapping[CellKey, NigParams] = field(default_factory=dict)

    def lookup(self, cell: Sequence[int]) -> NigParams:
        return self.cells.get(tuple(int(v) for v in cell), self.default)


@dataclass(frozen=True)
class DhdnigParams:
    """Hyperparameters of a DHDNIG distribution over the parameters of a CGN"""
    structure: CgnStructure
    discrete: Mapping[int, DirichletTable]
    continuous: Mapping[int, NigTable]


def _check_data(structure: CgnStructure, data: Dataset) -> None:
    for meta in structure.variables:
        if meta.index >= len(data.meta):
            raise ContractViolation(f"dataset has no variable {meta.index}")
        other = data.meta[meta.index]
        if other.kind != meta.kind or other.cardinality != meta.cardinality:
            raise ContractViolation(f"variable {meta.index} of the dataset ('{other.name}') "
                                    f"does not match the structure ('{meta.name}')")


def _suggested_nig(response_mean: float, response_variance: float,
                   parent_means: np.ndarray, parent_variances: np.ndarray,
                   rho_base: float) -> NigParams:
    """Independence-inspired NIG prior for one node/cell"""
    p = parent_means.size
    K_inv = np.diag(1.0 / parent_variances)
    K_inv_m = K_inv @ parent_means
    V = np.empty((p + 1, p + 1))
    V[0, 0] = 1.0 + parent_means @ K_inv_m
    V[0, 1:] = -K_inv_m
    V[1:, 0] = -K_inv_m
    V[1:, 1:] = K_inv
    mu = np.zeros(p + 1)
    mu[0] = response_mean
    return NigParams(mu, V, rho_base + p / 2.0, response_variance / 2.0)


def init_prior(structure: CgnStructure, data: Dataset, cfg: PriorConfig = PriorConfig()) -> DhdnigParams:
    """
    Suggested DHDNIG prior for a structure

    Discrete hyperparameters are all cfg.dirichlet_pseudocount. For each
    continuous node the NIG prior uses pooled empirical means and variances of
    the training data, except the continuous-parent means, which are taken per
    discrete-parent cell (pooled for cells absent from the data).

    Args:
        structure: Valid CGN structure
        data: Training sample the empirical quantities come from
        cfg: Prior settings

    Returns:
        Prior hyperparameters
    """
    require_valid(structure)
    _check_data(structure, data)
    if data.n == 0:
        raise ContractViolation("the suggested prior needs a nonempty sample")

    discrete: Dict[int, DirichletTable] = {}
    for delta in structure.discrete_nodes:
        parents = structure.pa(delta)
        card = structure.meta(delta).cardinality
        default = DirichletParams(np.full(card, cfg.dirichlet_pseudocount))
        discrete[delta] = DirichletTable(delta, parents, structure.cardinalities(parents), default)

    needed = set(structure.continuous_nodes)
    for gamma in structure.continuous_nodes:
        needed.update(structure.pc(gamma))
    pooled_mean = {i: float(data.values[:, i].mean()) for i in needed}
    pooled_var = {i: float(data.values[:, i].var()) for i in needed}
    for index in sorted(needed):
        if not pooled_var[index] > 0:
            raise DegeneratePriorError(data.meta[index].name)

    continuous: Dict[int, NigTable] = {}
    for gamma in structure.continuous_nodes:
        pd_nodes = structure.pd(gamma)
        pc_nodes = structure.pc(gamma)
        cards = structure.cardinalities(pd_nodes)
        parent_vars = np.array([pooled_var[i] for i in pc_nodes])

        def build(parent_means: np.ndarray) -> NigParams:
            return _suggested_nig(pooled_mean[gamma], pooled_var[gamma], parent_means,
                                  parent_vars, cfg.rho_base)

        default = build(np.array([pooled_mean[i] for i in pc_nodes]))
        cells: Dict[CellKey, NigParams] = {}
        ids = flat_cells(data.values, pd_nodes, cards)
        for flat in np.unique(ids):
            cell = tuple(int(v) for v in np.unravel_index(flat, cards))
            rows = ids == flat
            cells[cell] = build(data.values[np.ix_(rows, list(pc_nodes))].mean(axis=0)
                                if pc_nodes else np.zeros(0))
        continuous[gamma] = NigTable(gamma, pd_nodes, pc_nodes, cards, default, cells)

    return DhdnigParams(structure, discrete, continuous)


def posterior(prior: DhdnigParams, data: Dataset) -> DhdnigParams:
    """
    Conjugate update of every Dirichlet and NIG table after observing data

    Continuous cells are updated with design rows z = [1, y_pc] and responses
    y_node, so rho grows by half the number of rows in each cell.

    Args:
        prior: Current hyperparameters
        data: Observations

    Returns:
        Posterior hyperparameters
    """
    if data.n == 0:
        return prior
    structure = prior.structure
    _check_data(structure, data)
    X = data.values

    discrete: Dict[int, DirichletTable] = {}
    for delta, table in prior.discrete.items():
        card = structure.meta(delta).cardinality
        parent_ids = flat_cells(X, table.parents, table.parent_cardinalities)
        codes = X[:, delta].astype(int)
        cells = dict(table.cells)
        for flat in np.unique(parent_ids):
            cell = tuple(int(v) for v in np.unravel_index(flat, table.parent_cardinalities))
            counts = np.bincount(codes[parent_ids == flat], minlength=card)
            cells[cell] = dirichlet_posterior(table.lookup(cell), counts)
        discrete[delta] = DirichletTable(delta, table.parents, table.parent_cardinalities,
                                         table.default, cells)

    continuous: Dict[int, NigTable] = {}
    for gamma, table in prior.continuous.items():
        ids = flat_cells(X, table.discrete_parents, table.parent_cardinalities)
        cells = dict(table.cells)
        for flat in np.unique(ids):
            cell = tuple(int(v) for v in np.unravel_index(flat, table.parent_cardinalities))
            rows = X[ids == flat]
            cells[cell] = nig_posterior(table.lookup(cell),
                                        regressors(rows, table.continuous_parents),
                                        rows[:, gamma])
        continuous[gamma] = NigTable(gamma, table.discrete_parents, table.continuous_parents,
                                     table.parent_cardinalities, table.default, cells)

    logger.debug(f"Updated DHDNIG hyperparameters with {data.n} rows")
    return DhdnigParams(structure, discrete, continuous)


def fit_ba(structure: CgnStructure, data: Dataset, cfg: PriorConfig = PriorConfig()) -> DhdnigParams:
    """Suggested prior built from data, then updated with the same data"""
    return posterior(init_prior(structure, data, cfg), data)


def node_predictive_logdensities(psi: DhdnigParams, X: np.ndarray) -> Dict[int, np.ndarray]:
    """Per-node Bayesian-averaged log-density terms for each assignment row"""
    terms: Dict[int, np.ndarray] = {}
    for delta, table in psi.discrete.items():
        parent_ids = flat_cells(X, table.parents, table.parent_cardinalities)
        codes = X[:, delta].astype(int)
        term = np.empty(X.shape[0])
        for flat in np.unique(parent_ids):
            cell = np.unravel_index(flat, table.parent_cardinalities)
            weights = table.lookup(cell).psi
            rows = parent_ids == flat
            term[rows] = np.log(weights[codes[rows]]) - np.log(weights.sum())
        terms[delta] = term
    for gamma, table in psi.continuous.items():
        ids = flat_cells(X, table.discrete_parents, table.parent_cardinalities)
        term = np.empty(X.shape[0])
        for flat in np.unique(ids):
            cell = np.unravel_index(flat, table.parent_cardinalities)
            rows = ids == flat
            term[rows] = student_logpdf_rows(X[rows, gamma],
                                             regressors(X[rows], table.continuous_parents),
                                             table.lookup(cell))
        terms[gamma] = term
    return terms


def predictive_logdensities(psi: DhdnigParams, X) -> np.ndarray:
    """Bayesian-averaged log-density of each row of a matrix of full assignments"""
    X = check_assignments(psi.structure, X)
    total = np.zeros(X.shape[0])
    for term in node_predictive_logdensities(psi, X).values():
        total += term
    return total


def predictive_logdensity(psi: DhdnigParams, x) -> float:
    """
    Bayesian-averaged log-density of one full assignment

    Discrete nodes contribute ln(psi_i / sum psi) of their parent cell; continuous
    nodes contribute the Student predictive of their cell's NIG at z = [1, y_pc].

    Args:
        psi: Hyperparameters (usually a posterior)
        x: Values indexed by variable index (discrete entries are category codes)

    Returns:
        Log predictive density
    """
    return float(predictive_logdensities(psi, np.asarray(x, dtype=float)[None, :])[0])


def table_cells(psi: DhdnigParams) -> List[Tuple[str, int, CellKey]]:
    """Every materialised (kind, node, cell) entry, for comparisons and serialization"""
    entries = [("dirichlet", node, cell) for node, table in psi.discrete.items()
               for cell in table.cells]
    entries += [("nig", node, cell) for node, table in psi.continuous.items()
                for cell in table.cells]
    return sorted(entries)
