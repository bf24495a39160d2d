"""
Shared test fixtures
Small deterministic datasets and structures used across the test suites
"""

import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).parent.parent))

from data.cgn_structure import CgnStructure
from data.dataset import Dataset, VariableKind, VariableMeta


def class_meta(cardinality: int = 2, index: int = 0) -> VariableMeta:
    return VariableMeta("class", VariableKind.DISCRETE, index,
                        labels=tuple(f"c{c}" for c in range(cardinality)))


def continuous_meta(index: int) -> VariableMeta:
    return VariableMeta(f"x{index}", VariableKind.CONTINUOUS, index)


def gaussian_classes(means, n_per_class: int, seed: int = 0, sd: float = 1.0) -> Dataset:
    """
    Class at index 0, continuous attributes drawn independently around per-class means

    Args:
        means: n_classes x n_attrs array of class means
        n_per_class: Rows per class
        seed: Random seed
        sd: Common standard deviation
    """
    means = np.atleast_2d(np.asarray(means, dtype=float))
    n_classes, n_attrs = means.shape
    rng = np.random.default_rng(seed)
    rows = []
    for c in range(n_classes):
        values = means[c] + sd * rng.standard_normal((n_per_class, n_attrs))
        rows.append(np.column_stack([np.full(n_per_class, c), values]))
    meta = [class_meta(n_classes)] + [continuous_meta(i) for i in range(1, n_attrs + 1)]
    return Dataset(meta, np.vstack(rows), class_index=0)


def mixed_meta():
    """class (2), d (3 categories), y1, y2, y3"""
    return (
        class_meta(2, 0),
        VariableMeta("d", VariableKind.DISCRETE, 1, cardinality=3),
        continuous_meta(2),
        continuous_meta(3),
        continuous_meta(4),
    )


def mixed_structure() -> CgnStructure:
    """class -> d, class -> y2, d -> y2, y2 -> y3, class -> y3, y4 alone"""
    meta = mixed_meta()
    parents = {0: (), 1: (0,), 2: (0, 1), 3: (0, 2), 4: ()}
    return CgnStructure(meta, parents, class_index=0)


def mixed_data(n: int, seed: int = 0) -> Dataset:
    """Random sample over mixed_meta with every class/d cell populated for n >= 60"""
    rng = np.random.default_rng(seed)
    c = np.arange(n) % 2
    d = (np.arange(n) // 2) % 3
    y2 = 1.0 + c - 0.5 * d + rng.standard_normal(n)
    y3 = 0.5 * y2 - c + 0.7 * rng.standard_normal(n)
    y4 = 2.0 + rng.standard_normal(n)
    return Dataset(mixed_meta(), np.column_stack([c, d, y2, y3, y4]), class_index=0)


def random_instance(rng: np.random.Generator):
    """
    Random small structure and dataset: up to 4 variables, up to 50 rows

    The class is index 0 (2 or 3 categories); the other variables are a random
    mix of one optional discrete variable and continuous ones, with random
    parents among lower indexes (continuous parents only for continuous nodes).
    """
    n_vars = int(rng.integers(2, 5))
    n_rows = int(rng.integers(5, 51))
    n_classes = int(rng.integers(2, 4))
    meta = [class_meta(n_classes)]
    kinds = ["continuous"] * (n_vars - 1)
    if n_vars > 2 and rng.random() < 0.5:
        kinds[0] = "discrete"
    for index, kind in enumerate(kinds, start=1):
        if kind == "discrete":
            meta.append(VariableMeta(f"d{index}", VariableKind.DISCRETE, index, cardinality=2))
        else:
            meta.append(continuous_meta(index))

    parents = {0: ()}
    for m in meta[1:]:
        candidates = [p for p in range(m.index)
                      if not (m.is_discrete and meta[p].is_continuous)]
        parents[m.index] = tuple(p for p in candidates if rng.random() < 0.6)

    columns = [rng.integers(0, n_classes, n_rows)]
    for m in meta[1:]:
        if m.is_discrete:
            columns.append(rng.integers(0, m.cardinality, n_rows))
        else:
            columns.append(rng.normal(size=n_rows) * rng.uniform(0.5, 3.0) + rng.normal())
    data = Dataset(meta, np.column_stack(columns), class_index=0)
    return CgnStructure(tuple(meta), parents, class_index=0), data
