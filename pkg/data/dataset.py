"""
Mixed Dataset Model
Discrete/continuous variables, observations, cells and per-cell sufficient statistics
"""

import logging
import math
import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from core.exceptions import ContractViolation, ParseError

logger = logging.getLogger(__name__)


class VariableKind(Enum):
    """Kinds of variables a CGN can hold"""
    DISCRETE = "discrete"
    CONTINUOUS = "continuous"


@dataclass(frozen=True)
class VariableMeta:
    """
    Metadata of one variable

    labels, when given, fixes the category encoding of a discrete variable;
    otherwise categories are coded in first-appearance order at load time.
    """
    name: str
    kind: VariableKind
    index: int
    cardinality: Optional[int] = None
    labels: Optional[Tuple[str, ...]] = None

    def __post_init__(self):
        if isinstance(self.kind, str):
            object.__setattr__(self, "kind", VariableKind(self.kind))
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(str(label) for label in self.labels))
            if self.cardinality is None:
                object.__setattr__(self, "cardinality", len(self.labels))
        if self.is_discrete:
            if self.cardinality is None or self.cardinality < 2:
                raise ContractViolation(f"discrete variable '{self.name}' needs cardinality >= 2, "
                                        f"got {self.cardinality}")
            if self.labels is not None and len(self.labels) != self.cardinality:
                raise ContractViolation(f"variable '{self.name}' declares {self.cardinality} "
                                        f"categories but lists {len(self.labels)} labels")
        elif self.cardinality is not None or self.labels is not None:
            raise ContractViolation(f"continuous variable '{self.name}' cannot have categories")

    @property
    def is_discrete(self) -> bool:
        return self.kind is VariableKind.DISCRETE

    @property
    def is_continuous(self) -> bool:
        return self.kind is VariableKind.CONTINUOUS


@dataclass(frozen=True)
class Cell:
    """A joint assignment of values to an ordered set of discrete variables"""
    indexes: Tuple[int, ...]
    values: Tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "indexes", tuple(int(i) for i in self.indexes))
        object.__setattr__(self, "values", tuple(int(v) for v in self.values))
        if len(self.indexes) != len(self.values):
            raise ContractViolation(f"cell has {len(self.indexes)} indexes "
                                    f"but {len(self.values)} values")


@dataclass(frozen=True)
class SufficientStats:
    """
    Statistics of the continuous variables B over the rows of one cell

    mean and sigma_hat are None for an empty cell.
    """
    n: int
    member_rows: np.ndarray
    s: np.ndarray
    mean: Optional[np.ndarray]
    ss: np.ndarray
    ssd: np.ndarray
    sigma_hat: Optional[np.ndarray]

    @classmethod
    def from_values(cls, member_rows: np.ndarray, values: np.ndarray) -> "SufficientStats":
        """
        Compute statistics from the rows of a cell

        Args:
            member_rows: Row indexes d(i_A) of the cell
            values: len(member_rows) x |B| matrix of continuous values
        """
        values = np.asarray(values, dtype=float)
        n, width = values.shape
        s = values.sum(axis=0)
        ss = values.T @ values
        if n == 0:
            return cls(0, np.asarray(member_rows, dtype=int), s, None, ss,
                       np.zeros((width, width)), None)
        mean = s / n
        centered = values - mean
        ssd = centered.T @ centered
        ssd = 0.5 * (ssd + ssd.T)
        return cls(n, np.asarray(member_rows, dtype=int), s, mean, ss, ssd, ssd / n)

    def merge(self, other: "SufficientStats") -> "SufficientStats":
        """Combine statistics of two disjoint row sets"""
        if self.s.shape != other.s.shape:
            raise ContractViolation("cannot merge statistics over different variable sets")
        n = self.n + other.n
        s = self.s + other.s
        ss = self.ss + other.ss
        rows = np.concatenate([self.member_rows, other.member_rows])
        if n == 0:
            return SufficientStats(0, rows, s, None, ss, np.zeros_like(ss), None)
        mean = s / n
        ssd = ss - np.outer(s, s) / n
        ssd = 0.5 * (ssd + ssd.T)
        return SufficientStats(n, rows, s, mean, ss, ssd, ssd / n)


class Dataset:
    """
    Immutable sample of n observations over mixed variables

    Discrete values are stored as integer codes in [0, cardinality) inside one
    float matrix whose columns follow variable indexes. row_ids keeps the
    position of each row in the originally loaded data.
    """

    def __init__(self, meta: Sequence[VariableMeta], values: np.ndarray, class_index: int,
                 row_ids: Optional[np.ndarray] = None, allow_empty: bool = False):
        """
        Initialize dataset

        Args:
            meta: Variable metadata, indexes contiguous from 0
            values: n x |V| matrix of observations
            class_index: Index of the class variable (discrete)
            row_ids: Original row identifiers, defaults to 0..n-1
            allow_empty: Permit n = 0 (sub-datasets only)
        """
        self.meta: Tuple[VariableMeta, ...] = tuple(meta)
        if [m.index for m in self.meta] != list(range(len(self.meta))):
            raise ContractViolation("variable indexes must be unique and contiguous from 0")
        names = [m.name for m in self.meta]
        if len(set(names)) != len(names):
            raise ContractViolation(f"duplicate variable names: {names}")

        values = np.array(values, dtype=float).reshape(-1, len(self.meta))
        if values.shape[0] == 0 and not allow_empty:
            raise ContractViolation("a dataset needs at least one observation")
        if not np.all(np.isfinite(values)):
            raise ContractViolation("dataset contains missing or non-finite values")

        if not 0 <= class_index < len(self.meta) or not self.meta[class_index].is_discrete:
            raise ContractViolation(f"class index {class_index} must name a discrete variable")
        self.class_index = class_index

        for var in self.meta:
            if var.is_discrete:
                column = values[:, var.index]
                if np.any(column != np.round(column)) or np.any(column < 0) \
                        or np.any(column >= var.cardinality):
                    raise ContractViolation(f"values of '{var.name}' must be codes in "
                                            f"[0, {var.cardinality})")

        values.setflags(write=False)
        self.values = values
        ids = np.arange(values.shape[0]) if row_ids is None else np.array(row_ids, dtype=int)
        ids.setflags(write=False)
        self.row_ids = ids

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def class_meta(self) -> VariableMeta:
        return self.meta[self.class_index]

    @property
    def n_classes(self) -> int:
        return self.class_meta.cardinality

    @property
    def discrete_indexes(self) -> Tuple[int, ...]:
        return tuple(m.index for m in self.meta if m.is_discrete)

    @property
    def continuous_indexes(self) -> Tuple[int, ...]:
        return tuple(m.index for m in self.meta if m.is_continuous)

    @property
    def labels(self) -> np.ndarray:
        """Class codes of every row"""
        return self.values[:, self.class_index].astype(int)

    def codes(self, indexes: Sequence[int]) -> np.ndarray:
        """n x len(indexes) integer codes of discrete variables"""
        return self.values[:, list(indexes)].astype(int)

    def cardinalities(self, indexes: Sequence[int]) -> Tuple[int, ...]:
        return tuple(self.meta[i].cardinality for i in indexes)

    def cell_ids(self, indexes: Sequence[int]) -> np.ndarray:
        """Flat C-order cell number of each row over the given discrete variables"""
        indexes = list(indexes)
        if not indexes:
            return np.zeros(self.n, dtype=int)
        return np.ravel_multi_index(tuple(self.codes(indexes).T), self.cardinalities(indexes))

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes)

    def rows_in_cell(self, cell: Cell) -> np.ndarray:
        """Row positions whose discrete values match the cell"""
        if not cell.indexes:
            return np.arange(self.n)
        for index, value in zip(cell.indexes, cell.values):
            meta = self.meta[index]
            if not meta.is_discrete or not 0 <= value < meta.cardinality:
                raise ContractViolation(f"cell value {value} invalid for variable '{meta.name}'")
        mask = np.all(self.codes(cell.indexes) == np.asarray(cell.values), axis=1)
        return np.flatnonzero(mask)

    def take(self, rows: Sequence[int]) -> "Dataset":
        """Sub-dataset with the given row positions, keeping original row ids"""
        rows = np.asarray(rows, dtype=int)
        return Dataset(self.meta, self.values[rows], self.class_index,
                       row_ids=self.row_ids[rows], allow_empty=True)

    def __len__(self) -> int:
        return self.n

    def __repr__(self) -> str:
        return (f"Dataset(n={self.n}, discrete={len(self.discrete_indexes)}, "
                f"continuous={len(self.continuous_indexes)}, class='{self.class_meta.name}')")


def cell_stats(data: Dataset, cell: Cell, continuous: Sequence[int]) -> SufficientStats:
    """
    Sufficient statistics of continuous variables B over the rows of a cell

    Args:
        data: Dataset
        cell: Assignment to discrete variables (may be empty: all rows)
        continuous: Ordered continuous variable indexes B

    Returns:
        SufficientStats; an empty cell gives n = 0
    """
    continuous = list(continuous)
    for index in continuous:
        if not data.meta[index].is_continuous:
            raise ContractViolation(f"variable '{data.meta[index].name}' is not continuous")
    for index in cell.indexes:
        if not data.meta[index].is_discrete:
            raise ContractViolation(f"cell variable '{data.meta[index].name}' is not discrete")
    rows = data.rows_in_cell(cell)
    return SufficientStats.from_values(rows, data.values[np.ix_(rows, continuous)])


SchemaEntry = Union[VariableMeta, Dict]


def _schema_from_entries(schema: Sequence[SchemaEntry]) -> List[Dict]:
    entries = []
    for entry in schema:
        if isinstance(entry, VariableMeta):
            entries.append({"name": entry.name, "kind": entry.kind.value,
                            "labels": entry.labels, "cardinality": entry.cardinality})
        else:
            entries.append({"name": entry["name"], "kind": entry.get("kind", "continuous"),
                            "labels": entry.get("labels"),
                            "cardinality": entry.get("cardinality")})
    return entries


def infer_schema(path: Union[str, Path], discrete_columns: Sequence[str]) -> List[Dict]:
    """
    Build a schema from a CSV header

    Args:
        path: CSV file
        discrete_columns: Names of the discrete columns; every other column is continuous

    Returns:
        Schema entries in header order
    """
    try:
        header = pd.read_csv(path, nrows=0).columns
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as error:
        raise ParseError(f"cannot read header: {error}", path=str(path), line=1) from error
    discrete = set(discrete_columns)
    missing = discrete - set(header)
    if missing:
        raise ParseError(f"discrete columns not in header: {sorted(missing)}", path=str(path), line=1)
    return [{"name": name, "kind": "discrete" if name in discrete else "continuous"}
            for name in header]


def load_csv(path: Union[str, Path], schema: Sequence[SchemaEntry],
             class_variable: Optional[str] = None) -> Dataset:
    """
    Load a comma-separated dataset

    Args:
        path: CSV file with a header row
        schema: Variable descriptions in header order (VariableMeta or dicts with
            name, kind and optional labels/cardinality)
        class_variable: Name of the class variable, defaults to the last discrete one

    Returns:
        Dataset with rows in file order
    """
    path = str(path)
    entries = _schema_from_entries(schema)
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True,
                            encoding="utf-8")
    except FileNotFoundError as error:
        raise ParseError("file not found", path=path) from error
    except pd.errors.ParserError as error:
        match = re.search(r"line (\d+)", str(error))
        raise ParseError(f"malformed row: {error}", path=path,
                         line=int(match.group(1)) if match else None) from error
    except (OSError, UnicodeDecodeError, pd.errors.EmptyDataError) as error:
        raise ParseError(f"unreadable file: {error}", path=path) from error

    header = [str(column).strip() for column in frame.columns]
    expected = [entry["name"] for entry in entries]
    if header != expected:
        raise ParseError(f"header {header} does not match schema {expected}", path=path, line=1)

    n_rows = len(frame)
    values = np.zeros((n_rows, len(entries)))
    meta: List[VariableMeta] = []
    for index, entry in enumerate(entries):
        column = frame.iloc[:, index]
        # pandas pads short rows with NaN even with keep_default_na=False
        missing = column.isna().to_numpy()
        if missing.any():
            line = int(np.flatnonzero(missing)[0]) + 2
            raise ParseError("row has fewer fields than the header", path=path, line=line)
        raw = column.str.strip().tolist()

        if entry["kind"] == VariableKind.DISCRETE.value:
            labels = entry["labels"]
            if labels is not None:
                lookup = {str(label): code for code, label in enumerate(labels)}
            else:
                lookup = {}
                for token in raw:
                    lookup.setdefault(token, len(lookup))
                labels = tuple(lookup)
            codes = []
            for position, token in enumerate(raw):
                if token not in lookup:
                    raise ParseError(f"unknown category '{token}' for '{entry['name']}'",
                                     path=path, line=position + 2)
                codes.append(lookup[token])
            cardinality = entry["cardinality"] or len(labels)
            if entry["labels"] is None and cardinality > len(labels):
                labels = tuple(labels) + tuple(str(code) for code in range(len(labels), cardinality))
            values[:, index] = codes
            meta.append(VariableMeta(entry["name"], VariableKind.DISCRETE, index,
                                     cardinality=cardinality, labels=tuple(labels)))
        else:
            for position, token in enumerate(raw):
                try:
                    number = float(token)
                except ValueError:
                    raise ParseError(f"non-numeric value '{token}' in continuous column "
                                     f"'{entry['name']}'", path=path, line=position + 2) from None
                if not math.isfinite(number):
                    raise ParseError(f"non-finite value '{token}' in '{entry['name']}'",
                                     path=path, line=position + 2)
                values[position, index] = number
            meta.append(VariableMeta(entry["name"], VariableKind.CONTINUOUS, index))

    if n_rows == 0:
        raise ParseError("file has no observations", path=path, line=2)

    if class_variable is None:
        discrete = [m for m in meta if m.is_discrete]
        if not discrete:
            raise ParseError("schema has no discrete class variable", path=path, line=1)
        class_meta = discrete[-1]
    else:
        matches = [m for m in meta if m.name == class_variable]
        if not matches:
            raise ParseError(f"class variable '{class_variable}' not in schema", path=path, line=1)
        class_meta = matches[0]

    data = Dataset(meta, values, class_meta.index)
    logger.info(f"Loaded {path}: {data}")
    return data


def write_csv(data: Dataset, path: Union[str, Path]) -> None:
    """Write a dataset with category labels and full-precision reals"""
    columns = {}
    for meta in data.meta:
        column = data.values[:, meta.index]
        if meta.is_discrete:
            labels = meta.labels or tuple(str(code) for code in range(meta.cardinality))
            columns[meta.name] = [labels[int(code)] for code in column]
        else:
            columns[meta.name] = [repr(float(value)) for value in column]
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(columns).to_csv(path, index=False)
    logger.info(f"Wrote {data.n} rows to {path}")
