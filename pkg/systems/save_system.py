"""
Save/Load System for Structures and Hyperparameters
Line-oriented text formats for CGN structures and DHDNIG hyperparameter sets
"""

import logging
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from core.exceptions import ParseError, SerializationError
from data.cgn_structure import CgnStructure
from data.dataset import VariableKind, VariableMeta
from data.parameters import DirichletParams, NigParams
from systems.bayes_cgn import DhdnigParams, DirichletTable, NigTable
from systems.cgn_core import require_valid

PathLike = Union[str, Path]


def _floats(values: Iterable[float]) -> str:
    return ",".join(repr(float(v)) for v in values)


def _ints(values: Iterable[int]) -> str:
    return ",".join(str(int(v)) for v in values)


def format_structure(structure: CgnStructure) -> str:
    """
    Text form of a structure

    One `node <index> <kind> parents=<indexes> name=<name> [cardinality=<n>]`
    line per node, preceded by `class <index>` when the structure has a class.
    """
    lines = []
    if structure.class_index is not None:
        lines.append(f"class {structure.class_index}")
    for meta in structure.variables:
        line = f"node {meta.index} {meta.kind.value} parents={_ints(structure.pa(meta.index))}"
        # names that would break tokenizing are left to the dataset metadata
        if meta.name and not any(ch.isspace() or ch == "#" for ch in meta.name):
            line += f" name={meta.name}"
        if meta.is_discrete:
            line += f" cardinality={meta.cardinality}"
        lines.append(line)
    return "\n".join(lines) + "\n"


def _split_tokens(tokens: Sequence[str], path: str, line_no: int) -> Dict[str, str]:
    fields = {}
    for token in tokens:
        key, sep, value = token.partition("=")
        if not sep:
            raise ParseError(f"expected key=value, got '{token}'", path=path, line=line_no)
        fields[key] = value
    return fields


def _parse_int_list(text: str, path: str, line_no: int) -> Tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise ParseError(f"invalid index list '{text}'", path=path, line=line_no) from None


def _parse_float_list(text: str, path: str, line_no: int) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.split(",") if v.strip()])
    except ValueError:
        raise ParseError(f"invalid number list '{text}'", path=path, line=line_no) from None


def _check_known(indexes: Iterable[int], known: Optional[Dict[int, VariableMeta]], what: str,
                 path: str, line_no: int) -> None:
    if known is None:
        return
    missing = sorted(i for i in indexes if i not in known)
    if missing:
        raise ParseError(f"{what} {_ints(missing)} not in the dataset ({len(known)} variables)",
                         path=path, line=line_no)


def _parse_node_line(tokens: List[str], known: Optional[Dict[int, VariableMeta]], path: str,
                     line_no: int) -> Tuple[VariableMeta, Tuple[int, ...]]:
    if len(tokens) < 3:
        raise ParseError("node line needs an index and a kind", path=path, line=line_no)
    try:
        index = int(tokens[1])
        kind = VariableKind(tokens[2])
    except ValueError:
        raise ParseError(f"invalid node header '{' '.join(tokens[:3])}'",
                         path=path, line=line_no) from None
    fields = _split_tokens(tokens[3:], path, line_no)
    parents = _parse_int_list(fields.get("parents", ""), path, line_no)
    _check_known([index], known, "node", path, line_no)
    _check_known(parents, known, "parent", path, line_no)

    declared = known.get(index) if known is not None else None
    name = fields.get("name", declared.name if declared else f"v{index}")
    cardinality = None
    if kind is VariableKind.DISCRETE:
        if "cardinality" in fields:
            try:
                cardinality = int(fields["cardinality"])
            except ValueError:
                raise ParseError(f"invalid cardinality '{fields['cardinality']}'",
                                 path=path, line=line_no) from None
        elif declared is not None:
            cardinality = declared.cardinality
        else:
            raise ParseError(f"discrete node {index} needs a cardinality", path=path, line=line_no)
    if declared is not None and (declared.kind is not kind or
                                 (kind is VariableKind.DISCRETE and declared.cardinality != cardinality)):
        raise ParseError(f"node {index} does not match dataset variable '{declared.name}'",
                         path=path, line=line_no)
    labels = declared.labels if declared is not None and kind is VariableKind.DISCRETE else None
    try:
        meta = VariableMeta(name, kind, index, cardinality=cardinality, labels=labels)
    except ValueError as error:
        raise ParseError(str(error), path=path, line=line_no) from None
    return meta, parents


def parse_structure(text: str, variables: Optional[Sequence[VariableMeta]] = None,
                    path: str = "<string>") -> CgnStructure:
    """
    Parse the text form produced by format_structure

    Args:
        text: Structure text; blank lines and '#' comments are ignored
        variables: Dataset metadata supplying names/cardinalities that the text omits;
            when given, every index in the text must name one of these variables
        path: Source name for error messages

    Returns:
        Validated CgnStructure
    """
    known = {m.index: m for m in variables} if variables is not None else None
    metas: List[VariableMeta] = []
    parents: Dict[int, Tuple[int, ...]] = {}
    class_index = None
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        if tokens[0] == "class":
            if len(tokens) != 2:
                raise ParseError("class line takes one index", path=path, line=line_no)
            try:
                class_index = int(tokens[1])
            except ValueError:
                raise ParseError(f"invalid class index '{tokens[1]}'", path=path, line=line_no) from None
            _check_known([class_index], known, "class", path, line_no)
        elif tokens[0] == "node":
            meta, node_parents = _parse_node_line(tokens, known, path, line_no)
            if meta.index in parents:
                raise ParseError(f"node {meta.index} listed twice", path=path, line=line_no)
            metas.append(meta)
            parents[meta.index] = node_parents
        else:
            raise ParseError(f"unknown record '{tokens[0]}'", path=path, line=line_no)

    structure = CgnStructure(tuple(metas), parents, class_index)
    try:
        require_valid(structure)
    except ValueError as error:
        raise ParseError(str(error), path=path) from None
    return structure


def _format_matrix(matrix: np.ndarray) -> str:
    return ";".join(_floats(row) for row in matrix)


def format_hyperparameters(psi: DhdnigParams) -> str:
    """
    Text form of a DHDNIG hyperparameter set

    The structure lines are followed by `dirichlet` and `nig` records, one per
    table default and one per materialised cell. Reals use repr so they
    round-trip exactly.
    """
    lines = [format_structure(psi.structure).rstrip("\n")]
    for node in sorted(psi.discrete):
        table = psi.discrete[node]
        entries = [("default", table.default)]
        entries += [(f"cell={_ints(cell)}", table.cells[cell]) for cell in sorted(table.cells)]
        for key, params in entries:
            lines.append(f"dirichlet {node} {key} psi={_floats(params.psi)}")
    for node in sorted(psi.continuous):
        table = psi.continuous[node]
        entries = [("default", table.default)]
        entries += [(f"cell={_ints(cell)}", table.cells[cell]) for cell in sorted(table.cells)]
        for key, params in entries:
            lines.append(f"nig {node} {key} rho={float(params.rho)!r} phi={float(params.phi)!r} "
                         f"mu={_floats(params.mu)} V={_format_matrix(params.V)}")
    return "\n".join(lines) + "\n"


def parse_hyperparameters(text: str, path: str = "<string>") -> DhdnigParams:
    """Parse the text form produced by format_hyperparameters"""
    structure_lines: List[str] = []
    records: List[Tuple[int, List[str]]] = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        tokens = raw.split("#", 1)[0].split()
        if tokens and tokens[0] in ("dirichlet", "nig"):
            records.append((line_no, tokens))
            structure_lines.append("")
        else:
            structure_lines.append(raw)
    structure = parse_structure("\n".join(structure_lines), path=path)

    defaults: Dict[Tuple[str, int], object] = {}
    cells: Dict[Tuple[str, int], Dict[Tuple[int, ...], object]] = {}
    for line_no, tokens in records:
        kind = tokens[0]
        try:
            node = int(tokens[1])
        except (IndexError, ValueError):
            raise ParseError(f"{kind} record needs a node index", path=path, line=line_no) from None
        if len(tokens) < 3:
            raise ParseError(f"{kind} record needs a cell", path=path, line=line_no)
        fields = _split_tokens([t for t in tokens[2:] if t != "default"], path, line_no)
        try:
            if kind == "dirichlet":
                params = DirichletParams(_parse_float_list(fields["psi"], path, line_no))
            else:
                rows = [_parse_float_list(row, path, line_no) for row in fields["V"].split(";")]
                params = NigParams(_parse_float_list(fields["mu"], path, line_no), np.vstack(rows),
                                   float(fields["rho"]), float(fields["phi"]))
        except KeyError as error:
            raise ParseError(f"{kind} record misses {error}", path=path, line=line_no) from None
        except ValueError as error:
            raise ParseError(f"invalid {kind} record: {error}", path=path, line=line_no) from None
        if tokens[2] == "default":
            defaults[(kind, node)] = params
        else:
            cell = _parse_int_list(fields.get("cell", ""), path, line_no)
            cells.setdefault((kind, node), {})[cell] = params

    discrete = {}
    for delta in structure.discrete_nodes:
        if ("dirichlet", delta) not in defaults:
            raise ParseError(f"no default Dirichlet record for node {delta}", path=path)
        parents = structure.pa(delta)
        discrete[delta] = DirichletTable(delta, parents, structure.cardinalities(parents),
                                         defaults[("dirichlet", delta)],
                                         cells.get(("dirichlet", delta), {}))
    continuous = {}
    for gamma in structure.continuous_nodes:
        if ("nig", gamma) not in defaults:
            raise ParseError(f"no default NIG record for node {gamma}", path=path)
        pd_nodes = structure.pd(gamma)
        continuous[gamma] = NigTable(gamma, pd_nodes, structure.pc(gamma),
                                     structure.cardinalities(pd_nodes), defaults[("nig", gamma)],
                                     cells.get(("nig", gamma), {}))
    return DhdnigParams(structure, discrete, continuous)


class SaveSystem:
    """
    File persistence for structures and hyperparameter sets

    Files are written whole; read and write failures raise SerializationError
    naming the path, format errors raise ParseError.
    """

    def __init__(self, save_directory: PathLike = "."):
        """
        Initialize save system

        Args:
            save_directory: Base directory for relative paths
        """
        self.logger = logging.getLogger(__name__)
        self.save_directory = Path(save_directory)

    def _resolve(self, path: PathLike) -> Path:
        path = Path(path)
        return path if path.is_absolute() else self.save_directory / path

    def _write(self, path: PathLike, text: str) -> Path:
        target = self._resolve(path)
        try:
            target.parent.mkdir(parents=True, exist_ok=True)
            target.write_text(text, encoding="utf-8")
        except OSError as error:
            self.logger.error(f"Failed to write {target}: {error}")
            raise SerializationError(str(error), path=str(target)) from error
        return target

    def _read(self, path: PathLike) -> Tuple[Path, str]:
        target = self._resolve(path)
        try:
            return target, target.read_text(encoding="utf-8")
        except OSError as error:
            self.logger.error(f"Failed to read {target}: {error}")
            raise SerializationError(str(error), path=str(target)) from error

    def save_structure(self, structure: CgnStructure, path: PathLike) -> Path:
        target = self._write(path, format_structure(structure))
        self.logger.info(f"Structure with {len(structure.nodes)} nodes saved to {target}")
        return target

    def load_structure(self, path: PathLike,
                       variables: Optional[Sequence[VariableMeta]] = None) -> CgnStructure:
        target, text = self._read(path)
        structure = parse_structure(text, variables, path=str(target))
        self.logger.info(f"Loaded structure with {len(structure.nodes)} nodes from {target}")
        return structure

    def save_hyperparameters(self, psi: DhdnigParams, path: PathLike) -> Path:
        target = self._write(path, format_hyperparameters(psi))
        self.logger.info(f"Hyperparameters saved to {target}")
        return target

    def load_hyperparameters(self, path: PathLike) -> DhdnigParams:
        target, text = self._read(path)
        return parse_hyperparameters(text, path=str(target))
