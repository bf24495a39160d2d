"""
Report System
Aggregation, significance testing, and report emission/parsing for experiments and k sweeps
"""

import logging
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from core.exceptions import ContractViolation, ParseError, SerializationError
from data.experiment_report import (
    BA_WINS, METRICS, ML_WINS, TIE, ExperimentReport, FoldResult, LearnerSummary,
    SweepReport, SweepRow, TestSummary,
)
from systems.significance_tests import Verdict, mann_whitney_u

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

FOLD_COLUMNS = ["learner", "repetition", "fold", "n_test", "defined", "accuracy", "cll",
                "mean_cll", "reason", "search_fallback"]
SUMMARY_FIELDS = ["n_defined", "n_undefined", "mean_accuracy", "std_accuracy", "mean_cll", "std_cll"]
FLOAT_FORMAT = "%.17g"

_VERDICTS = {Verdict.A_WINS: BA_WINS, Verdict.B_WINS: ML_WINS, Verdict.TIE: TIE}


def _mean_std(values: List[float]) -> Tuple[Optional[float], Optional[float]]:
    if not values:
        return None, None
    array = np.asarray(values, dtype=float)
    std = float(array.std(ddof=1)) if array.size > 1 else 0.0
    return float(array.mean()), std


def summarize_learner(folds: Sequence[FoldResult], learner: str) -> LearnerSummary:
    own = [f for f in folds if f.learner == learner]
    defined = [f for f in own if f.defined]
    mean_acc, std_acc = _mean_std([f.accuracy for f in defined])
    mean_cll, std_cll = _mean_std([f.cll for f in defined])
    return LearnerSummary(learner, len(defined), len(own) - len(defined),
                          mean_acc, std_acc, mean_cll, std_cll)


def compare_learners(folds: Sequence[FoldResult], alpha: float) -> Tuple[Tuple[TestSummary, ...], int]:
    """
    Mann-Whitney tests of BA against ML per metric

    Folds where either learner is undefined are excluded from both samples.

    Returns:
        (test summaries, number of excluded fold pairs)
    """
    by_key: Dict[str, Dict[Tuple[int, int], FoldResult]] = {"ML": {}, "BA": {}}
    for f in folds:
        if f.learner in by_key:
            by_key[f.learner][(f.repetition, f.fold)] = f
    keys = sorted(set(by_key["ML"]) & set(by_key["BA"]))
    paired = [k for k in keys if by_key["ML"][k].defined and by_key["BA"][k].defined]
    excluded = len(keys) - len(paired)
    if not paired:
        return (), excluded

    tests = []
    for metric in METRICS:
        ba = [by_key["BA"][k].metric(metric) for k in paired]
        ml = [by_key["ML"][k].metric(metric) for k in paired]
        result = mann_whitney_u(ba, ml, alpha)
        tests.append(TestSummary(metric, result.u, result.p_value, _VERDICTS[result.verdict],
                                 len(paired)))
    return tuple(tests), excluded


def build_report(learners: Sequence[str], folds: Sequence[FoldResult], alpha: float,
                 settings: Optional[Mapping[str, str]] = None) -> ExperimentReport:
    """Aggregate fold results into an ExperimentReport"""
    learners = tuple(learners)
    if not learners:
        raise ContractViolation("a report needs at least one learner")
    folds = tuple(sorted(folds, key=lambda f: (learners.index(f.learner), f.repetition, f.fold)))
    summaries = {learner: summarize_learner(folds, learner) for learner in learners}
    tests, excluded = compare_learners(folds, alpha) if {"ML", "BA"} <= set(learners) else ((), 0)
    return ExperimentReport(learners, folds, summaries, tests, excluded, alpha, dict(settings or {}))


def _fold_frame(report: ExperimentReport) -> pd.DataFrame:
    rows = [{
        "learner": f.learner,
        "repetition": f.repetition,
        "fold": f.fold,
        "n_test": f.n_test,
        "defined": int(f.defined),
        "accuracy": f.accuracy,
        "cll": f.cll,
        "mean_cll": f.mean_cll,
        "reason": f.reason,
        "search_fallback": int(f.search_fallback),
    } for f in report.folds]
    return pd.DataFrame(rows, columns=FOLD_COLUMNS)


def _fmt(value: Optional[float]) -> str:
    return "undefined" if value is None else f"{value:.6f}"


def _experiment_summary(report: ExperimentReport) -> str:
    lines = ["CGN classifier experiment", ""]
    for key in sorted(report.settings):
        lines.append(f"{key}: {report.settings[key]}")
    if report.settings:
        lines.append("")
    for learner in report.learners:
        s = report.summaries[learner]
        lines.append(f"{learner}: folds defined {s.n_defined}, undefined {s.n_undefined}")
        lines.append(f"  accuracy {_fmt(s.mean_accuracy)} +/- {_fmt(s.std_accuracy)}")
        lines.append(f"  cll      {_fmt(s.mean_cll)} +/- {_fmt(s.std_cll)} (sum over the test fold)")
        defined = [f.mean_cll for f in report.folds_of(learner) if f.defined]
        if defined:
            lines.append(f"  cll per instance (derived) {_fmt(float(np.mean(defined)))}")
    lines.append("")
    lines.append(f"search fallbacks: {report.search_fallbacks}")
    if report.tests:
        lines.append(f"Mann-Whitney U of BA against ML over per-fold scores, two-sided, "
                     f"alpha {report.alpha}; fold pairs with an undefined learner excluded: "
                     f"{report.excluded_pairs}")
        for test in report.tests:
            lines.append(f"  {test.metric}: U={test.u:.1f} p={test.p_value:.6g} "
                         f"n={test.n_pairs} verdict={test.verdict}")
    return "\n".join(lines) + "\n"


def _sweep_frame(sweep: SweepReport) -> pd.DataFrame:
    columns = ["k", "family", "n_params"] + [f"{learner.lower()}_{name}"
                                             for learner in sweep.learners for name in SUMMARY_FIELDS]
    rows = []
    for row in sweep.rows:
        record = {"k": row.k, "family": row.family, "n_params": row.n_params}
        for learner in sweep.learners:
            summary = row.summaries[learner]
            for name in SUMMARY_FIELDS:
                record[f"{learner.lower()}_{name}"] = getattr(summary, name)
        rows.append(record)
    return pd.DataFrame(rows, columns=columns)


def _sweep_summary(sweep: SweepReport) -> str:
    lines = [f"{sweep.family} sweep", ""]
    for row in sweep.rows:
        parts = [f"k={row.k} params={row.n_params}"]
        for learner in sweep.learners:
            s = row.summaries[learner]
            parts.append(f"{learner} acc {_fmt(s.mean_accuracy)} cll {_fmt(s.mean_cll)}")
        lines.append("  ".join(parts))
    return "\n".join(lines) + "\n"


def _paths(path: PathLike) -> Tuple[Path, Path]:
    path = Path(path)
    base = path.with_suffix("") if path.suffix == ".csv" else path
    return base.with_name(base.name + ".csv"), base.with_name(base.name + "_summary.txt")


def emit_report(report: Union[ExperimentReport, SweepReport], path: PathLike) -> Tuple[Path, Path]:
    """
    Write the tabular file and the human-readable summary

    Args:
        report: Experiment or sweep report
        path: Base path; `<path>.csv` and `<path>_summary.txt` are written

    Returns:
        (table path, summary path)
    """
    if isinstance(report, SweepReport):
        frame, summary = _sweep_frame(report), _sweep_summary(report)
    else:
        if not report.learners:
            raise ContractViolation("cannot emit a report without learners")
        frame, summary = _fold_frame(report), _experiment_summary(report)

    table_path, summary_path = _paths(path)
    try:
        table_path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(table_path, index=False, float_format=FLOAT_FORMAT, na_rep="")
        summary_path.write_text(summary, encoding="utf-8")
    except OSError as error:
        logger.error(f"Failed to write report {table_path}: {error}")
        raise SerializationError(str(error), path=str(table_path)) from error
    logger.info(f"Report written to {table_path} and {summary_path}")
    return table_path, summary_path


def _read_table(path: PathLike, columns: Sequence[str]) -> pd.DataFrame:
    try:
        frame = pd.read_csv(path, float_precision="round_trip")
    except FileNotFoundError as error:
        raise SerializationError("file not found", path=str(path)) from error
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as error:
        raise ParseError(f"unreadable report: {error}", path=str(path)) from error
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise ParseError(f"report lacks columns {missing}", path=str(path), line=1)
    return frame


def _optional(value) -> Optional[float]:
    return None if pd.isna(value) else float(value)


def parse_report(path: PathLike, alpha: float = 0.05) -> ExperimentReport:
    """Re-read a fold table written by emit_report and recompute its aggregates"""
    table_path, _ = _paths(path)
    frame = _read_table(table_path, FOLD_COLUMNS)
    folds = []
    for row in frame.itertuples(index=False):
        defined = bool(int(row.defined))
        folds.append(FoldResult(
            learner=str(row.learner),
            repetition=int(row.repetition),
            fold=int(row.fold),
            n_test=int(row.n_test),
            accuracy=_optional(row.accuracy) if defined else None,
            cll=_optional(row.cll) if defined else None,
            reason="" if pd.isna(row.reason) else str(row.reason),
            search_fallback=bool(int(row.search_fallback)),
        ))
    learners = tuple(dict.fromkeys(f.learner for f in folds))
    return build_report(learners, folds, alpha)


def parse_sweep(path: PathLike) -> SweepReport:
    """Re-read a sweep table written by emit_report"""
    table_path, _ = _paths(path)
    frame = _read_table(table_path, ["k", "family", "n_params"])
    learners = tuple(dict.fromkeys(column[:-len("_mean_accuracy")].upper()
                                   for column in frame.columns if column.endswith("_mean_accuracy")))
    rows = []
    for record in frame.to_dict("records"):
        summaries = {}
        for learner in learners:
            prefix = learner.lower()
            summaries[learner] = LearnerSummary(
                learner,
                int(record[f"{prefix}_n_defined"]),
                int(record[f"{prefix}_n_undefined"]),
                _optional(record[f"{prefix}_mean_accuracy"]),
                _optional(record[f"{prefix}_std_accuracy"]),
                _optional(record[f"{prefix}_mean_cll"]),
                _optional(record[f"{prefix}_std_cll"]),
            )
        rows.append(SweepRow(int(record["k"]), str(record["family"]), int(record["n_params"]),
                             summaries))
    family = rows[0].family if rows else ""
    return SweepReport(family, learners, tuple(rows))
