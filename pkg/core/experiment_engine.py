"""
Experiment Engine
Repeated stratified cross-validation of the ML and BA learners, and k sweeps on synthetic spectra
"""

import dataclasses
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from core.config import ExperimentConfig, Learner, StructureSource
from core.exceptions import (
    ContractViolation, DegeneratePriorError, ExperimentError, NumericalInstabilityError, SearchError,
)
from data.cgn_structure import CgnStructure
from data.dataset import Dataset, infer_schema, load_csv
from data.experiment_report import ExperimentReport, FoldResult, SweepReport, SweepRow
from systems.bayes_cgn import fit_ba
from systems.cgn_core import count_parameters, fit_ml, is_acceptable
from systems.classifier import class_posteriors_ba, class_posteriors_ml, evaluate
from systems.cross_validation import stratified_kfold, subsample
from systems.report_system import build_report
from systems.save_system import SaveSystem
from systems.spectra_generator import SyntheticSpectraSpec, generate_spectra
from systems.structure_search import (
    Generator, initial_partition, jan_to_structure, kband_structure, kbox_structure,
    naive_bayes_structure, wrapper_search,
)
from utils.performance_profiler import ProfileCategory, get_profiler
from utils.random_streams import derive_seed

# sub-stream keys below each (repetition, fold)
_SUBSAMPLE_STREAM = 1
_WRAPPER_STREAM = 2


class ExperimentEngine:
    """Runs the cross-validation protocol for one configuration"""

    def __init__(self, cfg: ExperimentConfig, data: Optional[Dataset] = None):
        """
        Initialize the engine

        Args:
            cfg: Validated experiment settings
            data: Dataset to use instead of loading cfg.dataset_path
        """
        self.cfg = cfg
        self.logger = logging.getLogger(__name__)
        self.profiler = get_profiler()
        self.data = data
        self._fixed_structure: Optional[CgnStructure] = None

    def load_data(self) -> Dataset:
        """Load the configured dataset unless one was given"""
        if self.data is not None:
            return self.data
        if not self.cfg.dataset_path:
            raise ContractViolation("no dataset_path configured")
        with self.profiler.time_operation(ProfileCategory.DATA_LOADING, "load_csv"):
            schema = self.cfg.schema
            if schema is None:
                if not self.cfg.class_variable:
                    raise ContractViolation("class_variable is required when the schema is inferred")
                schema = infer_schema(self.cfg.dataset_path, [self.cfg.class_variable])
            self.data = load_csv(self.cfg.dataset_path, schema, self.cfg.class_variable)
        return self.data

    def _attributes(self, data: Dataset) -> Tuple[int, ...]:
        return tuple(i for i in data.continuous_indexes if i != data.class_index)

    def structure_for(self, train: Dataset, wrapper_seed: int) -> Tuple[CgnStructure, bool]:
        """
        Structure used on one training split

        Returns:
            (structure, whether the wrapper fell back to its initial structure)
        """
        source = self.cfg.structure
        meta = train.meta
        if source is StructureSource.FIXED:
            if self._fixed_structure is None:
                self._fixed_structure = SaveSystem().load_structure(self.cfg.structure_file, meta)
            return self._fixed_structure, False
        if source is StructureSource.NAIVE_BAYES:
            return naive_bayes_structure(meta, train.class_index), False
        if source in (StructureSource.KBOX, StructureSource.KBAND):
            n_attrs = len(self._attributes(train))
            build = kbox_structure if source is StructureSource.KBOX else kband_structure
            return build(n_attrs, self.cfg.k, meta, train.class_index), False

        generator = Generator(source.value)
        with self.profiler.time_operation(ProfileCategory.STRUCTURE_SEARCH, source.value):
            try:
                partition, _ = wrapper_search(train, generator, self.cfg.wrapper_folds, wrapper_seed)
                return jan_to_structure(partition, meta), False
            except SearchError as error:
                self.logger.warning(f"Wrapper search failed ({error}); using its initial structure")
                partition = initial_partition(generator, self._attributes(train), train.class_index)
                return jan_to_structure(partition, meta), True

    def _score_ml(self, structure: CgnStructure, train: Dataset, test: Dataset) -> Tuple[Optional[Tuple[float, float]], str]:
        report = is_acceptable(structure, train)
        if not report.acceptable:
            return None, "not-acceptable"
        with self.profiler.time_operation(ProfileCategory.ML_FITTING, "fit_ml"):
            model = fit_ml(structure, train)
        with self.profiler.time_operation(ProfileCategory.EVALUATION, "ml"):
            metrics = evaluate(class_posteriors_ml(model, test.values), test.labels)
        return (metrics.accuracy, metrics.cll), ""

    def _score_ba(self, structure: CgnStructure, train: Dataset, test: Dataset) -> Tuple[Optional[Tuple[float, float]], str]:
        try:
            with self.profiler.time_operation(ProfileCategory.BA_FITTING, "fit_ba"):
                psi = fit_ba(structure, train, self.cfg.prior)
        except DegeneratePriorError:
            return None, "degenerate-prior"
        except NumericalInstabilityError:
            return None, "numerical-instability"
        with self.profiler.time_operation(ProfileCategory.EVALUATION, "ba"):
            metrics = evaluate(class_posteriors_ba(psi, test.values), test.labels)
        return (metrics.accuracy, metrics.cll), ""

    def run_fold(self, repetition: int, fold: int, train: Dataset, test: Dataset) -> List[FoldResult]:
        """Train every learner on one training split and score it on the test split"""
        cfg = self.cfg
        train = subsample(train, cfg.train_fraction,
                          derive_seed(cfg.seed, repetition, fold, _SUBSAMPLE_STREAM))
        structure, fallback = self.structure_for(
            train, derive_seed(cfg.seed, repetition, fold, _WRAPPER_STREAM))

        results = []
        for learner in cfg.learners:
            score = self._score_ml if learner is Learner.ML else self._score_ba
            outcome, reason = score(structure, train, test)
            if outcome is None:
                self.logger.warning(f"{learner.value} undefined on repetition {repetition} "
                                    f"fold {fold}: {reason}")
                results.append(FoldResult(learner.value, repetition, fold, test.n, None, None,
                                          reason, fallback))
            else:
                accuracy, cll = outcome
                self.logger.debug(f"{learner.value} r{repetition} f{fold}: "
                                  f"accuracy {accuracy:.4f} cll {cll:.4f}")
                results.append(FoldResult(learner.value, repetition, fold, test.n, accuracy, cll,
                                          "", fallback))
        return results

    def settings(self) -> Dict[str, str]:
        cfg = self.cfg
        values = {
            "dataset": Path(cfg.dataset_path).name if cfg.dataset_path else "in-memory",
            "structure": cfg.structure.value,
            "repetitions": str(cfg.repetitions),
            "folds": str(cfg.folds),
            "train_fraction": repr(cfg.train_fraction),
            "learners": ",".join(learner.value for learner in cfg.learners),
            "prior": f"pseudocount={cfg.prior.dirichlet_pseudocount!r} rho_base={cfg.prior.rho_base!r}",
            "seed": str(cfg.seed),
        }
        if cfg.k is not None:
            values["k"] = str(cfg.k)
        if cfg.structure.is_wrapper:
            values["wrapper_folds"] = str(cfg.wrapper_folds)
        return values

    def run(self) -> ExperimentReport:
        """
        Execute every repetition and fold

        Returns:
            ExperimentReport with one FoldResult per learner, repetition and fold
        """
        cfg = self.cfg
        data = self.load_data()
        self.logger.info(f"Running {cfg.repetitions}x{cfg.folds} cross-validation on {data} "
                         f"with structure source {cfg.structure.value}")
        folds: List[FoldResult] = []
        for repetition in range(cfg.repetitions):
            self.logger.info(f"Repetition {repetition + 1}/{cfg.repetitions}")
            splits = stratified_kfold(data, cfg.folds, derive_seed(cfg.seed, repetition))
            for fold, (train_rows, test_rows) in enumerate(splits):
                folds.extend(self.run_fold(repetition, fold, data.take(train_rows),
                                           data.take(test_rows)))

        if not any(f.defined for f in folds):
            raise ExperimentError("every learner was undefined on every fold")
        report = build_report([learner.value for learner in cfg.learners], folds, cfg.alpha,
                              self.settings())
        for learner, summary in report.summaries.items():
            self.logger.info(f"{learner}: mean accuracy {summary.mean_accuracy}, "
                             f"mean CLL {summary.mean_cll} ({summary.n_undefined} folds undefined)")
        return report


def run_experiment(cfg: ExperimentConfig, data: Optional[Dataset] = None) -> ExperimentReport:
    """Run the cross-validation protocol of cfg (on data when given)"""
    return ExperimentEngine(cfg, data).run()


def k_sweep(spec: SyntheticSpectraSpec, family, k_values: Sequence[int],
            cfg: ExperimentConfig) -> SweepReport:
    """
    Run the protocol on synthetic spectra for each k of a k-BOX or k-BAND family

    Args:
        spec: Synthetic data shape and seed
        family: kbox or kband
        k_values: Values of k, each at most spec.n_vars
        cfg: Protocol settings; its structure and k are replaced per k

    Returns:
        SweepReport with one row per k and the full per-k reports
    """
    family = StructureSource(family)
    if family not in (StructureSource.KBOX, StructureSource.KBAND):
        raise ContractViolation(f"sweep family must be kbox or kband, got {family.value}")
    for k in k_values:
        if not 1 <= k <= spec.n_vars:
            raise ContractViolation(f"k={k} outside [1, {spec.n_vars}]")

    logger = logging.getLogger(__name__)
    data = generate_spectra(spec)
    build = kbox_structure if family is StructureSource.KBOX else kband_structure
    rows = []
    reports: Dict[int, ExperimentReport] = {}
    for k in k_values:
        run_cfg = dataclasses.replace(cfg, structure=family, k=int(k), dataset_path=None)
        report = run_experiment(run_cfg, data)
        n_params = count_parameters(build(spec.n_vars, int(k), data.meta, data.class_index))
        rows.append(SweepRow(int(k), family.value, n_params, dict(report.summaries)))
        reports[int(k)] = report
        logger.info(f"{family.value} k={k}: {n_params} parameters")
    learners = tuple(learner.value for learner in cfg.learners)
    return SweepReport(family.value, learners, tuple(rows), reports)
