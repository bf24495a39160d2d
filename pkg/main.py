#!/usr/bin/env python3
"""
CGN Classifier Toolkit
Command-line entry point: run experiments, k sweeps, synthetic spectra and structure checks
"""

import argparse
import logging
import sys
from typing import List, Optional

from core.config import Config
from core.exceptions import CgnError, ContractViolation, ParseError
from core.experiment_engine import k_sweep, run_experiment
from data.dataset import Dataset, infer_schema, load_csv, write_csv
from systems.cgn_core import is_acceptable
from systems.report_system import emit_report
from systems.save_system import SaveSystem
from systems.spectra_generator import generate_spectra
from utils.logger import setup_logger
from utils.performance_profiler import ProfileCategory, get_profiler


def _add_protocol_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--config", default="settings.json", help="JSON configuration file")
    parser.add_argument("--repetitions", type=int)
    parser.add_argument("--folds", type=int)
    parser.add_argument("--wrapper-folds", dest="wrapper_folds", type=int)
    parser.add_argument("--train-fraction", dest="train_fraction", type=float)
    parser.add_argument("--learners", type=lambda s: [x.strip() for x in s.split(",") if x.strip()],
                        help="comma-separated subset of ML,BA")
    parser.add_argument("--dirichlet-pseudocount", dest="prior.dirichlet_pseudocount", type=float)
    parser.add_argument("--rho-base", dest="prior.rho_base", type=float)
    parser.add_argument("--alpha", type=float)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--output-path", dest="output_path")


def _add_spectra_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--n-vars", dest="spectra.n_vars", type=int)
    parser.add_argument("--n-per-class", dest="spectra.n_per_class", type=int)
    parser.add_argument("--n-classes", dest="spectra.n_classes", type=int)
    parser.add_argument("--band-width", dest="spectra.band_width", type=int)
    parser.add_argument("--separation", dest="spectra.separation", type=float)
    parser.add_argument("--spectra-seed", dest="spectra.seed", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cgn", description=__doc__.strip().splitlines()[0])
    parser.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    parser.add_argument("--log-file", default=None)
    verbs = parser.add_subparsers(dest="verb", required=True)

    run = verbs.add_parser("run", help="repeated cross-validation of ML and BA")
    _add_protocol_flags(run)
    run.add_argument("--dataset-path", dest="dataset_path")
    run.add_argument("--class-variable", dest="class_variable")
    run.add_argument("--structure", choices=["fixed", "naive_bayes", "fw", "bw", "wc", "kbox", "kband"])
    run.add_argument("--structure-file", dest="structure_file")
    run.add_argument("--k", type=int)

    sweep = verbs.add_parser("sweep", help="k-BOX / k-BAND sweep on synthetic spectra")
    _add_protocol_flags(sweep)
    _add_spectra_flags(sweep)
    sweep.add_argument("--family", choices=["kbox", "kband"])
    sweep.add_argument("--k-values", dest="k_values",
                       type=lambda s: [int(x) for x in s.split(",") if x.strip()])

    gen = verbs.add_parser("gen-spectra", help="write a synthetic spectra dataset as CSV")
    gen.add_argument("--config", default="settings.json")
    _add_spectra_flags(gen)
    gen.add_argument("--out", required=True, help="CSV file to write")

    validate = verbs.add_parser("validate", help="check a structure and its acceptability on a dataset")
    validate.add_argument("--structure-file", required=True)
    validate.add_argument("--dataset-path", required=True)
    validate.add_argument("--class-variable", help="defaults to class_variable of --config")
    validate.add_argument("--config", default=None,
                          help="JSON configuration whose schema and class_variable describe the dataset")
    validate.add_argument("--discrete", default=[],
                          type=lambda s: [x.strip() for x in s.split(",") if x.strip()],
                          help="comma-separated discrete columns besides the class")
    return parser


def _overrides(args: argparse.Namespace, skip: List[str]) -> dict:
    return {key: value for key, value in vars(args).items() if key not in skip}


def _validation_data(args: argparse.Namespace) -> Dataset:
    schema, class_variable = None, args.class_variable
    if args.config:
        config = Config(args.config)
        schema = config.get("schema")
        class_variable = class_variable or config.get("class_variable")
    if not class_variable:
        raise ContractViolation("validate needs --class-variable or a configuration with class_variable")
    if schema is None:
        schema = infer_schema(args.dataset_path, [class_variable, *args.discrete])
    return load_csv(args.dataset_path, schema, class_variable)


def _validate(args: argparse.Namespace, logger: logging.Logger) -> int:
    data = _validation_data(args)
    try:
        structure = SaveSystem().load_structure(args.structure_file, data.meta)
    except ParseError as error:
        print(f"invalid structure: {error}")
        return 1
    report = is_acceptable(structure, data)
    print(f"structure valid: {len(structure.nodes)} nodes, {len(structure.edges())} edges")
    print(f"acceptability: {report.summary()}")
    logger.info(f"Validated {args.structure_file} against {args.dataset_path}")
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    """Command-line entry point"""
    args = build_parser().parse_args(argv)
    logger = setup_logger(level=getattr(logging, args.log_level), log_file=args.log_file)
    profiler = get_profiler()

    try:
        if args.verb == "validate":
            return _validate(args, logger)

        config = Config(args.config)
        common = ["verb", "config", "log_level", "log_file", "out"]
        config.apply_overrides(_overrides(args, common))

        if args.verb == "gen-spectra":
            data = generate_spectra(config.to_spectra_spec())
            write_csv(data, args.out)
            return 0

        cfg = config.to_experiment_config()
        if args.verb == "run":
            report = run_experiment(cfg)
        else:
            report = k_sweep(config.to_spectra_spec(), config.family, config.k_values, cfg)
        with profiler.time_operation(ProfileCategory.REPORTING, "emit_report"):
            emit_report(report, cfg.output_path)
        profiler.log_performance_report()
        return 0

    except (CgnError, OSError) as e:
        logger.error(f"Fatal error: {e}")
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
