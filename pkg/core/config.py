"""
Experiment Configuration
JSON configuration manager and the validated experiment settings built from it
"""

import copy
import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple

from core.exceptions import ContractViolation, ParseError
from systems.bayes_cgn import PriorConfig
from systems.spectra_generator import SyntheticSpectraSpec


class StructureSource(Enum):
    """Where the structure of each fold comes from"""
    FIXED = "fixed"
    NAIVE_BAYES = "naive_bayes"
    FW = "fw"
    BW = "bw"
    WC = "wc"
    KBOX = "kbox"
    KBAND = "kband"

    @property
    def is_wrapper(self) -> bool:
        return self in (StructureSource.FW, StructureSource.BW, StructureSource.WC)


class Learner(Enum):
    ML = "ML"
    BA = "BA"


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated settings of one experiment run"""
    dataset_path: Optional[str] = None
    schema: Optional[Tuple[Dict[str, Any], ...]] = None
    class_variable: Optional[str] = None
    structure: StructureSource = StructureSource.NAIVE_BAYES
    structure_file: Optional[str] = None
    k: Optional[int] = None
    repetitions: int = 10
    folds: int = 10
    wrapper_folds: int = 10
    train_fraction: float = 1.0
    learners: Tuple[Learner, ...] = (Learner.ML, Learner.BA)
    prior: PriorConfig = field(default_factory=PriorConfig)
    alpha: float = 0.05
    seed: int = 0
    output_path: str = "results/experiment"

    def __post_init__(self):
        object.__setattr__(self, "structure", StructureSource(self.structure))
        learners = tuple(dict.fromkeys(Learner(learner) for learner in self.learners))
        object.__setattr__(self, "learners", learners)
        if self.repetitions < 1:
            raise ContractViolation(f"repetitions must be at least 1, got {self.repetitions}")
        if self.folds < 2:
            raise ContractViolation(f"folds must be at least 2, got {self.folds}")
        if self.wrapper_folds < 2:
            raise ContractViolation(f"wrapper_folds must be at least 2, got {self.wrapper_folds}")
        if not learners:
            raise ContractViolation("at least one learner is required")
        if not 0 < self.train_fraction <= 1:
            raise ContractViolation(f"train_fraction must be in (0, 1], got {self.train_fraction}")
        if not 0 < self.alpha < 1:
            raise ContractViolation(f"alpha must be in (0, 1), got {self.alpha}")
        if self.structure is StructureSource.FIXED and not self.structure_file:
            raise ContractViolation("a fixed structure needs structure_file")
        if self.structure in (StructureSource.KBOX, StructureSource.KBAND) \
                and (self.k is None or self.k < 1):
            raise ContractViolation(f"{self.structure.value} needs k >= 1, got {self.k}")


class Config:
    """Experiment configuration manager"""

    def __init__(self, config_file: str = "settings.json"):
        """Initialize configuration"""
        self.logger = logging.getLogger(__name__)
        self.config_file = Path(config_file)

        self._defaults = {
            # Data
            "dataset_path": None,
            "schema": None,
            "class_variable": None,

            # Structure
            "structure": "naive_bayes",
            "structure_file": None,
            "k": None,

            # Protocol
            "repetitions": 10,
            "folds": 10,
            "wrapper_folds": 10,
            "train_fraction": 1.0,
            "learners": ["ML", "BA"],
            "prior": {"dirichlet_pseudocount": 0.01, "rho_base": 1.1},
            "alpha": 0.05,
            "seed": 0,
            "output_path": "results/experiment",

            # Synthetic spectra and k sweeps
            "spectra": {"n_vars": 40, "n_per_class": 30, "n_classes": 2,
                        "band_width": 3, "separation": 1.0, "seed": 0},
            "family": "kband",
            "k_values": [1, 2, 3, 5, 8, 12],
        }

        self._load_config()

    def _load_config(self):
        """Load configuration from file or create default"""
        self._config = copy.deepcopy(self._defaults)
        if self.config_file.exists():
            try:
                with open(self.config_file, 'r') as f:
                    user_config = json.load(f)
            except json.JSONDecodeError as e:
                raise ParseError(f"invalid JSON: {e.msg}", path=str(self.config_file),
                                 line=e.lineno) from e
            except OSError as e:
                raise ParseError(f"unreadable configuration: {e}", path=str(self.config_file)) from e
            if not isinstance(user_config, dict):
                raise ParseError("configuration must be a JSON object", path=str(self.config_file), line=1)

            unknown = set(user_config) - set(self._defaults)
            if unknown:
                raise ParseError(f"unknown configuration keys: {sorted(unknown)}",
                                 path=str(self.config_file))
            for key, value in user_config.items():
                if isinstance(self._defaults[key], dict) and isinstance(value, dict):
                    self._config[key].update(value)
                else:
                    self._config[key] = value
            self.logger.info(f"Configuration loaded from {self.config_file}")
        else:
            self.logger.info("No config file found. Using defaults.")
            self._save_config()

    def _save_config(self):
        """Save current configuration to file"""
        try:
            with open(self.config_file, 'w') as f:
                json.dump(self._config, f, indent=2)
            self.logger.info(f"Configuration saved to {self.config_file}")
        except OSError as e:
            self.logger.error(f"Failed to save config file: {e}")

    def get(self, key: str, default: Any = None) -> Any:
        """Get configuration value"""
        return self._config.get(key, default)

    def set(self, key: str, value: Any):
        """Set configuration value"""
        if key not in self._defaults:
            raise ContractViolation(f"unknown configuration key '{key}'")
        self._config[key] = value

    def save(self):
        """Save configuration to file"""
        self._save_config()

    def apply_overrides(self, overrides: Mapping[str, Any]):
        """
        Apply command-line values on top of the file values

        Args:
            overrides: Keys named like ExperimentConfig fields; None means not given.
                Prior and spectra fields may be given flat (rho_base) or dotted (prior.rho_base).
        """
        nested = {"prior": set(self._defaults["prior"]), "spectra": set(self._defaults["spectra"])}
        for key, value in overrides.items():
            if value is None:
                continue
            section, _, name = key.rpartition(".")
            if section:
                if section not in nested or name not in nested[section]:
                    raise ContractViolation(f"unknown configuration key '{key}'")
                self._config[section][name] = value
                continue
            owners = [s for s, names in nested.items() if key in names and key not in self._defaults]
            if owners:
                self._config[owners[0]][key] = value
            else:
                self.set(key, value)
            self.logger.debug(f"Override {key} = {value}")

    def to_experiment_config(self) -> ExperimentConfig:
        """Validated ExperimentConfig built from the current values"""
        prior = self._config["prior"]
        schema = self._config["schema"]
        try:
            return ExperimentConfig(
                dataset_path=self._config["dataset_path"],
                schema=tuple(dict(entry) for entry in schema) if schema is not None else None,
                class_variable=self._config["class_variable"],
                structure=self._config["structure"],
                structure_file=self._config["structure_file"],
                k=self._config["k"],
                repetitions=int(self._config["repetitions"]),
                folds=int(self._config["folds"]),
                wrapper_folds=int(self._config["wrapper_folds"]),
                train_fraction=float(self._config["train_fraction"]),
                learners=tuple(self._config["learners"]),
                prior=PriorConfig(float(prior["dirichlet_pseudocount"]), float(prior["rho_base"])),
                alpha=float(self._config["alpha"]),
                seed=int(self._config["seed"]),
                output_path=str(self._config["output_path"]),
            )
        except ContractViolation:
            raise
        except (TypeError, KeyError, ValueError) as e:
            raise ContractViolation(f"invalid configuration: {e}") from e

    def to_spectra_spec(self) -> SyntheticSpectraSpec:
        spectra = self._config["spectra"]
        return SyntheticSpectraSpec(
            n_vars=int(spectra["n_vars"]),
            n_per_class=int(spectra["n_per_class"]),
            n_classes=int(spectra["n_classes"]),
            band_width=int(spectra["band_width"]),
            separation=float(spectra["separation"]),
            seed=int(spectra["seed"]),
        )

    @property
    def k_values(self) -> List[int]:
        return [int(k) for k in self._config["k_values"]]

    @property
    def family(self) -> StructureSource:
        family = StructureSource(self._config["family"])
        if family not in (StructureSource.KBOX, StructureSource.KBAND):
            raise ContractViolation(f"sweep family must be kbox or kband, got {family.value}")
        return family
