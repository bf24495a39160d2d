"""
Synthetic Spectra Generator
Spectrum-like class-conditional Gaussian data with banded covariance
"""

import logging
from dataclasses import dataclass

import numpy as np

from core.exceptions import ContractViolation
from data.dataset import Dataset, VariableKind, VariableMeta
from utils.random_streams import make_rng

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SyntheticSpectraSpec:
    """
    Shape of a synthetic spectra dataset

    band_width w gives a within-class covariance that is nonzero only for
    variables less than w positions apart; w = 1 makes them independent.
    """
    n_vars: int
    n_per_class: int
    n_classes: int = 2
    band_width: int = 3
    separation: float = 1.0
    seed: int = 0

    def __post_init__(self):
        for name in ("n_vars", "n_per_class", "band_width"):
            if getattr(self, name) < 1:
                raise ContractViolation(f"{name} must be positive, got {getattr(self, name)}")
        if self.n_classes < 2:
            raise ContractViolation(f"need at least 2 classes, got {self.n_classes}")
        if not self.separation > 0:
            raise ContractViolation(f"separation must be positive, got {self.separation}")
        if self.band_width > 1 and self.band_width >= self.n_vars:
            raise ContractViolation(f"band_width {self.band_width} must be below n_vars {self.n_vars}")


def peak_profile(n_vars: int) -> np.ndarray:
    """Gaussian bump centred on the middle of the spectrum, peak height 1"""
    positions = np.arange(n_vars)
    width = max(1.0, n_vars / 8.0)
    return np.exp(-0.5 * ((positions - (n_vars - 1) / 2.0) / width) ** 2)


def banded_covariance(n_vars: int, band_width: int) -> np.ndarray:
    """Covariance of the unit-variance moving average used for the noise"""
    lags = np.abs(np.subtract.outer(np.arange(n_vars), np.arange(n_vars)))
    return np.clip(1.0 - lags / band_width, 0.0, None)


def generate_spectra(spec: SyntheticSpectraSpec) -> Dataset:
    """
    Draw a synthetic spectra dataset

    Class c has mean c * separation * peak_profile and the moving-average noise
    of banded_covariance. The class is variable 0; intensities are x1..xn.

    Args:
        spec: Dataset shape and seed

    Returns:
        Dataset with n_classes * n_per_class rows, grouped by class
    """
    rng = make_rng(spec.seed)
    w = spec.band_width
    profile = peak_profile(spec.n_vars)
    blocks = []
    for c in range(spec.n_classes):
        shocks = rng.standard_normal((spec.n_per_class, spec.n_vars + w - 1))
        window = np.lib.stride_tricks.sliding_window_view(shocks, w, axis=1)
        noise = window.sum(axis=2) / np.sqrt(w)
        intensities = c * spec.separation * profile + noise
        blocks.append(np.column_stack([np.full(spec.n_per_class, c), intensities]))

    meta = [VariableMeta("class", VariableKind.DISCRETE, 0,
                         labels=tuple(f"c{c}" for c in range(spec.n_classes)))]
    meta += [VariableMeta(f"x{j}", VariableKind.CONTINUOUS, j) for j in range(1, spec.n_vars + 1)]
    data = Dataset(meta, np.vstack(blocks), class_index=0)
    logger.info(f"Generated synthetic spectra: {data} (band width {w}, separation {spec.separation})")
    return data
