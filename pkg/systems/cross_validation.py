"""
Cross-Validation Plumbing
Stratified fold construction and stratified training-set subsampling
"""

import logging
import math
import warnings
from typing import List, Tuple

import numpy as np
from sklearn.model_selection import StratifiedKFold

from core.exceptions import ContractViolation
from data.dataset import Dataset
from utils.random_streams import make_rng

logger = logging.getLogger(__name__)

# absorbs binary rounding in products like 0.2 * 100
_ROUNDING_SLACK = 1e-9

Fold = Tuple[np.ndarray, np.ndarray]


def stratified_kfold(data: Dataset, k: int, seed: int) -> List[Fold]:
    """
    Split row positions into k stratified (train, test) folds

    Each class is spread so that per-fold class counts differ by at most one.
    Classes with fewer than k members leave some folds without that class.

    Args:
        data: Dataset to split
        k: Number of folds, at least 2 and at most n
        seed: Shuffling seed

    Returns:
        List of k (train_rows, test_rows) pairs of sorted row positions
    """
    if k < 2:
        raise ContractViolation(f"need at least 2 folds, got {k}")
    if k > data.n:
        raise ContractViolation(f"cannot make {k} folds from {data.n} rows")

    splitter = StratifiedKFold(n_splits=k, shuffle=True, random_state=int(seed))
    labels = data.labels
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        try:
            folds = [(np.sort(train), np.sort(test))
                     for train, test in splitter.split(np.zeros((data.n, 1)), labels)]
        except ValueError:
            # every class is smaller than k: stratification is impossible
            logger.warning(f"No class has {k} members; using unstratified folds")
            order = make_rng(seed).permutation(data.n)
            chunks = np.array_split(order, k)
            folds = [(np.sort(np.concatenate(chunks[:i] + chunks[i + 1:])), np.sort(chunk))
                     for i, chunk in enumerate(chunks)]

    smallest = int(data.class_counts()[data.class_counts() > 0].min())
    if smallest < k:
        logger.warning(f"Smallest class has {smallest} rows; some of the {k} folds miss it")
    return folds


def _allocate(counts: np.ndarray, fraction: float) -> np.ndarray:
    """Per-class sample sizes: stratified rounding with at least one row per present class"""
    target = math.ceil(fraction * counts.sum() - _ROUNDING_SLACK)
    quotas = fraction * counts
    sizes = np.floor(quotas + _ROUNDING_SLACK).astype(int)
    sizes = np.where(counts > 0, np.maximum(sizes, 1), 0)
    sizes = np.minimum(sizes, counts)

    remaining = target - int(sizes.sum())
    if remaining > 0:
        remainders = quotas - np.floor(quotas + _ROUNDING_SLACK)
        # largest remainder first, lower class index on ties
        order = sorted(range(counts.size), key=lambda c: (-remainders[c], c))
        for c in order:
            if remaining == 0:
                break
            if sizes[c] < counts[c]:
                sizes[c] += 1
                remaining -= 1
    return sizes


def subsample(data: Dataset, fraction: float, seed: int) -> Dataset:
    """
    Stratified random subset of ceil(fraction * n) rows

    Every class present in data keeps at least one row, which can make the
    result slightly larger than ceil(fraction * n) for very small fractions.

    Args:
        data: Dataset to subsample
        fraction: Kept share in (0, 1]
        seed: Sampling seed

    Returns:
        Sub-dataset with rows in their original order
    """
    if not 0 < fraction <= 1:
        raise ContractViolation(f"fraction must be in (0, 1], got {fraction}")
    if fraction == 1:
        return data

    counts = data.class_counts()
    sizes = _allocate(counts, fraction)
    rng = make_rng(seed)
    labels = data.labels
    chosen = []
    for c, size in enumerate(sizes):
        members = np.flatnonzero(labels == c)
        if size > 0:
            chosen.append(rng.choice(members, size=int(size), replace=False))
    rows = np.sort(np.concatenate(chosen)) if chosen else np.zeros(0, dtype=int)
    logger.debug(f"Subsampled {rows.size} of {data.n} rows (fraction {fraction})")
    return data.take(rows)
