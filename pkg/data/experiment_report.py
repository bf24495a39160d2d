"""
Experiment Report Models
Per-fold results, per-learner aggregates and significance summaries
"""

from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional, Tuple

# verdict labels written to reports
BA_WINS = "BA-wins"
ML_WINS = "ML-wins"
TIE = "tie"

METRICS = ("accuracy", "cll")


@dataclass(frozen=True)
class FoldResult:
    """
    Score of one learner on one test fold

    accuracy and cll are None when the learner was undefined on the fold
    (reason says why).
    """
    learner: str
    repetition: int
    fold: int
    n_test: int
    accuracy: Optional[float]
    cll: Optional[float]
    reason: str = ""
    search_fallback: bool = False

    @property
    def defined(self) -> bool:
        return self.accuracy is not None

    @property
    def mean_cll(self) -> Optional[float]:
        return None if self.cll is None else self.cll / self.n_test

    def metric(self, name: str) -> Optional[float]:
        return getattr(self, name)


@dataclass(frozen=True)
class LearnerSummary:
    """Mean and sample standard deviation of a learner's defined folds"""
    learner: str
    n_defined: int
    n_undefined: int
    mean_accuracy: Optional[float]
    std_accuracy: Optional[float]
    mean_cll: Optional[float]
    std_cll: Optional[float]


@dataclass(frozen=True)
class TestSummary:
    """Mann-Whitney comparison of BA against ML on one metric"""
    metric: str
    u: float
    p_value: float
    verdict: str
    n_pairs: int


@dataclass(frozen=True)
class ExperimentReport:
    learners: Tuple[str, ...]
    folds: Tuple[FoldResult, ...]
    summaries: Mapping[str, LearnerSummary]
    tests: Tuple[TestSummary, ...]
    excluded_pairs: int
    alpha: float
    settings: Mapping[str, str] = field(default_factory=dict)

    @property
    def search_fallbacks(self) -> int:
        """Outer folds whose wrapper search fell back to its initial structure"""
        keys = {(f.repetition, f.fold) for f in self.folds if f.search_fallback}
        return len(keys)

    def folds_of(self, learner: str) -> Tuple[FoldResult, ...]:
        return tuple(f for f in self.folds if f.learner == learner)

    def test(self, metric: str) -> Optional[TestSummary]:
        for summary in self.tests:
            if summary.metric == metric:
                return summary
        return None


@dataclass(frozen=True)
class SweepRow:
    """One k of a k-BOX / k-BAND sweep"""
    k: int
    family: str
    n_params: int
    summaries: Mapping[str, LearnerSummary]


@dataclass(frozen=True)
class SweepReport:
    family: str
    learners: Tuple[str, ...]
    rows: Tuple[SweepRow, ...]
    reports: Dict[int, ExperimentReport] = field(default_factory=dict)
