"""
CGN Classifier
Class posteriors for the ML and Bayesian-averaged learners, prediction and evaluation metrics
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from core.exceptions import ContractViolation
from data.cgn_structure import CgnStructure
from data.dataset import Dataset
from systems.bayes_cgn import DhdnigParams, PriorConfig, fit_ba, predictive_logdensities
from systems.cgn_core import CgnModel, fit_ml, joint_logdensities

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ClassPosterior:
    """Posterior distribution over class labels for one instance"""
    probs: np.ndarray
    log_probs: np.ndarray

    @classmethod
    def from_scores(cls, scores) -> "ClassPosterior":
        """Normalize unnormalized log scores with log-sum-exp"""
        scores = np.asarray(scores, dtype=float)
        if not np.all(np.isfinite(scores)):
            raise ContractViolation(f"class scores must be finite, got {scores}")
        log_probs = scores - logsumexp(scores)
        return cls(np.exp(log_probs), log_probs)

    @property
    def n_classes(self) -> int:
        return self.probs.size


@dataclass(frozen=True)
class EvalMetrics:
    """Accuracy and conditional log-likelihood on n evaluated instances"""
    accuracy: float
    cll: float
    n: int

    @property
    def mean_cll(self) -> float:
        return self.cll / self.n


def _class_scores(structure: CgnStructure, X: np.ndarray, joint) -> np.ndarray:
    """n x C matrix of joint log-densities with the class column set to each label"""
    if structure.class_index is None:
        raise ContractViolation("structure has no class variable")
    X = np.atleast_2d(np.asarray(X, dtype=float))
    c_index = structure.class_index
    n_classes = structure.meta(c_index).cardinality
    scores = np.empty((X.shape[0], n_classes))
    completed = X.copy()
    for c in range(n_classes):
        completed[:, c_index] = c
        scores[:, c] = joint(completed)
    return scores


def _normalize_rows(scores: np.ndarray) -> List[ClassPosterior]:
    if not np.all(np.isfinite(scores)):
        raise ContractViolation("class scores must be finite")
    log_probs = scores - logsumexp(scores, axis=1, keepdims=True)
    return [ClassPosterior(np.exp(row), row) for row in log_probs]


def class_posteriors_ml(m: CgnModel, X) -> List[ClassPosterior]:
    """ML class posterior of every row; the class column of X is ignored"""
    return _normalize_rows(_class_scores(m.structure, X, lambda Y: joint_logdensities(m, Y)))


def class_posteriors_ba(psi: DhdnigParams, X) -> List[ClassPosterior]:
    """Bayesian-averaged class posterior of every row; the class column of X is ignored"""
    return _normalize_rows(_class_scores(psi.structure, X,
                                         lambda Y: predictive_logdensities(psi, Y)))


def class_posterior_ml(m: CgnModel, evidence) -> ClassPosterior:
    """
    Class posterior under ML parameters

    Args:
        m: Fitted CGN
        evidence: Full assignment vector; the class entry is overwritten

    Returns:
        Posterior normalized over class values
    """
    return class_posteriors_ml(m, np.asarray(evidence, dtype=float)[None, :])[0]


def class_posterior_ba(psi: DhdnigParams, evidence) -> ClassPosterior:
    """
    Class posterior under the Bayesian-averaged predictive

    Args:
        psi: Posterior hyperparameters
        evidence: Full assignment vector; the class entry is overwritten

    Returns:
        Posterior normalized over class values
    """
    return class_posteriors_ba(psi, np.asarray(evidence, dtype=float)[None, :])[0]


def predict(p: ClassPosterior) -> int:
    """Most probable class; ties go to the lowest index"""
    return int(np.argmax(p.log_probs))


def evaluate(posteriors: Sequence[ClassPosterior], truth: Sequence[int]) -> EvalMetrics:
    """
    Accuracy and conditional log-likelihood

    Args:
        posteriors: One posterior per instance
        truth: True class code per instance

    Returns:
        EvalMetrics with cll as a sum of log-probabilities of the true classes
    """
    truth = [int(t) for t in truth]
    if len(posteriors) != len(truth):
        raise ContractViolation(f"{len(posteriors)} posteriors but {len(truth)} labels")
    if not truth:
        raise ContractViolation("cannot evaluate zero instances")
    correct = sum(1 for p, t in zip(posteriors, truth) if predict(p) == t)
    cll = float(sum(p.log_probs[t] for p, t in zip(posteriors, truth)))
    return EvalMetrics(correct / len(truth), cll, len(truth))


class MLClassifier:
    """Classifier with maximum likelihood parameters"""

    def __init__(self, structure: CgnStructure):
        self.structure = structure
        self.model: Optional[CgnModel] = None

    def fit(self, data: Dataset) -> "MLClassifier":
        self.model = fit_ml(self.structure, data)
        return self

    def predict_proba(self, data: Dataset) -> List[ClassPosterior]:
        if self.model is None:
            raise ContractViolation("classifier is not fitted")
        return class_posteriors_ml(self.model, data.values)

    def predict(self, data: Dataset) -> np.ndarray:
        return np.array([predict(p) for p in self.predict_proba(data)], dtype=int)

    def evaluate(self, data: Dataset) -> EvalMetrics:
        return evaluate(self.predict_proba(data), data.labels)


class BAClassifier:
    """Classifier averaging over the DHDNIG posterior of the parameters"""

    def __init__(self, structure: CgnStructure, prior: PriorConfig = PriorConfig()):
        self.structure = structure
        self.prior = prior
        self.params: Optional[DhdnigParams] = None

    def fit(self, data: Dataset) -> "BAClassifier":
        self.params = fit_ba(self.structure, data, self.prior)
        return self

    def predict_proba(self, data: Dataset) -> List[ClassPosterior]:
        if self.params is None:
            raise ContractViolation("classifier is not fitted")
        return class_posteriors_ba(self.params, data.values)

    def predict(self, data: Dataset) -> np.ndarray:
        return np.array([predict(p) for p in self.predict_proba(data)], dtype=int)

    def evaluate(self, data: Dataset) -> EvalMetrics:
        return evaluate(self.predict_proba(data), data.labels)
