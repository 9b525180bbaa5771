"""Binary classification metrics over flattened (sample, node) pairs."""
import json
import math
from dataclasses import dataclass, asdict
from typing import Any, Dict, Optional, Sequence

import numpy as np
import pandas as pd

from errors import MetricError

DEFAULT_THRESHOLD = 0.5


@dataclass(frozen=True)
class Confusion:
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


@dataclass
class EvaluationReport:
    auc: Optional[float]
    accuracy: float
    balanced_accuracy: float
    f1: float
    mcc: float
    confusion: Confusion

    def to_dict(self) -> Dict[str, Any]:
        return {
            'auc': self.auc,
            'accuracy': self.accuracy,
            'balanced_accuracy': self.balanced_accuracy,
            'f1': self.f1,
            'mcc': self.mcc,
            'confusion': asdict(self.confusion),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'EvaluationReport':
        return cls(
            auc=data['auc'],
            accuracy=data['accuracy'],
            balanced_accuracy=data['balanced_accuracy'],
            f1=data['f1'],
            mcc=data['mcc'],
            confusion=Confusion(**data['confusion']),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _as_arrays(scores: Sequence[float], labels: Sequence[int]):
    s = np.asarray(scores, dtype=float).ravel()
    y = np.asarray(labels).ravel()
    if s.shape != y.shape:
        raise MetricError(f"scores and labels differ in length ({s.size} vs {y.size})")
    if s.size == 0:
        raise MetricError("Cannot score an empty prediction set")
    if not np.all((y == 0) | (y == 1)):
        raise MetricError("Labels must be binary 0/1")
    return s, y.astype(bool)


def confusion(scores: Sequence[float], labels: Sequence[int], threshold: float = DEFAULT_THRESHOLD) -> Confusion:
    """Prediction is positive iff score >= threshold."""
    s, y = _as_arrays(scores, labels)
    pred = s >= threshold
    return Confusion(
        tp=int(np.count_nonzero(pred & y)),
        tn=int(np.count_nonzero(~pred & ~y)),
        fp=int(np.count_nonzero(pred & ~y)),
        fn=int(np.count_nonzero(~pred & y)),
    )


def auc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """
    Mann-Whitney rank statistic, tied scores sharing their average rank.

    Raises MetricError when only one class is present.
    """
    s, y = _as_arrays(scores, labels)
    n_pos = int(np.count_nonzero(y))
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise MetricError("AUC is undefined when labels contain a single class")
    ranks = pd.Series(s).rank(method='average').to_numpy()
    value = (ranks[y].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)
    return float(value)


def _ratio(num: float, den: float) -> float:
    return num / den if den else 0.0


def derived_metrics(c: Confusion, auc_value: Optional[float] = None) -> EvaluationReport:
    if c.total == 0:
        raise MetricError("Confusion has no scored pairs")
    tpr = _ratio(c.tp, c.tp + c.fn)
    tnr = _ratio(c.tn, c.tn + c.fp)
    mcc_den = (c.tp + c.fp) * (c.tp + c.fn) * (c.tn + c.fp) * (c.tn + c.fn)
    return EvaluationReport(
        auc=auc_value,
        accuracy=(c.tp + c.tn) / c.total,
        balanced_accuracy=(tpr + tnr) / 2.0,
        f1=_ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn),
        mcc=_ratio(c.tp * c.tn - c.fp * c.fn, math.sqrt(mcc_den)),
        confusion=c,
    )


def evaluate_scores(scores: Sequence[float], labels: Sequence[int],
                    threshold: float = DEFAULT_THRESHOLD) -> EvaluationReport:
    """Full report; auc is None when a split holds a single class."""
    c = confusion(scores, labels, threshold)
    try:
        auc_value = auc(scores, labels)
    except MetricError:
        auc_value = None
    return derived_metrics(c, auc_value)
