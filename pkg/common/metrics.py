"""
Unweighted average recall and confusion matrices over the four emotions
"""

from dataclasses import dataclass

import numpy as np
from sklearn.metrics import confusion_matrix as sk_confusion_matrix

from data.labels import LABEL_ORDER, NUM_CLASSES, EmotionLabel


def as_class_indices(values):
    """EmotionLabel / 'A'..'N' / 0..3 -> int array"""
    out = []
    for v in values:
        if isinstance(v, EmotionLabel):
            out.append(v.class_index)
        elif isinstance(v, str):
            out.append(EmotionLabel(v.upper()).class_index)
        else:
            idx = int(v)
            if not 0 <= idx < NUM_CLASSES:
                raise ValueError(f'Illegal class index: {idx}')
            out.append(idx)
    return np.asarray(out, dtype=np.int64)


def _check_pair(preds, labels):
    preds = as_class_indices(preds)
    labels = as_class_indices(labels)
    if len(preds) != len(labels):
        raise ValueError(f'Length mismatch: {len(preds)} predictions, {len(labels)} labels')
    if len(labels) == 0:
        raise ValueError('Cannot score an empty prediction list')
    return preds, labels


@dataclass(frozen=True)
class ConfusionMatrix:
    """
    Attributes
    ----------
    counts : np.ndarray
        (4, 4) ints, rows = ground truth, columns = prediction
    """

    counts: np.ndarray

    @property
    def present(self):
        return self.counts.sum(axis=1) > 0

    def normalized(self):
        """Rows in percent; rows of absent classes stay zero"""
        counts = self.counts.astype(np.float64)
        totals = counts.sum(axis=1, keepdims=True)
        return np.divide(counts * 100.0, totals, out=np.zeros_like(counts), where=totals > 0)

    def to_dict(self):
        return {
            'labels': [label.value for label in LABEL_ORDER],
            'counts': self.counts.tolist(),
            'normalized': self.normalized().tolist(),
        }


def confusion_matrix(preds, labels):
    """
    Count matrix of predictions against ground truth

    Raises
    ------
    ValueError
        On a length mismatch or empty input
    """
    preds, labels = _check_pair(preds, labels)
    counts = sk_confusion_matrix(labels, preds, labels=list(range(NUM_CLASSES)))
    return ConfusionMatrix(counts.astype(np.int64))


def uar(preds, labels):
    """
    Unweighted average recall in percent

    Mean of the per-class recalls over the classes present in `labels`;
    classes absent from the ground truth do not enter the mean.
    """
    cm = confusion_matrix(preds, labels)
    counts = cm.counts.astype(np.float64)
    totals = counts.sum(axis=1)
    present = totals > 0
    recalls = np.diag(counts)[present] / totals[present]
    return float(recalls.mean() * 100.0)
