"""Pixel-level ROC-AUC, threshold selection and two-class mIOU."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ContractError


@dataclass
class RocCurve:
    """Points ordered by decreasing threshold.

    A pixel is predicted anomalous when its degree is ``>= threshold``; the
    first point has ``threshold = inf`` (nothing predicted).
    """

    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray
    auc: float
    n_pos: int
    n_neg: int


def _flatten(degrees, labels):
    if isinstance(degrees, (list, tuple)) and degrees and np.ndim(degrees[0]) >= 1:
        degrees = np.concatenate([np.ravel(d) for d in degrees])
        labels = np.concatenate([np.ravel(l) for l in labels])
    d = np.ravel(np.asarray(degrees, dtype=np.float64))
    y = np.ravel(np.asarray(labels)).astype(np.int64)
    if d.shape != y.shape:
        raise ContractError(f"{d.size} degrees but {y.size} labels")
    if not np.isin(y, (0, 1)).all():
        raise ContractError("labels must be 0 or 1")
    return d, y


def roc_auc(degrees, labels) -> tuple[RocCurve, float]:
    """ROC curve with tied degrees grouped, and its trapezoidal area."""
    d, y = _flatten(degrees, labels)
    n_pos = int(y.sum())
    n_neg = int(y.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise ContractError("ROC needs both anomalous and normal pixels")
    order = np.argsort(-d, kind="stable")
    tp, fp, thr = kernels.roc_counts(d[order], y[order])
    tp = np.r_[0, tp]
    fp = np.r_[0, fp]
    # Integer trapezoid sum: exact, then one division.
    area2 = int(np.sum(np.diff(fp) * (tp[1:] + tp[:-1])))
    auc = area2 / (2.0 * n_pos * n_neg)
    curve = RocCurve(
        fpr=fp / n_neg,
        tpr=tp / n_pos,
        thresholds=np.r_[np.inf, thr],
        auc=auc,
        n_pos=n_pos,
        n_neg=n_neg,
    )
    return curve, auc


def select_threshold(curve: RocCurve) -> float:
    """Threshold of the upper-left ROC point (max TPR - FPR).

    Ties go to the higher threshold, i.e. fewer predicted positives.
    """
    j = curve.tpr - curve.fpr
    return float(curve.thresholds[int(np.argmax(j))])


def _counts(pred, labels):
    p = np.asarray(pred, dtype=bool)
    g = np.asarray(labels, dtype=bool)
    if p.shape != g.shape:
        raise ContractError(f"prediction shape {p.shape} != label shape {g.shape}")
    tp = int(np.sum(p & g))
    fp = int(np.sum(p & ~g))
    fn = int(np.sum(~p & g))
    tn = int(p.size - tp - fp - fn)
    return tp, fp, fn, tn


def miou(pred, labels) -> float:
    """Mean of anomaly-class and normal-class IoU.

    ``pred``/``labels`` may be single grids or sequences of grids; counts
    are pooled over every pixel before dividing. A class absent from both
    prediction and truth scores IoU 1.
    """
    if isinstance(pred, (list, tuple)):
        if len(pred) != len(labels):
            raise ContractError(f"{len(pred)} predictions but {len(labels)} label maps")
        tot = np.zeros(4, dtype=np.int64)
        for p, g in zip(pred, labels):
            tot += _counts(p, g)
        tp, fp, fn, tn = (int(v) for v in tot)
    else:
        tp, fp, fn, tn = _counts(pred, labels)
    u_a = tp + fp + fn
    u_n = tn + fp + fn
    iou_a = tp / u_a if u_a else 1.0
    iou_n = tn / u_n if u_n else 1.0
    return 0.5 * (iou_a + iou_n)


@dataclass
class EvalReport:
    auc: float
    miou: float
    threshold: float
    n_pixels: int
    n_anomaly: int
    n_normal: int

    def to_text(self, echo: dict | None = None) -> str:
        lines = [
            f"auc = {self.auc!r}",
            f"miou = {self.miou!r}",
            f"threshold = {self.threshold!r}",
            f"n_pixels = {self.n_pixels}",
            f"n_anomaly = {self.n_anomaly}",
            f"n_normal = {self.n_normal}",
        ]
        for key, val in (echo or {}).items():
            lines.append(f"config.{key} = {val}")
        return "\n".join(lines) + "\n"


def parse_report(text: str) -> dict:
    out = {}
    for line in text.splitlines():
        if "=" in line:
            key, val = line.split("=", 1)
            out[key.strip()] = val.strip()
    return out


def evaluate(degree_maps, label_maps) -> EvalReport:
    """Pooled AUC, Youden threshold and mIOU at that threshold."""
    if len(degree_maps) != len(label_maps):
        raise ContractError("degree maps and label maps do not pair up")
    curve, auc = roc_auc(list(degree_maps), list(label_maps))
    thr = select_threshold(curve)
    preds = [np.asarray(d, dtype=np.float64) >= thr for d in degree_maps]
    score = miou(preds, [np.asarray(l) == 1 for l in label_maps])
    return EvalReport(auc, score, thr, curve.n_pos + curve.n_neg, curve.n_pos, curve.n_neg)
