"""Detection and segmentation metrics over per-window outputs."""

from __future__ import annotations

import csv
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.stats import rankdata

from .exceptions import AlignmentError, UndefinedMetricError
from .types import ScoredWindow, SwitchRecord

SCORE_COLUMNS = ["window_index", "start_time", "chosen_regime_id", "is_new_regime",
                 "delta_model_cost", "data_cost", "anomaly_score"]


def _check(scores, labels):
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=bool)
    if scores.shape != labels.shape:
        raise AlignmentError(f"{scores.shape[0]} scores but {labels.shape[0]} labels")
    return scores, labels


def roc_auc(scores, labels) -> float:
    """Area under the ROC curve via the Mann-Whitney rank statistic (ties count half)."""
    scores, labels = _check(scores, labels)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("ROC-AUC needs both positive and negative labels")
    ranks = rankdata(scores)
    return float((ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def pr_auc(scores, labels) -> float:
    """Average precision; tied scores form one threshold."""
    scores, labels = _check(scores, labels)
    n_pos = int(labels.sum())
    if n_pos == 0:
        raise UndefinedMetricError("PR-AUC needs at least one positive label")
    order = np.argsort(-scores, kind="mergesort")
    s, y = scores[order], labels[order]
    tp = np.cumsum(y)
    fp = np.cumsum(~y)
    # last index of each group of equal scores
    last = np.r_[np.flatnonzero(np.diff(s) != 0), s.size - 1]
    tp, fp = tp[last], fp[last]
    precision = tp / (tp + fp)
    recall = tp / n_pos
    return float(np.sum(np.diff(np.r_[0.0, recall]) * precision))


def window_labels(event_labels: Sequence, theta_frac: float = 0.0,
                  windows: Optional[Sequence] = None) -> list[bool]:
    """Mark a window positive when at least ``theta_frac`` of its events are attacks.

    A window needs at least one attack event to be positive, so the default
    ``theta_frac = 0`` means "any attack event". Empty windows are negative.
    """
    if windows is not None:
        if len(windows) != len(event_labels):
            raise AlignmentError(f"{len(event_labels)} label groups for {len(windows)} windows")
        for w, lab in zip(windows, event_labels):
            if len(w) != len(lab):
                raise AlignmentError(f"window {w.window_index}: {len(w)} events, "
                                     f"{len(lab)} labels")
    out = []
    for lab in event_labels:
        lab = np.asarray(lab, dtype=bool)
        n_attack = int(lab.sum())
        out.append(n_attack > 0 and n_attack / lab.size >= theta_frac)
    return out


def _expand(segmentation, total: int) -> np.ndarray:
    seg = list(segmentation)
    if seg and isinstance(seg[0], (SwitchRecord, tuple, list)):
        labels = np.full(total, -1, dtype=np.int64)
        for rec in seg:
            t, r = (rec.switch_time, rec.regime_id) if isinstance(rec, SwitchRecord) else rec
            labels[int(t):] = int(r)
        return labels
    labels = np.asarray(seg, dtype=np.int64)
    if labels.size != total:
        raise AlignmentError(f"segmentation covers {labels.size} windows, expected {total}")
    return labels


def segmentation_accuracy(predicted, truth, total_windows: int) -> float:
    """Fraction of windows whose regime matches after the best one-to-one relabelling.

    Each segmentation is either a list of switch records ``(t_s, regime)``
    or one regime label per window.
    """
    if total_windows == 0:
        return 1.0
    p = _expand(predicted, total_windows)
    t = _expand(truth, total_windows)
    pu, pi = np.unique(p, return_inverse=True)
    tu, ti = np.unique(t, return_inverse=True)
    confusion = np.zeros((pu.size, tu.size), dtype=np.int64)
    np.add.at(confusion, (pi, ti), 1)
    rows, cols = linear_sum_assignment(confusion, maximize=True)
    return float(confusion[rows, cols].sum() / total_windows)


# -- files ----------------------------------------------------------------

def write_scores(records: Sequence[ScoredWindow], fh, header: bool = True):
    out = csv.writer(fh, lineterminator="\n")
    if header:
        out.writerow(SCORE_COLUMNS)
    for r in records:
        out.writerow([r.window_index, repr(float(r.start_time)), r.chosen_regime_id,
                      int(r.is_new_regime), repr(float(r.delta_model_cost)),
                      repr(float(r.data_cost)), repr(float(r.anomaly_score))])


def read_scores(path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if rows and set(SCORE_COLUMNS) - set(rows[0]):
        raise AlignmentError(f"{path} is not a score file")
    return [{"window_index": int(r["window_index"]),
             "chosen_regime_id": int(r["chosen_regime_id"]),
             "is_new_regime": r["is_new_regime"] == "1",
             "anomaly_score": float(r["anomaly_score"])} for r in rows]


def read_truth(path) -> list[dict]:
    """Per-window truth rows: ``window_index``, ``regime_id`` (may be blank),
    ``is_anomaly`` and optionally ``n_events`` / ``n_attack``."""
    out = []
    with open(path, newline="") as fh:
        for r in csv.DictReader(fh):
            row = {"window_index": int(r["window_index"]),
                   "regime_id": int(r["regime_id"]) if r.get("regime_id") not in (None, "")
                   else None,
                   "is_anomaly": r.get("is_anomaly", "0").strip() in ("1", "true", "True")}
            if r.get("n_events") not in (None, ""):
                row["n_events"] = int(r["n_events"])
                row["n_attack"] = int(r["n_attack"])
            out.append(row)
    return out


def write_metrics(metrics: dict, path):
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["metric", "value"])
        for k, v in metrics.items():
            out.writerow([k, v])


def read_metrics(path) -> dict:
    """Inverse of :func:`write_metrics`; values stay as text."""
    with open(path, newline="") as fh:
        return {r["metric"]: r["value"] for r in csv.DictReader(fh)}
