"""Evaluation metrics with support for missing labels."""

from __future__ import annotations

import logging

import numpy as np

from funqg.errors import AllMasked, SingleClass

log = logging.getLogger(__name__)


def _average_ranks(x: np.ndarray) -> np.ndarray:
    order = np.argsort(x, kind="mergesort")
    sx = x[order]
    ranks = np.empty(len(x))
    i = 0
    while i < len(x):
        j = i
        while j + 1 < len(x) and sx[j + 1] == sx[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def roc_auc(scores, labels) -> float:
    """Probability that a random positive outscores a random negative (ties count 1/2)."""
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel().astype(bool)
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClass("ROC-AUC needs both classes")
    ranks = _average_ranks(scores)
    u = ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def rmse(pred, target) -> float:
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.size == 0:
        raise AllMasked("no entries to score")
    return float(np.sqrt(np.mean((pred - target) ** 2)))


def multitask_roc_auc(scores, labels, mask) -> float:
    """Unweighted mean ROC-AUC over tasks that have both classes among unmasked rows."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    aucs = []
    for t in range(scores.shape[1]):
        keep = mask[:, t]
        try:
            aucs.append(roc_auc(scores[keep, t], labels[keep, t]))
        except SingleClass:
            log.warning("task %d has a single class among %d labelled rows; skipped", t, int(keep.sum()))
    if not aucs:
        raise SingleClass("no task has both classes present")
    return float(np.mean(aucs))


def multitask_rmse(pred, target, mask) -> float:
    """Unweighted mean over tasks of the per-task RMSE on unmasked rows."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    per_task = [rmse(pred[mask[:, t], t], target[mask[:, t], t]) for t in range(pred.shape[1]) if mask[:, t].any()]
    if not per_task:
        raise AllMasked("every target is masked")
    return float(np.mean(per_task))
