"""Support-recovery and matrix-error metrics."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


def edge_support(theta: np.ndarray, threshold: float = 0.0) -> set[tuple[int, int]]:
    """Upper-triangle pairs ``(i, j)``, ``i < j``, with ``|theta_ij| > threshold`` (0-based)."""
    iu, ju = np.nonzero(np.triu(np.abs(theta) > threshold, 1))
    return set(zip(iu.tolist(), ju.tolist()))


def confusion(estimated: set, truth: set, n: int) -> ConfusionCounts:
    total = n * (n - 1) // 2
    tp = len(estimated & truth)
    fp = len(estimated - truth)
    fn = len(truth - estimated)
    return ConfusionCounts(tp, total - tp - fp - fn, fp, fn)


def mcc(counts: ConfusionCounts) -> float:
    """Matthews correlation coefficient; 0 when any marginal is empty."""
    tp, tn, fp, fn = counts.tp, counts.tn, counts.fp, counts.fn
    denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    if denom == 0:
        return 0.0
    # integer arithmetic keeps large counts exact before the final division
    return (tp * tn - fp * fn) / math.sqrt(denom)


def support_mcc(theta_hat: np.ndarray, theta_true: np.ndarray, threshold: float = 0.0) -> float:
    n = theta_true.shape[0]
    return mcc(confusion(edge_support(theta_hat, threshold), edge_support(theta_true), n))


def rel_frobenius(estimate: np.ndarray, truth: np.ndarray) -> float:
    est, tru = np.asarray(estimate, float), np.asarray(truth, float)
    if est.shape != tru.shape:
        raise ValueError(f"shape mismatch {est.shape} vs {tru.shape}")
    norm = np.linalg.norm(tru)
    if norm == 0:
        raise ValueError("truth has zero norm")
    return float(np.linalg.norm(est - tru) / norm)


def rel_spectral(estimate: np.ndarray, truth: np.ndarray) -> float:
    est, tru = np.asarray(estimate, float), np.asarray(truth, float)
    if est.shape != tru.shape:
        raise ValueError(f"shape mismatch {est.shape} vs {tru.shape}")
    norm = np.linalg.norm(tru, 2)
    if norm == 0:
        raise ValueError("truth has zero norm")
    return float(np.linalg.norm(est - tru, 2) / norm)
