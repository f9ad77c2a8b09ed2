"""Stability prediction and classifier evaluation.

``predict_stability`` turns a noisy tower observation into a probability of
stability. The rest of the module scores those probabilities against
ground-truth labels: confusion counts at a threshold, ROC and PR curves,
trapezoidal AUC and Youden-optimal thresholds. It also estimates per-axis
noise from paired (estimate, truth) data.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple, Optional, Sequence

import numpy as np

from . import physics
from .ppl import importance_query
from .task_model import NoiseParams, Observation, latent_state_model


class NoThreshold(ValueError):
    pass


class InsufficientData(ValueError):
    pass


def _stable_latent(trace) -> float:
    return 1.0 if physics.is_stable(trace.return_value).stable else 0.0


def predict_stability(
    observation: Observation, noise: NoiseParams, n_samples: int = 50, rng_seed: int = 0, workers: int = 1
) -> float:
    model = latent_state_model(observation, noise)
    phi = importance_query(model, _stable_latent, n_samples, rng_seed=rng_seed, workers=workers).estimate
    return min(1.0, max(0.0, phi))


def classify(phi: float, tau_stable_z: float) -> bool:
    # inclusive: a probability exactly on the threshold counts as stable
    return phi >= tau_stable_z


@dataclass(frozen=True)
class ScoredSample:
    phi: float
    label: bool

    def __post_init__(self):
        if not 0.0 <= self.phi <= 1.0:
            raise ValueError(f"phi must lie in [0, 1], got {self.phi}")


class RocPoint(NamedTuple):
    threshold: float
    fpr: float
    tpr: float


class PrPoint(NamedTuple):
    threshold: float
    recall: float
    precision: float


@dataclass
class ClassifierReport:
    threshold: float
    accuracy: float
    precision: float
    recall: float
    f1: float
    auc: Optional[float]
    tp: int
    fp: int
    tn: int
    fn: int
    roc_points: list[RocPoint] = field(default_factory=list)
    pr_points: list[PrPoint] = field(default_factory=list)

    def summary(self) -> dict:
        keys = ("threshold", "accuracy", "precision", "recall", "f1", "auc", "tp", "fp", "tn", "fn")
        return {k: getattr(self, k) for k in keys}


def _arrays(samples: Sequence[ScoredSample]) -> tuple[np.ndarray, np.ndarray]:
    phis = np.array([s.phi for s in samples], dtype=float)
    labels = np.array([bool(s.label) for s in samples], dtype=bool)
    return phis, labels


def confusion(samples: Sequence[ScoredSample], tau: float) -> tuple[int, int, int, int]:
    phis, labels = _arrays(samples)
    pred = phis >= tau
    tp = int(np.sum(pred & labels))
    fp = int(np.sum(pred & ~labels))
    tn = int(np.sum(~pred & ~labels))
    fn = int(np.sum(~pred & labels))
    return tp, fp, tn, fn


def roc_curve(samples: Sequence[ScoredSample]) -> list[RocPoint]:
    """ROC swept over every distinct score, from (0, 0) to (1, 1).

    Tied scores move the curve diagonally in one step.
    """
    phis, labels = _arrays(samples)
    n_pos, n_neg = int(labels.sum()), int((~labels).sum())
    points = [RocPoint(math.inf, 0.0, 0.0)]
    for t in np.unique(phis)[::-1]:
        pred = phis >= t
        tpr = np.sum(pred & labels) / n_pos if n_pos else 0.0
        fpr = np.sum(pred & ~labels) / n_neg if n_neg else 0.0
        points.append(RocPoint(float(t), float(fpr), float(tpr)))
    return points


def pr_curve(samples: Sequence[ScoredSample]) -> list[PrPoint]:
    phis, labels = _arrays(samples)
    n_pos = int(labels.sum())
    points = []
    for t in np.unique(phis)[::-1]:
        pred = phis >= t
        tp = int(np.sum(pred & labels))
        recall = tp / n_pos if n_pos else 0.0
        points.append(PrPoint(float(t), recall, tp / int(pred.sum())))
    return points


def auc_from_roc(points: Sequence[RocPoint]) -> float:
    area = 0.0
    for a, b in zip(points, points[1:]):
        area += (b.fpr - a.fpr) * (a.tpr + b.tpr) / 2
    return area


def evaluate_classifier(samples: Sequence[ScoredSample], tau: float) -> ClassifierReport:
    if not samples:
        raise InsufficientData("no scored samples")
    tp, fp, tn, fn = confusion(samples, tau)
    n = tp + fp + tn + fn
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    roc = roc_curve(samples)
    both_classes = (tp + fn) > 0 and (fp + tn) > 0
    return ClassifierReport(
        threshold=float(tau),
        accuracy=(tp + tn) / n,
        precision=precision,
        recall=recall,
        f1=f1,
        auc=auc_from_roc(roc) if both_classes else None,
        tp=tp,
        fp=fp,
        tn=tn,
        fn=fn,
        roc_points=roc,
        pr_points=pr_curve(samples),
    )


def youden_threshold(samples: Sequence[ScoredSample]) -> float:
    """Threshold maximising TPR - FPR.

    Candidates are 0, 1 and the midpoints between adjacent distinct scores.
    Ties go to the larger threshold, which admits fewer false positives.
    """
    phis, labels = _arrays(samples)
    n_pos, n_neg = int(labels.sum()), int((~labels).sum())
    if n_pos == 0 or n_neg == 0:
        raise NoThreshold("Youden's index needs both classes")
    distinct = np.unique(phis)
    candidates = [0.0] + [float((a + b) / 2) for a, b in zip(distinct, distinct[1:])] + [1.0]
    pos = np.sort(phis[labels])
    neg = np.sort(phis[~labels])
    best_tau, best_j = None, None
    for tau in candidates:
        tp = n_pos - int(np.searchsorted(pos, tau, side="left"))
        fp = n_neg - int(np.searchsorted(neg, tau, side="left"))
        j = Fraction(tp, n_pos) - Fraction(fp, n_neg)
        if best_j is None or j > best_j or (j == best_j and tau > best_tau):
            best_tau, best_j = tau, j
    return best_tau


def youden_index(samples: Sequence[ScoredSample], tau: float) -> float:
    tp, fp, tn, fn = confusion(samples, tau)
    return tp / (tp + fn) - fp / (fp + tn)


@dataclass(frozen=True)
class NoiseCharacterization:
    mean: tuple[float, float, float]
    sigma: tuple[float, float, float]
    sigma_avg: float
    n_pairs: int

    def as_row(self) -> dict:
        return {"X": self.sigma[0], "Y": self.sigma[1], "Z": self.sigma[2], "Avg": self.sigma_avg}


def characterize_noise(pairs) -> NoiseCharacterization:
    """Per-axis mean and sample standard deviation of ``estimate - truth``."""
    pairs = list(pairs)
    if len(pairs) < 2:
        raise InsufficientData(f"need at least 2 (estimate, truth) pairs, got {len(pairs)}")
    est = np.array([p[0] for p in pairs], dtype=float)
    truth = np.array([p[1] for p in pairs], dtype=float)
    err = est - truth
    sigma = err.std(axis=0, ddof=1)
    return NoiseCharacterization(
        mean=tuple(float(v) for v in err.mean(axis=0)),
        sigma=tuple(float(v) for v in sigma),
        sigma_avg=average_sigma(sigma),
        n_pairs=len(pairs),
    )


def average_sigma(sigmas) -> float:
    return math.fsum(float(s) for s in sigmas) / len(sigmas)


def write_roc_csv(path, points: Sequence[RocPoint], header_comment: str | None = None) -> None:
    _write_csv(path, ("threshold", "fpr", "tpr"), points, header_comment)


def write_pr_csv(path, points: Sequence[PrPoint], header_comment: str | None = None) -> None:
    _write_csv(path, ("threshold", "recall", "precision"), points, header_comment)


def _write_csv(path, columns, rows, header_comment):
    with open(path, "w", newline="") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([repr(float(v)) for v in row])
