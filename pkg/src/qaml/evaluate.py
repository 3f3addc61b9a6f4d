"""Evaluation metrics and report files.

``similarity_matrix`` embeds every test sample once and fills the matrix
of pairwise inner products; ``average_inner_products`` condenses it to the
same-class / cross-class means (d_i, d_o); ``epsilon_robust_accuracy``
counts samples whose cross-class similarities all stay at or below the
threshold.  CSV writers use repr-precision floats so files round-trip.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .ansatz import AnsatzParams, embed_features


class EvaluationError(ValueError):
    """Metric asked of a degenerate input (single class, empty set)."""


@dataclass(frozen=True)
class SimilarityMatrix:
    """Pairwise embedded inner products with their sample labels."""

    labels: tuple
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        vals = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", vals)
        n = len(self.labels)
        if vals.shape != (n, n):
            raise EvaluationError("matrix shape does not match label count")


@dataclass(frozen=True)
class RobustnessReport:
    epsilon: float
    robust_flags: tuple
    accuracy: float


def similarity_matrix(test, p: AnsatzParams) -> SimilarityMatrix:
    """Embedded inner products of every sample pair, symmetric with unit diagonal."""
    test = list(test)
    if not test:
        raise EvaluationError("empty test set")
    vectors = np.array([embed_features(s.features, p).real for s in test])
    values = vectors @ vectors.T
    return SimilarityMatrix(labels=tuple(s.label for s in test), values=values)


def average_inner_products(m: SimilarityMatrix) -> tuple[float, float]:
    """(d_i, d_o): mean similarity over same-class and cross-class pairs."""
    labels = np.asarray(m.labels, dtype=object)
    if len(set(m.labels)) < 2:
        raise EvaluationError("need two classes for d_i / d_o")
    same = np.equal.outer(labels, labels)
    upper = np.triu(np.ones_like(m.values, dtype=bool), k=1)
    d_i = float(np.mean(m.values[same & upper]))
    d_o = float(np.mean(m.values[~same & upper]))
    return d_i, d_o


def epsilon_robust_accuracy(m: SimilarityMatrix, epsilon: float) -> RobustnessReport:
    """A sample is robust when every cross-class similarity is <= epsilon."""
    if not -1.0 < epsilon < 1.0:
        raise EvaluationError("epsilon must lie in (-1, 1)")
    labels = np.asarray(m.labels, dtype=object)
    if len(set(m.labels)) < 2:
        raise EvaluationError("need two classes for robustness")
    cross = ~np.equal.outer(labels, labels)
    flags = []
    for i in range(len(m.labels)):
        flags.append(bool(np.all(m.values[i, cross[i]] <= epsilon)))
    return RobustnessReport(
        epsilon=float(epsilon),
        robust_flags=tuple(flags),
        accuracy=float(np.mean(flags)),
    )


# ---------------------------------------------------------------------------
# report files
# ---------------------------------------------------------------------------

def write_similarity_csv(path, m: SimilarityMatrix) -> None:
    """Header: label per column; then one row per sample, label first."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label"] + [str(lab) for lab in m.labels])
        for lab, row in zip(m.labels, m.values):
            writer.writerow([str(lab)] + [repr(float(v)) for v in row])


def read_similarity_csv(path) -> SimilarityMatrix:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    labels = tuple(rows[0][1:])
    values = np.array([[float(v) for v in row[1:]] for row in rows[1:]])
    return SimilarityMatrix(labels=labels, values=values)


def write_metrics_csv(path, before: tuple[float, float], after: tuple[float, float]) -> None:
    """d_i / d_o of the initial and trained model, one row per phase."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["phase", "d_i", "d_o"])
        writer.writerow(["before", repr(before[0]), repr(before[1])])
        writer.writerow(["after", repr(after[0]), repr(after[1])])


def write_robustness_csv(path, report: RobustnessReport, labels) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epsilon", repr(report.epsilon)])
        writer.writerow(["accuracy", repr(report.accuracy)])
        writer.writerow(["sample", "label", "robust"])
        for i, (lab, flag) in enumerate(zip(labels, report.robust_flags)):
            writer.writerow([i, str(lab), int(flag)])


def write_train_log_csv(path, log) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "mode", "loss", "grad_norm"])
        for entry in log:
            writer.writerow(
                [entry.iteration, entry.mode, repr(entry.loss), repr(entry.grad_norm)]
            )
