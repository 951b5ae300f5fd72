"""Permutation-matched estimation error and label diagnostics."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from mixedlinear.errors import DimensionError

BRUTE_FORCE_MAX_K = 8


@dataclass(frozen=True, eq=False)
class ErrorReport:
    """Bottleneck error ``min_pi max_j ||est_j - truth_pi(j)||``.

    ``permutation[j]`` is the truth index matched to estimate j.
    ``mean_error`` averages the matched distances; it is a dashboard
    diagnostic, not the recovery criterion.
    """

    error: float
    permutation: np.ndarray
    per_component: np.ndarray

    @property
    def mean_error(self) -> float:
        return float(np.mean(self.per_component))

    def to_dict(self) -> dict:
        return {
            "error": self.error,
            "permutation": self.permutation.tolist(),
            "per_component": self.per_component.tolist(),
            "mean_error": self.mean_error,
        }


def distance_matrix(estimates, truth) -> np.ndarray:
    a = np.atleast_2d(np.asarray(estimates, dtype=float))
    b = np.atleast_2d(np.asarray(truth, dtype=float))
    if a.shape != b.shape:
        raise DimensionError(f"estimates {a.shape} and truth {b.shape} differ in shape")
    return np.linalg.norm(a[:, None, :] - b[None, :, :], axis=2)


def bottleneck_brute_force(dist: np.ndarray) -> tuple[float, np.ndarray]:
    """Scan all k! permutations; the lexicographically first minimiser wins ties."""
    k = dist.shape[0]
    best, best_perm = np.inf, None
    rows = np.arange(k)
    for perm in itertools.permutations(range(k)):
        val = dist[rows, perm].max()
        if val < best:
            best, best_perm = val, perm
    return float(best), np.array(best_perm)


def bottleneck_matching(dist: np.ndarray) -> tuple[float, np.ndarray]:
    """Smallest threshold admitting a perfect matching, by bisection over distances."""
    values = np.unique(dist)
    lo, hi = 0, values.size - 1
    match = None
    while lo < hi:
        mid = (lo + hi) // 2
        m = maximum_bipartite_matching(csr_matrix(dist <= values[mid]), perm_type="column")
        if np.all(m >= 0):
            hi, match = mid, m
        else:
            lo = mid + 1
    if match is None or np.any(dist[np.arange(dist.shape[0]), match] > values[lo]):
        match = maximum_bipartite_matching(csr_matrix(dist <= values[lo]), perm_type="column")
    return float(values[lo]), np.asarray(match, dtype=np.int64)


def estimation_error(estimates, truth) -> ErrorReport:
    dist = distance_matrix(estimates, truth)
    if dist.shape[0] <= BRUTE_FORCE_MAX_K:
        err, perm = bottleneck_brute_force(dist)
    else:
        err, perm = bottleneck_matching(dist)
    per = dist[np.arange(dist.shape[0]), perm]
    return ErrorReport(error=err, permutation=perm, per_component=per)


def label_accuracy(predicted, truth_labels, permutation) -> float:
    """Fraction of samples whose predicted component maps to their true one.

    Sample i counts as correct when ``permutation[predicted[i]] == truth[i]``,
    with ``permutation`` as returned in :class:`ErrorReport`.
    """
    predicted = np.asarray(predicted)
    truth_labels = np.asarray(truth_labels)
    if predicted.shape != truth_labels.shape:
        raise DimensionError("predicted and true labels differ in length")
    if predicted.size == 0:
        return float("nan")
    return float(np.mean(np.asarray(permutation)[predicted] == truth_labels))


def weight_error(weights_est, weights_true, permutation) -> float:
    """Largest matched absolute weight difference (diagnostic)."""
    w_est = np.asarray(weights_est, dtype=float)
    w_true = np.asarray(weights_true, dtype=float)
    return float(np.max(np.abs(w_est - w_true[np.asarray(permutation)])))
