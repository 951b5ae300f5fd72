"""Alternating minimization: hard label assignment and per-cluster least squares."""

from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from mixedlinear._rng import stream
from mixedlinear.metrics import estimation_error
from mixedlinear.model import Dataset, MixtureParams

RANK_RTOL = 1e-10

TERMINATION_REASONS = ("labels_stable", "max_iters", "exact_recovery", "degenerate_cluster", "timeout")


@dataclass(frozen=True)
class AltMinConfig:
    """Iteration budget and stopping rules.

    ``resample`` splits the samples into T disjoint equal slices and uses slice
    t at iteration t. ``tol`` is the estimation error against the truth (when
    given) below which a run counts as exactly recovered. ``final_refit`` adds
    one assignment/update pass on all samples after a resampled run.
    """

    T: int = 200
    resample: bool = False
    tol: float = 1e-10
    seed: int = 0
    final_refit: bool = False
    time_limit: float | None = None

    def __post_init__(self):
        if self.T < 1:
            raise ValueError("T must be at least 1")
        if self.tol < 0:
            raise ValueError("tol must be non-negative")


@dataclass
class RunTrace:
    """Per-iteration record of an AltMin run.

    Entry t describes the iterate ``betas^(t)``: its estimation error (if the
    truth was supplied), how many labels changed relative to entry t-1, cluster
    sizes of the labels it induces, and the summed squared residual.
    """

    errors: list = field(default_factory=list)
    label_changes: list = field(default_factory=list)
    cluster_sizes: list = field(default_factory=list)
    residuals: list = field(default_factory=list)
    degenerate: list = field(default_factory=list)
    termination_reason: str = ""

    @property
    def iterations(self) -> int:
        """Number of parameter updates performed."""
        return max(len(self.residuals) - 1, 0)

    @property
    def final_error(self) -> float | None:
        return self.errors[-1] if self.errors else None

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "termination_reason": self.termination_reason,
            "errors": self.errors,
            "label_changes": self.label_changes,
            "cluster_sizes": self.cluster_sizes,
            "residuals": self.residuals,
            "degenerate": self.degenerate,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iteration", "error", "label_changes", "cluster_sizes", "residual"])
        for t, res in enumerate(self.residuals):
            err = self.errors[t] if self.errors else ""
            w.writerow([t, repr(err) if err != "" else "", self.label_changes[t],
                        " ".join(map(str, self.cluster_sizes[t])), repr(res)])
        return buf.getvalue()


def residuals(ys, xs, betas) -> np.ndarray:
    """``|y_i - <x_i, b_j>|`` as an (n, k) array."""
    return np.abs(np.asarray(ys, dtype=float)[:, None] - np.asarray(xs, dtype=float) @ np.asarray(betas).T)


def assign_labels(ys, xs, betas) -> np.ndarray:
    """Index of the component with the smallest absolute residual; lowest index wins ties."""
    return np.argmin(residuals(ys, xs, betas), axis=1)


def least_squares_qr(X: np.ndarray, y: np.ndarray) -> np.ndarray | None:
    """Least squares by column-pivoted QR, or None if X is numerically rank deficient."""
    n, p = X.shape
    if n < p:
        return None
    q, r, piv = scipy.linalg.qr(X, mode="economic", pivoting=True)
    d = np.abs(np.diag(r))
    col_max = float(np.max(np.linalg.norm(X, axis=0))) if n else 0.0
    if col_max == 0.0 or np.any(d <= RANK_RTOL * col_max):
        return None
    z = scipy.linalg.solve_triangular(r, q.T @ y)
    beta = np.empty(p)
    beta[piv] = z
    return beta


def update_parameters(ys, xs, labels, k: int, previous=None) -> tuple[np.ndarray, np.ndarray]:
    """Per-cluster least squares.

    Returns the new ``(k, p)`` betas and a boolean flag per cluster marking
    clusters that were empty or rank deficient; those keep their ``previous``
    row (zeros when no previous iterate is given).
    """
    ys = np.asarray(ys, dtype=float)
    xs = np.asarray(xs, dtype=float)
    labels = np.asarray(labels)
    p = xs.shape[1]
    betas = np.zeros((k, p)) if previous is None else np.array(previous, dtype=float, copy=True)
    flags = np.zeros(k, dtype=bool)
    for j in range(k):
        mask = labels == j
        sol = least_squares_qr(xs[mask], ys[mask]) if mask.any() else None
        if sol is None:
            flags[j] = True
        else:
            betas[j] = sol
    return betas, flags


def resample_slices(n: int, T: int, seed: int) -> list[np.ndarray]:
    """T disjoint random slices of size ``n // T``."""
    m = n // T
    if m < 1:
        raise ValueError(f"cannot split {n} samples into {T} non-empty slices")
    perm = stream(seed, 3).permutation(n)
    return [np.sort(perm[t * m : (t + 1) * m]) for t in range(T)]


def altmin_run(
    data: Dataset,
    init,
    cfg: AltMinConfig | None = None,
    truth: MixtureParams | None = None,
) -> tuple[np.ndarray, RunTrace]:
    """Alternate label assignment and least squares from ``init``.

    Stops when the labels repeat (full-data mode only), after T updates, when
    the error against ``truth`` drops to ``cfg.tol`` after at least one update,
    or when every cluster is degenerate.
    """
    cfg = cfg or AltMinConfig()
    xs, ys = data.xs, data.ys
    betas = np.array(init, dtype=float, copy=True)
    k = betas.shape[0]
    slices = resample_slices(data.n, cfg.T, cfg.seed) if cfg.resample else None
    trace = RunTrace()
    prev_labels = None
    started = time.monotonic()

    def record(idx, labels, flags):
        r = residuals(ys[idx], xs[idx], betas)
        trace.residuals.append(float(np.sum(np.min(r, axis=1) ** 2)))
        trace.cluster_sizes.append(np.bincount(labels, minlength=k).tolist())
        trace.label_changes.append(
            int(labels.size) if prev_labels is None or prev_labels.size != labels.size
            else int(np.sum(labels != prev_labels))
        )
        trace.degenerate.append(flags.tolist())
        if truth is not None:
            trace.errors.append(estimation_error(betas, truth.betas).error)

    flags = np.zeros(k, dtype=bool)
    everything = slice(None)
    for t in range(cfg.T + 1):
        idx = slices[min(t, cfg.T - 1)] if slices is not None else everything
        labels = assign_labels(ys[idx], xs[idx], betas)
        record(idx, labels, flags)
        if t > 0 and truth is not None and trace.errors[-1] <= cfg.tol:
            trace.termination_reason = "exact_recovery"
            break
        if slices is None and prev_labels is not None and np.array_equal(labels, prev_labels):
            trace.termination_reason = "labels_stable"
            break
        if t == cfg.T:
            trace.termination_reason = "max_iters"
            break
        if cfg.time_limit is not None and time.monotonic() - started > cfg.time_limit:
            trace.termination_reason = "timeout"
            break
        betas, flags = update_parameters(ys[idx], xs[idx], labels, k, previous=betas)
        prev_labels = labels
        if flags.all():
            labels = assign_labels(ys[idx], xs[idx], betas)
            record(idx, labels, flags)
            trace.termination_reason = "degenerate_cluster"
            break

    if cfg.final_refit and slices is not None:
        labels = assign_labels(ys, xs, betas)
        betas, flags = update_parameters(ys, xs, labels, k, previous=betas)
        prev_labels = None
        record(everything, assign_labels(ys, xs, betas), flags)
    return betas, trace
