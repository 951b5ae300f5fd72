"""Rank-k whitening of a symmetric second-moment matrix."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import orthogonal_procrustes

from mixedlinear.errors import DimensionError, RankDeficiencyError

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Whitener:
    """``W = U diag(sigma)^(-1/2)`` from the top-k eigenpairs of M2.

    ``W_pinv_T`` is the pseudoinverse of ``W^T``, i.e. ``W (W^T W)^{-1}``, which
    maps whitened coordinates back to R^p. ``clamped`` counts retained
    eigenvalues raised to the floor.
    """

    W: np.ndarray
    W_pinv_T: np.ndarray
    sigma: np.ndarray
    rank_gap: float
    spectrum: np.ndarray
    clamped: int = 0

    @property
    def k(self) -> int:
        return self.W.shape[1]

    def truncated(self) -> np.ndarray:
        """The rank-k matrix ``U diag(sigma) U^T`` this whitener inverts."""
        u = self.W * np.sqrt(self.sigma)
        return (u * self.sigma) @ u.T


def eigen_floor(sigma_max: float) -> float:
    return max(1e-10, 1e-8 * sigma_max)


def whiten(M2, k: int, clamp: bool = False) -> Whitener:
    """Whitening matrix for the best rank-k approximation of ``(M2 + M2^T) / 2``.

    If the k-th eigenvalue is at or below ``eigen_floor`` a
    :class:`RankDeficiencyError` carrying the spectrum is raised, unless
    ``clamp`` is set, in which case such eigenvalues are raised to the floor and
    counted in ``Whitener.clamped``.
    """
    M2 = np.asarray(M2, dtype=float)
    p = M2.shape[0]
    if M2.shape != (p, p):
        raise DimensionError(f"M2 must be square, got {M2.shape}")
    if not 1 <= k <= p:
        raise DimensionError(f"rank k={k} must lie in [1, {p}]")
    vals, vecs = np.linalg.eigh((M2 + M2.T) / 2.0)
    order = np.argsort(-vals, kind="stable")
    vals, vecs = vals[order], vecs[:, order]
    floor = eigen_floor(max(float(vals[0]), 0.0))
    sigma = vals[:k].copy()
    clamped = int(np.sum(sigma <= floor))
    if clamped:
        if not clamp:
            raise RankDeficiencyError(
                f"k-th eigenvalue {sigma[-1]:.3e} of M2 is not above the floor {floor:.3e}",
                spectrum=vals,
                floor=floor,
            )
        log.warning("clamping %d eigenvalue(s) of M2 at %.3e", clamped, floor)
        sigma = np.maximum(sigma, floor)
    u = vecs[:, :k]
    idx = np.argmax(np.abs(u), axis=0)
    s = np.sign(u[idx, np.arange(k)])
    s[s == 0] = 1.0
    u = u * s
    W = u / np.sqrt(sigma)
    gram = W.T @ W
    W_pinv_T = W @ np.linalg.solve(gram, np.eye(k))
    gap = float(vals[k - 1] - (vals[k] if k < p else 0.0))
    return Whitener(W=W, W_pinv_T=W_pinv_T, sigma=sigma, rank_gap=gap, spectrum=vals, clamped=clamped)


@dataclass(frozen=True)
class StabilityProbe:
    alpha: float
    precondition_met: bool
    bounds_hold: bool | None
    ratios: dict


def whitening_stability_probe(A, A_hat, k: int) -> StabilityProbe:
    """Check the perturbation bounds relating the whiteners of A and A_hat.

    With ``alpha = ||A - A_hat|| / sigma_k(A) < 1/3`` the whiteners should obey
    ``||W_hat|| <= 2 ||W||``, ``||W_hat^+|| <= 2 ||W^+||``,
    ``||W - W_hat|| <= 2 alpha ||W||`` and ``||W^+ - W_hat^+|| <= 2 alpha ||W^+||``.
    Whiteners are unique only up to a k x k rotation, so W_hat is first aligned
    to W by orthogonal Procrustes. When ``alpha >= 1/3`` no claim is made and
    ``bounds_hold`` is None.
    """
    A = np.asarray(A, dtype=float)
    A_hat = np.asarray(A_hat, dtype=float)
    wa = whiten(A, k)
    wb = whiten(A_hat, k)
    alpha = float(np.linalg.norm(A - A_hat, 2) / wa.sigma[-1])
    if alpha >= 1.0 / 3.0:
        return StabilityProbe(alpha=alpha, precondition_met=False, bounds_hold=None, ratios={})
    W, Wh = wa.W, wb.W
    rot, _ = orthogonal_procrustes(Wh, W)
    Wh = Wh @ rot
    # W^+ = (W^T W)^{-1} W^T, the left inverse.
    Wp = np.linalg.pinv(W)
    Whp = np.linalg.pinv(Wh)
    op = lambda m: float(np.linalg.norm(m, 2))  # noqa: E731
    tiny = 1e-15
    ratios = {
        "norm": op(Wh) / (2 * op(W)),
        "pinv_norm": op(Whp) / (2 * op(Wp)),
        "diff": op(W - Wh) / max(2 * alpha * op(W), tiny),
        "pinv_diff": op(Wp - Whp) / max(2 * alpha * op(Wp), tiny),
    }
    holds = all(r <= 1 + 1e-9 for r in ratios.values()) if alpha > 0 else op(W - Wh) <= 1e-10
    return StabilityProbe(alpha=alpha, precondition_met=True, bounds_hold=bool(holds), ratios=ratios)
