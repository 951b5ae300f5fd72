"""Robust tensor power method with random restarts and deflation."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from mixedlinear._rng import stream
from mixedlinear.errors import DecompositionError, DimensionError

POLISH_TOL = 1e-13
_ZERO = 1e-300


def default_restarts(k: int) -> int:
    return 200 * k * k


def default_iterations(k: int) -> int:
    return math.ceil(20 * math.log(max(k, 2)))


@dataclass(frozen=True)
class PowerConfig:
    """Restart count L, iterations per restart N, and the RNG seed.

    ``L`` and ``N`` default to ``200 k^2`` and ``ceil(20 ln max(k, 2))``.
    """

    L: int | None = None
    N: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.L is not None and self.L < 1:
            raise ValueError("L must be at least 1")
        if self.N is not None and self.N < 1:
            raise ValueError("N must be at least 1")

    def resolved(self, k: int) -> tuple[int, int]:
        return (
            self.L if self.L is not None else default_restarts(k),
            self.N if self.N is not None else default_iterations(k),
        )


@dataclass(frozen=True, eq=False)
class EigenPair:
    lam: float
    vector: np.ndarray


def tensor_apply(T, u, v) -> np.ndarray:
    """Vector with entries ``sum_{b,c} T[a, b, c] u[b] v[c]``."""
    T = np.asarray(T, dtype=float)
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if T.ndim != 3 or u.shape != (T.shape[1],) or v.shape != (T.shape[2],):
        raise DimensionError(f"cannot apply tensor {T.shape} to vectors {u.shape}, {v.shape}")
    return np.einsum("abc,b,c->a", T, u, v)


def tensor_value(T, u) -> float:
    """``T(u, u, u)``."""
    return float(np.einsum("abc,a,b,c->", T, u, u, u))


def _batch_apply(T, U):
    # Row l of the result is T(I, u_l, u_l), computed as one matrix product.
    k = T.shape[0]
    outer = (U[:, :, None] * U[:, None, :]).reshape(len(U), k * k)
    return outer @ T.reshape(k, k * k).T


def _batch_value(T, U):
    return np.sum(_batch_apply(T, U) * U, axis=1)


def _unit_rows(rng, m, k):
    x = rng.standard_normal((m, k))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def power_iteration(T, u, n_iter: int, tol: float = 0.0, history: bool = False):
    """Iterate ``u <- T(I, u, u) / ||T(I, u, u)||`` from ``u``.

    Stops early once successive iterates differ by less than ``tol``. With
    ``history=True`` also returns the sequence of ``T(u, u, u)`` values.
    """
    u = np.asarray(u, dtype=float)
    u = u / np.linalg.norm(u)
    values = [tensor_value(T, u)]
    for _ in range(n_iter):
        nxt = tensor_apply(T, u, u)
        nrm = np.linalg.norm(nxt)
        if nrm <= _ZERO:
            break
        nxt = nxt / nrm
        step = np.linalg.norm(nxt - u)
        u = nxt
        values.append(tensor_value(T, u))
        if step < tol:
            break
    return (u, values) if history else u


def _best_restart(T, rng, L, N):
    k = T.shape[0]
    U = _unit_rows(rng, L, k)
    for _ in range(N):
        nxt = _batch_apply(T, U)
        nrm = np.linalg.norm(nxt, axis=1)
        dead = nrm <= _ZERO
        if dead.any():
            # Restart degenerate trajectories from fresh draws.
            nxt[dead] = _unit_rows(rng, int(dead.sum()), k)
            nrm[dead] = 1.0
        U = nxt / nrm[:, None]
    alive = np.linalg.norm(_batch_apply(T, U), axis=1) > _ZERO
    if not alive.any():
        raise DecompositionError("all power-method restarts collapsed to zero")
    vals = np.where(alive, _batch_value(T, U), -np.inf)
    return U[int(np.argmax(vals))]


def power_decompose(T, k: int, cfg: PowerConfig | None = None) -> list[EigenPair]:
    """Extract k eigenpairs of a symmetric ``(d, d, d)`` tensor by restart + deflation.

    For each pair: run L restarts of N power iterations from uniform points on
    the sphere, keep the restart with the largest ``T(u, u, u)`` (lowest index on
    ties), polish with up to N more iterations, then deflate
    ``T <- T - lam u^{(x)3}``. Pairs with a negative value are reported as
    ``(-lam, -u)``. Restart streams derive from ``(cfg.seed, j)``.
    """
    cfg = cfg or PowerConfig()
    T = np.array(T, dtype=float, copy=True)
    if T.ndim != 3 or len(set(T.shape)) != 1:
        raise DimensionError(f"expected a cubic 3-way tensor, got shape {T.shape}")
    scale = max(float(np.max(np.abs(T))), _ZERO)
    if max(np.max(np.abs(T - T.transpose(p))) for p in [(1, 0, 2), (2, 1, 0), (0, 2, 1)]) > 1e-8 * scale:
        raise DimensionError("tensor is not symmetric")
    if not 1 <= k <= T.shape[0]:
        raise DimensionError(f"cannot extract {k} pairs from a tensor of side {T.shape[0]}")
    L, N = cfg.resolved(k)
    pairs = []
    for j in range(k):
        start = _best_restart(T, stream(cfg.seed, j), L, N)
        u = power_iteration(T, start, N, tol=POLISH_TOL)
        lam = tensor_value(T, u)
        if lam < 0:
            lam, u = -lam, -u
        pairs.append(EigenPair(lam=lam, vector=u))
        T -= lam * np.einsum("a,b,c->abc", u, u, u)
    return pairs


def tensor_opnorm(T, probes: int = 2000, seed: int = 0, refine: int = 200) -> float:
    """Estimate ``sup_{||u||=1} |T(u, u, u)|`` for a symmetric tensor.

    Random probes followed by shifted power ascent (SS-HOPM), which increases
    ``T(u, u, u)`` monotonically for a large enough shift. Returns a lower bound
    that is tight in practice for small dimensions.
    """
    T = np.asarray(T, dtype=float)
    d = T.shape[0]
    U = _unit_rows(stream(seed, 7), probes, d)
    shift = 2.0 * float(np.sqrt(np.sum(T * T)))
    for _ in range(refine):
        nxt = _batch_apply(T, U) + shift * U
        U = nxt / np.linalg.norm(nxt, axis=1, keepdims=True)
    return float(np.max(np.abs(_batch_value(T, U))))
