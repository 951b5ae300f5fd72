"""Empirical moment statistics and their population counterparts.

For samples ``(y_i, x_i)`` the estimators are

    m0 = mean(y^2)                  m1 = mean(y^3 x) / 6
    M2 = mean(y^2 x x^T) / 2 - m0 I / 2
    M3 = mean(y^3 x (x) x (x) x) / 6 - T(m1)

whose expectations under the Gaussian design are ``sum_j w_j b_j^{(x)2}`` and
``sum_j w_j b_j^{(x)3}``. M3 is only ever formed after whitening, as a
``(k, k, k)`` array; the ``p^3`` tensor is never materialised on the solver path.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from mixedlinear.errors import DimensionError
from mixedlinear.model import MixtureParams

CHUNK = 8192


@dataclass(frozen=True, eq=False)
class SecondMomentSet:
    m0: float
    M2: np.ndarray
    n1: int


@dataclass(frozen=True, eq=False)
class WhitenedThirdMoment:
    tilde_M3: np.ndarray
    m1: np.ndarray
    n2: int


def _check_slice(ys, xs) -> tuple[np.ndarray, np.ndarray]:
    ys = np.asarray(ys, dtype=float)
    xs = np.asarray(xs, dtype=float)
    if ys.ndim != 1 or ys.size == 0:
        raise ValueError("moment computation needs a non-empty 1-d response slice")
    if xs.ndim != 2 or xs.shape[0] != ys.size:
        raise DimensionError(f"xs shape {xs.shape} does not match {ys.size} responses")
    return ys, xs


def compensated_sum(parts) -> np.ndarray:
    """Neumaier-compensated elementwise sum of an iterable of equal-shape arrays."""
    total = None
    comp = None
    for part in parts:
        part = np.asarray(part, dtype=float)
        if total is None:
            total = part.copy()
            comp = np.zeros_like(total)
            continue
        t = total + part
        big = np.abs(total) >= np.abs(part)
        comp += np.where(big, (total - t) + part, (part - t) + total)
        total = t
    if total is None:
        raise ValueError("nothing to sum")
    return total + comp


def _chunks(n: int, size: int = CHUNK):
    for start in range(0, n, size):
        yield slice(start, min(start + size, n))


def _mirror_upper(m: np.ndarray) -> np.ndarray:
    upper = np.triu(m)
    return upper + np.triu(m, 1).T


_SORTED_INDEX_CACHE: dict[int, tuple[np.ndarray, ...]] = {}


def symmetrize_by_sorted_index(t: np.ndarray) -> np.ndarray:
    """Copy each entry ``t[a, b, c]`` with ``a <= b <= c`` to all its permutations.

    Makes a cubic array exactly permutation-invariant without averaging.
    """
    k = t.shape[0]
    if k not in _SORTED_INDEX_CACHE:
        idx = np.indices((k, k, k)).reshape(3, -1)
        _SORTED_INDEX_CACHE[k] = tuple(np.sort(idx, axis=0))
    a, b, c = _SORTED_INDEX_CACHE[k]
    return t[a, b, c].reshape(k, k, k)


def compute_second_moments(ys, xs) -> SecondMomentSet:
    """m0 and M2 over one data slice."""
    ys, xs = _check_slice(ys, xs)
    n, p = xs.shape
    y2 = ys * ys
    m0 = float(compensated_sum(np.sum(y2[s]) for s in _chunks(n)) / n)
    s2 = compensated_sum(
        (xs[s] * np.abs(ys[s])[:, None]).T @ (xs[s] * np.abs(ys[s])[:, None]) for s in _chunks(n)
    )
    m2 = _mirror_upper(s2 / (2.0 * n) - 0.5 * m0 * np.eye(p))
    return SecondMomentSet(m0=m0, M2=m2, n1=n)


def t_map(u) -> np.ndarray:
    """``T(u)[a, b, c] = u_a [b == c] + u_b [a == c] + u_c [a == b]``."""
    u = np.asarray(u, dtype=float)
    eye = np.eye(u.size)
    return (
        np.einsum("a,bc->abc", u, eye) + np.einsum("b,ac->abc", u, eye) + np.einsum("c,ab->abc", u, eye)
    )


def t_map_whitened(u, W) -> np.ndarray:
    """``T(u)(W, W, W)`` without forming the ``p^3`` tensor.

    With ``v = W^T u`` and ``G = W^T W`` the contraction is
    ``v_a G_bc + v_b G_ac + v_c G_ab``.
    """
    W = np.asarray(W, dtype=float)
    v = W.T @ np.asarray(u, dtype=float)
    g = _mirror_upper(W.T @ W)
    return np.einsum("a,bc->abc", v, g) + np.einsum("b,ac->abc", v, g) + np.einsum("c,ab->abc", v, g)


def compute_whitened_third_moment(ys, xs, W) -> WhitenedThirdMoment:
    """``M3(W, W, W)`` computed from the whitened covariates ``W^T x_i``.

    Cost is O(n (p k + k^3)); the correction term uses :func:`t_map_whitened`.
    """
    ys, xs = _check_slice(ys, xs)
    W = np.asarray(W, dtype=float)
    n, p = xs.shape
    if W.ndim != 2 or W.shape[0] != p:
        raise DimensionError(f"whitening matrix must be ({p}, k), got {W.shape}")
    if W.shape[1] > p:
        raise DimensionError(f"whitening matrix has {W.shape[1]} columns, more than p={p}")
    y3 = ys**3
    m1 = compensated_sum(y3[s] @ xs[s] for s in _chunks(n)) / (6.0 * n)

    def partial(s):
        z = xs[s] @ W
        return np.einsum("i,ia,ib,ic->abc", y3[s], z, z, z, optimize=True)

    raw = compensated_sum(partial(s) for s in _chunks(n)) / (6.0 * n)
    tilde = symmetrize_by_sorted_index(raw - t_map_whitened(m1, W))
    return WhitenedThirdMoment(tilde_M3=tilde, m1=m1, n2=n)


def expected_second_moment(params: MixtureParams) -> np.ndarray:
    b, w = params.betas, params.weights
    return _mirror_upper((b.T * w) @ b)


def expected_moments(params: MixtureParams) -> tuple[np.ndarray, np.ndarray]:
    """Population moments ``sum_j w_j b_j b_j^T`` and ``sum_j w_j b_j^{(x)3}``."""
    b, w = params.betas, params.weights
    m3 = np.einsum("j,ja,jb,jc->abc", w, b, b, b)
    return expected_second_moment(params), symmetrize_by_sorted_index(m3)


def whitened_population_tensor(params: MixtureParams, W) -> np.ndarray:
    """``sum_j w_j (W^T b_j)^{(x)3}``, the population M3 contracted by W on every mode."""
    z = params.betas @ np.asarray(W, dtype=float)
    return symmetrize_by_sorted_index(np.einsum("j,ja,jb,jc->abc", params.weights, z, z, z))


def tensor_contract(t: np.ndarray, A, B=None, C=None) -> np.ndarray:
    """Multilinear product ``T(A, B, C)``; B and C default to A."""
    A = np.asarray(A, dtype=float)
    B = A if B is None else np.asarray(B, dtype=float)
    C = A if C is None else np.asarray(C, dtype=float)
    return np.einsum("ijk,im,jn,kt->mnt", t, A, B, C, optimize=True)


def is_symmetric(t: np.ndarray, rtol: float = 1e-10) -> bool:
    scale = max(float(np.max(np.abs(t))), 1e-300)
    return all(
        np.max(np.abs(t - np.transpose(t, perm))) <= rtol * scale for perm in itertools.permutations(range(3))
    )
