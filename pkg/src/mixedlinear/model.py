"""Generative model: mixture parameters, datasets and difficulty measures."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from mixedlinear._rng import stream
from mixedlinear.errors import ConstructionError, DimensionError


def _frozen(a, dtype=float) -> np.ndarray:
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class MixtureParams:
    """Ground truth ``(weights[j], betas[j])`` for j in ``range(k)``.

    ``betas`` is stored row-major as a ``(k, p)`` array.
    """

    betas: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        betas = _frozen(self.betas)
        weights = _frozen(self.weights)
        if betas.ndim != 2 or betas.shape[0] < 1 or betas.shape[1] < 1:
            raise DimensionError(f"betas must be a non-empty (k, p) array, got shape {betas.shape}")
        if weights.shape != (betas.shape[0],):
            raise DimensionError(f"expected {betas.shape[0]} weights, got shape {weights.shape}")
        if np.any(weights <= 0):
            raise ConstructionError("all weights must be strictly positive")
        if abs(weights.sum() - 1.0) > 1e-12:
            raise ConstructionError(f"weights sum to {weights.sum()!r}, not 1")
        if np.max(np.linalg.norm(betas, axis=1)) > 1 + 1e-12:
            raise ConstructionError("every beta must have l2 norm at most 1")
        object.__setattr__(self, "betas", betas)
        object.__setattr__(self, "weights", weights)

    @property
    def k(self) -> int:
        return self.betas.shape[0]

    @property
    def p(self) -> int:
        return self.betas.shape[1]

    def to_dict(self) -> dict:
        return {"k": self.k, "p": self.p, "betas": self.betas.tolist(), "weights": self.weights.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> MixtureParams:
        params = cls(betas=np.asarray(d["betas"], dtype=float), weights=np.asarray(d["weights"], dtype=float))
        if params.k != d.get("k", params.k) or params.p != d.get("p", params.p):
            raise DimensionError("declared k/p do not match the betas array")
        return params


@dataclass(frozen=True, eq=False)
class Dataset:
    """Samples ``(ys[i], xs[i])``; the hidden labels are for evaluation only.

    Solvers must read ``xs`` and ``ys`` only. Ground-truth labels live behind
    :meth:`evaluation_labels` so they never flow into an estimator by accident.
    """

    xs: np.ndarray
    ys: np.ndarray
    _labels: np.ndarray = field(repr=False)
    seed: int | None = None

    def __post_init__(self):
        xs = _frozen(self.xs)
        ys = _frozen(self.ys)
        labels = _frozen(self._labels, dtype=np.int64)
        if xs.ndim != 2 or ys.shape != (xs.shape[0],) or labels.shape != ys.shape:
            raise DimensionError("xs must be (n, p) with ys and labels of length n")
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)
        object.__setattr__(self, "_labels", labels)

    @property
    def n(self) -> int:
        return self.xs.shape[0]

    @property
    def p(self) -> int:
        return self.xs.shape[1]

    def evaluation_labels(self) -> np.ndarray:
        """Hidden component labels (0-based). Never pass these to a solver."""
        return self._labels

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "n": self.n,
            "p": self.p,
            "xs": self.xs.tolist(),
            "ys": self.ys.tolist(),
            "labels": self._labels.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> Dataset:
        return cls(
            xs=np.asarray(d["xs"], dtype=float).reshape(len(d["ys"]), -1),
            ys=np.asarray(d["ys"], dtype=float),
            _labels=np.asarray(d["labels"], dtype=np.int64),
            seed=d.get("seed"),
        )


@dataclass(frozen=True)
class DifficultyReport:
    delta: float
    omega_min: float
    sigma_k: float
    eta: float
    gamma: float

    def to_dict(self) -> dict:
        return {
            "delta": self.delta,
            "omega_min": self.omega_min,
            "sigma_k": self.sigma_k,
            "eta": self.eta,
            "gamma": self.gamma,
        }


def random_orthonormal(rng: np.random.Generator, p: int, k: int) -> np.ndarray:
    """Orthonormal basis (p, k) of a uniformly random k-dim subspace of R^p."""
    q, r = np.linalg.qr(rng.standard_normal((p, k)))
    s = np.sign(np.diag(r))
    s[s == 0] = 1.0
    return q * s


def _sign_fix_columns(v: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(v), axis=0)
    s = np.sign(v[idx, np.arange(v.shape[1])])
    s[s == 0] = 1.0
    return v * s


def make_delta_spaced_params(p: int, k: int, delta: float, seed: int) -> MixtureParams:
    """Unit-norm betas with every pairwise distance equal to ``delta``.

    The Gram matrix C has ones on the diagonal and ``1 - delta**2 / 2`` off it.
    With ``C = V diag(lam) V^T`` the beta matrix is ``B = U diag(lam)^(1/2) V^T``
    where U spans a uniformly random k-dimensional subspace. Weights are equal.
    """
    if k < 1 or p < 1:
        raise DimensionError("p and k must be positive")
    if k > p:
        raise DimensionError(f"k={k} exceeds p={p}: betas cannot be linearly independent")
    if k > 1:
        if not delta > 0:
            raise ConstructionError("delta must be positive")
        off = 1.0 - delta**2 / 2.0
        if off < -1.0 / (k - 1) + 1e-9:
            raise ConstructionError(
                f"delta={delta} infeasible for k={k}: Gram matrix would not be positive semidefinite"
            )
    else:
        off = 0.0
    gram = np.full((k, k), off)
    np.fill_diagonal(gram, 1.0)
    lam, vecs = np.linalg.eigh(gram)
    order = np.argsort(-lam, kind="stable")
    lam = np.clip(lam[order], 0.0, None)
    vecs = _sign_fix_columns(vecs[:, order])
    basis = random_orthonormal(stream(seed, 0), p, k)
    b = basis @ (np.sqrt(lam)[:, None] * vecs.T)
    betas = b.T / np.linalg.norm(b.T, axis=1, keepdims=True)
    return MixtureParams(betas=betas, weights=np.full(k, 1.0 / k))


def sample_dataset(params: MixtureParams, n: int, seed: int) -> Dataset:
    """Draw n samples: labels ~ weights, x ~ N(0, I_p), y = <x, beta_label>."""
    if n < 1:
        raise DimensionError("n must be at least 1")
    rng = stream(seed, 1)
    labels = rng.choice(params.k, size=n, p=params.weights)
    xs = rng.standard_normal((n, params.p))
    ys = np.einsum("ij,ij->i", xs, params.betas[labels])
    return Dataset(xs=xs, ys=ys, _labels=labels, seed=seed)


def difficulty(params: MixtureParams) -> DifficultyReport:
    betas, w = params.betas, params.weights
    k = params.k
    if k > 1:
        delta = min(float(np.linalg.norm(betas[i] - betas[j])) for i, j in itertools.combinations(range(k), 2))
        gram = betas @ betas.T
        gamma = float(np.max(np.abs(gram[~np.eye(k, dtype=bool)])))
    else:
        delta, gamma = float("inf"), 0.0
    # sigma_k(sum_j w_j b_j b_j^T) = s_k(diag(sqrt(w)) B)^2; the SVD route keeps
    # rank decisions at the resolution of B rather than of its square.
    s = np.linalg.svd(np.sqrt(w)[:, None] * betas, compute_uv=False)
    sigma_k = float(s[k - 1] ** 2) if k <= params.p and s[k - 1] > 1e-10 * s[0] else 0.0
    eta = float(1.0 - np.min(np.linalg.norm(betas, axis=1)))
    return DifficultyReport(delta=delta, omega_min=float(w.min()), sigma_k=sigma_k, eta=eta, gamma=gamma)
