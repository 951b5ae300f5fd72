"""Spectral initialization: moments, whitening, tensor power method, reconstruction."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from mixedlinear._rng import stream
from mixedlinear.errors import DimensionError
from mixedlinear.model import Dataset, MixtureParams
from mixedlinear.moments import (
    compute_second_moments,
    compute_whitened_third_moment,
    expected_second_moment,
    whitened_population_tensor,
)
from mixedlinear.tensor_power import EigenPair, PowerConfig, power_decompose
from mixedlinear.whitening import Whitener, whiten

log = logging.getLogger(__name__)

MIN_EIGENVALUE = 1e-6


@dataclass(frozen=True)
class InitConfig:
    """Sample splitting and power-method settings for the initializer.

    With ``use_split`` the samples are randomly divided into a second-moment
    slice of size ``round(split_fraction * n)`` and a third-moment slice made of
    the rest; otherwise both moments use every sample.
    """

    split_fraction: float = 0.5
    use_split: bool = False
    power: PowerConfig = field(default_factory=PowerConfig)
    seed: int = 0
    clamp_eigenvalues: bool = True

    def __post_init__(self):
        if not 0 < self.split_fraction < 1:
            raise ValueError("split_fraction must lie strictly between 0 and 1")


@dataclass(frozen=True, eq=False)
class SpectralEstimate:
    betas0: np.ndarray
    weights0: np.ndarray
    pairs: list[EigenPair]
    whitener: Whitener
    diagnostics: dict


def split_indices(n: int, fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Random disjoint index sets covering ``range(n)``, the first of size ~``fraction * n``."""
    if n < 2:
        raise DimensionError("splitting needs at least two samples")
    n1 = min(max(int(round(fraction * n)), 1), n - 1)
    perm = stream(seed, 2).permutation(n)
    return np.sort(perm[:n1]), np.sort(perm[n1:])


def reconstruct(pairs: list[EigenPair], whitener: Whitener) -> tuple[np.ndarray, np.ndarray, int]:
    """``w_j = 1 / lam_j^2`` and ``b_j = lam_j (W^T)^+ u_j`` for every pair."""
    lams = np.array([pr.lam for pr in pairs])
    clamped = int(np.sum(lams < MIN_EIGENVALUE))
    if clamped:
        log.warning("clamping %d tensor eigenvalue(s) at %.0e", clamped, MIN_EIGENVALUE)
        lams = np.maximum(lams, MIN_EIGENVALUE)
    vecs = np.stack([pr.vector for pr in pairs])
    betas = lams[:, None] * (vecs @ whitener.W_pinv_T.T)
    return betas, 1.0 / lams**2, clamped


def _finish(pairs, whitener, tilde_m3, extra) -> SpectralEstimate:
    betas, weights, clamped = reconstruct(pairs, whitener)
    resid = tilde_m3 - sum(pr.lam * np.einsum("a,b,c->abc", pr.vector, pr.vector, pr.vector) for pr in pairs)
    k = whitener.k
    spectrum = whitener.spectrum
    diag = {
        "epsilon2_proxy": float(abs(spectrum[k])) if spectrum.size > k else 0.0,
        "m2_spectrum": spectrum[: k + 1].tolist(),
        "power_residual": float(np.sqrt(np.sum(resid * resid))),
        "clamped_eigenvalues": whitener.clamped,
        "clamped_weights": clamped,
        **extra,
    }
    return SpectralEstimate(betas0=betas, weights0=weights, pairs=pairs, whitener=whitener, diagnostics=diag)


def tensor_init(data: Dataset, k: int, cfg: InitConfig | None = None) -> SpectralEstimate:
    """Initial estimates of the k components from the data alone."""
    cfg = cfg or InitConfig()
    xs, ys = data.xs, data.ys
    n, p = xs.shape
    if n < 2:
        raise DimensionError("initialization needs at least two samples")
    if k > p:
        raise DimensionError(f"k={k} exceeds p={p}")
    if cfg.use_split:
        first, second = split_indices(n, cfg.split_fraction, cfg.seed)
    else:
        first = second = np.arange(n)
    second_moments = compute_second_moments(ys[first], xs[first])
    whitener = whiten(second_moments.M2, k, clamp=cfg.clamp_eigenvalues)
    third = compute_whitened_third_moment(ys[second], xs[second], whitener.W)
    pairs = power_decompose(third.tilde_M3, k, cfg.power)
    return _finish(
        pairs, whitener, third.tilde_M3, {"n1": int(first.size), "n2": int(second.size), "use_split": cfg.use_split}
    )


def tensor_init_from_population(params: MixtureParams, k: int, cfg: InitConfig | None = None) -> SpectralEstimate:
    """Same pipeline run on the exact population moments of ``params``."""
    cfg = cfg or InitConfig()
    if k > params.p:
        raise DimensionError(f"k={k} exceeds p={params.p}")
    whitener = whiten(expected_second_moment(params), k, clamp=False)
    tilde = whitened_population_tensor(params, whitener.W)
    pairs = power_decompose(tilde, k, cfg.power)
    return _finish(pairs, whitener, tilde, {"population": True})
