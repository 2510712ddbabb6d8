"""Gaussian mixture appearance models over RGB.

One model per side (foreground/background). Fitting is hard-assignment
coordinate descent: k-means initialization, then alternating
assign/refit sweeps driven by the segmentation engine.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyInput

COVARIANCE_FLOOR = 0.01
DENSITY_CAP = 1e9
_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class GaussianComponent:
    weight: float
    mean: np.ndarray  # (3,)
    covariance: np.ndarray  # (3, 3) symmetric positive-definite
    inv_covariance: np.ndarray = field(repr=False)
    log_det: float = field(repr=False)

    @classmethod
    def from_moments(cls, weight: float, mean: np.ndarray, cov: np.ndarray):
        cov = np.asarray(cov, dtype=np.float64)
        sign, log_det = np.linalg.slogdet(cov)
        if sign <= 0:
            raise ValueError("covariance must be positive-definite")
        return cls(
            weight=float(weight),
            mean=np.asarray(mean, dtype=np.float64),
            covariance=cov,
            inv_covariance=np.linalg.inv(cov),
            log_det=float(log_det),
        )


@dataclass(frozen=True)
class ColorMixtureModel:
    components: tuple[GaussianComponent, ...]
    # stacked copies of the per-component parameters for vectorized math
    weights: np.ndarray = field(init=False, repr=False)
    means: np.ndarray = field(init=False, repr=False)
    inv_covs: np.ndarray = field(init=False, repr=False)
    log_dets: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if len(self.components) < 1:
            raise ValueError("mixture needs at least one component")
        w = np.array([c.weight for c in self.components])
        if abs(w.sum() - 1.0) > 1e-9:
            raise ValueError(f"weights sum to {w.sum()}, not 1")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", np.stack([c.mean for c in self.components]))
        object.__setattr__(
            self, "inv_covs", np.stack([c.inv_covariance for c in self.components])
        )
        object.__setattr__(
            self, "log_dets", np.array([c.log_det for c in self.components])
        )

    @property
    def k(self) -> int:
        return len(self.components)


def _component_log_densities(model: ColorMixtureModel, pixels: np.ndarray) -> np.ndarray:
    """log N(z; mu_k, Sigma_k) for every pixel/component pair, shape (N, K)."""
    diff = pixels[:, None, :] - model.means[None, :, :]  # (N, K, 3)
    quad = np.einsum("nki,kij,nkj->nk", diff, model.inv_covs, diff)
    return -0.5 * (3.0 * _LOG_2PI + model.log_dets[None, :] + quad)


def _model_from_assignments(
    pixels: np.ndarray, assignments: np.ndarray, k: int, floor: float
) -> tuple[ColorMixtureModel, np.ndarray]:
    """Empirical per-cluster moments; empty clusters dropped, weights renormalized.

    Returns the model and the assignment remap into surviving components.
    """
    n = len(pixels)
    counts = np.bincount(assignments, minlength=k)
    keep = np.flatnonzero(counts > 0)
    comps = []
    for idx in keep:
        members = pixels[assignments == idx]
        mean = members.mean(axis=0)
        d = members - mean
        cov = (d.T @ d) / len(members) + floor * np.eye(3)
        comps.append(GaussianComponent.from_moments(counts[idx] / n, mean, cov))
    total = sum(c.weight for c in comps)
    if abs(total - 1.0) > 1e-12:
        comps = [
            GaussianComponent.from_moments(c.weight / total, c.mean, c.covariance)
            for c in comps
        ]
    remap = np.full(k, -1, dtype=np.int64)
    remap[keep] = np.arange(len(keep))
    return ColorMixtureModel(tuple(comps)), remap[assignments]


def init_by_kmeans(
    pixels: np.ndarray, k: int, seed: int, floor: float = COVARIANCE_FLOOR
) -> tuple[ColorMixtureModel, np.ndarray]:
    """k-means++ seeding, 10 Lloyd iterations, then per-cluster moments."""
    pixels = np.asarray(pixels, dtype=np.float64).reshape(-1, 3)
    n = len(pixels)
    if n == 0:
        raise EmptyInput("no pixels to cluster")
    k = min(k, n)
    rng = np.random.default_rng(seed)

    centers = np.empty((k, 3))
    centers[0] = pixels[rng.integers(n)]
    d2 = np.sum((pixels - centers[0]) ** 2, axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            centers[i:] = centers[0]
            break
        centers[i] = pixels[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, np.sum((pixels - centers[i]) ** 2, axis=1))

    for _ in range(10):
        dists = ((pixels[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        assignments = dists.argmin(axis=1)
        for j in range(k):
            members = assignments == j
            if members.any():
                centers[j] = pixels[members].mean(axis=0)
    dists = ((pixels[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    assignments = dists.argmin(axis=1)
    return _model_from_assignments(pixels, assignments, k, floor)


def assign_components(model: ColorMixtureModel, pixels: np.ndarray) -> np.ndarray:
    """Per-pixel argmax of pi_k N(z; mu_k, Sigma_k); ties go to the lower index."""
    pixels = np.asarray(pixels, dtype=np.float64).reshape(-1, 3)
    scores = _component_log_densities(model, pixels) + np.log(model.weights)[None, :]
    return scores.argmax(axis=1)


def refit(
    pixels: np.ndarray,
    assignments: np.ndarray,
    k: int,
    floor: float = COVARIANCE_FLOOR,
) -> ColorMixtureModel:
    """Maximum-likelihood moments per component with a floored covariance."""
    pixels = np.asarray(pixels, dtype=np.float64).reshape(-1, 3)
    if len(pixels) == 0:
        raise EmptyInput("no pixels to refit on")
    assignments = np.asarray(assignments)
    model, _ = _model_from_assignments(pixels, assignments, k, floor)
    return model


def neg_log_density(model: ColorMixtureModel, pixels: np.ndarray) -> np.ndarray | float:
    """-log of the full mixture density, capped at DENSITY_CAP.

    Accepts one RGB triple or an (N, 3) block; returns a scalar or (N,) array.
    """
    arr = np.asarray(pixels, dtype=np.float64)
    single = arr.ndim == 1
    arr = arr.reshape(-1, 3)
    logs = _component_log_densities(model, arr) + np.log(model.weights)[None, :]
    peak = logs.max(axis=1)
    ll = peak + np.log(np.exp(logs - peak[:, None]).sum(axis=1))
    out = np.minimum(-ll, DENSITY_CAP)
    out = np.where(np.isfinite(out), out, DENSITY_CAP)
    return float(out[0]) if single else out


def assigned_log_likelihood(
    model: ColorMixtureModel, pixels: np.ndarray, assignments: np.ndarray
) -> float:
    """Sum of log(pi_k N(z)) under each pixel's assigned component."""
    pixels = np.asarray(pixels, dtype=np.float64).reshape(-1, 3)
    logs = _component_log_densities(model, pixels)
    picked = logs[np.arange(len(pixels)), assignments]
    return float(np.sum(picked + np.log(model.weights[assignments])))
