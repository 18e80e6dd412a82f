"""Analytic signal priors: Gaussian and Gaussian mixture.

These give exact moments, exact posteriors under noiseless linear
measurements ``y = H x``, and exact MMSE denoisers for ``x + sigma * z``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Union

import numpy as np
from scipy.special import logsumexp

from .errors import DimensionError, InfeasibleMeasurementError, InvalidInputError
from .numerics import as_matrix, as_vector, pinv

JITTER_REL = 1e-9
FEASIBILITY_TOL = 1e-6
FACTOR_RTOL = 1e-12
_LOG_2PI = np.log(2.0 * np.pi)


def _check_psd(cov: np.ndarray, tol: float, name: str) -> np.ndarray:
    if cov.shape[0] != cov.shape[1]:
        raise DimensionError(f"{name} must be square, got {cov.shape}")
    scale = max(1.0, float(np.max(np.abs(cov), initial=0.0)))
    if np.max(np.abs(cov - cov.T), initial=0.0) > tol * scale:
        raise InvalidInputError(f"{name} is not symmetric")
    cov = 0.5 * (cov + cov.T)
    if cov.size and np.linalg.eigvalsh(cov)[0] < -tol * scale:
        raise InvalidInputError(f"{name} is not positive semi-definite")
    return cov


def _gaussian_factor(cov: np.ndarray) -> np.ndarray:
    """Square-root factor L with L @ L.T == cov, robust to rank deficiency."""
    values, vectors = np.linalg.eigh(cov)
    # eigenvalues at roundoff level are exact zeros (e.g. measured directions);
    # their square roots would otherwise leak ~1e-8 into null(cov)
    floor = FACTOR_RTOL * max(float(values[-1]), 0.0) if values.size else 0.0
    return vectors * np.sqrt(np.where(values > floor, values, 0.0))


@dataclass(frozen=True, eq=False)
class GaussianPrior:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = as_vector(self.mean, "mean")
        cov = _check_psd(as_matrix(self.cov, "cov"), 1e-10, "cov")
        if cov.shape[0] != mean.shape[0]:
            raise DimensionError(f"mean has dim {mean.shape[0]} but cov is {cov.shape}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    @cached_property
    def factor(self) -> np.ndarray:
        return _gaussian_factor(self.cov)


@dataclass(frozen=True, eq=False)
class ConditionalGaussian:
    """Exact Gaussian posterior; ``cov`` is supported on null(H)."""

    mean: np.ndarray
    cov: np.ndarray

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    @cached_property
    def factor(self) -> np.ndarray:
        return _gaussian_factor(self.cov)


class _Mixture:
    weights: np.ndarray
    components: tuple

    @property
    def dim(self) -> int:
        return self.components[0].dim

    @cached_property
    def mean(self) -> np.ndarray:
        return np.einsum("k,kd->d", self.weights, np.array([c.mean for c in self.components]))

    @cached_property
    def cov(self) -> np.ndarray:
        mu = self.mean
        total = np.zeros((self.dim, self.dim))
        for w, c in zip(self.weights, self.components):
            if w == 0.0:
                continue
            delta = c.mean - mu
            total += w * (c.cov + np.outer(delta, delta))
        return 0.5 * (total + total.T)


@dataclass(frozen=True, eq=False)
class GmmPrior(_Mixture):
    weights: np.ndarray
    components: tuple

    def __post_init__(self):
        weights = as_vector(self.weights, "weights")
        comps = tuple(
            c if isinstance(c, GaussianPrior) else GaussianPrior(c["mean"], c["cov"]) for c in self.components
        )
        if len(comps) == 0 or len(comps) != weights.shape[0]:
            raise DimensionError("weights and components must be non-empty and of equal length")
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-12:
            raise InvalidInputError("mixture weights must be non-negative and sum to 1")
        if len({c.dim for c in comps}) != 1:
            raise DimensionError("all mixture components must share one dimension")
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "components", comps)


@dataclass(frozen=True, eq=False)
class GmmPosterior(_Mixture):
    """Mixture of exact conditionals with reweighted responsibilities."""

    weights: np.ndarray
    components: tuple


Prior = Union[GaussianPrior, GmmPrior]
Posterior = Union[ConditionalGaussian, GmmPosterior]


def _as_measurements(h, y, dim: int) -> tuple[np.ndarray, np.ndarray]:
    h = np.asarray(h, dtype=float)
    if h.size == 0:
        h = h.reshape(0, dim)
    h = as_matrix(h, "h")
    y = as_vector(np.asarray(y, dtype=float).reshape(-1), "y")
    if h.shape[1] != dim:
        raise DimensionError(f"h has {h.shape[1]} columns, prior dim is {dim}")
    if h.shape[0] != y.shape[0]:
        raise DimensionError(f"h has {h.shape[0]} rows but y has {y.shape[0]} entries")
    return h, y


def _jittered_gram(gram: np.ndarray) -> np.ndarray:
    d = gram.shape[0]
    eps = JITTER_REL * np.trace(gram) / d
    # trace 0 means H Sigma = 0, so any positive jitter yields the same gain
    eps = max(eps, np.finfo(float).tiny)
    return gram + eps * np.eye(d)


def _condition(mean, cov, h, y, h_pinv) -> tuple[ConditionalGaussian, float]:
    """Condition one Gaussian; returns the posterior and log N(y; H mu, G + eps I)."""
    cross = h @ cov  # H Sigma
    gram = _jittered_gram(cross @ h.T)
    chol = np.linalg.cholesky(gram)
    resid0 = y - h @ mean
    gain = np.linalg.solve(gram, cross).T  # Sigma H^T (G + eps I)^-1
    post_mean = mean + gain @ resid0
    post_cov = cov - gain @ cross

    resid = y - h @ post_mean
    if np.max(np.abs(resid), initial=0.0) > FEASIBILITY_TOL * (1.0 + np.max(np.abs(y), initial=0.0)):
        raise InfeasibleMeasurementError(
            f"measurements are inconsistent with the prior support (residual {np.max(np.abs(resid)):.3g})"
        )
    # Project out the O(eps) leakage so samples satisfy H x = y to roundoff.
    proj = np.eye(h.shape[1]) - h_pinv @ h
    post_mean = post_mean + h_pinv @ resid
    post_cov = proj @ post_cov @ proj
    post_cov = 0.5 * (post_cov + post_cov.T)

    z = np.linalg.solve(chol, resid0)
    loglik = -0.5 * (z @ z) - np.sum(np.log(np.diag(chol))) - 0.5 * len(y) * _LOG_2PI
    return ConditionalGaussian(post_mean, post_cov), float(loglik)


def condition_gaussian(prior: GaussianPrior, h, y) -> ConditionalGaussian:
    """Exact posterior of a Gaussian prior given noiseless ``y = h @ x``."""
    h, y = _as_measurements(h, y, prior.dim)
    if h.shape[0] == 0:
        return ConditionalGaussian(prior.mean.copy(), prior.cov.copy())
    post, _ = _condition(prior.mean, prior.cov, h, y, pinv(h))
    return post


def condition_gmm(prior: GmmPrior, h, y) -> GmmPosterior:
    """Exact posterior of a Gaussian mixture; responsibilities in log space."""
    h, y = _as_measurements(h, y, prior.dim)
    if h.shape[0] == 0:
        comps = tuple(ConditionalGaussian(c.mean.copy(), c.cov.copy()) for c in prior.components)
        return GmmPosterior(prior.weights.copy(), comps)
    h_pinv = pinv(h)
    comps = []
    logw = np.full(len(prior.components), -np.inf)
    for k, (w, c) in enumerate(zip(prior.weights, prior.components)):
        try:
            post, loglik = _condition(c.mean, c.cov, h, y, h_pinv)
        except InfeasibleMeasurementError:
            post, loglik = ConditionalGaussian(c.mean.copy(), np.zeros_like(c.cov)), -np.inf
        comps.append(post)
        if w > 0:
            logw[k] = np.log(w) + loglik
    finite = np.isfinite(logw)
    if not finite.any():
        raise InfeasibleMeasurementError("no mixture component can produce these measurements")
    weights = np.zeros_like(logw)
    weights[finite] = np.exp(logw[finite] - logsumexp(logw[finite]))
    if not np.isfinite(weights).all() or weights.sum() == 0.0:
        weights = finite / finite.sum()
    return GmmPosterior(weights / weights.sum(), tuple(comps))


def condition(prior: Prior, h, y) -> Posterior:
    if isinstance(prior, GaussianPrior):
        return condition_gaussian(prior, h, y)
    return condition_gmm(prior, h, y)


def mmse_denoise(prior: Prior, x_noisy, sigma: float) -> np.ndarray:
    """E[x0 | x0 + sigma z = x_noisy]; accepts one signal (D,) or a batch (n, D)."""
    if sigma < 0:
        raise InvalidInputError("sigma must be non-negative")
    x = np.asarray(x_noisy, dtype=float)
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("x_noisy contains non-finite entries")
    if x.shape[-1] != prior.dim:
        raise DimensionError(f"x_noisy has dim {x.shape[-1]}, prior dim is {prior.dim}")
    if sigma == 0.0:
        return x.copy()
    single = x.ndim == 1
    xb = np.atleast_2d(x)
    var = sigma * sigma
    eye = np.eye(prior.dim)

    if isinstance(prior, GaussianPrior):
        shrink = np.linalg.solve(prior.cov + var * eye, prior.cov)
        out = prior.mean + (xb - prior.mean) @ shrink
        return out[0] if single else out

    logr = np.empty((xb.shape[0], len(prior.components)))
    means = np.empty((len(prior.components),) + xb.shape)
    for k, (w, c) in enumerate(zip(prior.weights, prior.components)):
        marg = c.cov + var * eye
        chol = np.linalg.cholesky(marg)
        diff = xb - c.mean
        z = np.linalg.solve(chol, diff.T)
        logr[:, k] = (
            (np.log(w) if w > 0 else -np.inf)
            - 0.5 * np.sum(z * z, axis=0)
            - np.sum(np.log(np.diag(chol)))
        )
        means[k] = c.mean + diff @ np.linalg.solve(marg, c.cov)
    resp = np.exp(logr - logsumexp(logr, axis=1, keepdims=True))
    out = np.einsum("nk,knd->nd", resp, means)
    return out[0] if single else out


def draw(dist, normals: np.ndarray, uniforms: np.ndarray | None = None) -> np.ndarray:
    """Map standard normals (n, D) and uniforms (n,) to samples of ``dist``.

    Kept separate from RNG handling so callers control stream layout.
    """
    if isinstance(dist, (GaussianPrior, ConditionalGaussian)):
        return dist.mean + normals @ dist.factor.T
    cdf = np.cumsum(dist.weights)
    cdf[-1] = 1.0
    labels = np.searchsorted(cdf, uniforms, side="right")
    # never land on a zero-weight component at a cdf plateau
    labels = np.minimum(labels, len(dist.weights) - 1)
    out = np.empty_like(normals)
    for k, comp in enumerate(dist.components):
        idx = labels == k
        if idx.any():
            out[idx] = comp.mean + normals[idx] @ comp.factor.T
    return out


def sample_prior(prior: Prior, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` i.i.d. prior draws as an (n, D) array."""
    if n < 1:
        raise InvalidInputError("n must be >= 1")
    uniforms = rng.random(n) if isinstance(prior, GmmPrior) else None
    return draw(prior, rng.standard_normal((n, prior.dim)), uniforms)


def prior_from_dict(spec: dict) -> Prior:
    kind = spec.get("type")
    if kind == "gaussian":
        return GaussianPrior(spec["mean"], spec["cov"])
    if kind == "gmm":
        comps = spec["components"]
        return GmmPrior(spec["weights"], tuple(GaussianPrior(c["mean"], c["cov"]) for c in comps))
    raise InvalidInputError(f"unknown prior type {kind!r}")


def prior_to_dict(prior: Prior) -> dict:
    if isinstance(prior, GaussianPrior):
        return {"type": "gaussian", "mean": prior.mean.tolist(), "cov": prior.cov.tolist()}
    return {
        "type": "gmm",
        "weights": prior.weights.tolist(),
        "components": [{"mean": c.mean.tolist(), "cov": c.cov.tolist()} for c in prior.components],
    }


def load_prior(path) -> Prior:
    with open(Path(path)) as fh:
        return prior_from_dict(json.load(fh))
