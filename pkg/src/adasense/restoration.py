"""Final reconstruction from acquired measurements, and error metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, InvalidInputError
from .numerics import pinv
from .priors import Prior, condition
from .samplers import SamplerSpec, sample_posterior

RESTORATION_MODES = ("linear", "sample", "mean")


@dataclass(frozen=True)
class RestorationSpec:
    mode: str = "linear"
    mean_count: int = 16
    sampler: SamplerSpec = SamplerSpec()

    def __post_init__(self):
        if self.mode not in RESTORATION_MODES:
            raise InvalidInputError(f"unknown restoration mode {self.mode!r}; expected one of {RESTORATION_MODES}")
        if self.mean_count < 1:
            raise InvalidInputError("mean_count must be >= 1")

    @classmethod
    def from_dict(cls, spec: dict, sampler: SamplerSpec | None = None) -> "RestorationSpec":
        return cls(
            mode=spec.get("mode", "linear"),
            mean_count=int(spec.get("mean_count", 16)),
            sampler=sampler if sampler is not None else SamplerSpec(),
        )

    def to_dict(self) -> dict:
        return {"mode": self.mode, "mean_count": self.mean_count}


def _rows_and_measurements(state_or_h, y=None):
    if y is None:
        sensing = state_or_h.sensing
        return sensing.rows, state_or_h.measurements, sensing
    return np.asarray(state_or_h, dtype=float), np.asarray(y, dtype=float), None


def restore_linear(state_or_h, prior_mean, y=None) -> np.ndarray:
    """Affine decoder H^+ y + (I - H^+ H) mu; H^T replaces H^+ for orthonormal rows.

    Accepts an AcquisitionState, or a sensing matrix together with ``y``.
    """
    h, y, sensing = _rows_and_measurements(state_or_h, y)
    mu = np.asarray(prior_mean, dtype=float)
    if h.shape[0] == 0:
        return mu.copy()
    h_pinv = sensing.pinv if sensing is not None else pinv(h)
    return h_pinv @ y + mu - h_pinv @ (h @ mu)


def restore_sample(state_or_h, prior: Prior, sampler_spec: SamplerSpec, rng, y=None) -> np.ndarray:
    """One posterior draw given the measurements."""
    h, y, _ = _rows_and_measurements(state_or_h, y)
    return sample_posterior(prior, h, y, 1, sampler_spec, rng).samples[0]


def restore_mean(state_or_h, prior: Prior, sampler_spec: SamplerSpec, s_final: int, rng, y=None) -> np.ndarray:
    """Average of ``s_final`` posterior draws, approximating the posterior mean."""
    if s_final < 1:
        raise InvalidInputError("s_final must be >= 1")
    h, y, _ = _rows_and_measurements(state_or_h, y)
    return sample_posterior(prior, h, y, s_final, sampler_spec, rng).samples.mean(axis=0)


def restore(state, prior: Prior, spec: RestorationSpec, rng) -> np.ndarray:
    if spec.mode == "linear":
        return restore_linear(state, prior.mean)
    if spec.mode == "sample":
        return restore_sample(state, prior, spec.sampler, rng)
    return restore_mean(state, prior, spec.sampler, spec.mean_count, rng)


class LinearReconstructor:
    """Reconstructor hook: (H, y) -> H^+ y + (I - H^+ H) mu."""

    def __init__(self, prior_mean):
        self.prior_mean = np.asarray(prior_mean, dtype=float)

    def __call__(self, h, y) -> np.ndarray:
        return restore_linear(h, self.prior_mean, y=y)


class PosteriorMeanReconstructor:
    """Reconstructor hook returning the exact analytic posterior mean."""

    def __init__(self, prior: Prior):
        self.prior = prior

    def __call__(self, h, y) -> np.ndarray:
        return condition(self.prior, h, y).mean


def mse(reference, estimate) -> float:
    ref = np.asarray(reference, dtype=float)
    est = np.asarray(estimate, dtype=float)
    if ref.shape != est.shape:
        raise DimensionError(f"shape mismatch: {ref.shape} vs {est.shape}")
    return float(np.mean((ref - est) ** 2))


def psnr(reference, estimate, peak: float) -> float:
    """10 log10(peak^2 / mse); ``inf`` when the estimate is exact."""
    if peak <= 0:
        raise InvalidInputError("peak must be positive")
    err = mse(reference, estimate)
    if err == 0.0:
        return float("inf")
    return float(10.0 * np.log10(peak * peak / err))


def default_peak(prior: Prior) -> float:
    """Dynamic-range estimate: mean +- 3 std along the widest coordinate."""
    std = np.sqrt(np.clip(np.diag(prior.cov), 0.0, None))
    hi = np.max(prior.mean + 3.0 * std)
    lo = np.min(prior.mean - 3.0 * std)
    return float(hi - lo) if hi > lo else 1.0
