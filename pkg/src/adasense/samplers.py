"""Posterior samplers for noiseless linear measurements.

``sample_exact`` draws from the analytic posterior and is the ground truth
for tests.  ``sample_ddrm`` runs the noiseless DDRM transition

    x_{t-1} ~ N((I - H^+ H) x0_hat(x_t, sigma_t) + H^+ y, sigma_{t-1}^2 I)

with the analytic MMSE denoiser standing in for a trained network.  Both
derive one child RNG stream per sample so batches are reproducible no matter
how the work is split.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidInputError
from .numerics import pinv, sym_eig
from .priors import Prior, _as_measurements, condition, draw, mmse_denoise

SAMPLER_KINDS = ("exact", "ddrm")


@dataclass(frozen=True)
class SamplerSpec:
    kind: str = "exact"
    steps: int = 25
    sigma_max_scale: float = 2.0
    sigma_min_ratio: float = 0.01
    sigma_schedule: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind not in SAMPLER_KINDS:
            raise InvalidInputError(f"unknown sampler kind {self.kind!r}; expected one of {SAMPLER_KINDS}")
        if self.kind == "ddrm":
            if self.sigma_schedule is not None:
                sched = np.asarray(self.sigma_schedule, dtype=float)
                if sched.ndim != 1 or sched.size < 2 or sched[-1] != 0.0 or np.any(np.diff(sched) >= 0):
                    raise InvalidInputError("sigma_schedule must be strictly decreasing and end at 0")
                object.__setattr__(self, "steps", sched.size - 1)
            elif self.steps < 1:
                raise InvalidInputError("ddrm needs steps >= 1")
            if not (self.sigma_max_scale > 0 and 0 < self.sigma_min_ratio < 1):
                raise InvalidInputError("need sigma_max_scale > 0 and 0 < sigma_min_ratio < 1")

    def schedule(self, prior: Prior) -> np.ndarray:
        """Noise levels (sigma_T, ..., sigma_1, 0)."""
        if self.sigma_schedule is not None:
            return np.asarray(self.sigma_schedule, dtype=float)
        lam_max = max(float(sym_eig(prior.cov).values[0]), 0.0)
        sigma_max = self.sigma_max_scale * (np.sqrt(lam_max) if lam_max > 0 else 1.0)
        if self.steps == 1:
            levels = np.array([sigma_max])
        else:
            levels = np.geomspace(sigma_max, sigma_max * self.sigma_min_ratio, self.steps)
        return np.append(levels, 0.0)

    @classmethod
    def from_dict(cls, spec: dict) -> "SamplerSpec":
        sched = spec.get("sigma_schedule")
        return cls(
            kind=spec.get("sampler", spec.get("kind", "exact")),
            steps=int(spec.get("steps", 25)),
            sigma_max_scale=float(spec.get("sigma_max_scale", 2.0)),
            sigma_min_ratio=float(spec.get("sigma_min_ratio", 0.01)),
            sigma_schedule=tuple(sched) if sched is not None else None,
        )

    def to_dict(self) -> dict:
        out = {
            "sampler": self.kind,
            "steps": self.steps,
            "sigma_max_scale": self.sigma_max_scale,
            "sigma_min_ratio": self.sigma_min_ratio,
        }
        if self.sigma_schedule is not None:
            out["sigma_schedule"] = list(self.sigma_schedule)
        return out


@dataclass(eq=False)
class PosteriorBatch:
    samples: np.ndarray  # (s, D)
    h: np.ndarray
    y: np.ndarray
    centered: bool = False
    mean: np.ndarray | None = None
    degenerate: bool = False
    meta: dict = field(default_factory=dict)

    @property
    def size(self) -> int:
        return self.samples.shape[0]

    def consistency_error(self) -> float:
        """max_i ||H x_i - y||_inf / (1 + ||y||_inf) on uncentered samples."""
        if self.h.shape[0] == 0:
            return 0.0
        xs = self.samples + self.mean if self.centered else self.samples
        resid = xs @ self.h.T - self.y
        return float(np.max(np.abs(resid)) / (1.0 + np.max(np.abs(self.y), initial=0.0)))


def sample_exact(prior: Prior, h, y, s: int, rng: np.random.Generator, posterior=None) -> PosteriorBatch:
    """``s`` i.i.d. draws from the exact posterior p(x | h x = y)."""
    if s < 1:
        raise InvalidInputError("s must be >= 1")
    h, y = _as_measurements(h, y, prior.dim)
    post = posterior if posterior is not None else condition(prior, h, y)
    normals = np.empty((s, prior.dim))
    uniforms = np.empty(s)
    for i, child in enumerate(rng.spawn(s)):
        normals[i] = child.standard_normal(prior.dim)
        uniforms[i] = child.random()
    return PosteriorBatch(draw(post, normals, uniforms), h, y, meta={"sampler": "exact"})


def sample_ddrm(prior: Prior, h, y, s: int, spec: SamplerSpec, rng: np.random.Generator) -> PosteriorBatch:
    """Toy diffusion posterior sampler using the noiseless DDRM transition."""
    if s < 1:
        raise InvalidInputError("s must be >= 1")
    h, y = _as_measurements(h, y, prior.dim)
    dim = prior.dim
    h_pinv = pinv(h) if h.shape[0] else np.zeros((dim, 0))
    proj = np.eye(dim) - h_pinv @ h
    anchor = h_pinv @ y
    sigmas = spec.schedule(prior)
    steps = sigmas.size - 1

    noise = np.empty((steps + 1, s, dim))
    for i, child in enumerate(rng.spawn(s)):
        noise[:, i, :] = child.standard_normal((steps + 1, dim))

    x = anchor + proj @ prior.mean + sigmas[0] * noise[0]
    for t in range(steps):
        x0_hat = mmse_denoise(prior, x, sigmas[t])
        x = x0_hat @ proj.T + anchor
        if sigmas[t + 1] > 0:
            x = x + sigmas[t + 1] * noise[t + 1]
    return PosteriorBatch(x, h, y, meta={"sampler": "ddrm", "steps": steps})


def sample_posterior(prior: Prior, h, y, s: int, spec: SamplerSpec, rng: np.random.Generator) -> PosteriorBatch:
    if spec.kind == "ddrm":
        return sample_ddrm(prior, h, y, s, spec, rng)
    return sample_exact(prior, h, y, s, rng)


def center(batch: PosteriorBatch) -> PosteriorBatch:
    """Subtract the sample mean; the mean is kept on the returned batch."""
    if batch.centered:
        return batch
    if batch.size < 1:
        raise InvalidInputError("cannot center an empty batch")
    mean = batch.samples.mean(axis=0)
    centered = batch.samples - mean
    scale = 1.0 + np.max(np.abs(mean), initial=0.0)
    degenerate = batch.size == 1 or np.max(np.abs(centered)) <= 1e-12 * scale
    return replace(batch, samples=centered, centered=True, mean=mean, degenerate=degenerate)


