"""Named priors used by the tests, the benchmark configs and the docs."""

from __future__ import annotations

import numpy as np

from .priors import GaussianPrior, GmmPrior


def gaussian_diag3() -> GaussianPrior:
    """Zero-mean Gaussian with covariance diag(4, 1, 0.25)."""
    return GaussianPrior(np.zeros(3), np.diag([4.0, 1.0, 0.25]))


def gaussian_rotated(dim: int = 16, ratio: float = 0.7, scale: float = 4.0, seed: int = 11) -> GaussianPrior:
    """Gaussian with geometric spectrum ``scale * ratio**k`` in a random basis."""
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    spectrum = scale * ratio ** np.arange(dim)
    return GaussianPrior(rng.standard_normal(dim), q @ np.diag(spectrum) @ q.T)


def gmm_2d() -> GmmPrior:
    """Symmetric two-mode mixture: means +-(3, 0), covariance diag(0.01, 1)."""
    cov = np.diag([0.01, 1.0])
    return GmmPrior(
        [0.5, 0.5],
        (GaussianPrior([3.0, 0.0], cov), GaussianPrior([-3.0, 0.0], cov)),
    )


def gmm_3d(eps: float = 1e-4) -> GmmPrior:
    """Two modes whose free direction depends on the sign of x[0].

    Mode +: mean (3, 0, 0), cov diag(eps, 1, eps).
    Mode -: mean (-3, 0, 0), cov diag(eps, eps, 1).
    Measuring x[0] first reveals which coordinate still carries variance,
    so an adaptive second measurement beats any fixed pair.
    """
    return GmmPrior(
        [0.5, 0.5],
        (
            GaussianPrior([3.0, 0.0, 0.0], np.diag([eps, 1.0, eps])),
            GaussianPrior([-3.0, 0.0, 0.0], np.diag([eps, eps, 1.0])),
        ),
    )


def gmm_8(components: int = 3, seed: int = 7) -> GmmPrior:
    """8-dim mixture of randomly rotated Gaussians with spectrum 4 * 0.5**k."""
    dim = 8
    rng = np.random.default_rng(seed)
    spectrum = 4.0 * 0.5 ** np.arange(dim)
    comps = []
    for _ in range(components):
        q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
        mean = rng.standard_normal(dim)
        comps.append(GaussianPrior(mean, q @ np.diag(spectrum) @ q.T))
    return GmmPrior(np.full(components, 1.0 / components), tuple(comps))


FIXTURES = {
    "gaussian-diag3": gaussian_diag3,
    "gaussian-16": gaussian_rotated,
    "gmm-2d": gmm_2d,
    "gmm-3d": gmm_3d,
    "gmm-8": gmm_8,
}
