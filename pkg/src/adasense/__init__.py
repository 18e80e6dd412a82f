"""Adaptive compressed sensing by greedy posterior-covariance PCA."""

from .candidates import CandidateSet, fourier_candidates, hadamard_candidates, pixel_candidates, radon_candidates
from .engine import AcquisitionState, SensingMatrix, append_measurement, run_adasense, verify_orthogonality
from .errors import (
    AdaSenseError,
    ConfigError,
    DimensionError,
    ExhaustedCandidatesError,
    InfeasibleMeasurementError,
    InvalidInputError,
)
from .priors import (
    ConditionalGaussian,
    GaussianPrior,
    GmmPosterior,
    GmmPrior,
    condition,
    condition_gaussian,
    condition_gmm,
    mmse_denoise,
    sample_prior,
)
from .restoration import RestorationSpec, mse, psnr, restore_linear, restore_mean, restore_sample
from .samplers import PosteriorBatch, SamplerSpec, center, sample_ddrm, sample_exact
from .selection import (
    CovarianceSource,
    greedy_oracle,
    offline_pca,
    score_constrained_exact,
    score_constrained_heuristic,
    select_constrained,
    select_unconstrained,
)

__version__ = "0.1.0"
