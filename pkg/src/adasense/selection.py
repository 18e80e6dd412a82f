"""Measurement-selection criteria.

* ``select_unconstrained``: top principal directions of the posterior
  covariance (exact) or of the centered posterior samples (empirical).
* ``score_constrained_exact``: tr{H S^2 H^T (H S H^T)^-1}, the drop in linear
  MMSE error from measuring block H; larger is better.
* ``score_constrained_heuristic``: sum_i x_i^T H^+ H x_i over centered samples
  (decoder fixed to H^+).
* ``offline_pca`` and ``greedy_oracle`` are the non-adaptive and the
  ground-truth-aware baselines.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from .candidates import CandidateSet
from .errors import DimensionError, ExhaustedCandidatesError, InvalidInputError
from .numerics import as_matrix, orthonormal_complement_fill, pinv, sym_eig, top_right_singular
from .priors import Prior
from .samplers import PosteriorBatch, center

log = logging.getLogger(__name__)

JITTER_REL = 1e-9
RANK_RTOL = 1e-10
ORACLE_TIE_RTOL = 1e-12

Reconstructor = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(eq=False)
class CovarianceSource:
    """Either centered posterior samples or an exact posterior covariance."""

    mode: str
    batch: PosteriorBatch | None = None
    cov: np.ndarray | None = None

    def __post_init__(self):
        if self.mode == "empirical":
            if self.batch is None or self.batch.size < 1:
                raise InvalidInputError("empirical mode needs a batch with s >= 1")
            self.batch = center(self.batch)
        elif self.mode == "exact":
            if self.cov is None:
                raise InvalidInputError("exact mode needs a covariance")
            self.cov = as_matrix(self.cov, "cov")
        else:
            raise InvalidInputError(f"unknown covariance mode {self.mode!r}")

    @classmethod
    def empirical(cls, batch: PosteriorBatch) -> "CovarianceSource":
        return cls("empirical", batch=batch)

    @classmethod
    def exact(cls, cov) -> "CovarianceSource":
        return cls("exact", cov=np.asarray(cov, dtype=float))

    @property
    def dim(self) -> int:
        return self.batch.samples.shape[1] if self.mode == "empirical" else self.cov.shape[0]

    @property
    def collapsed(self) -> bool:
        """True when the source carries no variance at all."""
        if self.mode == "empirical":
            return self.batch.degenerate
        return not np.any(np.abs(self.cov) > 0.0)


@dataclass(eq=False)
class Selection:
    rows: np.ndarray
    indices: tuple[int, ...] | None = None
    scores: np.ndarray | None = None
    degenerate: bool = False
    skipped: tuple[int, ...] = ()


def select_unconstrained(source: CovarianceSource, r: int, avoid: np.ndarray | None = None) -> Selection:
    """Top-``r`` principal directions of the posterior.

    When the source has rank below ``r`` (e.g. s=1 or a collapsed posterior)
    the missing rows are canonical directions orthogonalized against the
    chosen rows and ``avoid``; the selection is then flagged degenerate.
    """
    dim = source.dim
    if r > dim:
        raise DimensionError(f"r={r} exceeds signal dimension {dim}")
    if source.mode == "empirical":
        samples = source.batch.samples
        sv = np.linalg.svd(samples, compute_uv=False)
        rank = int(np.sum(sv > RANK_RTOL * sv[0])) if sv.size and sv[0] > 0 else 0
        if source.batch.degenerate:
            rank = 0
        rows = top_right_singular(samples, min(rank, r))
        values = sv[: rows.shape[0]] ** 2 / samples.shape[0]
    else:
        eig = sym_eig(source.cov)
        lam = eig.values
        rank = int(np.sum(lam > RANK_RTOL * lam[0])) if lam[0] > 0 else 0
        rows = eig.vectors[:, : min(rank, r)].T
        values = lam[: rows.shape[0]]
    degenerate = rows.shape[0] < r
    if degenerate:
        rows = orthonormal_complement_fill(rows, r - rows.shape[0], dim, avoid)
        values = np.concatenate([values, np.zeros(r - values.shape[0])])
    return Selection(rows, scores=values, degenerate=degenerate)


def _blocks(candidate) -> np.ndarray:
    h = np.asarray(candidate, dtype=float)
    return h[None, :] if h.ndim == 1 else h


def _batched_exact_scores(members: np.ndarray, cov: np.ndarray | None, samples: np.ndarray | None):
    """Trace score for a stack of (r, D) blocks.

    With samples the r x r Gram matrices come from H @ samples^T directly,
    so no D x D covariance is formed.
    """
    if samples is not None:
        s = samples.shape[0]
        proj = members @ samples.T  # (M, r, s)
        gram = proj @ proj.transpose(0, 2, 1) / s
        sample_gram = samples @ samples.T
        num = proj @ sample_gram @ proj.transpose(0, 2, 1) / (s * s)
    else:
        a = members @ cov  # (M, r, D)
        gram = a @ members.transpose(0, 2, 1)
        num = a @ a.transpose(0, 2, 1)
    r = members.shape[1]
    tr = np.trace(gram, axis1=1, axis2=2)
    scores = np.zeros(members.shape[0])
    failed = []
    for m in range(members.shape[0]):
        if tr[m] <= 0.0:
            continue  # no variance along this block: nothing to gain
        g = gram[m] + (JITTER_REL * tr[m] / r) * np.eye(r)
        try:
            scores[m] = np.trace(np.linalg.solve(g, num[m]))
        except np.linalg.LinAlgError:
            scores[m] = -np.inf
            failed.append(m)
    return scores, failed


def score_constrained_exact(candidate, cov) -> float:
    """tr{H C^2 H^T (H C H^T + eps I)^-1} for a block H.

    ``cov`` is a D x D covariance or a centered PosteriorBatch (empirical
    covariance with 1/s normalization).  Returns -inf, with a warning, if the
    jittered Gram matrix is still singular.
    """
    h = _blocks(candidate)
    if isinstance(cov, PosteriorBatch):
        scores, failed = _batched_exact_scores(h[None], None, center(cov).samples)
    else:
        scores, failed = _batched_exact_scores(h[None], as_matrix(cov, "cov"), None)
    if failed:
        log.warning("candidate skipped: singular Gram matrix after jitter")
    return float(scores[0])


def _heuristic_scores(members: np.ndarray, gram_pinv: np.ndarray, cov, samples) -> np.ndarray:
    if samples is not None:
        proj = members @ samples.T  # (M, r, s)
        return np.einsum("mrs,mrq,mqs->m", proj, gram_pinv, proj)
    # E[x^T H^+ H x] = tr(G H C H^T) with G = (H H^T)^+
    hch = members @ cov @ members.transpose(0, 2, 1)
    return np.einsum("mrq,mqr->m", gram_pinv, hch)


def score_constrained_heuristic(candidate, batch, gram_pinv: np.ndarray | None = None) -> float:
    """sum_i x_i^T H^+ H x_i over the centered batch (or tr(H^+ H C) for a matrix)."""
    h = _blocks(candidate)
    if gram_pinv is None:
        gram_pinv = pinv(h @ h.T)
    if isinstance(batch, PosteriorBatch):
        return float(_heuristic_scores(h[None], gram_pinv[None], None, center(batch).samples)[0])
    return float(_heuristic_scores(h[None], gram_pinv[None], as_matrix(batch, "cov"), None)[0])


def _top_k(scores: np.ndarray, remaining: list[int], k: int) -> list[int]:
    # deterministic argmax: by (score desc, index asc)
    return sorted(remaining, key=lambda i: (-scores[i], i))[:k]


def _remaining(candidates: CandidateSet, exclude: Iterable[int], need: int) -> list[int]:
    excluded = set(exclude)
    remaining = [i for i in range(len(candidates)) if i not in excluded]
    if len(remaining) < need:
        raise ExhaustedCandidatesError(f"{len(remaining)} unused candidates left, step needs {need}")
    return remaining


def select_constrained(
    candidates: CandidateSet,
    source,
    criterion: str = "heuristic",
    r_blocks: int = 1,
    exclude: Iterable[int] = (),
) -> Selection:
    """Score every unused candidate and stack the best ``r_blocks`` members.

    ``source`` is a CovarianceSource, a PosteriorBatch or a covariance matrix.
    Multi-block steps take the top-k individually scored blocks.
    """
    if not isinstance(source, CovarianceSource):
        source = (
            CovarianceSource.empirical(source)
            if isinstance(source, PosteriorBatch)
            else CovarianceSource.exact(source)
        )
    if source.dim != candidates.dim:
        raise DimensionError(f"candidates have dim {candidates.dim}, covariance has {source.dim}")
    remaining = _remaining(candidates, exclude, r_blocks)
    samples = source.batch.samples if source.mode == "empirical" else None
    cov = source.cov
    members = candidates.members[remaining]

    scores = np.full(len(candidates), np.nan)
    failed: list[int] = []
    if criterion == "exact":
        vals, bad = _batched_exact_scores(members, cov, samples)
        failed = [remaining[b] for b in bad]
    elif criterion == "heuristic":
        vals = _heuristic_scores(members, candidates.gram_pinv[remaining], cov, samples)
    else:
        raise InvalidInputError(f"unknown criterion {criterion!r}")
    scores[remaining] = vals
    if failed:
        log.warning("skipped %d candidates with singular Gram matrices", len(failed))

    chosen = _top_k(scores, remaining, r_blocks)
    return Selection(
        candidates.stack(chosen),
        indices=tuple(chosen),
        scores=scores,
        degenerate=source.collapsed,
        skipped=tuple(failed),
    )


def offline_pca(prior: Prior, d: int) -> np.ndarray:
    """Top-``d`` eigenvectors of the prior covariance as rows."""
    if d > prior.dim:
        raise DimensionError(f"d={d} exceeds signal dimension {prior.dim}")
    return sym_eig(prior.cov).vectors[:, :d].T.copy()


def greedy_oracle(
    candidates: CandidateSet,
    ground_truth,
    current_rows,
    reconstructor: Reconstructor,
    r_blocks: int = 1,
    exclude: Iterable[int] = (),
) -> Selection:
    """Pick the candidate whose addition minimizes the actual reconstruction
    MSE against ``ground_truth``.  Simulation-only upper-bound baseline."""
    x = np.asarray(ground_truth, dtype=float)
    h0 = np.asarray(current_rows, dtype=float).reshape(-1, candidates.dim)
    remaining = _remaining(candidates, exclude, r_blocks)
    errors = np.full(len(candidates), np.nan)
    for i in remaining:
        h = np.vstack([h0, candidates.members[i]])
        estimate = reconstructor(h, h @ x)
        errors[i] = np.mean((estimate - x) ** 2)
    # errors within roundoff of the best count as ties, so lowest index wins
    best = np.nanmin(errors)
    tol = ORACLE_TIE_RTOL * (1.0 + float(np.mean(x * x)))
    ranked = np.where(errors <= best + tol, best, errors)
    chosen = _top_k(-ranked, remaining, r_blocks)
    return Selection(candidates.stack(chosen), indices=tuple(chosen), scores=errors)
