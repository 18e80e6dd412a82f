"""The greedy adaptive acquisition loop.

Each step draws posterior samples given the measurements so far, centers
them, picks new sensing rows (principal directions, or the best feasible
candidate blocks), measures the ground truth with them and appends.

With a measurement-consistent sampler the centered samples lie in null(H),
so unconstrained picks are orthogonal to every earlier row.  The sensing
matrix then stays row-orthonormal and its pseudo-inverse is just H^T; the
SVD path is only taken when that fails (overlapping constrained rows).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .candidates import CandidateSet
from .errors import DimensionError, InvalidInputError
from .numerics import as_matrix, pinv
from .priors import Prior, condition
from .restoration import LinearReconstructor
from .samplers import SamplerSpec, center, sample_posterior
from .selection import (
    CovarianceSource,
    Reconstructor,
    greedy_oracle,
    select_constrained,
    select_unconstrained,
)

ORTHO_TOL = 1e-8
SELECTION_MODES = ("unconstrained", "constrained-exact", "constrained-heuristic", "oracle")


@dataclass(eq=False)
class SensingMatrix:
    rows: np.ndarray
    orthonormal: bool = True
    pinv: np.ndarray | None = None
    pinv_path: str = "empty"

    @classmethod
    def empty(cls, dim: int) -> "SensingMatrix":
        return cls(np.zeros((0, dim)), True, np.zeros((dim, 0)), "empty")

    @property
    def count(self) -> int:
        return self.rows.shape[0]

    @property
    def dim(self) -> int:
        return self.rows.shape[1]

    def extended(self, new_rows: np.ndarray) -> "SensingMatrix":
        new_rows = as_matrix(new_rows, "new_rows")
        if new_rows.shape[1] != self.dim:
            raise DimensionError(f"new rows have dim {new_rows.shape[1]}, sensing matrix has {self.dim}")
        rows = np.vstack([self.rows, new_rows])
        k = new_rows.shape[0]
        self_gram = new_rows @ new_rows.T
        cross = self.rows @ new_rows.T
        orthonormal = bool(
            self.orthonormal
            and np.max(np.abs(self_gram - np.eye(k)), initial=0.0) <= ORTHO_TOL
            and np.max(np.abs(cross), initial=0.0) <= ORTHO_TOL
        )
        if orthonormal:
            return SensingMatrix(rows, True, rows.T.copy(), "transpose")
        return SensingMatrix(rows, False, pinv(rows), "svd")


@dataclass(eq=False)
class StepRecord:
    step: int
    rows: np.ndarray
    indices: tuple[int, ...] | None
    scores: np.ndarray | None
    degenerate: bool
    max_inner: float
    pinv_path: str
    wall_ms: float
    consistency: float | None = None

    def to_dict(self, score_cap: int | None = None) -> dict:
        scores = None
        if self.scores is not None:
            vals = self.scores if score_cap is None else self.scores[:score_cap]
            scores = [None if not np.isfinite(v) else float(v) for v in vals]
        return {
            "step": int(self.step),
            "indices": [int(i) for i in self.indices] if self.indices is not None else None,
            "rows": self.rows.tolist(),
            "scores": scores,
            "degenerate": bool(self.degenerate),
            "max_inner": None if self.max_inner is None else float(self.max_inner),
            "pinv_path": self.pinv_path,
        }


@dataclass(eq=False)
class AcquisitionState:
    sensing: SensingMatrix
    measurements: np.ndarray
    n_steps: int
    r: int
    s: int
    step: int = 0
    status: str = "ok"
    history: list[StepRecord] = field(default_factory=list)
    used: list[int] = field(default_factory=list)

    @classmethod
    def start(cls, dim: int, n_steps: int, r: int, s: int) -> "AcquisitionState":
        return cls(SensingMatrix.empty(dim), np.zeros(0), n_steps, r, s)

    @property
    def dim(self) -> int:
        return self.sensing.dim

    def to_dict(self, score_cap: int | None = None) -> dict:
        return {
            "config": {"N": self.n_steps, "r": self.r, "s": self.s},
            "status": self.status,
            "steps_completed": int(self.step),
            "measurements": self.measurements.tolist(),
            "orthonormal": bool(self.sensing.orthonormal),
            "selected_indices": [int(i) for i in self.used],
            "history": [rec.to_dict(score_cap) for rec in self.history],
        }


def verify_orthogonality(state_or_rows, new_rows) -> float:
    """Largest |<new row, old row>| (0 when there are no old rows)."""
    old = state_or_rows.sensing.rows if hasattr(state_or_rows, "sensing") else np.asarray(state_or_rows)
    new = np.atleast_2d(np.asarray(new_rows, dtype=float))
    if old.size == 0 or new.size == 0:
        return 0.0
    return float(np.max(np.abs(new @ old.T)))


def append_measurement(state: AcquisitionState, new_rows, ground_truth) -> AcquisitionState:
    """Measure ``ground_truth`` with ``new_rows`` and append (mutates ``state``)."""
    new_rows = np.atleast_2d(np.asarray(new_rows, dtype=float))
    x = np.asarray(ground_truth, dtype=float)
    if x.shape != (state.dim,):
        raise DimensionError(f"ground truth has shape {x.shape}, expected ({state.dim},)")
    state.sensing = state.sensing.extended(new_rows)
    state.measurements = np.concatenate([state.measurements, new_rows @ x])
    return state


def run_adasense(
    prior: Prior,
    sampler_spec: SamplerSpec,
    selection_mode: str,
    candidates: CandidateSet | None,
    ground_truth,
    n_steps: int,
    r: int,
    s: int,
    rng: np.random.Generator,
    covariance: str = "empirical",
    reconstructor: Reconstructor | None = None,
    fixed_size: bool = False,
    check_consistency: bool = False,
) -> AcquisitionState:
    """Run ``n_steps`` greedy acquisition steps against ``ground_truth``.

    ``r`` is rows per step in unconstrained mode and candidate blocks per
    step otherwise.  ``covariance='exact'`` swaps the s posterior samples for
    the analytic posterior covariance.  A posterior that has fully collapsed
    stops the run early with status ``collapsed`` unless ``fixed_size`` asks
    for fallback rows.
    """
    if selection_mode not in SELECTION_MODES:
        raise InvalidInputError(f"unknown selection mode {selection_mode!r}; expected one of {SELECTION_MODES}")
    if covariance not in ("empirical", "exact"):
        raise InvalidInputError(f"unknown covariance mode {covariance!r}")
    x = np.asarray(ground_truth, dtype=float)
    if x.shape != (prior.dim,):
        raise DimensionError(f"ground truth has shape {x.shape}, prior dim is {prior.dim}")
    if selection_mode == "unconstrained":
        if n_steps * r > prior.dim:
            raise DimensionError(f"N*r={n_steps * r} exceeds signal dimension {prior.dim}")
    elif candidates is None:
        raise InvalidInputError(f"{selection_mode} selection needs a candidate set")
    elif candidates.dim != prior.dim:
        raise DimensionError(f"candidates have dim {candidates.dim}, prior dim is {prior.dim}")
    if selection_mode == "oracle" and reconstructor is None:
        reconstructor = LinearReconstructor(prior.mean)

    state = AcquisitionState.start(prior.dim, n_steps, r, s)
    for n in range(n_steps):
        t0 = time.perf_counter()
        h, y = state.sensing.rows, state.measurements
        consistency = None
        if selection_mode == "oracle":
            sel = greedy_oracle(candidates, x, h, reconstructor, r, exclude=state.used)
        else:
            if covariance == "exact":
                source = CovarianceSource.exact(condition(prior, h, y).cov)
            else:
                batch = sample_posterior(prior, h, y, s, sampler_spec, rng)
                if check_consistency:
                    consistency = batch.consistency_error()
                source = CovarianceSource.empirical(center(batch))
            # s == 1 is a degenerate estimate, not evidence of collapse
            truly_collapsed = source.collapsed and (covariance == "exact" or s > 1)
            if truly_collapsed and not fixed_size:
                state.status = "collapsed"
                break
            if selection_mode == "unconstrained":
                sel = select_unconstrained(source, r, avoid=h)
            else:
                criterion = "exact" if selection_mode == "constrained-exact" else "heuristic"
                sel = select_constrained(candidates, source, criterion, r, exclude=state.used)
        max_inner = verify_orthogonality(state, sel.rows)
        append_measurement(state, sel.rows, x)
        if sel.indices is not None:
            state.used.extend(sel.indices)
        state.step = n + 1
        state.history.append(
            StepRecord(
                step=n,
                rows=sel.rows,
                indices=sel.indices,
                scores=sel.scores,
                degenerate=sel.degenerate,
                max_inner=max_inner,
                pinv_path=state.sensing.pinv_path,
                wall_ms=1000.0 * (time.perf_counter() - t0),
                consistency=consistency,
            )
        )
        if sel.degenerate and state.status == "ok":
            state.status = "degenerate"
    return state
