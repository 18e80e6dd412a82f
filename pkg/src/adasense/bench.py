"""Experiment harness: configs, paired trials, sweeps and strategy comparisons.

Every trial index ``t`` draws its ground truth from a stream seeded by
``(seed, t)``, so all strategies and sweep points see the same signals and
can be compared with paired tests.  Results are gathered in trial order, so
``--threads`` never changes the CSV.
"""

from __future__ import annotations

import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import stats

from .candidates import CandidateSet
from .engine import SELECTION_MODES, AcquisitionState, append_measurement, run_adasense
from .errors import AdaSenseError, ConfigError
from .fixtures import FIXTURES
from .matrixio import read_matrix, write_matrix
from .priors import Prior, load_prior, prior_from_dict, sample_prior
from .restoration import (
    LinearReconstructor,
    PosteriorMeanReconstructor,
    RestorationSpec,
    default_peak,
    mse,
    psnr,
    restore,
)
from .samplers import SamplerSpec
from .selection import offline_pca

CSV_HEADER = "strategy,N,r,s,trial,mse,psnr,time_ms,status"

STRATEGIES = (
    "random-gaussian-rows",
    "random-orthonormal",
    "random-candidate",
    "equispaced-candidates",
    "offline-pca",
    "adasense-unconstrained",
    "adasense-constrained-exact",
    "adasense-constrained-heuristic",
    "greedy-oracle",
)
EXACT_REFERENCE = "adasense-exact-cov"

_MODE_LABELS = {
    "unconstrained": "adasense-unconstrained",
    "constrained-exact": "adasense-constrained-exact",
    "constrained-heuristic": "adasense-constrained-heuristic",
    "oracle": "greedy-oracle",
}
_LABEL_MODES = {v: k for k, v in _MODE_LABELS.items()}


def default_s(r: int) -> int:
    """Posterior samples per step, s = ceil(4r/3)."""
    return math.ceil(4 * r / 3)


@dataclass(eq=False)
class ExperimentConfig:
    prior: Prior
    sampler: SamplerSpec = field(default_factory=SamplerSpec)
    selection_mode: str = "unconstrained"
    covariance: str = "empirical"
    candidates: CandidateSet | None = None
    n_steps: int = 1
    r: int = 1
    s: int | None = None
    restoration: RestorationSpec = field(default_factory=RestorationSpec)
    trials: int = 1
    seed: int = 0
    peak: float | None = None
    strategies: list[str] = field(default_factory=list)
    covariance_overrides: dict[str, str] = field(default_factory=dict)
    grid: list[tuple[int, int]] = field(default_factory=list)
    budget: int | None = None
    s_values: list[int] = field(default_factory=list)
    ground_truth: np.ndarray | None = None
    fixed_size: bool = False
    timing: bool = False
    threads: int = 1
    raw: dict = field(default_factory=dict)

    def samples_for(self, r: int) -> int:
        return self.s if self.s is not None else default_s(r)

    @property
    def peak_value(self) -> float:
        return self.peak if self.peak is not None else default_peak(self.prior)

    @classmethod
    def from_dict(cls, spec: dict, base_dir: Path | None = None) -> "ExperimentConfig":
        base_dir = Path(base_dir) if base_dir is not None else Path.cwd()
        spec = dict(spec)

        def need_int(key, default=None, minimum=0):
            value = spec.get(key, default)
            if value is None:
                return None
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(f"config key {key!r}: expected an integer, got {value!r}")
            if value < minimum:
                raise ConfigError(f"config key {key!r}: must be >= {minimum}, got {value}")
            return value

        if "prior" not in spec:
            raise ConfigError("config key 'prior' is required")
        prior = _load_prior_entry(spec["prior"], base_dir)
        try:
            sampler = SamplerSpec.from_dict(spec.get("sampler", {}))
            restoration = RestorationSpec.from_dict(spec.get("restoration", {}), sampler)
        except AdaSenseError as exc:
            raise ConfigError(f"config: {exc}") from exc

        selection = spec.get("selection", {})
        mode = selection.get("mode", "unconstrained")
        if mode not in SELECTION_MODES:
            raise ConfigError(f"config key 'selection.mode': unknown mode {mode!r}; expected one of {SELECTION_MODES}")
        covariance = selection.get("covariance", "empirical")
        if covariance not in ("empirical", "exact"):
            raise ConfigError(f"config key 'selection.covariance': expected 'empirical' or 'exact', got {covariance!r}")
        candidates = None
        if selection.get("candidates") is not None:
            try:
                candidates = CandidateSet.from_dict(selection["candidates"])
            except AdaSenseError as exc:
                raise ConfigError(f"config key 'selection.candidates': {exc}") from exc
            if candidates.dim != prior.dim:
                raise ConfigError(
                    f"config key 'selection.candidates': dim {candidates.dim} does not match prior dim {prior.dim}"
                )
        overrides = dict(selection.get("covariance_overrides", {}))
        for label, cov_mode in overrides.items():
            if cov_mode not in ("empirical", "exact"):
                raise ConfigError(f"config key 'selection.covariance_overrides.{label}': bad mode {cov_mode!r}")

        strategies = list(spec.get("strategies", []))
        for label in strategies:
            if label not in STRATEGIES:
                raise ConfigError(f"config key 'strategies': unknown strategy {label!r}")

        grid = []
        for pair in spec.get("grid", []):
            if not (isinstance(pair, (list, tuple)) and len(pair) == 2 and all(isinstance(v, int) for v in pair)):
                raise ConfigError(f"config key 'grid': entries must be [N, r] integer pairs, got {pair!r}")
            if pair[0] < 1 or pair[1] < 1:
                raise ConfigError(f"config key 'grid': N and r must be >= 1, got {pair!r}")
            grid.append((pair[0], pair[1]))
        s_values = list(spec.get("s_values", []))
        if any((not isinstance(v, int)) or v < 1 for v in s_values):
            raise ConfigError("config key 's_values': all values must be integers >= 1")

        ground_truth = None
        if spec.get("ground_truth") is not None:
            path = base_dir / spec["ground_truth"]
            if not path.exists():
                raise ConfigError(f"ground truth file not found: {path}")
            ground_truth = read_matrix(path)
            if ground_truth.shape[1] != prior.dim or ground_truth.shape[0] == 0:
                raise ConfigError(f"ground truth file {path}: expected rows of length {prior.dim}")

        peak = spec.get("peak")
        if peak is not None and not (isinstance(peak, (int, float)) and peak > 0):
            raise ConfigError(f"config key 'peak': must be a positive number, got {peak!r}")

        return cls(
            prior=prior,
            sampler=sampler,
            selection_mode=mode,
            covariance=covariance,
            candidates=candidates,
            n_steps=need_int("N", 1, 0),
            r=need_int("r", 1, 1),
            s=need_int("s", None, 1),
            restoration=restoration,
            trials=need_int("trials", 1, 1),
            seed=need_int("seed", 0, 0),
            peak=float(peak) if peak is not None else None,
            strategies=strategies,
            covariance_overrides=overrides,
            grid=grid,
            budget=need_int("budget", None, 1),
            s_values=s_values,
            ground_truth=ground_truth,
            fixed_size=bool(spec.get("fixed_size", False)),
            timing=bool(spec.get("timing", False)),
            threads=need_int("threads", 1, 1),
            raw=spec,
        )

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
        try:
            spec = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from exc
        if not isinstance(spec, dict):
            raise ConfigError(f"{path}: top-level JSON value must be an object")
        return cls.from_dict(spec, path.parent)


def _load_prior_entry(entry, base_dir: Path) -> Prior:
    try:
        if isinstance(entry, str):
            path = base_dir / entry
            if not path.exists():
                raise ConfigError(f"prior file not found: {path}")
            return load_prior(path)
        if isinstance(entry, dict) and "fixture" in entry:
            name = entry["fixture"]
            if name not in FIXTURES:
                raise ConfigError(f"config key 'prior.fixture': unknown fixture {name!r}; known: {sorted(FIXTURES)}")
            return FIXTURES[name]()
        if isinstance(entry, dict):
            return prior_from_dict(entry)
    except ConfigError:
        raise
    except (AdaSenseError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"config key 'prior': {exc}") from exc
    raise ConfigError("config key 'prior': expected a file path or an object")


@dataclass
class ResultRow:
    strategy: str
    N: int
    r: int
    s: int
    trial: int
    mse: float
    psnr: float
    time_ms: float
    status: str

    def to_csv(self) -> str:
        return ",".join(
            [
                self.strategy,
                str(self.N),
                str(self.r),
                str(self.s),
                str(self.trial),
                f"{self.mse:.17g}",
                f"{self.psnr:.17g}",
                "nan" if math.isnan(self.time_ms) else f"{self.time_ms:.3f}",
                self.status,
            ]
        )


@dataclass(eq=False)
class TrialOutcome:
    row: ResultRow
    state: AcquisitionState | None = None
    estimate: np.ndarray | None = None


def trial_rng(seed: int, trial: int, stream: int) -> np.random.Generator:
    """Independent stream ``stream`` for trial ``trial``; 0 is the ground truth."""
    return np.random.default_rng([seed, trial, stream])


def ground_truth_for(cfg: ExperimentConfig, trial: int) -> np.ndarray:
    if cfg.ground_truth is not None:
        return cfg.ground_truth[trial % cfg.ground_truth.shape[0]].copy()
    return sample_prior(cfg.prior, 1, trial_rng(cfg.seed, trial, 0))[0]


def _static_rows(cfg: ExperimentConfig, strategy: str, n_steps: int, r: int, rng) -> tuple[np.ndarray, list[int]]:
    dim = cfg.prior.dim
    cands = cfg.candidates
    if strategy in ("random-candidate", "equispaced-candidates"):
        if cands is None:
            raise ConfigError(f"strategy {strategy!r} needs selection.candidates")
        count = n_steps * r
        if count > len(cands):
            raise ConfigError(f"strategy {strategy!r}: {count} blocks requested, only {len(cands)} candidates")
        if strategy == "random-candidate":
            idx = sorted(int(i) for i in rng.choice(len(cands), size=count, replace=False))
        else:
            idx = [int(round(v)) for v in np.linspace(0, len(cands) - 1, count)] if count else []
        return cands.stack(idx), idx
    total = n_steps * r * (cands.block_size if cands is not None else 1)
    if total > dim and strategy in ("random-orthonormal", "offline-pca"):
        raise ConfigError(f"strategy {strategy!r}: {total} rows exceed signal dimension {dim}")
    if strategy == "random-gaussian-rows":
        rows = rng.standard_normal((total, dim))
        return rows / np.linalg.norm(rows, axis=1, keepdims=True), []
    if strategy == "random-orthonormal":
        q, _ = np.linalg.qr(rng.standard_normal((dim, total)))
        return q.T, []
    if strategy == "offline-pca":
        return offline_pca(cfg.prior, total), []
    raise ConfigError(f"unknown strategy {strategy!r}")


def run_trial(
    cfg: ExperimentConfig,
    strategy: str,
    trial: int,
    n_steps: int | None = None,
    r: int | None = None,
    s: int | None = None,
    covariance: str | None = None,
) -> TrialOutcome:
    """One (strategy, trial) cell; runtime failures become a status, not an exception."""
    n_steps = cfg.n_steps if n_steps is None else n_steps
    r = cfg.r if r is None else r
    s = cfg.samples_for(r) if s is None else s
    if covariance is None:
        covariance = cfg.covariance_overrides.get(strategy, cfg.covariance)
    x = ground_truth_for(cfg, trial)
    run_rng = trial_rng(cfg.seed, trial, 1)
    restore_rng = trial_rng(cfg.seed, trial, 2)
    label = strategy
    t0 = time.perf_counter()
    try:
        if strategy in _LABEL_MODES or strategy == EXACT_REFERENCE:
            mode = _LABEL_MODES.get(strategy, "unconstrained")
            if strategy == EXACT_REFERENCE:
                mode, covariance = cfg.selection_mode, "exact"
                if mode == "oracle":
                    mode = "unconstrained"
            reconstructor = (
                LinearReconstructor(cfg.prior.mean)
                if cfg.restoration.mode == "linear"
                else PosteriorMeanReconstructor(cfg.prior)
            )
            state = run_adasense(
                cfg.prior,
                cfg.sampler,
                mode,
                cfg.candidates,
                x,
                n_steps,
                r,
                s,
                run_rng,
                covariance=covariance,
                reconstructor=reconstructor,
                fixed_size=cfg.fixed_size,
            )
        else:
            rows, idx = _static_rows(cfg, strategy, n_steps, r, run_rng)
            state = AcquisitionState.start(cfg.prior.dim, n_steps, r, s)
            append_measurement(state, rows, x)
            state.used.extend(idx)
            state.step = n_steps
        estimate = restore(state, cfg.prior, cfg.restoration, restore_rng)
        err = mse(x, estimate)
        row = ResultRow(label, n_steps, r, s, trial, err, psnr(x, estimate, cfg.peak_value), 0.0, state.status)
        outcome = TrialOutcome(row, state, estimate)
    except ConfigError:
        raise
    except AdaSenseError as exc:
        row = ResultRow(label, n_steps, r, s, trial, math.nan, math.nan, 0.0, f"error:{type(exc).__name__}")
        outcome = TrialOutcome(row)
    outcome.row.time_ms = 1000.0 * (time.perf_counter() - t0) if cfg.timing else math.nan
    return outcome


def resolve_threads(requested: int | None, configured: int = 1) -> int:
    """--threads, then ADASENSE_THREADS, then the config value."""
    if requested is not None:
        return max(1, requested)
    env = os.environ.get("ADASENSE_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError(f"ADASENSE_THREADS must be an integer, got {env!r}") from exc
    return max(1, configured)


def run_trials(cfg: ExperimentConfig, strategy: str, threads: int = 1, **kw) -> list[TrialOutcome]:
    def one(t):
        return run_trial(cfg, strategy, t, **kw)

    if threads <= 1:
        return [one(t) for t in range(cfg.trials)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(one, range(cfg.trials)))


def summarize(rows: list[ResultRow]) -> list[dict]:
    """Mean +- standard error of MSE per (strategy, N, r, s), in first-seen order."""
    groups: dict[tuple, list[ResultRow]] = {}
    for row in rows:
        groups.setdefault((row.strategy, row.N, row.r, row.s), []).append(row)
    out = []
    for (strategy, n, r, s), members in groups.items():
        errs = np.array([m.mse for m in members])
        errs = errs[np.isfinite(errs)]
        peaks = np.array([m.psnr for m in members if np.isfinite(m.psnr)])
        out.append(
            {
                "strategy": strategy,
                "N": n,
                "r": r,
                "s": s,
                "trials": len(members),
                "mean_mse": float(errs.mean()) if errs.size else math.nan,
                "stderr_mse": float(errs.std(ddof=1) / np.sqrt(errs.size)) if errs.size > 1 else math.nan,
                "mean_psnr": float(peaks.mean()) if peaks.size else math.nan,
                "n_ok": sum(m.status == "ok" for m in members),
            }
        )
    return out


def paired_comparison(a, b) -> dict:
    """Paired tests of H1: mean(a) < mean(b).

    Returns the mean difference, a one-sided paired t-test p-value for each
    direction and a one-sided sign-test p-value for a < b.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    diff = a - b
    if np.allclose(diff, 0.0):
        return {"mean_diff": 0.0, "p_less": 1.0, "p_greater": 1.0, "p_sign_less": 1.0, "n": diff.size}
    t_less = stats.ttest_rel(a, b, alternative="less")
    t_greater = stats.ttest_rel(a, b, alternative="greater")
    nonzero = diff[diff != 0]
    sign = stats.binomtest(int(np.sum(nonzero < 0)), nonzero.size, 0.5, alternative="greater")
    return {
        "mean_diff": float(diff.mean()),
        "p_less": float(t_less.pvalue),
        "p_greater": float(t_greater.pvalue),
        "p_sign_less": float(sign.pvalue),
        "n": int(diff.size),
    }


def write_results(out_dir: Path, rows: list[ResultRow], name: str = "results.csv") -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / name
    path.write_text(CSV_HEADER + "\n" + "".join(row.to_csv() + "\n" for row in rows))
    return path


def write_summary(out_dir: Path, summary: list[dict]) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "summary.csv"
    keys = ["strategy", "N", "r", "s", "trials", "mean_mse", "stderr_mse", "mean_psnr", "n_ok"]
    lines = [",".join(keys)]
    for item in summary:
        lines.append(",".join(f"{item[k]:.17g}" if isinstance(item[k], float) else str(item[k]) for k in keys))
    path.write_text("\n".join(lines) + "\n")
    return path


def _selection_label(cfg: ExperimentConfig) -> str:
    return _MODE_LABELS[cfg.selection_mode]


def cmd_run(cfg: ExperimentConfig, out_dir, threads: int = 1) -> list[ResultRow]:
    """Run the configured acquisition per trial; write CSV, masks and restorations."""
    out_dir = Path(out_dir)
    outcomes = run_trials(cfg, _selection_label(cfg), threads)
    masks = out_dir / "masks"
    restored = out_dir / "restored"
    masks.mkdir(parents=True, exist_ok=True)
    restored.mkdir(parents=True, exist_ok=True)
    for outcome in outcomes:
        t = outcome.row.trial
        if outcome.state is not None:
            export = outcome.state.to_dict()
            export["strategy"] = outcome.row.strategy
            export["trial"] = t
            (masks / f"trial_{t:04d}.json").write_text(json.dumps(export, indent=1) + "\n")
            write_matrix(masks / f"trial_{t:04d}_rows.txt", outcome.state.sensing.rows)
        if outcome.estimate is not None:
            write_matrix(restored / f"trial_{t:04d}.txt", outcome.estimate[None, :])
    rows = [o.row for o in outcomes]
    write_results(out_dir, rows)
    write_summary(out_dir, summarize(rows))
    return rows


def cmd_sweep_adaptivity(cfg: ExperimentConfig, out_dir, threads: int = 1) -> list[ResultRow]:
    """Fixed total budget N*r, varying adaptivity; trials are paired across pairs."""
    grid = cfg.grid or [(cfg.n_steps, cfg.r)]
    budget = cfg.budget if cfg.budget is not None else grid[0][0] * grid[0][1]
    for n, r in grid:
        if n * r != budget:
            raise ConfigError(f"config key 'grid': pair [{n}, {r}] violates budget N*r = {budget}")
    label = _selection_label(cfg)
    rows = []
    for n, r in grid:
        rows += [o.row for o in run_trials(cfg, label, threads, n_steps=n, r=r, s=cfg.samples_for(r))]
    write_results(Path(out_dir), rows)
    write_summary(Path(out_dir), summarize(rows))
    return rows


def cmd_sweep_samples(cfg: ExperimentConfig, out_dir, threads: int = 1) -> list[ResultRow]:
    """Fixed (N, r), varying s, plus an exact-covariance reference (s column = 0)."""
    if not cfg.s_values:
        raise ConfigError("config key 's_values' is required for sweep-samples")
    label = _selection_label(cfg)
    rows = []
    for s in cfg.s_values:
        rows += [o.row for o in run_trials(cfg, label, threads, s=s, covariance="empirical")]
    rows += [o.row for o in run_trials(cfg, EXACT_REFERENCE, threads, s=0)]
    write_results(Path(out_dir), rows)
    write_summary(Path(out_dir), summarize(rows))
    return rows


def cmd_bench(cfg: ExperimentConfig, out_dir, threads: int = 1) -> list[ResultRow]:
    """Every listed strategy on the same ground-truth trials."""
    if not cfg.strategies:
        raise ConfigError("config key 'strategies' must list at least one strategy")
    rows = []
    for label in cfg.strategies:
        rows += [o.row for o in run_trials(cfg, label, threads)]
    write_results(Path(out_dir), rows)
    write_summary(Path(out_dir), summarize(rows))
    return rows


def with_overrides(cfg: ExperimentConfig, seed: int | None = None, trials: int | None = None) -> ExperimentConfig:
    if trials is not None and trials < 1:
        raise ConfigError(f"--trials must be >= 1, got {trials}")
    changes = {}
    if seed is not None:
        changes["seed"] = seed
    if trials is not None:
        changes["trials"] = trials
    return replace(cfg, **changes) if changes else cfg
