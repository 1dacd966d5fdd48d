"""Seeded ensembles: mean state sums, decay-rate fits, agreement statistics.

Per-trial randomness comes from independent child streams derived from
(master_seed, trial_index), so results are reproducible and independent of
worker count and scheduling. Cross-trial reductions accumulate the integer
state sums exactly in int64, which makes the merge bit-stable by
construction.
"""

from __future__ import annotations

import json
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Mapping

import numpy as np

from ._record import write_param_comments
from .dynamics import InitPolicy, Trajectory, run_trajectory
from .errors import InsufficientSignalError
from .graphs import BinomialGraphSpec, GraphProcessSpec, spec_n_nodes

__all__ = [
    "AgreementResult",
    "DecayEstimate",
    "EnsembleParams",
    "EnsembleResult",
    "agreement_fraction",
    "decay_report",
    "estimate_decay_exponent",
    "run_ensemble",
    "time_average_sum",
    "write_decay_json",
    "write_ensemble_csv",
]


def trial_seed(master_seed: int, trial: int) -> np.random.SeedSequence:
    """Independent child stream for one trial of one experiment."""
    return np.random.SeedSequence(master_seed, spawn_key=(trial,))


@dataclass(frozen=True)
class EnsembleParams:
    spec: GraphProcessSpec
    eta: float
    init_policy: str
    steps: int
    n_trials: int
    master_seed: int


@dataclass
class EnsembleResult:
    """Cross-trial means of the state sum, one entry per step 0..steps."""

    n_trials: int
    mean_sums: np.ndarray
    stderr_sums: np.ndarray
    params: EnsembleParams


def _padded_sums(traj: Trajectory, steps: int) -> np.ndarray:
    sums = traj.sums
    if sums.size == steps + 1:
        return sums
    # Early absorption: consensus is absorbing, so the sum stays put.
    pad = np.full(steps + 1 - sums.size, sums[-1], dtype=np.int64)
    return np.concatenate([sums, pad])


def _trial_block(
    spec: GraphProcessSpec,
    eta: float,
    init: InitPolicy,
    steps: int,
    master_seed: int,
    start: int,
    stop: int,
) -> tuple[np.ndarray, np.ndarray]:
    total = np.zeros(steps + 1, dtype=np.int64)
    total_sq = np.zeros(steps + 1, dtype=np.int64)
    for t in range(start, stop):
        traj = run_trajectory(spec, eta, init, steps, seed=trial_seed(master_seed, t))
        sums = _padded_sums(traj, steps)
        total += sums
        total_sq += sums * sums
    return total, total_sq


def run_ensemble(
    spec: GraphProcessSpec,
    eta: float,
    init_policy: InitPolicy,
    steps: int,
    n_trials: int,
    master_seed: int,
    n_workers: int = 1,
) -> EnsembleResult:
    """Run n_trials independent trajectories and average the state sums.

    Trials absorbed before the step budget are continued at their absorbed
    sum, so mean_sums[k] is always the mean over all trials at step k.
    Results are identical for any n_workers.
    """
    if n_trials < 1:
        raise ValueError(f"n_trials must be >= 1, got {n_trials}")
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")

    if n_workers <= 1 or n_trials == 1:
        total, total_sq = _trial_block(spec, eta, init_policy, steps, master_seed, 0, n_trials)
    else:
        n_workers = min(n_workers, n_trials)
        bounds = np.linspace(0, n_trials, n_workers + 1).astype(int)
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            futures = [
                pool.submit(_trial_block, spec, eta, init_policy, steps, master_seed, int(a), int(b))
                for a, b in zip(bounds[:-1], bounds[1:])
            ]
            total = np.zeros(steps + 1, dtype=np.int64)
            total_sq = np.zeros(steps + 1, dtype=np.int64)
            for future in futures:  # merged in trial-index order
                part, part_sq = future.result()
                total += part
                total_sq += part_sq

    mean = total / n_trials
    if n_trials > 1:
        variance = (total_sq - total.astype(float) ** 2 / n_trials) / (n_trials - 1)
        stderr = np.sqrt(np.clip(variance, 0.0, None) / n_trials)
    else:
        stderr = np.zeros(steps + 1)

    params = EnsembleParams(
        spec=spec,
        eta=float(eta),
        init_policy=init_policy if isinstance(init_policy, str) else "explicit",
        steps=steps,
        n_trials=n_trials,
        master_seed=master_seed,
    )
    return EnsembleResult(n_trials=n_trials, mean_sums=mean, stderr_sums=stderr, params=params)


@dataclass(frozen=True)
class DecayEstimate:
    """Least-squares decay rate of the mean state sum.

    exponent is the fitted slope of -ln(mean_sums[k] / mean_sums[0])
    against k; for the per-step random graph process with eta > 1 the
    predicted value is ln(eta). stderr is the ordinary least-squares
    standard error of the slope.
    """

    exponent: float
    theoretical: float
    fit_window: tuple[int, int]
    r_squared: float
    stderr: float

    @property
    def relative_error(self) -> float:
        return abs(self.exponent - self.theoretical) / abs(self.theoretical)


def estimate_decay_exponent(result: EnsembleResult, floor: float = 5.0) -> DecayEstimate:
    """Fit the exponential decay rate of |mean_sums|.

    The fit uses the largest prefix window on which the mean is above
    floor standard errors, cutting off before the log of a near-zero mean
    is dominated by sampling noise.

    Raises:
        InsufficientSignalError: if fewer than 3 points clear the floor.
    """
    mean = result.mean_sums
    stderr = result.stderr_sums
    if mean[0] == 0:
        raise ValueError("mean_sums[0] is zero; the decay ratio is undefined")

    window = 0
    while window < mean.size and abs(mean[window]) > floor * stderr[window]:
        window += 1
    if window < 3:
        raise InsufficientSignalError(
            f"only {window} points clear the signal floor of {floor} standard "
            "errors; rerun with more trials"
        )

    k = np.arange(window, dtype=float)
    y = -np.log(np.abs(mean[:window] / mean[0]))
    slope, intercept = np.polyfit(k, y, 1)
    predicted = slope * k + intercept
    ss_res = float(np.sum((y - predicted) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r_squared = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    sxx = float(np.sum((k - k.mean()) ** 2))
    slope_stderr = float(np.sqrt(ss_res / (window - 2) / sxx)) if window > 2 else 0.0

    return DecayEstimate(
        exponent=float(slope),
        theoretical=float(np.log(result.params.eta)),
        fit_window=(0, window - 1),
        r_squared=r_squared,
        stderr=slope_stderr,
    )


@dataclass
class AgreementResult:
    """Fraction of trials absorbed at consensus within the step budget."""

    fraction: float
    n_absorbed: int
    n_trials: int
    absorption_times: np.ndarray
    median_time: float | None
    p90_time: float | None


def agreement_fraction(
    spec: GraphProcessSpec,
    eta: float,
    init_policy: InitPolicy,
    step_budget: int,
    n_trials: int,
    master_seed: int,
) -> AgreementResult:
    """Run seeded trials and report how many reach consensus in time."""
    if n_trials < 1:
        raise ValueError(f"n_trials must be >= 1, got {n_trials}")
    if eta > 1.0:
        warnings.warn(
            f"eta = {eta} > 1: consensus is not absorbing, trials will "
            "typically exhaust the step budget",
            UserWarning,
            stacklevel=2,
        )
    times: list[int] = []
    for t in range(n_trials):
        traj = run_trajectory(spec, eta, init_policy, step_budget, seed=trial_seed(master_seed, t))
        if traj.absorption is not None:
            times.append(traj.absorption[0])
    absorbed = np.array(times, dtype=np.int64)
    return AgreementResult(
        fraction=len(times) / n_trials,
        n_absorbed=len(times),
        n_trials=n_trials,
        absorption_times=absorbed,
        median_time=float(np.median(absorbed)) if times else None,
        p90_time=float(np.percentile(absorbed, 90)) if times else None,
    )


def time_average_sum(traj: Trajectory, burn_in: int) -> np.ndarray:
    """Running average of the state sum after discarding a burn-in prefix.

    Entry m is the mean of sums[burn_in + 1 .. burn_in + 1 + m].
    """
    if burn_in < 0:
        raise ValueError(f"burn_in must be >= 0, got {burn_in}")
    if traj.sums.size <= burn_in + 1:
        raise ValueError(
            f"trajectory has {traj.sums.size - 1} steps, not enough for burn_in={burn_in}"
        )
    tail = traj.sums[burn_in + 1 :].astype(float)
    return np.cumsum(tail) / np.arange(1, tail.size + 1)


def write_ensemble_csv(
    result: EnsembleResult,
    path: str | Path | IO[str],
    *,
    params: Mapping[str, object] | None = None,
) -> None:
    """Write an ensemble as CSV with header step,mean_sum,stderr."""

    def emit(f: IO[str]) -> None:
        if params:
            write_param_comments(f, params)
        f.write("step,mean_sum,stderr\n")
        for k, (m, se) in enumerate(zip(result.mean_sums, result.stderr_sums)):
            f.write(f"{k},{float(m)!r},{float(se)!r}\n")

    if isinstance(path, (str, Path)):
        with open(path, "w", encoding="utf-8", newline="") as f:
            emit(f)
    else:
        emit(path)


def decay_report(estimate: DecayEstimate, result: EnsembleResult) -> dict:
    """Flat JSON-ready record of a decay estimate and its provenance."""
    spec = result.params.spec
    edge_prob = spec.edge_prob if isinstance(spec, BinomialGraphSpec) else None
    return {
        "exponent": estimate.exponent,
        "theoretical": estimate.theoretical,
        "relative_error": estimate.relative_error,
        "stderr": estimate.stderr,
        "fit_window": list(estimate.fit_window),
        "r_squared": estimate.r_squared,
        "n_trials": result.params.n_trials,
        "eta": result.params.eta,
        "p": edge_prob,
        "n_nodes": spec_n_nodes(spec),
        "master_seed": result.params.master_seed,
    }


def write_decay_json(
    estimate: DecayEstimate,
    result: EnsembleResult,
    path: str | Path | IO[str],
    *,
    extra: Mapping[str, object] | None = None,
) -> None:
    report = decay_report(estimate, result)
    if extra:
        report.update(extra)

    def emit(f: IO[str]) -> None:
        json.dump(report, f, indent=2)
        f.write("\n")

    if isinstance(path, (str, Path)):
        with open(path, "w", encoding="utf-8", newline="") as f:
            emit(f)
    else:
        emit(path)
