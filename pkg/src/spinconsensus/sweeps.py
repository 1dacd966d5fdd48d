"""Parameter sweeps over the noise level and, optionally, edge probability."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .dynamics import run_trajectory
from .graphs import GraphProcessSpec
from .montecarlo import (
    agreement_fraction,
    estimate_decay_exponent,
    run_ensemble,
    time_average_sum,
)

__all__ = ["METRICS", "SweepPoint", "point_seed", "run_sweep"]

METRICS = ("agreement_fraction", "final_time_average", "decay_exponent")


@dataclass(frozen=True)
class SweepPoint:
    eta: float
    edge_prob: float | None
    metric: str
    value: float
    uncertainty: float
    seed: int


def point_seed(master_seed: int, index: int) -> int:
    """Deterministic per-grid-point seed derived from the sweep seed."""
    return int(np.random.SeedSequence(master_seed, spawn_key=(index,)).generate_state(1, dtype=np.uint64)[0])


def run_sweep(
    spec_factory: Callable[[float | None], GraphProcessSpec],
    etas: list[float],
    ps: list[float] | None,
    metric: str,
    *,
    steps: int,
    trials: int,
    master_seed: int,
    burn_in: int = 1000,
    init: str | None = None,
    floor: float = 5.0,
    n_workers: int = 1,
) -> list[SweepPoint]:
    """Evaluate one metric over a grid of eta (and optionally p) values.

    Grid points are evaluated in deterministic order with per-point seeds
    derived from master_seed, so a single-point sweep reproduces the
    corresponding dedicated run exactly.
    """
    if not etas:
        raise ValueError("empty grid: at least one eta value is required")
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}; options: {METRICS}")
    if any(eta <= 0 for eta in etas):
        raise ValueError("all eta values must be > 0")
    if metric == "decay_exponent" and any(eta <= 1.0 for eta in etas):
        raise ValueError("decay_exponent needs eta > 1 at every grid point (no decay regime below)")
    if init is None:
        init = "all-plus" if metric == "decay_exponent" else "random"

    grid: list[tuple[float, float | None]] = [
        (eta, p) for eta in etas for p in (ps if ps else [None])
    ]
    points: list[SweepPoint] = []
    for index, (eta, p) in enumerate(grid):
        spec = spec_factory(p)
        seed = point_seed(master_seed, index)
        if metric == "agreement_fraction":
            with warnings.catch_warnings():
                # Grids deliberately straddle eta = 1; budget exhaustion above
                # it is the expected signal, not a usage mistake.
                warnings.simplefilter("ignore", UserWarning)
                result = agreement_fraction(spec, eta, init, steps, trials, seed)
            value = result.fraction
            uncertainty = math.sqrt(value * (1.0 - value) / trials)
        elif metric == "final_time_average":
            traj = run_trajectory(spec, eta, init, steps, seed=seed)
            if traj.sums.size == 1:
                # Absorbed at step 0; the average is the (constant) sum itself.
                value = float(traj.sums[0])
                uncertainty = 0.0
            else:
                # Absorbed runs can be shorter than the burn-in; shrink it so
                # the average is still defined (constant past absorption).
                effective_burn = min(burn_in, traj.sums.size - 2)
                averages = time_average_sum(traj, effective_burn)
                value = float(averages[-1])
                tail = traj.sums[effective_burn + 1 :].astype(float)
                uncertainty = float(tail.std(ddof=1) / math.sqrt(tail.size)) if tail.size > 1 else 0.0
        else:
            ensemble = run_ensemble(spec, eta, init, steps, trials, seed, n_workers=n_workers)
            estimate = estimate_decay_exponent(ensemble, floor=floor)
            value = estimate.exponent
            uncertainty = estimate.stderr
        points.append(
            SweepPoint(
                eta=float(eta),
                edge_prob=None if p is None else float(p),
                metric=metric,
                value=float(value),
                uncertainty=float(uncertainty),
                seed=seed,
            )
        )
    return points
