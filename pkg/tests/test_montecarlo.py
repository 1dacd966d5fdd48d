import io
import json

import numpy as np
import pytest

from spinconsensus.dynamics import run_trajectory
from spinconsensus.errors import InsufficientSignalError
from spinconsensus.graphs import BinomialGraphSpec, FixedGraphSpec, make_ring
from spinconsensus.montecarlo import (
    EnsembleParams,
    EnsembleResult,
    agreement_fraction,
    decay_report,
    estimate_decay_exponent,
    run_ensemble,
    time_average_sum,
    write_decay_json,
    write_ensemble_csv,
)

BINOMIAL_16 = BinomialGraphSpec(16, 0.5)


def synthetic_result(eta: float, n: float = 16.0, steps: int = 60) -> EnsembleResult:
    params = EnsembleParams(BinomialGraphSpec(16, 0.5), eta, "all-plus", steps, 1, 0)
    mean = n * eta ** -np.arange(steps + 1, dtype=float)
    return EnsembleResult(1, mean, np.zeros(steps + 1), params)


class TestRunEnsemble:
    def test_all_plus_start(self):
        result = run_ensemble(BINOMIAL_16, 2.0, "all-plus", 5, 50, 0)
        assert result.mean_sums[0] == 16.0
        assert result.stderr_sums[0] == 0.0
        assert len(result.mean_sums) == 6

    def test_deterministic(self):
        a = run_ensemble(BINOMIAL_16, 1.3, "random", 20, 200, 42)
        b = run_ensemble(BINOMIAL_16, 1.3, "random", 20, 200, 42)
        assert np.array_equal(a.mean_sums, b.mean_sums)
        assert np.array_equal(a.stderr_sums, b.stderr_sums)

    def test_worker_count_invariant(self):
        a = run_ensemble(BINOMIAL_16, 1.3, "random", 20, 101, 42, n_workers=1)
        b = run_ensemble(BINOMIAL_16, 1.3, "random", 20, 101, 42, n_workers=2)
        assert np.array_equal(a.mean_sums, b.mean_sums)
        assert np.array_equal(a.stderr_sums, b.stderr_sums)

    def test_halving_per_step_at_eta_two(self):
        result = run_ensemble(BINOMIAL_16, 2.0, "all-plus", 10, 4000, 77)
        for k in range(9):
            deviation = abs(result.mean_sums[k] - 16.0 * 2.0**-k)
            assert deviation <= 4 * max(result.stderr_sums[k], 1e-12)

    def test_absorbed_trials_padded(self):
        # eta <= 1 trials absorb early; the mean must stay defined at all steps
        result = run_ensemble(FixedGraphSpec(make_ring(6)), 0.8, "all-plus", 10, 5, 0)
        assert np.all(result.mean_sums == 6.0)

    def test_negation_symmetry_between_inits(self):
        r_plus = run_ensemble(BinomialGraphSpec(10, 0.5), 1.2, "all-plus", 40, 2000, 31)
        r_minus = run_ensemble(BinomialGraphSpec(10, 0.5), 1.2, "all-minus", 40, 2000, 32)
        diff = np.abs(r_plus.mean_sums + r_minus.mean_sums)
        limit = 4 * np.sqrt(r_plus.stderr_sums**2 + r_minus.stderr_sums**2)
        assert np.all(diff <= limit)

    def test_parity_and_bounds_of_recorded_sums(self):
        traj = run_trajectory(BINOMIAL_16, 1.5, "random", 100, seed=3)
        assert np.all(np.abs(traj.sums) <= 16)
        assert np.all((traj.sums - 16) % 2 == 0)

    def test_validates_arguments(self):
        with pytest.raises(ValueError):
            run_ensemble(BINOMIAL_16, 1.5, "random", 10, 0, 0)
        with pytest.raises(ValueError):
            run_ensemble(BINOMIAL_16, 1.5, "random", 0, 10, 0)


class TestDecayEstimate:
    def test_exact_synthetic_input(self):
        estimate = estimate_decay_exponent(synthetic_result(1.5))
        assert estimate.exponent == pytest.approx(np.log(1.5), abs=1e-12)
        assert estimate.r_squared == pytest.approx(1.0, abs=1e-12)
        assert estimate.fit_window == (0, 60)

    def test_window_respects_floor(self):
        params = EnsembleParams(BinomialGraphSpec(16, 0.5), 2.0, "all-plus", 6, 100, 0)
        mean = np.array([16.0, 8.0, 4.0, 2.0, 1.0, 0.5, 0.25])
        stderr = np.array([0.0, 0.1, 0.1, 0.1, 0.1, 0.2, 0.2])
        # floor 5: cut as soon as mean <= 5 * stderr, i.e. at k = 5 (0.5 <= 1.0)
        estimate = estimate_decay_exponent(EnsembleResult(100, mean, stderr, params))
        assert estimate.fit_window == (0, 4)

    def test_insufficient_signal(self):
        params = EnsembleParams(BinomialGraphSpec(16, 0.5), 2.0, "all-plus", 4, 10, 0)
        mean = np.array([16.0, 0.1, 0.05, 0.01, 0.0])
        stderr = np.array([0.0, 1.0, 1.0, 1.0, 1.0])
        with pytest.raises(InsufficientSignalError, match="more trials"):
            estimate_decay_exponent(EnsembleResult(10, mean, stderr, params))

    def test_zero_initial_mean_rejected(self):
        params = EnsembleParams(BinomialGraphSpec(16, 0.5), 2.0, "random", 4, 10, 0)
        result = EnsembleResult(10, np.zeros(5), np.zeros(5), params)
        with pytest.raises(ValueError):
            estimate_decay_exponent(result)

    def test_exponent_tracks_eta(self):
        exponents = []
        for eta in (1.1, 1.5, 2.0):
            result = run_ensemble(BinomialGraphSpec(12, 0.5), eta, "all-plus", 80, 3000, 2024)
            estimate = estimate_decay_exponent(result)
            assert estimate.relative_error <= 0.10
            exponents.append(estimate.exponent)
        assert exponents[0] < exponents[1] < exponents[2]


class TestAgreementFraction:
    def test_already_at_consensus(self):
        result = agreement_fraction(BinomialGraphSpec(6, 0.5), 0.5, "all-minus", 100, 10, 0)
        assert result.fraction == 1.0
        assert result.median_time == 0.0
        assert result.p90_time == 0.0

    def test_ring_agreement_regime(self):
        result = agreement_fraction(FixedGraphSpec(make_ring(20)), 0.75, "random", 10**5, 20, 5)
        assert result.fraction == 1.0
        assert result.n_absorbed == 20
        assert result.median_time is not None and result.median_time > 0

    def test_warns_above_one(self):
        with pytest.warns(UserWarning, match="not absorbing"):
            result = agreement_fraction(FixedGraphSpec(make_ring(6)), 2.0, "random", 200, 5, 0)
        assert result.fraction < 1.0


class TestTimeAverage:
    def test_constant_trajectory(self):
        traj = run_trajectory(FixedGraphSpec(make_ring(5)), 2.0, "all-plus", 50, seed=0)
        traj.sums = np.full(51, 5, dtype=np.int64)
        assert np.all(time_average_sum(traj, 10) == 5.0)

    def test_mixing_regime_average_near_zero(self):
        traj = run_trajectory(FixedGraphSpec(make_ring(30)), 2.0, "random", 20_000, seed=8)
        averages = time_average_sum(traj, 500)
        assert abs(averages[-1]) / 30 <= 0.05
        assert len(averages) == 20_000 - 500

    def test_burn_in_validation(self):
        traj = run_trajectory(FixedGraphSpec(make_ring(5)), 2.0, "random", 10, seed=0)
        with pytest.raises(ValueError):
            time_average_sum(traj, 10)
        with pytest.raises(ValueError):
            time_average_sum(traj, -1)


class TestExports:
    def test_ensemble_csv(self):
        params = EnsembleParams(BinomialGraphSpec(4, 0.5), 2.0, "all-plus", 2, 2, 0)
        result = EnsembleResult(2, np.array([4.0, 2.5, 0.5]), np.array([0.0, 0.25, 0.1]), params)
        buf = io.StringIO()
        write_ensemble_csv(result, buf, params={"trials": 2})
        assert buf.getvalue() == (
            "# trials=2\nstep,mean_sum,stderr\n0,4.0,0.0\n1,2.5,0.25\n2,0.5,0.1\n"
        )

    def test_decay_report_fields(self):
        result = synthetic_result(1.5)
        estimate = estimate_decay_exponent(result)
        report = decay_report(estimate, result)
        assert set(report) == {
            "exponent",
            "theoretical",
            "relative_error",
            "stderr",
            "fit_window",
            "r_squared",
            "n_trials",
            "eta",
            "p",
            "n_nodes",
            "master_seed",
        }
        assert report["p"] == 0.5
        assert report["n_nodes"] == 16
        buf = io.StringIO()
        write_decay_json(estimate, result, buf)
        assert json.loads(buf.getvalue())["eta"] == 1.5
