import io
import json

import numpy as np
import pytest

from spinconsensus.dynamics import step, step_process
from spinconsensus.errors import NotErgodicError, ResourceLimitError
from spinconsensus.exact import (
    agreement_threshold,
    all_state_sums,
    alternating_ring_report,
    classify_states,
    expected_sum_step,
    index_to_values,
    matrix_checks,
    matrix_envelope,
    max_negation_asymmetry,
    negate_index,
    neighborhood_average_coefficients,
    stationary_distribution,
    transition_matrix_binomial,
    transition_matrix_fixed,
    two_node_closed_form,
    values_to_index,
    write_matrix_csv,
    _stationary_linear_solve,
)
from spinconsensus.graphs import (
    BinomialGraphSpec,
    from_edge_list,
    make_complete,
    make_path,
    make_ring,
)

PAIR = from_edge_list(2, [(0, 1)])  # two nodes, one edge


class TestIndexing:
    def test_round_trip(self):
        for n in (2, 3, 5):
            for s in range(1 << n):
                assert values_to_index(index_to_values(s, n)) == s

    def test_negation_is_complement(self):
        assert negate_index(0, 4) == 15
        assert negate_index(5, 4) == 10
        for s in range(16):
            assert negate_index(negate_index(s, 4), 4) == s
            assert np.array_equal(index_to_values(negate_index(s, 4), 4), -index_to_values(s, 4))

    def test_state_sums(self):
        sums = all_state_sums(3)
        assert sums.tolist() == [-3, -1, -1, 1, -1, 1, 1, 3]


class TestFixedMatrix:
    def test_pair_consensus_entry(self):
        # both nodes hold at (eta+1)/(2 eta) = 3/4 when eta = 2
        matrix = transition_matrix_fixed(PAIR, 2.0)
        assert matrix[3, 3] == pytest.approx(9 / 16, abs=1e-15)

    def test_pair_split_entry(self):
        # from (+,-) both averages are 0, each node lands anywhere with 1/2
        matrix = transition_matrix_fixed(PAIR, 2.0)
        assert matrix[1, 0] == pytest.approx(1 / 4, abs=1e-15)

    def test_consensus_rows_absorbing_below_one(self):
        for graph in (make_ring(4), make_complete(4)):
            matrix = transition_matrix_fixed(graph, 0.5)
            n_states = matrix.shape[0]
            for s in (0, n_states - 1):
                expected = np.zeros(n_states)
                expected[s] = 1.0
                assert np.array_equal(matrix[s], expected)

    def test_rows_stochastic(self):
        for eta in (0.3, 1.0, 2.5):
            matrix = transition_matrix_fixed(make_ring(5), eta)
            assert np.max(np.abs(matrix.sum(axis=1) - 1.0)) < 1e-12
            assert matrix.min() >= 0.0 and matrix.max() <= 1.0

    def test_negation_symmetry(self):
        for graph, eta in ((make_ring(5), 0.7), (make_complete(4), 2.0), (make_path(3), 1.3)):
            assert max_negation_asymmetry(transition_matrix_fixed(graph, eta)) < 1e-14

    def test_node_cap(self):
        with pytest.raises(ResourceLimitError, match="16"):
            transition_matrix_fixed(make_ring(17), 0.5)

    def test_distribution_negation_evolution(self):
        # starting from x versus -x, the sum distribution mirrors exactly
        matrix = transition_matrix_fixed(make_ring(4), 1.6)
        power = np.linalg.matrix_power(matrix, 5)
        for s in range(16):
            assert np.allclose(power[s], power[negate_index(s, 4)][::-1], atol=1e-14)


class TestBinomialMatrix:
    def test_split_to_consensus_entry(self):
        # p/4 + (1-p) * b with b = 3/16 at eta = 2
        matrix = transition_matrix_binomial(2, 0.5, 2.0)
        assert matrix[1, 3] == pytest.approx(0.21875, abs=1e-15)

    def test_consensus_self_entry_independent_of_p(self):
        for p in (0.1, 0.5, 0.9):
            matrix = transition_matrix_binomial(2, p, 2.0)
            assert matrix[3, 3] == pytest.approx(9 / 16, abs=1e-14)

    def test_rows_stochastic(self):
        for n in (2, 3, 4):
            matrix = transition_matrix_binomial(n, 0.3, 1.5)
            assert np.max(np.abs(matrix.sum(axis=1) - 1.0)) < 1e-12

    def test_negation_symmetry(self):
        for n, p, eta in ((2, 0.2, 0.7), (3, 0.5, 2.0), (4, 0.8, 1.1)):
            assert max_negation_asymmetry(transition_matrix_binomial(n, p, eta)) < 1e-14

    def test_node_cap(self):
        with pytest.raises(ResourceLimitError, match="5"):
            transition_matrix_binomial(6, 0.5, 2.0)

    def test_bad_p(self):
        with pytest.raises(ValueError):
            transition_matrix_binomial(3, 1.0, 2.0)


class TestTwoNodeClosedForm:
    def test_matches_marginalized_matrix(self):
        for p in (0.1, 0.3, 0.5, 0.7, 0.9):
            for eta in (1.1, 1.5, 2.0, 5.0):
                closed, _ = two_node_closed_form(p, eta)
                brute = transition_matrix_binomial(2, p, eta)
                assert np.max(np.abs(closed - brute)) < 1e-14

    def test_stationary_reference_values(self):
        _, pi = two_node_closed_form(0.5, 2.0)
        assert pi == pytest.approx([7 / 26, 3 / 13, 3 / 13, 7 / 26], abs=1e-15)

    def test_stationary_sums_to_one(self):
        for p in (0.05, 0.5, 0.95):
            for eta in (1.01, 2.0, 10.0):
                _, pi = two_node_closed_form(p, eta)
                assert pi.sum() == pytest.approx(1.0, abs=1e-12)

    def test_stationary_fixes_the_chain(self):
        matrix, pi = two_node_closed_form(0.3, 1.7)
        assert np.max(np.abs(pi @ matrix - pi)) < 1e-14

    def test_requires_eta_above_one(self):
        for eta in (0.5, 1.0):
            with pytest.raises(ValueError):
                two_node_closed_form(0.5, eta)


class TestClassification:
    def test_ring4_agreement_regime(self):
        classes = classify_states(transition_matrix_fixed(make_ring(4), 0.5))
        assert classes.absorbing == frozenset({0, 15})
        assert len(classes.transient) == 14
        assert not classes.recurrent_nonabsorbing

    def test_ring4_high_noise_single_class(self):
        classes = classify_states(transition_matrix_fixed(make_ring(4), 2.0))
        assert not classes.absorbing
        assert not classes.transient
        assert len(classes.recurrent_nonabsorbing) == 16

    def test_binomial3_small_noise(self):
        classes = classify_states(transition_matrix_binomial(3, 0.5, 0.4))
        assert classes.absorbing == frozenset({0, 7})
        assert len(classes.transient) == 6

    def test_ring4_below_majority_threshold(self):
        # below 1/3 the ring runs deterministic majority voting: the two
        # frozen half-and-half blocks are absorbing too, and the alternating
        # pair oscillates forever
        classes = classify_states(transition_matrix_fixed(make_ring(4), 0.2))
        assert classes.absorbing == frozenset({0, 15, 3, 6, 9, 12})
        assert classes.recurrent_nonabsorbing == frozenset({5, 10})
        assert len(classes.transient) == 8

    def test_partition(self):
        matrix = transition_matrix_binomial(3, 0.4, 1.2)
        classes = classify_states(matrix)
        union = classes.absorbing | classes.transient | classes.recurrent_nonabsorbing
        assert union == set(range(8))
        assert not classes.absorbing & classes.transient
        assert not classes.absorbing & classes.recurrent_nonabsorbing
        assert not classes.transient & classes.recurrent_nonabsorbing


class TestStationary:
    def test_two_node_reference(self):
        matrix = transition_matrix_binomial(2, 0.5, 2.0)
        pi = stationary_distribution(matrix)
        assert pi == pytest.approx([7 / 26, 3 / 13, 3 / 13, 7 / 26], abs=1e-10)

    def test_negation_symmetry_ring3(self):
        pi = stationary_distribution(transition_matrix_fixed(make_ring(3), 2.0))
        assert np.max(np.abs(pi - pi[::-1])) < 1e-12

    def test_not_ergodic_names_absorbing_states(self):
        matrix = transition_matrix_fixed(make_ring(4), 0.5)
        with pytest.raises(NotErgodicError, match=r"\[0, 15\]"):
            stationary_distribution(matrix)

    def test_residual_invariant(self):
        matrix = transition_matrix_fixed(make_complete(4), 1.4)
        pi = stationary_distribution(matrix)
        assert np.max(np.abs(pi @ matrix - pi)) <= 1e-10
        assert pi.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(pi >= 0)

    def test_power_iteration_agrees_with_linear_solve(self):
        matrix = transition_matrix_fixed(make_ring(5), 1.8)
        pi = stationary_distribution(matrix)
        direct = _stationary_linear_solve(matrix)
        assert np.max(np.abs(pi - direct)) < 1e-10


class TestExpectedSumStep:
    def test_contraction_binomial(self):
        for n in (2, 3, 4):
            sums = all_state_sums(n).astype(float)
            for p in (0.2, 0.5, 0.8):
                for eta in (1.1, 2.0):
                    matrix = transition_matrix_binomial(n, p, eta)
                    assert np.max(np.abs(expected_sum_step(matrix) - sums / eta)) < 1e-10

    def test_two_node_consensus_row(self):
        matrix = transition_matrix_binomial(2, 0.5, 2.0)
        assert expected_sum_step(matrix)[3] == pytest.approx(1.0, abs=1e-12)

    def test_absorbing_rows_keep_their_sum(self):
        matrix = transition_matrix_fixed(make_ring(4), 0.5)
        expected = expected_sum_step(matrix)
        assert expected[15] == pytest.approx(4.0, abs=1e-12)
        assert expected[0] == pytest.approx(-4.0, abs=1e-12)


class TestCoefficients:
    def test_two_nodes(self):
        assert neighborhood_average_coefficients(2) == (0.75, 0.25)

    def test_three_nodes(self):
        c_self, c_cross = neighborhood_average_coefficients(3)
        assert c_self == pytest.approx(7 / 12, abs=1e-15)
        assert c_cross == pytest.approx(5 / 24, abs=1e-15)

    @pytest.mark.parametrize("n", range(2, 21))
    def test_collapse_identity(self, n):
        c_self, c_cross = neighborhood_average_coefficients(n)
        assert abs(c_self + (n - 1) * c_cross - 1.0) < 1e-14

    def test_rejects_single_node(self):
        with pytest.raises(ValueError):
            neighborhood_average_coefficients(1)


class TestAgreementThreshold:
    def test_ring(self):
        lower, upper = agreement_threshold(make_ring(11))
        assert lower == pytest.approx(1 / 3)
        assert upper == 1.0

    def test_complete_four(self):
        assert agreement_threshold(make_complete(4)) == (0.5, 1.0)

    def test_two_node_path(self):
        assert agreement_threshold(make_path(2)) == (0.0, 1.0)

    def test_disconnected_rejected(self):
        with pytest.raises(ValueError):
            agreement_threshold(from_edge_list(4, [(0, 1), (2, 3)]))


class TestAlternatingRing:
    def test_locked_cycle_n4(self):
        report = alternating_ring_report(4, 0.2)
        assert report.two_cycle_closed
        assert not report.consensus_reachable
        assert report.partner_index == negate_index(report.state_index, 4)

    def test_locked_cycle_n6(self):
        report = alternating_ring_report(6, 0.3)
        assert report.two_cycle_closed
        assert not report.consensus_reachable

    def test_escapes_above_threshold(self):
        report = alternating_ring_report(4, 0.5)
        assert not report.two_cycle_closed
        assert report.consensus_reachable

    def test_odd_rejected(self):
        with pytest.raises(ValueError):
            alternating_ring_report(5, 0.2)


class TestMonteCarloConsistency:
    def _empirical_matrix(self, stepper, n, steps, seed):
        rng = np.random.default_rng(seed)
        counts = np.zeros((1 << n, 1 << n))
        state = index_to_values(0b101 & ((1 << n) - 1), n)
        s = values_to_index(state)
        for _ in range(steps):
            state = stepper(state, rng)
            t = values_to_index(state)
            counts[s, t] += 1
            s = t
        return counts

    def _compare(self, counts, matrix):
        visits = counts.sum(axis=1)
        for s in np.nonzero(visits >= 100)[0]:
            freq = counts[s] / visits[s]
            se = np.sqrt(matrix[s] * (1 - matrix[s]) / visits[s])
            assert np.all(np.abs(freq - matrix[s]) <= 4 * np.maximum(se, 1e-12))

    def test_fixed_ring3(self):
        g = make_ring(3)
        counts = self._empirical_matrix(lambda x, rng: step(x, g, 2.0, rng), 3, 20_000, 17)
        self._compare(counts, transition_matrix_fixed(g, 2.0))

    def test_binomial3(self):
        spec = BinomialGraphSpec(3, 0.5)
        counts = self._empirical_matrix(
            lambda x, rng: step_process(x, spec, 2.0, rng)[0], 3, 20_000, 23
        )
        self._compare(counts, transition_matrix_binomial(3, 0.5, 2.0))


class TestChecksAndExports:
    def test_checks_all_pass_good_matrix(self):
        checks = matrix_checks(transition_matrix_binomial(2, 0.4, 1.8), 1.8, 0.4)
        names = {c["check"] for c in checks}
        assert "two-node-closed-form" in names and "expected-sum-contraction" in names
        assert all(c["passed"] for c in checks)

    def test_checks_flag_broken_matrix(self):
        matrix = transition_matrix_fixed(make_ring(3), 1.5)
        matrix[0, 0] += 1e-6
        checks = matrix_checks(matrix, 1.5)
        failed = {c["check"] for c in checks if not c["passed"]}
        assert "row-sums" in failed

    def test_matrix_csv_round_trips_17_digits(self):
        matrix = transition_matrix_binomial(2, 0.37, 1.9)
        buf = io.StringIO()
        write_matrix_csv(matrix, buf)
        lines = buf.getvalue().strip().split("\n")
        assert len(lines) == 4
        parsed = np.array([[float(x) for x in line.split(",")] for line in lines])
        assert np.array_equal(parsed, matrix)

    def test_envelope_fields(self):
        env = matrix_envelope(3, 1.5, 0.5)
        assert env == {
            "n": 3,
            "eta": 1.5,
            "p": 0.5,
            "convention": "row-stochastic",
            "indexing": "bit i = node i, set = +1",
        }
        assert "p" not in matrix_envelope(3, 1.5)
        json.dumps(env)  # JSON-serializable
