"""Exact finite-state analysis of the noisy sign-vote chain.

States are indexed by bit mask: bit i set means node i holds +1, so index
0 is all -1s and index 2^N - 1 is all +1s. Global negation of a state is
the bitwise complement, which makes the +/- pairing of states a one-line
involution. All transition matrices are row-stochastic: entry [s, t] is
the probability of moving from state s to state t in one step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import IO

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .dynamics import up_probability_array
from .errors import NotErgodicError, ResourceLimitError
from .graphs import Graph, is_connected, make_ring, max_neighborhood_size

__all__ = [
    "DEFAULT_FIXED_NODE_CAP",
    "BINOMIAL_NODE_CAP",
    "AlternatingRingReport",
    "ChainClassification",
    "agreement_threshold",
    "all_state_sums",
    "alternating_ring_report",
    "classify_states",
    "expected_sum_step",
    "index_to_values",
    "matrix_checks",
    "matrix_envelope",
    "negate_index",
    "neighborhood_average_coefficients",
    "stationary_distribution",
    "state_values_table",
    "transition_matrix_binomial",
    "transition_matrix_fixed",
    "two_node_closed_form",
    "values_to_index",
    "write_matrix_csv",
    "write_matrix_envelope",
]

DEFAULT_FIXED_NODE_CAP = 16
BINOMIAL_NODE_CAP = 5

ROW_CONVENTION = "row-stochastic"
INDEXING_CONVENTION = "bit i = node i, set = +1"


def _check_eta(eta: float) -> float:
    eta = float(eta)
    if not eta > 0.0:
        raise ValueError(f"noise level eta must be > 0, got {eta}")
    return eta


def index_to_values(index: int, n_nodes: int) -> np.ndarray:
    """Decode a state index into the +-1 vector it represents."""
    bits = (index >> np.arange(n_nodes)) & 1
    return (bits * 2 - 1).astype(np.int8)


def values_to_index(values: np.ndarray) -> int:
    arr = np.asarray(values)
    return int(sum(1 << i for i, v in enumerate(arr) if v > 0))


def negate_index(index: int, n_nodes: int) -> int:
    """Index of the globally negated state (bitwise complement)."""
    return ((1 << n_nodes) - 1) - index


def state_values_table(n_nodes: int) -> np.ndarray:
    """(2^N, N) float table of node values for every state index."""
    idx = np.arange(1 << n_nodes)
    bits = (idx[:, None] >> np.arange(n_nodes)[None, :]) & 1
    return bits.astype(float) * 2.0 - 1.0


def all_state_sums(n_nodes: int) -> np.ndarray:
    """State sum of every index: 2 * popcount - N."""
    return state_values_table(n_nodes).sum(axis=1).astype(np.int64)


def _matrix_from_adjacency(adjacency: np.ndarray, eta: float) -> np.ndarray:
    n = adjacency.shape[0]
    n_states = 1 << n
    values = state_values_table(n)
    denom = adjacency.sum(axis=1) + 1.0
    averages = (values @ adjacency.T + values) / denom
    up = up_probability_array(averages, eta)
    target_bits = ((np.arange(n_states)[:, None] >> np.arange(n)[None, :]) & 1).astype(bool)
    matrix = np.ones((n_states, n_states))
    for i in range(n):
        ui = up[:, i][:, None]
        matrix *= np.where(target_bits[:, i][None, :], ui, 1.0 - ui)
    return matrix


def transition_matrix_fixed(graph: Graph, eta: float, max_nodes: int = DEFAULT_FIXED_NODE_CAP) -> np.ndarray:
    """Exact 2^N x 2^N transition matrix for a fixed graph.

    Entry [s, t] is the product over nodes of the per-node probability of
    landing on the value that t assigns, given the neighborhood averages
    computed from s. Noise draws are independent across nodes, which is
    what makes the per-node product exact.
    """
    eta = _check_eta(eta)
    n = graph.n_nodes
    if n > max_nodes:
        raise ResourceLimitError(
            f"exact fixed-graph chains are capped at {max_nodes} nodes "
            f"(2^{max_nodes} states); got {n}"
        )
    return _matrix_from_adjacency(graph.adjacency_matrix, eta)


def transition_matrix_binomial(
    n_nodes: int, edge_prob: float, eta: float, max_nodes: int = BINOMIAL_NODE_CAP
) -> np.ndarray:
    """Exact transition matrix of the per-step binomial graph process.

    Marginalizes over every edge configuration: the matrix is the
    probability-weighted sum of the fixed-graph matrices of all
    2^(N(N-1)/2) graphs, a configuration with m edges carrying weight
    p^m (1-p)^(C-m).
    """
    eta = _check_eta(eta)
    if n_nodes < 2:
        raise ValueError(f"a graph needs at least 2 nodes, got {n_nodes}")
    if n_nodes > max_nodes:
        n_graphs = 1 << (max_nodes * (max_nodes - 1) // 2)
        raise ResourceLimitError(
            f"marginalized binomial chains are capped at {max_nodes} nodes "
            f"({n_graphs} edge configurations); got {n_nodes}"
        )
    if not 0.0 < edge_prob < 1.0:
        raise ValueError(f"edge probability must lie strictly between 0 and 1, got {edge_prob}")

    iu, ju = np.triu_indices(n_nodes, k=1)
    n_candidates = iu.size
    q = 1.0 - edge_prob
    matrix = np.zeros((1 << n_nodes, 1 << n_nodes))
    adjacency = np.empty((n_nodes, n_nodes))
    for mask in range(1 << n_candidates):
        on = (mask >> np.arange(n_candidates)) & 1
        adjacency.fill(0.0)
        adjacency[iu, ju] = on
        adjacency[ju, iu] = on
        m = int(on.sum())
        weight = edge_prob**m * q ** (n_candidates - m)
        matrix += weight * _matrix_from_adjacency(adjacency, eta)
    return matrix


def two_node_closed_form(edge_prob: float, eta: float) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form chain and stationary distribution for two nodes.

    With eta > 1 and the edge present with probability p each step, the
    per-node stay/flip probabilities under unanimity are (eta+1)/(2 eta)
    and (eta-1)/(2 eta), giving the pair probabilities

        a = (eta-1)^2 / (4 eta^2)   both flip against unanimity
        b = (eta-1)(eta+1)/(4 eta^2)  exactly one does
        c = (eta+1)^2 / (4 eta^2)   both hold

    while a disconnected disagreeing pair behaves the same way and a
    connected disagreeing pair (average 0) moves uniformly. Returns the
    4x4 row-stochastic matrix in this module's bit ordering together with
    its stationary distribution

        pi(consensus)    = (p + 4 q b) / (2 (p + 4 (1+q) b))
        pi(disagreement) = 2 b / (p + 4 (1+q) b),  q = 1 - p.

    Requires eta > 1; at or below 1 the consensus states are absorbing and
    no unique stationary distribution exists.
    """
    if not 0.0 < edge_prob < 1.0:
        raise ValueError(f"edge probability must lie strictly between 0 and 1, got {edge_prob}")
    eta = _check_eta(eta)
    if eta <= 1.0:
        raise ValueError(f"the closed-form stationary distribution needs eta > 1, got {eta}")

    p = edge_prob
    q = 1.0 - p
    a = (eta - 1.0) ** 2 / (4.0 * eta**2)
    b = (eta - 1.0) * (eta + 1.0) / (4.0 * eta**2)
    c = (eta + 1.0) ** 2 / (4.0 * eta**2)

    # Column-stochastic form, source states ordered (+,+), (+,-), (-,-), (-,+).
    col = np.array(
        [
            [c, p / 4 + q * b, a, p / 4 + q * b],
            [b, p / 4 + q * c, b, p / 4 + q * a],
            [a, p / 4 + q * b, c, p / 4 + q * b],
            [b, p / 4 + q * a, b, p / 4 + q * c],
        ]
    )
    # Position of each bit-mask index in the ordering above:
    # index 0 = (-,-), 1 = (+,-), 2 = (-,+), 3 = (+,+).
    pos = (2, 1, 3, 0)
    matrix = np.empty((4, 4))
    for s in range(4):
        for t in range(4):
            matrix[s, t] = col[pos[t], pos[s]]

    pi_consensus = (p + 4.0 * q * b) / (2.0 * (p + 4.0 * (1.0 + q) * b))
    pi_split = 2.0 * b / (p + 4.0 * (1.0 + q) * b)
    stationary = np.array([pi_consensus, pi_split, pi_split, pi_consensus])
    return matrix, stationary


@dataclass(frozen=True)
class ChainClassification:
    """Partition of the state space by long-run behavior."""

    absorbing: frozenset[int]
    transient: frozenset[int]
    recurrent_nonabsorbing: frozenset[int]


def classify_states(
    matrix: np.ndarray, self_tol: float = 1e-12, edge_tol: float = 1e-15
) -> ChainClassification:
    """Classify every state as absorbing, transient, or recurrent.

    Absorbing states have self-transition probability 1 within self_tol.
    Recurrent states are those whose strongly connected component (over
    transitions above edge_tol) has no outgoing edge; everything else is
    transient. The edge threshold only guards rounding: closed-form
    entries are either exactly zero or bounded well away from it.
    """
    closed, labels, absorbing_mask = _closed_classes(matrix, self_tol, edge_tol)
    recurrent_mask = closed[labels] | absorbing_mask
    states = np.arange(matrix.shape[0])
    absorbing = frozenset(int(s) for s in states[absorbing_mask])
    transient = frozenset(int(s) for s in states[~recurrent_mask])
    recurrent_nonabs = frozenset(int(s) for s in states[recurrent_mask & ~absorbing_mask])
    return ChainClassification(
        absorbing=absorbing, transient=transient, recurrent_nonabsorbing=recurrent_nonabs
    )


def _closed_classes(matrix: np.ndarray, self_tol: float, edge_tol: float):
    n_states = matrix.shape[0]
    if matrix.ndim != 2 or matrix.shape[1] != n_states:
        raise ValueError(f"transition matrix must be square, got shape {matrix.shape}")
    adjacency = matrix > edge_tol
    _, labels = connected_components(csr_matrix(adjacency), directed=True, connection="strong")
    n_comp = int(labels.max()) + 1
    closed = np.ones(n_comp, dtype=bool)
    rows, cols = np.nonzero(adjacency)
    crossing = labels[rows] != labels[cols]
    closed[labels[rows[crossing]]] = False
    absorbing_mask = np.abs(np.diag(matrix) - 1.0) <= self_tol
    return closed, labels, absorbing_mask


def stationary_distribution(
    matrix: np.ndarray,
    residual_tol: float = 1e-12,
    max_iterations: int = 10_000_000,
) -> np.ndarray:
    """Unique stationary distribution of an ergodic chain.

    Runs damping-free power iteration from the uniform distribution until
    successive iterates agree within residual_tol in the infinity norm,
    falling back to a dense linear solve if iteration stalls or the cap is
    reached. Aperiodicity is certified by the convergence itself.

    Raises:
        NotErgodicError: if the chain has more than one closed class, e.g.
            when both consensus states are absorbing.
    """
    closed, labels, absorbing_mask = _closed_classes(matrix, 1e-12, 1e-15)
    n_closed = int(closed.sum())
    if n_closed != 1:
        absorbing = sorted(int(s) for s in np.nonzero(absorbing_mask)[0])
        raise NotErgodicError(
            f"chain has {n_closed} closed classes, so no unique stationary "
            f"distribution exists; absorbing states: {absorbing}"
        )

    n_states = matrix.shape[0]
    pi = np.full(n_states, 1.0 / n_states)
    converged = False
    checkpoint = math.inf
    for it in range(max_iterations):
        nxt = pi @ matrix
        nxt /= nxt.sum()
        residual = float(np.max(np.abs(nxt - pi)))
        pi = nxt
        if residual <= residual_tol:
            converged = True
            break
        # Periodic inputs never converge; bail out once progress stalls.
        if it % 5000 == 4999:
            if residual > 0.5 * checkpoint:
                break
            checkpoint = residual
    if not converged:
        pi = _stationary_linear_solve(matrix)

    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()
    final_residual = float(np.max(np.abs(pi @ matrix - pi)))
    if final_residual > 1e-10:
        raise NotErgodicError(
            f"stationary solve did not reach the required residual: {final_residual:g}"
        )
    return pi


def _stationary_linear_solve(matrix: np.ndarray) -> np.ndarray:
    n_states = matrix.shape[0]
    system = np.eye(n_states) - matrix.T
    system[-1, :] = 1.0
    rhs = np.zeros(n_states)
    rhs[-1] = 1.0
    try:
        return np.linalg.solve(system, rhs)
    except np.linalg.LinAlgError:
        stacked = np.vstack([np.eye(n_states) - matrix.T, np.ones((1, n_states))])
        rhs = np.zeros(n_states + 1)
        rhs[-1] = 1.0
        solution, *_ = np.linalg.lstsq(stacked, rhs, rcond=None)
        return solution


def expected_sum_step(matrix: np.ndarray) -> np.ndarray:
    """Expected state sum after one step, conditioned on each start state."""
    n_states = matrix.shape[0]
    n_nodes = n_states.bit_length() - 1
    if 1 << n_nodes != n_states:
        raise ValueError(f"matrix size {n_states} is not a power of two")
    return matrix @ all_state_sums(n_nodes).astype(float)


def neighborhood_average_coefficients(n_nodes: int) -> tuple[float, float]:
    """Self and cross weights of the expected neighborhood average under
    fair-coin edge sampling.

    Averaged over all equally likely edge configurations, the expected
    neighborhood average at node i is a linear blend: c_self times the
    node's own value plus c_cross times each other node's value. Summing a
    neighborhood of size m+1 over the binomial(n-1, m) ways of choosing it
    gives

        c_self  = 2^-(n-1) * sum_m C(n-1, m) / (m+1)
        c_cross = 2^-(n-1) / (n-1) * sum_m C(n-1, m) * m / (m+1)

    and c_self + (n-1) c_cross collapses to 1, which is what makes the
    expected state sum contract by exactly 1/eta per step when eta > 1.
    Computed in exact rational arithmetic, returned as floats.
    """
    if n_nodes < 2:
        raise ValueError(f"coefficients need at least 2 nodes, got {n_nodes}")
    scale = Fraction(1, 2 ** (n_nodes - 1))
    c_self = scale * sum(
        Fraction(math.comb(n_nodes - 1, m), m + 1) for m in range(n_nodes)
    )
    c_cross = (scale / (n_nodes - 1)) * sum(
        Fraction(math.comb(n_nodes - 1, m) * m, m + 1) for m in range(1, n_nodes)
    )
    return float(c_self), float(c_cross)


def agreement_threshold(graph: Graph) -> tuple[float, float]:
    """Noise interval (1 - 2/D, 1] on which a connected fixed graph is
    guaranteed to reach consensus, D being the largest neighborhood size."""
    if not is_connected(graph):
        raise ValueError("the agreement threshold is defined for connected graphs only")
    d = max_neighborhood_size(graph)
    return (1.0 - 2.0 / d, 1.0)


@dataclass(frozen=True)
class AlternatingRingReport:
    """Behavior of the alternating +-+- state on an even ring.

    two_cycle_closed means the state and its complement (its left cyclic
    shift) swap deterministically, locking the chain in a period-2
    oscillation. consensus_reachable reports whether either consensus
    state can be reached from the alternating state at all.
    """

    n_nodes: int
    eta: float
    state_index: int
    partner_index: int
    two_cycle_closed: bool
    consensus_reachable: bool


def alternating_ring_report(n_nodes: int, eta: float) -> AlternatingRingReport:
    """Check whether the alternating state on ring(n) is locked in a 2-cycle.

    On a ring every neighborhood has 3 nodes, so below eta = 1/3 each node
    follows the local majority deterministically and the alternating state
    swaps with its complement forever. Above 1/3 the swap is no longer
    certain and consensus becomes reachable.
    """
    if n_nodes < 4 or n_nodes % 2:
        raise ValueError(f"the alternating ring state needs an even node count >= 4, got {n_nodes}")
    eta = _check_eta(eta)
    matrix = transition_matrix_fixed(make_ring(n_nodes), eta)
    state = int(sum(1 << i for i in range(0, n_nodes, 2)))
    partner = negate_index(state, n_nodes)
    closed = bool(
        abs(matrix[state, partner] - 1.0) <= 1e-12 and abs(matrix[partner, state] - 1.0) <= 1e-12
    )
    reachable = _reachable_states(matrix, state)
    consensus = bool({0, (1 << n_nodes) - 1} & reachable)
    return AlternatingRingReport(
        n_nodes=n_nodes,
        eta=eta,
        state_index=state,
        partner_index=partner,
        two_cycle_closed=closed,
        consensus_reachable=consensus,
    )


def _reachable_states(matrix: np.ndarray, start: int, edge_tol: float = 1e-15) -> set[int]:
    n_states = matrix.shape[0]
    seen = {start}
    frontier = [start]
    while frontier:
        s = frontier.pop()
        for t in np.nonzero(matrix[s] > edge_tol)[0]:
            t = int(t)
            if t not in seen:
                seen.add(t)
                frontier.append(t)
    return seen


def max_negation_asymmetry(matrix: np.ndarray) -> float:
    """Largest deviation from P[s, t] = P[neg s, neg t]."""
    flipped = matrix[::-1, ::-1]
    return float(np.max(np.abs(matrix - flipped)))


def matrix_checks(
    matrix: np.ndarray,
    eta: float,
    edge_prob: float | None = None,
) -> list[dict]:
    """Run the invariant suite against a transition matrix.

    Always checks row sums, entry bounds, and negation symmetry. For
    marginalized binomial matrices with eta > 1 it additionally checks the
    one-step contraction of the expected state sum and, for two nodes, the
    closed form. When the chain is ergodic the stationary distribution is
    checked for negation symmetry and zero mean state sum.
    """
    n_states = matrix.shape[0]
    n_nodes = n_states.bit_length() - 1
    checks: list[dict] = []

    def add(name: str, max_error: float, tolerance: float) -> None:
        checks.append(
            {
                "check": name,
                "max_error": float(max_error),
                "tolerance": float(tolerance),
                "passed": bool(max_error <= tolerance),
            }
        )

    add("row-sums", np.max(np.abs(matrix.sum(axis=1) - 1.0)), 1e-12)
    bound_err = max(float(max(-matrix.min(), 0.0)), float(max(matrix.max() - 1.0, 0.0)))
    add("entry-bounds", bound_err, 1e-15)
    add("negation-symmetry", max_negation_asymmetry(matrix), 1e-14)

    closed_pi = None
    if edge_prob is not None and eta > 1.0:
        sums = all_state_sums(n_nodes).astype(float)
        contraction_err = np.max(np.abs(expected_sum_step(matrix) - sums / eta))
        add("expected-sum-contraction", contraction_err, 1e-10)
        if n_nodes == 2:
            closed_matrix, closed_pi = two_node_closed_form(edge_prob, eta)
            add("two-node-closed-form", np.max(np.abs(matrix - closed_matrix)), 1e-14)

    try:
        pi = stationary_distribution(matrix)
    except NotErgodicError:
        pi = None
    if pi is not None:
        add("stationary-negation-symmetry", np.max(np.abs(pi - pi[::-1])), 1e-10)
        sums = all_state_sums(n_nodes).astype(float)
        add("stationary-mean-sum-zero", abs(float(pi @ sums)), 1e-10)
        if closed_pi is not None:
            add("two-node-closed-form-stationary", np.max(np.abs(pi - closed_pi)), 1e-10)
    return checks


def write_matrix_csv(matrix: np.ndarray, path: str | Path | IO[str]) -> None:
    """Write a matrix as bare CSV, one row per line, 17 significant digits."""

    def emit(f: IO[str]) -> None:
        for row in matrix:
            f.write(",".join(f"{x:.17g}" for x in row))
            f.write("\n")

    if isinstance(path, (str, Path)):
        with open(path, "w", encoding="utf-8", newline="") as f:
            emit(f)
    else:
        emit(path)


def matrix_envelope(n_nodes: int, eta: float, edge_prob: float | None = None) -> dict:
    """Metadata describing an exported matrix."""
    envelope: dict = {"n": int(n_nodes), "eta": float(eta)}
    if edge_prob is not None:
        envelope["p"] = float(edge_prob)
    envelope["convention"] = ROW_CONVENTION
    envelope["indexing"] = INDEXING_CONVENTION
    return envelope


def write_matrix_envelope(
    path: str | Path,
    n_nodes: int,
    eta: float,
    edge_prob: float | None = None,
    extra: dict | None = None,
) -> None:
    import json

    envelope = matrix_envelope(n_nodes, eta, edge_prob)
    if extra:
        envelope.update(extra)
    with open(path, "w", encoding="utf-8", newline="") as f:
        json.dump(envelope, f, indent=2)
        f.write("\n")
