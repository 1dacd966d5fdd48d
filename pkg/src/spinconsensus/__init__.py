"""Noisy bipolar consensus dynamics on fixed and random graphs.

Simulation, exact Markov-chain analysis, and Monte Carlo estimation for
synchronous sign-vote dynamics with bounded uniform noise: below noise
level 1 the system locks into all +1s or all -1s, above it the mean state
sum decays to zero.
"""

from .dynamics import (
    Trajectory,
    run_trajectory,
    state_sum,
    step,
    step_process,
    up_probability,
)
from .exact import (
    agreement_threshold,
    alternating_ring_report,
    classify_states,
    expected_sum_step,
    neighborhood_average_coefficients,
    stationary_distribution,
    transition_matrix_binomial,
    transition_matrix_fixed,
    two_node_closed_form,
)
from .graphs import (
    BinomialGraphSpec,
    FixedGraphSpec,
    Graph,
    from_edge_list,
    is_connected,
    make_complete,
    make_lattice,
    make_path,
    make_ring,
    max_neighborhood_size,
    neighborhood,
    sample_binomial_graph,
)
from .montecarlo import (
    agreement_fraction,
    estimate_decay_exponent,
    run_ensemble,
    time_average_sum,
)

__version__ = "0.1.0"

__all__ = [
    "BinomialGraphSpec",
    "FixedGraphSpec",
    "Graph",
    "Trajectory",
    "__version__",
    "agreement_fraction",
    "agreement_threshold",
    "alternating_ring_report",
    "classify_states",
    "estimate_decay_exponent",
    "expected_sum_step",
    "from_edge_list",
    "is_connected",
    "make_complete",
    "make_lattice",
    "make_path",
    "make_ring",
    "max_neighborhood_size",
    "neighborhood",
    "neighborhood_average_coefficients",
    "run_ensemble",
    "run_trajectory",
    "sample_binomial_graph",
    "state_sum",
    "stationary_distribution",
    "step",
    "step_process",
    "time_average_sum",
    "transition_matrix_binomial",
    "transition_matrix_fixed",
    "two_node_closed_form",
    "up_probability",
]
