"""Synchronous noisy sign-vote dynamics on bipolar node states.

Every node holds +1 or -1. In one step each node computes the average of
its radius-1 neighborhood (itself included), adds an independent uniform
noise draw from [-eta, eta], and adopts the sign of the result. All nodes
update simultaneously from the pre-step state.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import IO, Mapping, Sequence, Union

import numpy as np

from ._record import write_param_comments
from .graphs import (
    FixedGraphSpec,
    Graph,
    GraphProcessSpec,
    sample_binomial_graph,
    spec_n_nodes,
)

__all__ = [
    "INIT_POLICIES",
    "Trajectory",
    "TrajectoryParams",
    "all_minus",
    "all_plus",
    "make_state",
    "node_average",
    "random_state",
    "resolve_init",
    "run_trajectory",
    "state_from_string",
    "state_sum",
    "state_to_string",
    "step",
    "step_given_noise",
    "step_process",
    "up_probability",
    "up_probability_array",
    "write_trajectory_csv",
]

INIT_POLICIES = ("random", "all-plus", "all-minus")

InitPolicy = Union[str, Sequence[int], np.ndarray]
SeedLike = Union[int, None, np.random.SeedSequence, np.random.Generator]


def _check_eta(eta: float) -> float:
    eta = float(eta)
    if not eta > 0.0:
        raise ValueError(f"noise level eta must be > 0, got {eta}")
    return eta


def make_state(values: Sequence[int] | np.ndarray) -> np.ndarray:
    """Validate and normalize a bipolar state vector to int8."""
    arr = np.asarray(values)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("a state must be a non-empty 1-d vector")
    if not np.all(np.abs(arr.astype(np.int64)) == 1):
        raise ValueError("state entries must be +1 or -1")
    return arr.astype(np.int8)


def all_plus(n: int) -> np.ndarray:
    return np.ones(n, dtype=np.int8)


def all_minus(n: int) -> np.ndarray:
    return -np.ones(n, dtype=np.int8)


def random_state(n: int, rng: np.random.Generator) -> np.ndarray:
    """Each entry +1 or -1 with probability 1/2, one draw per node."""
    return (rng.integers(0, 2, n) * 2 - 1).astype(np.int8)


def resolve_init(policy: InitPolicy, n: int, rng: np.random.Generator) -> np.ndarray:
    if isinstance(policy, str):
        if policy == "random":
            return random_state(n, rng)
        if policy == "all-plus":
            return all_plus(n)
        if policy == "all-minus":
            return all_minus(n)
        raise ValueError(f"unknown init policy {policy!r}; options: {INIT_POLICIES}")
    state = make_state(policy)
    if state.size != n:
        raise ValueError(f"init state has {state.size} entries, expected {n}")
    return state


def state_sum(state: np.ndarray) -> int:
    """Sum of all node values."""
    return int(np.asarray(state, dtype=np.int64).sum())


def state_to_string(state: np.ndarray) -> str:
    return "".join("+" if v > 0 else "-" for v in state)


def state_from_string(text: str) -> np.ndarray:
    text = text.strip()
    if not text or any(c not in "+-" for c in text):
        raise ValueError("state string must consist of '+' and '-' characters only")
    return np.array([1 if c == "+" else -1 for c in text], dtype=np.int8)


def node_average(state: np.ndarray, graph: Graph, i: int) -> float:
    """Average node value over the neighborhood of i, i included."""
    if not 0 <= i < graph.n_nodes:
        raise ValueError(f"node index {i} out of range 0..{graph.n_nodes - 1}")
    neigh = graph.neighbor_lists[i]
    total = int(state[i]) + sum(int(state[j]) for j in neigh)
    return total / (len(neigh) + 1)


def up_probability(v: float, eta: float) -> float:
    """Probability that sign(v + xi) is positive for xi uniform on [-eta, eta].

    Equals (eta + v) / (2 eta) clamped to [0, 1]; the clamp binds exactly
    when |v| >= eta.
    """
    eta = _check_eta(eta)
    return float(min(1.0, max(0.0, (eta + v) / (2.0 * eta))))


def up_probability_array(v: np.ndarray, eta: float) -> np.ndarray:
    """Vectorized form of up_probability."""
    eta = _check_eta(eta)
    return np.clip((eta + np.asarray(v, dtype=float)) / (2.0 * eta), 0.0, 1.0)


def _advance(x: np.ndarray, adjacency: np.ndarray, denom: np.ndarray, noise: np.ndarray) -> np.ndarray:
    v = (adjacency @ x + x) / denom
    y = v + noise
    return np.where(y > 0.0, 1.0, np.where(y < 0.0, -1.0, x))


def step_given_noise(state: np.ndarray, graph: Graph, noise: Sequence[float] | np.ndarray) -> np.ndarray:
    """One synchronous step with the noise vector fixed.

    An exact zero sign argument keeps the node's previous value; under
    continuous noise this is a probability-zero event, but pinning it keeps
    the dynamics equivariant under global negation of state and noise.
    """
    state = make_state(state)
    if state.size != graph.n_nodes:
        raise ValueError(f"state has {state.size} entries, graph has {graph.n_nodes} nodes")
    noise = np.asarray(noise, dtype=float)
    if noise.shape != (graph.n_nodes,):
        raise ValueError(f"noise must have shape ({graph.n_nodes},), got {noise.shape}")
    x = state.astype(float)
    denom = graph.degrees.astype(float) + 1.0
    return _advance(x, graph.adjacency_matrix, denom, noise).astype(np.int8)


def step(state: np.ndarray, graph: Graph, eta: float, rng: np.random.Generator) -> np.ndarray:
    """One synchronous step, drawing one noise value per node in index order."""
    eta = _check_eta(eta)
    noise = rng.uniform(-eta, eta, graph.n_nodes)
    return step_given_noise(state, graph, noise)


def step_process(
    state: np.ndarray, spec: GraphProcessSpec, eta: float, rng: np.random.Generator
) -> tuple[np.ndarray, Graph]:
    """One step of the graph process; returns the successor and the graph used.

    The binomial variant samples a fresh graph (independently of the past)
    before stepping.
    """
    if isinstance(spec, FixedGraphSpec):
        return step(state, spec.graph, eta, rng), spec.graph
    graph = sample_binomial_graph(spec.n_nodes, spec.edge_prob, rng)
    return step(state, graph, eta, rng), graph


@dataclass(frozen=True)
class TrajectoryParams:
    spec: GraphProcessSpec
    eta: float
    seed: int | None
    max_steps: int
    init_policy: str


@dataclass
class Trajectory:
    """State-sum record of one simulated run.

    sums[k] is the state sum after k steps (sums[0] is the initial sum).
    absorption is (step, sign) at the first time the state hits all +1s or
    all -1s; it is only tracked for eta <= 1, where consensus is absorbing
    and the run stops early.
    """

    params: TrajectoryParams
    sums: np.ndarray
    absorption: tuple[int, int] | None
    states: list[np.ndarray] | None = None

    @property
    def absorbed(self) -> bool:
        return self.absorption is not None


def run_trajectory(
    spec: GraphProcessSpec,
    eta: float,
    init: InitPolicy = "random",
    max_steps: int = 1000,
    seed: SeedLike = None,
    record_states: bool = False,
) -> Trajectory:
    """Simulate one seeded trajectory of the graph process.

    The generator is consumed in a fixed order: the initial state first
    (for the "random" policy), then per step any graph draw followed by the
    per-node noise draws. Iterating step_process by hand with the same
    generator reproduces the exact same path.

    Args:
        spec: fixed graph or per-step binomial sampler.
        eta: noise level, > 0. For eta <= 1 the run stops at consensus.
        init: "random", "all-plus", "all-minus", or an explicit vector.
        max_steps: step budget, >= 1.
        seed: anything np.random.default_rng accepts.
        record_states: keep the full state at every recorded step.
    """
    eta = _check_eta(eta)
    if max_steps < 1:
        raise ValueError(f"max_steps must be >= 1, got {max_steps}")
    rng = np.random.default_rng(seed)
    n = spec_n_nodes(spec)
    x0 = resolve_init(init, n, rng)

    params = TrajectoryParams(
        spec=spec,
        eta=eta,
        seed=seed if isinstance(seed, int) else None,
        max_steps=max_steps,
        init_policy=init if isinstance(init, str) else "explicit",
    )

    if isinstance(spec, FixedGraphSpec):
        adjacency = spec.graph.adjacency_matrix
        denom = spec.graph.degrees.astype(float) + 1.0
        iu = ju = None
    else:
        iu, ju = np.triu_indices(n, k=1)
        adjacency = np.zeros((n, n))
        denom = np.empty(n)

    x = x0.astype(float)
    sums = np.empty(max_steps + 1, dtype=np.int64)
    sums[0] = int(x.sum())
    states = [x0.copy()] if record_states else None

    stop_at_consensus = eta <= 1.0
    absorption: tuple[int, int] | None = None
    last = 0
    if stop_at_consensus and abs(sums[0]) == n:
        absorption = (0, 1 if sums[0] > 0 else -1)
    else:
        for k in range(1, max_steps + 1):
            if iu is not None:
                on = rng.random(iu.size) < spec.edge_prob
                adjacency[iu, ju] = on
                adjacency[ju, iu] = on
                np.add(adjacency.sum(axis=1), 1.0, out=denom)
            noise = rng.uniform(-eta, eta, n)
            x = _advance(x, adjacency, denom, noise)
            s = int(x.sum())
            sums[k] = s
            last = k
            if record_states:
                states.append(x.astype(np.int8))
            if stop_at_consensus and abs(s) == n:
                absorption = (k, 1 if s > 0 else -1)
                break

    return Trajectory(params=params, sums=sums[: last + 1].copy(), absorption=absorption, states=states)


def write_trajectory_csv(
    traj: Trajectory,
    path: str | Path | IO[str],
    *,
    params: Mapping[str, object] | None = None,
    full_state: bool = False,
) -> None:
    """Write a trajectory as CSV with header step,state_sum.

    With full_state=True a third column holds the state as a '+'/'-' string;
    the trajectory must have been run with record_states=True.
    """
    if full_state and traj.states is None:
        raise ValueError("trajectory has no recorded states; rerun with record_states=True")

    def emit(f: IO[str]) -> None:
        if params:
            write_param_comments(f, params)
        if full_state:
            f.write("step,state_sum,state\n")
            for k, (s, st) in enumerate(zip(traj.sums, traj.states)):
                f.write(f"{k},{int(s)},{state_to_string(st)}\n")
        else:
            f.write("step,state_sum\n")
            for k, s in enumerate(traj.sums):
                f.write(f"{k},{int(s)}\n")

    if isinstance(path, (str, Path)):
        with open(path, "w", encoding="utf-8", newline="") as f:
            emit(f)
    else:
        emit(path)
