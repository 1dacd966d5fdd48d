"""Pydantic request/response models for the HTTP service.

Request caps keep a single call bounded; heavier workloads belong in the
CLI, which shares the same core package.
"""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field, model_validator

from ..graphs import GraphProcessSpec, build_process_spec

MAX_SIMULATE_STEPS = 2_000_000
MAX_ENSEMBLE_BUDGET = 20_000_000
MAX_EXACT_FIXED_NODES = 8
MAX_EXACT_BINOMIAL_NODES = 5


class Topology(BaseModel):
    """Graph topology selector shared by every request."""

    kind: Literal["ring", "path", "complete", "lattice", "edgelist", "binomial"]
    nodes: Optional[int] = Field(default=None, ge=2)
    p: Optional[float] = Field(default=None, gt=0.0, lt=1.0)
    dims: Optional[list[int]] = None
    periodic: bool = False
    edges: Optional[list[tuple[int, int]]] = None

    @model_validator(mode="after")
    def _check_fields(self) -> "Topology":
        if self.kind in ("ring", "path", "complete", "binomial", "edgelist") and self.nodes is None:
            raise ValueError(f"topology kind {self.kind!r} needs 'nodes'")
        if self.kind == "binomial" and self.p is None:
            raise ValueError("binomial topology needs 'p'")
        if self.kind == "lattice" and not self.dims:
            raise ValueError("lattice topology needs 'dims'")
        if self.kind == "edgelist" and self.edges is None:
            raise ValueError("edgelist topology needs 'edges'")
        return self

    def to_spec(self) -> GraphProcessSpec:
        return build_process_spec(
            self.kind,
            nodes=self.nodes,
            edge_prob=self.p,
            dims=self.dims,
            periodic=self.periodic,
            edges=self.edges,
        )


InitName = Literal["random", "all-plus", "all-minus"]


class SimulateRequest(BaseModel):
    topology: Topology
    eta: float = Field(gt=0.0)
    steps: int = Field(ge=1, le=MAX_SIMULATE_STEPS)
    seed: int = 0
    init: InitName = "random"
    init_values: Optional[list[int]] = None
    record_states: bool = False

    @model_validator(mode="after")
    def _check_budget(self) -> "SimulateRequest":
        if self.record_states and self.steps > 10_000:
            raise ValueError("record_states is capped at 10000 steps")
        return self


class SimulateResponse(BaseModel):
    n_nodes: int
    eta: float
    seed: int
    init: str
    sums: list[int]
    absorbed_step: Optional[int]
    absorbed_sign: Optional[int]
    states: Optional[list[str]] = None


class EnsembleRequest(BaseModel):
    topology: Topology
    eta: float = Field(gt=0.0)
    steps: int = Field(ge=1)
    trials: int = Field(ge=1, le=100_000)
    seed: int = 0
    init: InitName = "random"

    @model_validator(mode="after")
    def _check_budget(self) -> "EnsembleRequest":
        if self.steps * self.trials > MAX_ENSEMBLE_BUDGET:
            raise ValueError(f"steps * trials is capped at {MAX_ENSEMBLE_BUDGET}")
        return self


class EnsembleResponse(BaseModel):
    n_nodes: int
    eta: float
    steps: int
    trials: int
    seed: int
    init: str
    mean_sums: list[float]
    stderr_sums: list[float]


class DecayRequest(BaseModel):
    topology: Topology
    eta: float = Field(gt=1.0)
    steps: int = Field(ge=3)
    trials: int = Field(ge=2, le=100_000)
    seed: int = 0
    init: InitName = "all-plus"
    floor: float = Field(default=5.0, ge=0.0)

    @model_validator(mode="after")
    def _check_budget(self) -> "DecayRequest":
        if self.steps * self.trials > MAX_ENSEMBLE_BUDGET:
            raise ValueError(f"steps * trials is capped at {MAX_ENSEMBLE_BUDGET}")
        return self


class DecayResponse(BaseModel):
    exponent: float
    theoretical: float
    relative_error: float
    stderr: float
    fit_window: tuple[int, int]
    r_squared: float
    n_trials: int
    eta: float
    p: Optional[float]
    n_nodes: int
    master_seed: int


class ExactRequest(BaseModel):
    topology: Topology
    eta: float = Field(gt=0.0)
    verify: bool = False
    include_matrix: bool = True


class CheckReport(BaseModel):
    check: str
    max_error: float
    tolerance: float
    passed: bool


class Classification(BaseModel):
    absorbing: list[int]
    transient: list[int]
    recurrent_nonabsorbing: list[int]


class ExactResponse(BaseModel):
    n_nodes: int
    n_states: int
    eta: float
    p: Optional[float]
    convention: str
    indexing: str
    matrix: Optional[list[list[float]]]
    classification: Classification
    stationary: Optional[list[float]]
    stationary_error: Optional[str]
    expected_sum_step: list[float]
    checks: Optional[list[CheckReport]] = None


class SweepRequest(BaseModel):
    topology: Topology
    etas: list[float] = Field(min_length=1)
    ps: Optional[list[float]] = None
    metric: Literal["agreement_fraction", "final_time_average", "decay_exponent"]
    steps: int = Field(ge=1)
    trials: int = Field(ge=1, le=100_000)
    seed: int = 0
    init: Optional[InitName] = None
    burn_in: int = Field(default=1000, ge=0)

    @model_validator(mode="after")
    def _check_grid(self) -> "SweepRequest":
        if self.ps is not None and self.topology.kind != "binomial":
            raise ValueError("'ps' is only valid with a binomial topology")
        n_points = len(self.etas) * (len(self.ps) if self.ps else 1)
        if n_points * self.steps * self.trials > MAX_ENSEMBLE_BUDGET:
            raise ValueError("grid budget exceeded: shrink the grid, steps, or trials")
        return self


class SweepPointModel(BaseModel):
    eta: float
    p: Optional[float]
    metric: str
    value: float
    uncertainty: float
    seed: int


class SweepResponse(BaseModel):
    metric: str
    seed: int
    points: list[SweepPointModel]


class HealthResponse(BaseModel):
    status: str
    version: str
