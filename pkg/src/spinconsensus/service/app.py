"""FastAPI service exposing simulation, ensembles, and exact-chain analysis."""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__, dynamics, exact, graphs, montecarlo, sweeps
from ..errors import NotErgodicError
from . import schemas

app = FastAPI(
    title="spinconsensus",
    version=__version__,
    description=(
        "Noisy bipolar consensus dynamics on fixed and per-step random graphs: "
        "seeded simulation, Monte Carlo ensembles, decay-rate estimates, and "
        "exact transition-matrix analysis."
    ),
)


@app.exception_handler(ValueError)
async def _value_error_handler(request: Request, exc: ValueError) -> JSONResponse:
    return JSONResponse(status_code=400, content={"detail": str(exc)})


@app.get("/health", response_model=schemas.HealthResponse)
def health() -> schemas.HealthResponse:
    return schemas.HealthResponse(status="ok", version=__version__)


@app.post("/simulate", response_model=schemas.SimulateResponse)
def simulate(req: schemas.SimulateRequest) -> schemas.SimulateResponse:
    spec = req.topology.to_spec()
    init = req.init_values if req.init_values is not None else req.init
    traj = dynamics.run_trajectory(
        spec, req.eta, init, req.steps, req.seed, record_states=req.record_states
    )
    absorbed_step, absorbed_sign = traj.absorption if traj.absorption else (None, None)
    return schemas.SimulateResponse(
        n_nodes=graphs.spec_n_nodes(spec),
        eta=req.eta,
        seed=req.seed,
        init="explicit" if req.init_values is not None else req.init,
        sums=[int(s) for s in traj.sums],
        absorbed_step=absorbed_step,
        absorbed_sign=absorbed_sign,
        states=None
        if traj.states is None
        else [dynamics.state_to_string(s) for s in traj.states],
    )


@app.post("/ensemble", response_model=schemas.EnsembleResponse)
def ensemble(req: schemas.EnsembleRequest) -> schemas.EnsembleResponse:
    spec = req.topology.to_spec()
    result = montecarlo.run_ensemble(spec, req.eta, req.init, req.steps, req.trials, req.seed)
    return schemas.EnsembleResponse(
        n_nodes=graphs.spec_n_nodes(spec),
        eta=req.eta,
        steps=req.steps,
        trials=req.trials,
        seed=req.seed,
        init=req.init,
        mean_sums=[float(x) for x in result.mean_sums],
        stderr_sums=[float(x) for x in result.stderr_sums],
    )


@app.post("/decay", response_model=schemas.DecayResponse)
def decay(req: schemas.DecayRequest) -> schemas.DecayResponse:
    spec = req.topology.to_spec()
    result = montecarlo.run_ensemble(spec, req.eta, req.init, req.steps, req.trials, req.seed)
    estimate = montecarlo.estimate_decay_exponent(result, floor=req.floor)
    return schemas.DecayResponse(**montecarlo.decay_report(estimate, result))


@app.post("/exact", response_model=schemas.ExactResponse)
def exact_chain(req: schemas.ExactRequest) -> schemas.ExactResponse:
    spec = req.topology.to_spec()
    n = graphs.spec_n_nodes(spec)
    if isinstance(spec, graphs.BinomialGraphSpec):
        if n > schemas.MAX_EXACT_BINOMIAL_NODES:
            raise ValueError(
                f"service cap: marginalized binomial chains up to "
                f"{schemas.MAX_EXACT_BINOMIAL_NODES} nodes, got {n}"
            )
        matrix = exact.transition_matrix_binomial(spec.n_nodes, spec.edge_prob, req.eta)
        edge_prob = spec.edge_prob
    else:
        if n > schemas.MAX_EXACT_FIXED_NODES:
            raise ValueError(
                f"service cap: exact fixed-graph chains up to "
                f"{schemas.MAX_EXACT_FIXED_NODES} nodes, got {n}; use the CLI for larger chains"
            )
        matrix = exact.transition_matrix_fixed(spec.graph, req.eta)
        edge_prob = None

    classification = exact.classify_states(matrix)
    stationary = None
    stationary_error = None
    try:
        stationary = exact.stationary_distribution(matrix)
    except NotErgodicError as err:
        stationary_error = str(err)
    checks = exact.matrix_checks(matrix, req.eta, edge_prob) if req.verify else None

    return schemas.ExactResponse(
        n_nodes=n,
        n_states=matrix.shape[0],
        eta=req.eta,
        p=edge_prob,
        convention=exact.ROW_CONVENTION,
        indexing=exact.INDEXING_CONVENTION,
        matrix=matrix.tolist() if req.include_matrix else None,
        classification=schemas.Classification(
            absorbing=sorted(classification.absorbing),
            transient=sorted(classification.transient),
            recurrent_nonabsorbing=sorted(classification.recurrent_nonabsorbing),
        ),
        stationary=None if stationary is None else [float(x) for x in stationary],
        stationary_error=stationary_error,
        expected_sum_step=[float(x) for x in exact.expected_sum_step(matrix)],
        checks=None if checks is None else [schemas.CheckReport(**c) for c in checks],
    )


@app.post("/sweep", response_model=schemas.SweepResponse)
def sweep(req: schemas.SweepRequest) -> schemas.SweepResponse:
    def spec_factory(p: float | None) -> graphs.GraphProcessSpec:
        if p is None:
            return req.topology.to_spec()
        return graphs.BinomialGraphSpec(n_nodes=req.topology.nodes, edge_prob=p)

    points = sweeps.run_sweep(
        spec_factory,
        req.etas,
        req.ps,
        req.metric,
        steps=req.steps,
        trials=req.trials,
        master_seed=req.seed,
        burn_in=req.burn_in,
        init=req.init,
    )
    return schemas.SweepResponse(
        metric=req.metric,
        seed=req.seed,
        points=[
            schemas.SweepPointModel(
                eta=p.eta,
                p=p.edge_prob,
                metric=p.metric,
                value=p.value,
                uncertainty=p.uncertainty,
                seed=p.seed,
            )
            for p in points
        ],
    )
