"""Linear goal-programming SBM.

Each efficiency dimension gets a goal row defining its deviation ``d_g`` as
the period-averaged input excess ratio plus the period-averaged slack ratio
of the dimension's own outputs.  The objective maximizes the (weighted) sum
of deviations, i.e. minimizes ``sum_g -w_g d_g``.  No Charnes-Cooper scaling
is involved, so intensities and slacks come out in original units.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping

from dyndea.envelopment import RTS, SlackKey, add_envelopment, envelopment_rows, intensity_name
from dyndea.lp import LpBuilder, LpProblem, LpStatus, SolverOptions, solve
from dyndea.panel import NormalizedPanel
from dyndea.regularization import RegularizationConfig
from dyndea.report import ScoreTable
from dyndea.sbm import _metadata
from dyndea.scores import ScoreReport, failed_report, score_report

__all__ = ["GpConfig", "GpRun", "BoundCheck", "build_gpsbm", "solve_gpsbm", "linear_bound", "evaluate_all_gpsbm"]


def deviation_name(g: str) -> str:
    return f"d[{g}]"


@dataclass(frozen=True)
class GpConfig:
    weights: Mapping[str, float] | None = None  # per dimension id, default 1
    rts: RTS = RTS.VRS
    regularization: RegularizationConfig = field(default_factory=RegularizationConfig)
    solver: SolverOptions = field(default_factory=SolverOptions)

    def __post_init__(self) -> None:
        object.__setattr__(self, "rts", RTS(self.rts))
        if self.weights is not None:
            if any(not (w > 0 and math.isfinite(w)) for w in self.weights.values()):
                raise ValueError("goal weights must be positive")

    def weight(self, g: str) -> float:
        return 1.0 if self.weights is None else float(self.weights.get(g, 1.0))


@dataclass(frozen=True)
class GpRun:
    dmu: str
    status: str
    objective: float = math.nan
    lambdas: Mapping[tuple[str, str], float] = field(default_factory=dict)
    slacks: Mapping[SlackKey, float] = field(default_factory=dict)
    deviations: Mapping[str, float] = field(default_factory=dict)
    # period-averaged input excess ratio and per-dimension output slack ratio
    input_term: float = math.nan
    output_terms: Mapping[str, float] = field(default_factory=dict)
    iterations: int = 0
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status == LpStatus.OPTIMAL.value


def _goal_coefficients(panel: NormalizedPanel, o: int, g: str) -> tuple[dict[str, float], dict[str, float]]:
    """(input-term, output-term) coefficients on slack variables for dimension ``g``."""
    cfg = panel.config
    T = len(cfg.periods)
    des, und = cfg.members(g)
    n_out = len(des) + len(und)
    inp: dict[str, float] = {}
    out: dict[str, float] = {}
    for row in envelopment_rows(cfg):
        value = float(panel.data(row.variable)[o, row.t])
        if row.dimension is None and row.variable in cfg.inputs:
            inp[row.slack_name] = 1.0 / (cfg.I * T * value)
        elif row.dimension == g:
            out[row.slack_name] = 1.0 / (T * n_out * value)
    return inp, out


def build_gpsbm(panel: NormalizedPanel, dmu: str, options: GpConfig | None = None) -> LpProblem:
    """Goal-programming LP for ``dmu``; with rho > 0 this is the regularized variant."""
    options = options or GpConfig()
    cfg = panel.config
    o = panel.dmus.index(dmu)
    b = LpBuilder()
    rows = envelopment_rows(cfg)
    add_envelopment(b, panel, o, rows, options.regularization, options.rts, scale=None)
    for g in cfg.dimension_ids:
        b.add_variable(deviation_name(g))
    for g in cfg.dimension_ids:
        inp, out = _goal_coefficients(panel, o, g)
        coeffs = {**inp, **out, deviation_name(g): -1.0}
        b.add_constraint(coeffs, "=", 0.0, name=f"goal[{g}]")
    b.set_objective({deviation_name(g): -options.weight(g) for g in cfg.dimension_ids}, "min")
    return b.build()


def solve_gpsbm(panel: NormalizedPanel, dmu: str, options: GpConfig | None = None) -> GpRun:
    options = options or GpConfig()
    problem = build_gpsbm(panel, dmu, options)
    sol = solve(problem, options.solver)
    if not sol.is_optimal:
        # slacks are bounded by the intensities, which the input rows bound
        assert sol.status is not LpStatus.UNBOUNDED, f"GP-SBM LP for {dmu} reported unbounded"
        return GpRun(dmu, sol.status.value, iterations=sol.iterations, message=sol.message)
    cfg = panel.config
    o = panel.dmus.index(dmu)
    slacks = {row.key: sol[row.slack_name] for row in envelopment_rows(cfg)}
    output_terms = {}
    input_term = math.nan
    for g in cfg.dimension_ids:
        inp, out = _goal_coefficients(panel, o, g)
        input_term = math.fsum(a * sol[v] for v, a in inp.items())
        output_terms[g] = math.fsum(a * sol[v] for v, a in out.items())
    return GpRun(
        dmu=dmu,
        status=LpStatus.OPTIMAL.value,
        objective=sol.objective,
        lambdas={(d, p): sol[intensity_name(d, p)] for p in cfg.periods for d in panel.dmus},
        slacks=slacks,
        deviations={g: sol[deviation_name(g)] for g in cfg.dimension_ids},
        input_term=input_term,
        output_terms=output_terms,
        iterations=sol.iterations,
    )


@dataclass(frozen=True)
class BoundCheck:
    """``1 - theta <= d`` for one dimension, theta being the period-averaged ratio score."""

    dimension: str
    deviation: float
    theta: float
    holds: bool


def linear_bound(run: GpRun, g: str, tol: float = 1e-9) -> BoundCheck:
    """The linear upper bound on a dimension's inefficiency, certified on ``run``.

    With ``A`` the averaged input excess ratio and ``B`` the averaged output
    slack ratio, ``1 - (1 - A)/(1 + B) = (A + B)/(1 + B) <= A + B = d_g``.
    """
    if not run.ok:
        raise ValueError(f"run for {run.dmu} is not optimal ({run.status})")
    a, b = run.input_term, run.output_terms[g]
    theta = (1.0 - a) / (1.0 + b)
    d = run.deviations[g]
    return BoundCheck(g, d, theta, 1.0 - theta <= d + tol)


def evaluate_all_gpsbm(
    panel: NormalizedPanel, options: GpConfig | None = None, max_workers: int | None = None
) -> ScoreTable:
    options = options or GpConfig()

    def one(dmu: str) -> ScoreReport:
        run = solve_gpsbm(panel, dmu, options)
        if not run.ok:
            return failed_report(panel, dmu, run.status, run.message)
        return score_report(run, panel, dmu)

    if max_workers and max_workers > 1:
        with ThreadPoolExecutor(max_workers) as pool:
            reports = list(pool.map(one, panel.dmus))
    else:
        reports = [one(d) for d in panel.dmus]
    meta = _metadata("gpsbm", options.rts, options.regularization, options.solver)
    if options.weights:
        meta["goal_weights"] = ",".join(f"{g}:{options.weight(g)!r}" for g in panel.config.dimension_ids)
    return ScoreTable("gpsbm", tuple(reports), meta)
