"""Dynamic multi-dimension SBM in its linearized (Charnes-Cooper) form.

The fractional program minimizes the ratio of the period-averaged input and
undesirable carry-over efficiency to the period-averaged output and
desirable carry-over inefficiency.  Fixing the denominator to one with a
scale variable ``q`` yields a linear program in ``q``, scaled intensities
``Lambda = q * lambda`` and scaled slacks ``s_bar = q * s``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping

from dyndea.envelopment import RTS, SlackKey, add_envelopment, envelopment_rows, intensity_name
from dyndea.lp import LpBuilder, LpProblem, LpStatus, SolverOptions, solve
from dyndea.panel import NormalizedPanel, Role
from dyndea.regularization import RegularizationConfig
from dyndea.report import ScoreTable
from dyndea.scores import ScoreReport, dimension_score, failed_report, overall_score, score_report

__all__ = [
    "SbmConfig",
    "SbmRun",
    "build_sbm",
    "solve_sbm",
    "dimension_score",
    "overall_score",
    "evaluate_all_sbm",
]

Q = "q"


@dataclass(frozen=True)
class SbmConfig:
    rts: RTS = RTS.VRS
    regularization: RegularizationConfig = field(default_factory=RegularizationConfig)
    solver: SolverOptions = field(default_factory=SolverOptions)
    # False drops carry-over slacks from the objective; used for the per-dimension baselines
    carryovers_in_objective: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "rts", RTS(self.rts))


@dataclass(frozen=True)
class SbmRun:
    dmu: str
    status: str
    objective: float = math.nan
    q: float = math.nan
    intensities: Mapping[tuple[str, str], float] = field(default_factory=dict)
    lambdas: Mapping[tuple[str, str], float] = field(default_factory=dict)
    scaled_slacks: Mapping[SlackKey, float] = field(default_factory=dict)
    slacks: Mapping[SlackKey, float] = field(default_factory=dict)
    iterations: int = 0
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status == LpStatus.OPTIMAL.value


def _objective_weights(panel: NormalizedPanel, o: int, options: SbmConfig) -> tuple[dict[str, float], dict[str, float]]:
    """(objective coefficients, normalization-row coefficients) on the scaled slacks."""
    cfg = panel.config
    T = len(cfg.periods)
    use_carry = options.carryovers_in_objective
    n_excess = cfg.I + (cfg.F if use_carry else 0)
    n_short = cfg.R + cfg.K + (cfg.C if use_carry else 0)
    obj = {Q: 1.0}
    norm = {Q: 1.0}
    for row in envelopment_rows(cfg):
        value = float(panel.data(row.variable)[o, row.t])
        if row.role is Role.INPUT or (use_carry and row.role is Role.UNDESIRABLE_CARRYOVER):
            obj[row.slack_name] = -1.0 / (T * n_excess * value)
        elif row.role.is_output or (use_carry and row.role is Role.DESIRABLE_CARRYOVER):
            norm[row.slack_name] = 1.0 / (T * n_short * value)
    return obj, norm


def build_sbm(panel: NormalizedPanel, dmu: str, options: SbmConfig | None = None) -> LpProblem:
    """Linear program for evaluating ``dmu``; with rho > 0 this is the regularized variant."""
    options = options or SbmConfig()
    o = panel.dmus.index(dmu)
    b = LpBuilder()
    b.add_variable(Q)
    rows = envelopment_rows(panel.config)
    obj, norm = _objective_weights(panel, o, options)
    add_envelopment(b, panel, o, rows, options.regularization, options.rts, scale=Q)
    b.add_constraint(norm, "=", 1.0, name="normalization")
    b.set_objective(obj, "min")
    return b.build()


def solve_sbm(panel: NormalizedPanel, dmu: str, options: SbmConfig | None = None) -> SbmRun:
    options = options or SbmConfig()
    problem = build_sbm(panel, dmu, options)
    sol = solve(problem, options.solver)
    if not sol.is_optimal:
        # an unbounded SBM means the builder is wrong: q and every ratio are bounded
        assert sol.status is not LpStatus.UNBOUNDED, f"SBM LP for {dmu} reported unbounded"
        return SbmRun(dmu, sol.status.value, iterations=sol.iterations, message=sol.message)
    q = sol[Q]
    if q <= options.solver.feasibility_tol:
        return SbmRun(
            dmu,
            "degenerate",
            objective=sol.objective,
            q=q,
            iterations=sol.iterations,
            message=f"optimal scale q*={q:.3g} is zero; slacks cannot be recovered",
        )
    cfg = panel.config
    intens = {(d, p): sol[intensity_name(d, p)] for p in cfg.periods for d in panel.dmus}
    scaled = {row.key: sol[row.slack_name] for row in envelopment_rows(cfg)}
    return SbmRun(
        dmu=dmu,
        status=LpStatus.OPTIMAL.value,
        objective=sol.objective,
        q=q,
        intensities=intens,
        lambdas={k: v / q for k, v in intens.items()},
        scaled_slacks=scaled,
        slacks={k: v / q for k, v in scaled.items()},
        iterations=sol.iterations,
    )


def evaluate_all_sbm(
    panel: NormalizedPanel, options: SbmConfig | None = None, max_workers: int | None = None
) -> ScoreTable:
    """Solve one LP per DMU and assemble the score table; failures are kept per row."""
    options = options or SbmConfig()

    def one(dmu: str) -> ScoreReport:
        run = solve_sbm(panel, dmu, options)
        if not run.ok:
            return failed_report(panel, dmu, run.status, run.message)
        return score_report(run, panel, dmu)

    if max_workers and max_workers > 1:
        with ThreadPoolExecutor(max_workers) as pool:
            reports = list(pool.map(one, panel.dmus))
    else:
        reports = [one(d) for d in panel.dmus]
    return ScoreTable("sbm", tuple(reports), _metadata("sbm", options.rts, options.regularization, options.solver))


def _metadata(model: str, rts: RTS, reg: RegularizationConfig, solver: SolverOptions) -> dict[str, str]:
    return {
        "model": model,
        "rts": rts.value,
        "rho": reg.describe(),
        "feasibility_tol": repr(solver.feasibility_tol),
        "optimality_tol": repr(solver.optimality_tol),
        "max_iterations": str(solver.max_iterations),
        "pivot_rule": solver.pivot_rule.value,
    }
