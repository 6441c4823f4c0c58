"""Independent checks on the DEA linear programs.

``dinkelbach_sbm`` solves the fractional SBM directly in original units by
parametric iteration, without the Charnes-Cooper scale variable.
``grid_search_gpsbm`` brute-forces the goal-programming objective over a
grid on the intensity simplex for tiny instances.  Both assemble their own
constraints from the panel and share only the LP solver with the models.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from dyndea.envelopment import RTS
from dyndea.lp import LpStatus, SolverOptions, build, solve
from dyndea.panel import NormalizedPanel, Role
from dyndea.regularization import RegularizationConfig

__all__ = [
    "OracleError",
    "DinkelbachTrace",
    "dinkelbach_sbm",
    "GridResult",
    "grid_search_gpsbm",
    "grid_supported",
    "MAX_GRID_DMUS",
    "MAX_GRID_PERIODS",
]

MAX_GRID_DMUS = 4
MAX_GRID_PERIODS = 2


class OracleError(RuntimeError):
    pass


@dataclass(frozen=True)
class DinkelbachTrace:
    mus: tuple[float, ...]
    values: tuple[float, ...]  # F(mu_k) = min N - mu_k D
    mu: float
    iterations: int
    tolerance: float

    @property
    def converged(self) -> bool:
        return bool(self.values) and abs(self.values[-1]) <= self.tolerance


def _lam(dmu: str, period: str) -> str:
    return f"l_{dmu}_{period}"


def _slack(var: str, period: str, g: str | None) -> str:
    return f"s_{var}_{period}" + (f"_{g}" if g is not None else "")


def _fractional_parts(panel: NormalizedPanel, o: int) -> tuple[list, dict[str, float], dict[str, float]]:
    """Constraints of the fractional SBM plus the slack weights of N and D.

    N = 1 - sum(wn * s) and D = 1 + sum(wd * s).
    """
    cfg = panel.config
    T = len(cfg.periods)
    dmus = panel.dmus
    cons: list = []
    wn: dict[str, float] = {}
    wd: dict[str, float] = {}
    n_excess = cfg.I + cfg.F
    n_short = cfg.R + cfg.K + cfg.C

    def row(var: str, t: int, g: str | None, shortfall: bool) -> str:
        p = cfg.periods[t]
        a = panel.data(var)[:, t]
        s = _slack(var, p, g)
        coeffs = {_lam(d, p): float(a[j]) for j, d in enumerate(dmus)}
        coeffs[s] = -1.0 if shortfall else 1.0
        cons.append((coeffs, "=", float(a[o])))
        return s

    for t, p in enumerate(cfg.periods):
        for v in cfg.inputs:
            wn[row(v, t, None, False)] = 1.0 / (T * n_excess * panel.data(v)[o, t])
        for v in cfg.undesirable_carryovers:
            wn[row(v, t, None, False)] = 1.0 / (T * n_excess * panel.data(v)[o, t])
        for v in cfg.desirable_carryovers:
            wd[row(v, t, None, True)] = 1.0 / (T * n_short * panel.data(v)[o, t])
        for g in cfg.dimension_ids:
            des, und = cfg.members(g)
            for v in des:
                wd[row(v, t, g, True)] = 1.0 / (T * n_short * panel.data(v)[o, t])
            for v in und:
                wd[row(v, t, g, False)] = 1.0 / (T * n_short * panel.data(v)[o, t])
    for v in (*cfg.desirable_carryovers, *cfg.undesirable_carryovers):
        a = panel.data(v)
        for t in range(T - 1):
            coeffs: dict[str, float] = {}
            for j, d in enumerate(dmus):
                coeffs[_lam(d, cfg.periods[t])] = float(a[j, t])
                coeffs[_lam(d, cfg.periods[t + 1])] = -float(a[j, t])
            cons.append((coeffs, "=", 0.0))
    return cons, wn, wd


def dinkelbach_sbm(
    panel: NormalizedPanel,
    dmu: str,
    rts: RTS = RTS.VRS,
    solver: SolverOptions | None = None,
    tol: float = 1e-9,
    max_iterations: int = 100,
) -> tuple[float, DinkelbachTrace]:
    """Minimize N(s)/D(s) over the unregularized envelopment set.

    Each step solves min N - mu*D and updates mu to the ratio at the new
    point, starting from mu = 1.  Returns the optimal ratio and the trace.
    """
    rts = RTS(rts)
    cfg = panel.config
    o = panel.dmus.index(dmu)
    cons, wn, wd = _fractional_parts(panel, o)
    if rts is RTS.VRS:
        for p in cfg.periods:
            cons.append(({_lam(d, p): 1.0 for d in panel.dmus}, "=", 1.0))
    variables = [_lam(d, p) for p in cfg.periods for d in panel.dmus] + list(wn) + list(wd)

    mu = 1.0
    mus: list[float] = []
    values: list[float] = []
    for _ in range(max_iterations):
        obj = {v: -w for v, w in wn.items()}
        for v, w in wd.items():
            obj[v] = obj.get(v, 0.0) - mu * w
        sol = solve(build(variables, cons, ("min", obj)), solver)
        if sol.status is not LpStatus.OPTIMAL:
            raise OracleError(f"Dinkelbach subproblem for {dmu} ended {sol.status.value}: {sol.message}")
        N = 1.0 - math.fsum(w * sol[v] for v, w in wn.items())
        D = 1.0 + math.fsum(w * sol[v] for v, w in wd.items())
        F = N - mu * D
        mus.append(mu)
        values.append(F)
        if abs(F) <= tol:
            return mu, DinkelbachTrace(tuple(mus), tuple(values), mu, len(mus), tol)
        mu = N / D
    raise OracleError(f"Dinkelbach did not converge for {dmu} within {max_iterations} iterations")


@dataclass(frozen=True)
class GridResult:
    objective: float  # best sum_g w_g d_g found on the grid
    lambdas: Mapping[str, tuple[float, ...]] = field(default_factory=dict)  # period -> weights
    points: int = 0


def grid_supported(panel: NormalizedPanel, rts: RTS = RTS.VRS) -> str | None:
    """None when the grid oracle applies, else the reason it does not."""
    cfg = panel.config
    if RTS(rts) is not RTS.VRS:
        return "grid search needs the convexity rows (VRS)"
    if len(panel.dmus) > MAX_GRID_DMUS or len(cfg.periods) > MAX_GRID_PERIODS:
        return (
            f"instance has {len(panel.dmus)} DMUs and {len(cfg.periods)} periods; "
            f"grid search handles at most {MAX_GRID_DMUS} and {MAX_GRID_PERIODS}"
        )
    for v in (*cfg.desirable_carryovers, *cfg.undesirable_carryovers):
        a = panel.data(v)
        if len(cfg.periods) > 1 and np.any(a[:, :-1] != a[:1, :-1]):
            return f"carry-over {v!r} varies across DMUs within a period, so linking rows are not automatic"
    return None


def _simplex_grid(n: int, resolution: int) -> np.ndarray:
    """All weight vectors in the unit simplex with coordinates in multiples of 1/resolution."""
    pts = []
    for bars in itertools.combinations(range(resolution + n - 1), n - 1):
        edges = (-1, *bars, resolution + n - 1)
        pts.append([edges[k + 1] - edges[k] - 1 for k in range(n)])
    return np.array(pts, dtype=float) / resolution


def grid_search_gpsbm(
    panel: NormalizedPanel,
    dmu: str,
    resolution: int,
    regularization: RegularizationConfig | None = None,
    weights: Mapping[str, float] | None = None,
) -> GridResult:
    """Best weighted deviation sum over grid intensities.

    Slacks follow in closed form from each grid point; a point is feasible
    when every slack is non-negative.  Periods are independent because the
    linking rows hold identically on supported instances.
    """
    if resolution < 1:
        raise ValueError("resolution must be a positive integer")
    reason = grid_supported(panel)
    if reason:
        raise OracleError(reason)
    reg = regularization or RegularizationConfig()
    cfg = panel.config
    o = panel.dmus.index(dmu)
    T = len(cfg.periods)
    grid = _simplex_grid(len(panel.dmus), resolution)

    def w(g: str) -> float:
        return 1.0 if weights is None else float(weights.get(g, 1.0))

    total = 0.0
    best_lambdas: dict[str, tuple[float, ...]] = {}
    for t, p in enumerate(cfg.periods):
        feasible = np.ones(len(grid), dtype=bool)
        score = np.zeros(len(grid))

        def slack(var: str, role: Role, g: str | None) -> np.ndarray:
            a = panel.data(var)[:, t]
            sign = -1.0 if role.is_desirable else 1.0
            return sign * (a[o] - grid @ a) + reg.rho(var, role, p, g)

        weight_sum = sum(w(g) for g in cfg.dimension_ids)
        for v in cfg.inputs:
            s = slack(v, Role.INPUT, None)
            feasible &= s >= 0
            score += weight_sum * s / (cfg.I * T * panel.data(v)[o, t])
        for g in cfg.dimension_ids:
            des, und = cfg.members(g)
            n_g = len(des) + len(und)
            for v, role in [(v, Role.DESIRABLE_OUTPUT) for v in des] + [(v, Role.UNDESIRABLE_OUTPUT) for v in und]:
                s = slack(v, role, g)
                feasible &= s >= 0
                score += w(g) * s / (T * n_g * panel.data(v)[o, t])
        for v in cfg.desirable_carryovers:
            feasible &= slack(v, Role.DESIRABLE_CARRYOVER, None) >= 0
        for v in cfg.undesirable_carryovers:
            feasible &= slack(v, Role.UNDESIRABLE_CARRYOVER, None) >= 0
        if not feasible.any():
            raise OracleError(f"no feasible grid point in period {p!r} at resolution {resolution}")
        k = int(np.argmax(np.where(feasible, score, -np.inf)))
        total += float(score[k])
        best_lambdas[p] = tuple(float(x) for x in grid[k])
    return GridResult(total, best_lambdas, len(grid) * T)
