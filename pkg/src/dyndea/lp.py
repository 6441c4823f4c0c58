"""Dense two-phase simplex solver and a small LP builder.

Problems here are small (at most a few hundred rows and columns), so the
solver works on a dense tableau and refactors the final basis from the
original data to clean up accumulated round-off.  Pivoting uses Dantzig's
rule and falls back to Bland's rule after a run of degenerate pivots.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "LpBuildError",
    "LpProblem",
    "LpBuilder",
    "LpSolution",
    "LpStatus",
    "PivotRule",
    "SolverOptions",
    "build",
    "solve",
]

EQ, LE, GE = "=", "<=", ">="
_SENSES = {EQ: EQ, "==": EQ, LE: LE, "<": LE, GE: GE, ">": GE}
_PIVOT_TOL = 1e-7  # relative to the largest entry of the entering column
_RETRY_VIOLATION = 1e-7
_PERTURBATION = 1e-7  # relative size of the anti-stalling right-hand-side shift
_PERTURBATION_SEED = 20240


class LpBuildError(ValueError):
    """Raised for malformed problems (duplicate ids, unknown variables, NaN)."""


class LpStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    ITERATION_LIMIT = "iteration_limit"


class PivotRule(str, Enum):
    BLAND = "bland"
    DANTZIG = "dantzig"  # perturbs on a degenerate stall, then falls back to Bland


@dataclass(frozen=True)
class SolverOptions:
    feasibility_tol: float = 1e-9
    optimality_tol: float = 1e-9
    max_iterations: int = 50_000
    pivot_rule: PivotRule = PivotRule.DANTZIG
    degenerate_streak: int = 50
    compute_duals: bool = True

    def __post_init__(self) -> None:
        if not (self.feasibility_tol > 0 and self.optimality_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        object.__setattr__(self, "pivot_rule", PivotRule(self.pivot_rule))


@dataclass(frozen=True)
class LpProblem:
    """An immutable linear program ``min/max c.x  s.t.  A x (sense) b``.

    Variables have lower bound 0 or -inf and no finite upper bound.
    """

    variable_names: tuple[str, ...]
    lower: np.ndarray
    A: np.ndarray
    senses: tuple[str, ...]
    b: np.ndarray
    c: np.ndarray
    maximize: bool = False
    constraint_names: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        for arr in (self.lower, self.A, self.b, self.c):
            arr.setflags(write=False)

    @property
    def num_variables(self) -> int:
        return len(self.variable_names)

    @property
    def num_constraints(self) -> int:
        return len(self.senses)

    def index(self, name: str) -> int:
        return self._index_map()[name]

    def _index_map(self) -> dict[str, int]:
        cached = self.__dict__.get("_idx")
        if cached is None:
            cached = {v: k for k, v in enumerate(self.variable_names)}
            object.__setattr__(self, "_idx", cached)
        return cached

    def to_lp_format(self) -> str:
        """Render in CPLEX-LP text format for cross-checking with external solvers."""

        def name(k: int) -> str:
            return f"v{k}"

        def expr(row: np.ndarray) -> str:
            terms = [f"{'-' if a < 0 else '+'} {abs(float(a))!r} {name(k)}" for k, a in enumerate(row) if a != 0.0]
            return " ".join(terms) if terms else "0 v0"

        out = ["\\ variables: " + ", ".join(f"{name(k)}={v}" for k, v in enumerate(self.variable_names))]
        out.append("Maximize" if self.maximize else "Minimize")
        out.append(f" obj: {expr(self.c)}")
        out.append("Subject To")
        for i, sense in enumerate(self.senses):
            label = self.constraint_names[i] if self.constraint_names else f"c{i}"
            label = "".join(ch if ch.isalnum() or ch in "_." else "_" for ch in label)
            out.append(f" {label}: {expr(self.A[i])} {sense} {float(self.b[i])!r}")
        out.append("Bounds")
        for k, lo in enumerate(self.lower):
            out.append(f" {name(k)} free" if math.isinf(lo) else f" {name(k)} >= 0")
        out.append("End")
        return "\n".join(out) + "\n"


class LpBuilder:
    """Incremental construction of an :class:`LpProblem` by variable name."""

    def __init__(self) -> None:
        self._names: list[str] = []
        self._lower: list[float] = []
        self._index: dict[str, int] = {}
        self._rows: list[dict[int, float]] = []
        self._senses: list[str] = []
        self._rhs: list[float] = []
        self._row_names: list[str] = []
        self._obj: dict[int, float] = {}
        self._maximize = False

    def add_variable(self, name: str, lower: float = 0.0) -> int:
        if name in self._index:
            raise LpBuildError(f"duplicate variable id {name!r}")
        if not (lower == 0.0 or lower == -math.inf):
            raise LpBuildError(f"lower bound of {name!r} must be 0 or -inf, got {lower}")
        self._index[name] = len(self._names)
        self._names.append(name)
        self._lower.append(float(lower))
        return self._index[name]

    def _resolve(self, coeffs: Mapping[str, float]) -> dict[int, float]:
        row: dict[int, float] = {}
        for var, a in coeffs.items():
            if var not in self._index:
                raise LpBuildError(f"undeclared variable {var!r}")
            a = float(a)
            if not math.isfinite(a):
                raise LpBuildError(f"non-finite coefficient for {var!r}")
            k = self._index[var]
            row[k] = row.get(k, 0.0) + a
        return row

    def add_constraint(self, coeffs: Mapping[str, float], sense: str, rhs: float, name: str | None = None) -> int:
        if sense not in _SENSES:
            raise LpBuildError(f"unknown constraint sense {sense!r}")
        rhs = float(rhs)
        if not math.isfinite(rhs):
            raise LpBuildError(f"non-finite right-hand side in {name or len(self._rows)}")
        self._rows.append(self._resolve(coeffs))
        self._senses.append(_SENSES[sense])
        self._rhs.append(rhs)
        self._row_names.append(name if name is not None else f"c{len(self._rows) - 1}")
        return len(self._rows) - 1

    def set_objective(self, coeffs: Mapping[str, float], sense: str = "min") -> None:
        if sense not in ("min", "max"):
            raise LpBuildError(f"objective sense must be 'min' or 'max', got {sense!r}")
        self._obj = self._resolve(coeffs)
        self._maximize = sense == "max"

    def build(self) -> LpProblem:
        n, m = len(self._names), len(self._rows)
        A = np.zeros((m, n))
        for i, row in enumerate(self._rows):
            for k, a in row.items():
                A[i, k] = a
        c = np.zeros(n)
        for k, a in self._obj.items():
            c[k] = a
        return LpProblem(
            variable_names=tuple(self._names),
            lower=np.array(self._lower, dtype=float),
            A=A,
            senses=tuple(self._senses),
            b=np.array(self._rhs, dtype=float),
            c=c,
            maximize=self._maximize,
            constraint_names=tuple(self._row_names),
        )


def build(
    variables: Iterable[str | tuple[str, float]],
    constraints: Iterable[tuple[Mapping[str, float], str, float]],
    objective: tuple[str, Mapping[str, float]],
) -> LpProblem:
    """One-shot construction.

    ``variables`` holds names or ``(name, lower)`` pairs, ``constraints`` holds
    ``(coeffs, sense, rhs)`` triples and ``objective`` is ``(sense, coeffs)``.
    """
    builder = LpBuilder()
    for v in variables:
        if isinstance(v, str):
            builder.add_variable(v)
        else:
            builder.add_variable(*v)
    for coeffs, sense, rhs in constraints:
        builder.add_constraint(coeffs, sense, rhs)
    sense, coeffs = objective
    builder.set_objective(coeffs, sense)
    return builder.build()


@dataclass(frozen=True)
class LpSolution:
    status: LpStatus
    objective: float
    x: np.ndarray
    iterations: int
    variable_names: tuple[str, ...]
    duals: np.ndarray | None = None
    max_violation: float = math.nan
    message: str = ""
    _index: dict[str, int] = field(default_factory=dict, repr=False, compare=False)

    @property
    def is_optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL

    def __getitem__(self, name: str) -> float:
        if not self._index:
            self._index.update({v: k for k, v in enumerate(self.variable_names)})
        return float(self.x[self._index[name]])

    def values(self) -> dict[str, float]:
        return {v: float(a) for v, a in zip(self.variable_names, self.x)}


def constraint_violation(problem: LpProblem, x: np.ndarray) -> float:
    """Largest violation of any constraint or bound at ``x``."""
    lhs = problem.A @ x
    worst = 0.0
    for i, sense in enumerate(problem.senses):
        gap = lhs[i] - problem.b[i]
        if sense == EQ:
            worst = max(worst, abs(gap))
        elif sense == LE:
            worst = max(worst, gap)
        else:
            worst = max(worst, -gap)
    if x.size:
        worst = max(worst, float(np.max(problem.lower - x)))
    return worst


class _Tableau:
    """Dense simplex tableau over a standard-form problem ``A x = b, x >= 0, b >= 0``."""

    def __init__(self, A: np.ndarray, b: np.ndarray, basis: list[int], options: SolverOptions) -> None:
        m, n = A.shape
        self.T = np.zeros((m + 1, n + 1))
        self.T[:m, :n] = A
        self.T[:m, n] = b
        self.basis = list(basis)
        self.opts = options
        self.iterations = 0
        # columns still in play; artificials are retired once they leave the basis
        self.active = np.ones(n + 1, dtype=bool)
        self.retire_on_exit = np.zeros(n, dtype=bool)
        # unperturbed right-hand side, carried through pivots while a perturbation is in force
        self.clean: np.ndarray | None = None

    @property
    def m(self) -> int:
        return self.T.shape[0] - 1

    def set_costs(self, c: np.ndarray) -> None:
        # reduced costs c_j - c_B B^-1 A_j; the tableau body already holds B^-1 A
        n = self.T.shape[1] - 1
        self.T[-1, :n] = c
        self.T[-1, n] = 0.0
        for i, k in enumerate(self.basis):
            if c[k] != 0.0:
                self.T[-1] -= c[k] * self.T[i]

    def pivot(self, row: int, col: int) -> None:
        T = self.T
        leaving = self.basis[row]
        if leaving < self.retire_on_exit.size and self.retire_on_exit[leaving]:
            self.active[leaving] = False
        pivot = T[row, col]
        T[row] /= pivot
        colvals = T[:, col].copy()
        colvals[row] = 0.0
        rows = np.flatnonzero(colvals)
        # only columns with a nonzero in the pivot row change
        cols = np.flatnonzero((T[row] != 0.0) & self.active)
        if rows.size and cols.size:
            T[np.ix_(rows, cols)] -= np.outer(colvals[rows], T[row, cols])
        T[:, col] = 0.0
        T[row, col] = 1.0
        if self.clean is not None:
            self.clean[row] /= pivot
            self.clean -= colvals * self.clean[row]
        self.basis[row] = col
        self.iterations += 1

    def perturb(self) -> None:
        """Shift every right-hand side up by a small deterministic amount to break degenerate ties."""
        n = self.T.shape[1] - 1
        rhs = self.T[:-1, n]
        self.clean = self.T[:, n].copy()
        rng = np.random.default_rng(_PERTURBATION_SEED)
        scale = max(1.0, float(np.abs(rhs).max(initial=0.0)))
        rhs += _PERTURBATION * scale * rng.uniform(1.0, 2.0, rhs.size)

    def restore(self, allowed: np.ndarray) -> bool:
        """Drop the perturbation and repair the primal side with dual simplex pivots.

        The basis stays dual feasible throughout, so the result is optimal
        for the unperturbed problem.  False if a row cannot be repaired
        within the iteration budget.
        """
        T = self.T
        n = T.shape[1] - 1
        T[:, n] = self.clean
        self.clean = None
        tol = self.opts.feasibility_tol
        while True:
            rhs = T[:-1, n]
            row = int(np.argmin(rhs))
            if rhs[row] >= -tol:
                return True
            if self.iterations >= self.opts.max_iterations:
                return False
            line = T[row, :n]
            pivot_tol = _PIVOT_TOL * max(1.0, float(np.abs(line).max()))
            cols = np.flatnonzero((line < -pivot_tol) & allowed & self.active[:n])
            if cols.size == 0:
                return False
            ratios = np.maximum(T[-1, cols], 0.0) / -line[cols]
            self.pivot(row, int(cols[np.argmin(ratios)]))

    def run(self, allowed: np.ndarray, budget: int) -> LpStatus:
        """Iterate to optimality over columns where ``allowed`` is True."""
        opts = self.opts
        bland = opts.pivot_rule is PivotRule.BLAND
        streak = 0
        perturbed = False
        T = self.T
        n = T.shape[1] - 1
        while True:
            if self.iterations >= budget:
                return LpStatus.ITERATION_LIMIT
            reduced = np.where(allowed & self.active[:n], T[-1, :n], 0.0)
            candidates = np.nonzero(reduced < -opts.optimality_tol)[0]
            if candidates.size == 0:
                if self.clean is None or not self.restore(allowed):
                    # an unrepairable restore shows up as a violation and triggers the Bland retry
                    return LpStatus.OPTIMAL
                continue
            if bland:
                col = int(candidates[0])
            else:
                col = int(candidates[np.argmin(reduced[candidates])])
            column = T[:-1, col]
            pivot_tol = _PIVOT_TOL * max(1.0, float(np.abs(column).max()))
            rows = np.nonzero(column > pivot_tol)[0]
            if rows.size == 0:
                return LpStatus.UNBOUNDED
            rhs = np.maximum(T[rows, n], 0.0)
            ratios = rhs / column[rows]
            best = ratios.min()
            if bland:
                # noise-level right-hand sides count as zero so degenerate rows tie exactly
                rhs = np.where(rhs > opts.feasibility_tol, rhs, 0.0)
                ratios = rhs / column[rows]
                best = ratios.min()
                ties = rows[ratios <= best + 1e-12 * max(1.0, best)]
                row = int(min(ties, key=lambda r: self.basis[r]))
            else:
                # Harris two-pass test: among rows whose ratio is within the
                # feasibility tolerance of the minimum, take the largest pivot
                bound = ((rhs + opts.feasibility_tol) / column[rows]).min()
                eligible = rows[ratios <= bound]
                row = int(eligible[np.argmax(column[eligible])])
                best = float(max(T[row, n], 0.0) / column[row])
            degenerate = best <= opts.feasibility_tol
            self.pivot(row, col)
            if not bland and opts.pivot_rule is PivotRule.DANTZIG:
                streak = streak + 1 if degenerate else 0
                if streak >= opts.degenerate_streak:
                    # first stall: perturb; a second stall falls back to Bland's rule
                    if not perturbed:
                        self.perturb()
                        perturbed = True
                        streak = 0
                    else:
                        bland = True


def solve(problem: LpProblem, options: SolverOptions | None = None) -> LpSolution:
    """Solve ``problem`` with the two-phase simplex method.

    Infeasibility, unboundedness and the iteration cap are reported through
    ``LpSolution.status``; the returned point is only meaningful when optimal.
    If the refactored optimum of a Dantzig run violates a constraint by more
    than ``_RETRY_VIOLATION`` the problem is re-solved under Bland's rule.
    """
    opts = options or SolverOptions()
    sol = _solve(problem, opts)
    scale = max(1.0, float(np.abs(problem.b).max(initial=0.0)))
    if sol.is_optimal and sol.max_violation > _RETRY_VIOLATION * scale and opts.pivot_rule is PivotRule.DANTZIG:
        retry = _solve(problem, replace(opts, pivot_rule=PivotRule.BLAND))
        if retry.status is not LpStatus.OPTIMAL or retry.max_violation < sol.max_violation:
            iters = sol.iterations + retry.iterations
            return replace(retry, iterations=iters)
    return sol


def _solve(problem: LpProblem, opts: SolverOptions) -> LpSolution:
    m, n = problem.A.shape

    # split free variables x = x+ - x-
    free = np.isinf(problem.lower)
    col_map = list(range(n)) + [k for k in range(n) if free[k]]
    col_sign = np.array([1.0] * n + [-1.0] * int(free.sum()))
    A_struct = problem.A[:, col_map] * col_sign
    c_struct = problem.c[col_map] * col_sign
    if problem.maximize:
        c_struct = -c_struct
    ns = A_struct.shape[1]

    # slack / surplus columns
    slack_rows = [i for i, s in enumerate(problem.senses) if s != EQ]
    S = np.zeros((m, len(slack_rows)))
    for j, i in enumerate(slack_rows):
        S[i, j] = 1.0 if problem.senses[i] == LE else -1.0
    A_std = np.hstack([A_struct, S])
    b_std = problem.b.astype(float).copy()
    flip = np.where(b_std < 0, -1.0, 1.0)
    A_std *= flip[:, None]
    b_std *= flip
    nstd = A_std.shape[1]
    c_std = np.concatenate([c_struct, np.zeros(len(slack_rows))])

    # initial basis: a +1 slack where available, else an artificial
    basis: list[int] = []
    art_rows: list[int] = []
    for i in range(m):
        slack_col = None
        if problem.senses[i] != EQ:
            j = ns + slack_rows.index(i)
            if A_std[i, j] == 1.0:
                slack_col = j
        if slack_col is None:
            art_rows.append(i)
            basis.append(-1)
        else:
            basis.append(slack_col)
    n_art = len(art_rows)
    A_full = np.hstack([A_std, np.zeros((m, n_art))])
    for a, i in enumerate(art_rows):
        A_full[i, nstd + a] = 1.0
        basis[i] = nstd + a

    tab = _Tableau(A_full, b_std, basis, opts)
    is_art = np.zeros(nstd + n_art, dtype=bool)
    is_art[nstd:] = True

    if n_art:
        tab.retire_on_exit = is_art
        tab.set_costs(is_art.astype(float))
        status = tab.run(np.ones(nstd + n_art, dtype=bool), opts.max_iterations)
        if status is LpStatus.ITERATION_LIMIT:
            return _failed(problem, status, tab.iterations, "iteration limit reached in phase one")
        scale = max(1.0, float(np.abs(b_std).max(initial=0.0)))
        if -tab.T[-1, -1] > opts.feasibility_tol * scale:
            return _failed(problem, LpStatus.INFEASIBLE, tab.iterations, _infeasibility_hint(problem, tab, art_rows, nstd))
        # drive zero-level artificials out of the basis, dropping redundant rows
        keep = []
        for r in range(tab.m):
            if tab.basis[r] >= nstd:
                row = tab.T[r, :nstd]
                cands = np.nonzero(np.abs(row) > 1e-9)[0]
                if cands.size:
                    tab.pivot(r, int(cands[np.argmax(np.abs(row[cands]))]))
                    keep.append(r)
            else:
                keep.append(r)
        if len(keep) < tab.m:
            tab.T = np.vstack([tab.T[keep], tab.T[-1:]])
            tab.basis = [tab.basis[r] for r in keep]
        kept_rows = keep
    else:
        kept_rows = list(range(m))

    tab.T = np.hstack([tab.T[:, :nstd], tab.T[:, -1:]])
    tab.active = np.ones(nstd + 1, dtype=bool)
    tab.retire_on_exit = np.zeros(nstd, dtype=bool)
    tab.set_costs(c_std)
    status = tab.run(np.ones(nstd, dtype=bool), opts.max_iterations)
    if status is not LpStatus.OPTIMAL:
        msg = "objective unbounded below" if status is LpStatus.UNBOUNDED else "iteration limit reached in phase two"
        return _failed(problem, status, tab.iterations, msg)

    # refactor the final basis against the original data
    B = A_std[np.ix_(kept_rows, tab.basis)]
    xb = np.linalg.lstsq(B, b_std[kept_rows], rcond=None)[0] if B.size else np.zeros(0)
    xb = np.where(np.abs(xb) < 1e-13, 0.0, xb)
    x_std = np.zeros(nstd)
    x_std[tab.basis] = xb
    x_std = np.maximum(x_std, 0.0)
    x = np.zeros(n)
    np.add.at(x, col_map, x_std[:ns] * col_sign)
    objective = float(problem.c @ x)

    duals = None
    if opts.compute_duals:
        y_kept = np.linalg.lstsq(B.T, c_std[tab.basis], rcond=None)[0] if B.size else np.zeros(0)
        y = np.zeros(m)
        y[kept_rows] = y_kept
        y *= flip
        duals = -y if problem.maximize else y

    return LpSolution(
        status=LpStatus.OPTIMAL,
        objective=objective,
        x=x,
        iterations=tab.iterations,
        variable_names=problem.variable_names,
        duals=duals,
        max_violation=constraint_violation(problem, x),
    )


def dual_objective(problem: LpProblem, solution: LpSolution) -> float:
    if solution.duals is None:
        raise ValueError("solution carries no duals")
    return float(problem.b @ solution.duals)


def _failed(problem: LpProblem, status: LpStatus, iterations: int, message: str) -> LpSolution:
    return LpSolution(
        status=status,
        objective=math.nan,
        x=np.full(problem.num_variables, math.nan),
        iterations=iterations,
        variable_names=problem.variable_names,
        message=message,
    )


def _infeasibility_hint(problem: LpProblem, tab: _Tableau, art_rows: Sequence[int], nstd: int) -> str:
    # name the constraint whose artificial carries the largest residual
    worst, label = 0.0, None
    for r, k in enumerate(tab.basis):
        if k >= nstd:
            level = tab.T[r, -1]
            if level > worst:
                worst = level
                i = art_rows[k - nstd]
                label = problem.constraint_names[i] if problem.constraint_names else f"c{i}"
    if label is None:
        return "problem is infeasible"
    return f"problem is infeasible; binding constraint {label} (residual {worst:.3g})"
