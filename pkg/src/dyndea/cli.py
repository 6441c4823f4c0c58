"""Command-line front end.

Exit codes: 0 success, 2 usage, 3 I/O, 4 validation, 5 solver, 6 check
failure.  Errors are reported as one JSON object on stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from dyndea.envelopment import RTS
from dyndea.fixtures import table1_config_json, table1_csv
from dyndea.gpsbm import GpConfig, build_gpsbm, evaluate_all_gpsbm, linear_bound, solve_gpsbm
from dyndea.lp import LpProblem
from dyndea.mcdm import DecisionMatrix, RankVector, average_ranks, copras, spearman, topsis
from dyndea.oracle import OracleError, dinkelbach_sbm, grid_search_gpsbm, grid_supported
from dyndea.panel import (
    DimensionConfig,
    NormalizedPanel,
    PanelDataset,
    PanelError,
    ValidationError,
    load_config,
    parse_panel_csv,
    prepare,
)
from dyndea.regularization import RegularizationConfig, load_regularization
from dyndea.report import ScoreTable, read_mean_scores, read_score_csv, write_text_atomic
from dyndea.sbm import SbmConfig, build_sbm, evaluate_all_sbm, solve_sbm
from dyndea.scores import OVERALL

__all__ = ["main", "EXIT_OK", "EXIT_USAGE", "EXIT_IO", "EXIT_VALIDATION", "EXIT_SOLVER", "EXIT_CHECK"]

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_VALIDATION = 4
EXIT_SOLVER = 5
EXIT_CHECK = 6

MODELS = ("sbm", "gpsbm")
METHOD_PREFIX = "method:"
MONOTONE_TOL = 1e-9
DINKELBACH_TOL = 1e-6
GRID_RESOLUTION = 100
VALIDATE_RHOS = (0.001, 0.005, 0.01)


class CliError(Exception):
    def __init__(self, code: int, kind: str, message: str, details: Sequence[str] = ()) -> None:
        super().__init__(message)
        self.code = code
        self.kind = kind
        self.details = list(details)


# ---------------------------------------------------------------- loading


@dataclass(frozen=True)
class Inputs:
    panel: NormalizedPanel
    raw: PanelDataset
    config: DimensionConfig


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(EXIT_IO, "io", f"cannot read {path}: {exc.strerror or exc}") from None


def _load_inputs(args: argparse.Namespace) -> Inputs:
    if not args.data or not args.config:
        raise CliError(EXIT_USAGE, "usage", "--data and --config are required")
    data_text = _read(args.data)
    config_text = _read(args.config)
    try:
        config = load_config(json.loads(config_text))
        raw = parse_panel_csv(data_text, config)
        panel = prepare(raw, config, args.epsilon)
    except (ValidationError, PanelError) as exc:
        details = getattr(exc, "errors", [str(exc)])
        raise CliError(EXIT_VALIDATION, "validation", str(exc), details) from None
    except json.JSONDecodeError as exc:
        raise CliError(EXIT_VALIDATION, "validation", f"config is not valid JSON: {exc}") from None
    return Inputs(panel, raw, config)


def _regularization(spec: str | None) -> RegularizationConfig:
    if spec is None:
        return RegularizationConfig()
    try:
        return load_regularization(spec)
    except OSError as exc:
        raise CliError(EXIT_IO, "io", f"cannot read rho file {spec}: {exc.strerror or exc}") from None
    except (ValueError, KeyError, TypeError) as exc:
        raise CliError(EXIT_VALIDATION, "validation", f"invalid --rho {spec!r}: {exc}") from None


def _rho_grid(spec: str) -> list[float]:
    """``start:stop:step`` inclusive of stop, computed in decimal to avoid drift."""
    try:
        start, stop, step = (Decimal(x) for x in spec.split(":"))
    except (ValueError, InvalidOperation):
        raise CliError(EXIT_USAGE, "usage", f"--rho-grid expects start:stop:step, got {spec!r}") from None
    if start < 0 or stop < start or step <= 0:
        raise CliError(EXIT_USAGE, "usage", f"--rho-grid needs 0 <= start <= stop and step > 0, got {spec!r}")
    grid = []
    k = 0
    while start + k * step <= stop:
        grid.append(float(start + k * step))
        k += 1
    return grid


def _evaluate(model: str, panel: NormalizedPanel, rts: str, reg: RegularizationConfig, jobs: int | None) -> ScoreTable:
    if model == "sbm":
        return evaluate_all_sbm(panel, SbmConfig(rts=RTS(rts), regularization=reg), jobs)
    return evaluate_all_gpsbm(panel, GpConfig(rts=RTS(rts), regularization=reg), jobs)


def _emit(files: dict[str, str], out: str) -> None:
    try:
        write_text_atomic(files, Path(out))
    except OSError as exc:
        raise CliError(EXIT_IO, "io", f"cannot write to {out}: {exc.strerror or exc}") from None


def _timestamp_meta(args: argparse.Namespace) -> dict[str, str]:
    if args.no_timestamp:
        return {}
    return {"timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds")}


def _dump_lps(inputs: Inputs, model: str, rts: str, reg: RegularizationConfig, target: str) -> None:
    files = {}
    for dmu in inputs.panel.dmus:
        problem: LpProblem
        if model == "sbm":
            problem = build_sbm(inputs.panel, dmu, SbmConfig(rts=RTS(rts), regularization=reg))
        else:
            problem = build_gpsbm(inputs.panel, dmu, GpConfig(rts=RTS(rts), regularization=reg))
        files[f"{model}_{dmu}.lp"] = problem.to_lp_format()
    _emit(files, target)


# ---------------------------------------------------------------- commands


def cmd_run(args: argparse.Namespace) -> int:
    inputs = _load_inputs(args)
    reg = _regularization(args.rho)
    if args.dump_lp:
        _dump_lps(inputs, args.model, args.rts, reg, args.dump_lp)
    table = _evaluate(args.model, inputs.panel, args.rts, reg, args.jobs)
    extra = {"data": args.data, "config": args.config}
    files = table.outputs(args.format, extra, timestamp=not args.no_timestamp)
    _emit(files, args.out)
    if table.failures:
        names = [f"{r.dmu}: {r.status} ({r.message})" for r in table.failures]
        raise CliError(EXIT_SOLVER, "solver", f"{len(names)} DMU solve(s) failed; scores written for the rest", names)
    return EXIT_OK


SWEEP_HEADER = ("rho", "model", "dimension", "dmu", "mean_score", "status")
MEAN_DMU = "__mean__"


def sweep_rows(panel: NormalizedPanel, models: Sequence[str], rts: str, grid: Sequence[float], jobs: int | None) -> list[tuple]:
    """Rows of (rho, model, dimension, dmu, mean score or nan, status)."""

    def point(rho: float, model: str) -> list[tuple]:
        table = _evaluate(model, panel, rts, RegularizationConfig.scalar(rho), None)
        rows = []
        dims = (*panel.config.dimension_ids, OVERALL)
        for g in dims:
            ok_scores = []
            for r in table.reports:
                value = r.means()[g] if r.ok else math.nan
                if r.ok:
                    ok_scores.append(value)
                rows.append((rho, model, g, r.dmu, value, r.status))
            status = "optimal" if len(ok_scores) == len(table.reports) else f"partial:{len(table.failures)}_failed"
            mean = math.fsum(ok_scores) / len(ok_scores) if ok_scores else math.nan
            rows.append((rho, model, g, MEAN_DMU, mean, status if ok_scores else "failed"))
        return rows

    tasks = [(rho, m) for rho in grid for m in models]
    if jobs and jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            parts = list(pool.map(lambda t: point(*t), tasks))
    else:
        parts = [point(*t) for t in tasks]
    return [row for part in parts for row in part]


def cmd_sweep(args: argparse.Namespace) -> int:
    inputs = _load_inputs(args)
    grid = _rho_grid(args.rho_grid) if args.rho_grid else [0.0]
    models = MODELS if args.model == "all" else (args.model,)
    rows = sweep_rows(inputs.panel, models, args.rts, grid, args.jobs)
    meta = {"command": "sweep", "rts": args.rts, "rho_grid": ",".join(repr(r) for r in grid), "data": args.data}
    meta.update(_timestamp_meta(args))
    if args.format == "json":
        doc = {
            "metadata": dict(sorted(meta.items())),
            "rows": [dict(zip(SWEEP_HEADER, (r[0], r[1], r[2], r[3], None if math.isnan(r[4]) else r[4], r[5]))) for r in rows],
        }
        files = {"sweep.json": json.dumps(doc, indent=2) + "\n"}
    else:
        out = io.StringIO()
        for k in sorted(meta):
            out.write(f"# {k}={meta[k]}\n")
        w = csv.writer(out, lineterminator="\n")
        w.writerow(SWEEP_HEADER)
        for rho, model, g, dmu, score, status in rows:
            w.writerow((repr(rho), model, g, dmu, "" if math.isnan(score) else repr(score), status))
        files = {"sweep.csv": out.getvalue()}
    _emit(files, args.out)
    return EXIT_OK


def _baseline_scores(inputs: Inputs, rts: str, reg: RegularizationConfig) -> dict[str, dict[str, float]]:
    """Mean dimension scores from one single-dimension SBM run per dimension."""
    cfg = inputs.config
    out: dict[str, dict[str, float]] = {d: {} for d in inputs.panel.dmus}
    for g in cfg.dimension_ids:
        sub = cfg.restrict_to(g)
        idx = [inputs.raw.variables.index(v) for v in sub.variable_names]
        raw = PanelDataset(inputs.raw.dmus, inputs.raw.periods, sub.variable_names, inputs.raw.values[:, :, idx])
        panel = prepare(raw, sub, None)
        options = SbmConfig(rts=RTS(rts), regularization=reg, carryovers_in_objective=False)
        table = evaluate_all_sbm(panel, options)
        for r in table.reports:
            if not r.ok:
                raise CliError(EXIT_SOLVER, "solver", f"baseline for dimension {g} failed on {r.dmu}: {r.status}")
            out[r.dmu][g] = r.mean_dimension(g)
    return out


def compare_methods(
    criteria_scores: dict[str, dict[str, float]], extra_scores: dict[str, dict[str, float]]
) -> tuple[dict[str, RankVector], list[str]]:
    """TOPSIS and COPRAS on the criteria, plus ranked precomputed methods.

    ``criteria_scores`` is ``{dmu: {criterion: score}}``; ``extra_scores`` is
    ``{method: {dmu: score}}``.
    """
    dmus = tuple(criteria_scores)
    criteria = tuple(next(iter(criteria_scores.values())))
    matrix = DecisionMatrix.from_scores(criteria_scores, criteria)
    methods: dict[str, RankVector] = {"topsis": topsis(matrix), "copras": copras(matrix)}
    for name, scores in extra_scores.items():
        vals = np.array([scores[d] for d in dmus])
        methods[name] = RankVector(dmus, vals, average_ranks(vals, descending=True), name)
    return methods, list(methods)


def _spearman_matrix(methods: dict[str, RankVector]) -> dict[str, dict[str, float]]:
    return {a: {b: spearman(methods[a], methods[b]) for b in methods} for a in methods}


def cmd_compare(args: argparse.Namespace) -> int:
    meta: dict[str, str] = {"command": "compare"}
    if args.scores:
        text = _read(args.scores)
        try:
            _, table = read_mean_scores(text if "\n" in text else text + "\n")
        except (ValueError, StopIteration) as exc:
            raise CliError(EXIT_VALIDATION, "validation", f"cannot parse {args.scores}: {exc}") from None
        criteria_scores = {d: {g: s for g, s in v.items() if not g.startswith(METHOD_PREFIX) and g != OVERALL} for d, v in table.items()}
        extra: dict[str, dict[str, float]] = {}
        for d, v in table.items():
            for g, s in v.items():
                if g.startswith(METHOD_PREFIX):
                    extra.setdefault(g[len(METHOD_PREFIX):], {})[d] = s
        meta["scores"] = args.scores
    else:
        inputs = _load_inputs(args)
        reg = _regularization(args.rho)
        criteria_scores = _baseline_scores(inputs, args.rts, reg)
        extra = {}
        for model in MODELS:
            table = _evaluate(model, inputs.panel, args.rts, reg, args.jobs)
            if table.failures:
                raise CliError(EXIT_SOLVER, "solver", f"{model} failed for {[r.dmu for r in table.failures]}")
            extra[model] = table.means(OVERALL)
        meta.update({"data": args.data, "rts": args.rts, "rho": reg.describe()})
    try:
        methods, order = compare_methods(criteria_scores, extra)
    except (ValueError, KeyError) as exc:
        raise CliError(EXIT_VALIDATION, "validation", f"cannot build decision matrix: {exc}") from None
    matrix = _spearman_matrix(methods)
    meta.update(_timestamp_meta(args))

    if args.format == "json":
        doc = {
            "metadata": dict(sorted(meta.items())),
            "criteria": criteria_scores,
            "rankings": {
                m: [{"dmu": d, "score": float(s), "rank": float(r)} for d, s, r, _ in methods[m].rows()] for m in order
            },
            "spearman": matrix,
        }
        files = {"compare.json": json.dumps(doc, indent=2) + "\n"}
    else:
        head = "".join(f"# {k}={meta[k]}\n" for k in sorted(meta))
        ranks = io.StringIO()
        ranks.write(head)
        w = csv.writer(ranks, lineterminator="\n")
        w.writerow(("dmu", "score", "rank", "method"))
        for m in order:
            for d, s, r, _ in methods[m].rows():
                w.writerow((d, repr(s), repr(r), m))
        sp = io.StringIO()
        sp.write(head)
        w = csv.writer(sp, lineterminator="\n")
        w.writerow(("method", *order))
        for a in order:
            w.writerow((a, *(repr(matrix[a][b]) for b in order)))
        files = {"ranks.csv": ranks.getvalue(), "spearman.csv": sp.getvalue()}
    _emit(files, args.out)
    return EXIT_OK


def cmd_example(args: argparse.Namespace) -> int:
    _emit({"table1.csv": table1_csv(), "dims3.json": table1_config_json()}, args.out)
    return EXIT_OK


def _monotone_violations(base: ScoreTable, other: dict[tuple[str, str, str], float], label: str) -> list[str]:
    ref = {(d, p, g): s for d, p, g, s in base.rows()}
    bad = []
    for key, s in sorted(other.items()):
        if key in ref and s > ref[key] + MONOTONE_TOL:
            d, p, g = key
            bad.append(f"{label}: {d}/{p}/{g} score {s!r} exceeds rho=0 score {ref[key]!r}")
    return bad


def validation_report(
    inputs: Inputs,
    rts: str,
    rhos: Sequence[float],
    given_scores: tuple[str, dict[tuple[str, str, str], float]] | None = None,
) -> dict[str, Any]:
    """Oracle deltas and bound checks as a JSON-ready dict; ``passed`` summarizes."""
    panel = inputs.panel
    report: dict[str, Any] = {}

    dink = []
    for d in panel.dmus:
        run = solve_sbm(panel, d, SbmConfig(rts=RTS(rts)))
        entry: dict[str, Any] = {"dmu": d}
        try:
            theta, trace = dinkelbach_sbm(panel, d, rts=RTS(rts))
        except OracleError as exc:
            entry.update(passed=False, error=str(exc))
        else:
            delta = abs(theta - run.objective) if run.ok else math.inf
            entry.update(
                dinkelbach=theta,
                linear=run.objective if run.ok else None,
                delta=delta,
                iterations=trace.iterations,
                passed=delta <= DINKELBACH_TOL,
            )
        dink.append(entry)
    report["dinkelbach"] = {"tolerance": DINKELBACH_TOL, "results": dink, "passed": all(e["passed"] for e in dink)}

    reason = grid_supported(panel, RTS(rts))
    if reason:
        report["grid"] = {"skipped": True, "reason": reason, "passed": True}
    else:
        grid_rows = []
        for d in panel.dmus:
            run = solve_gpsbm(panel, d, GpConfig(rts=RTS(rts)))
            entry = {"dmu": d}
            try:
                g = grid_search_gpsbm(panel, d, GRID_RESOLUTION)
            except OracleError as exc:
                entry.update(passed=False, error=str(exc))
            else:
                lp = -run.objective
                entry.update(
                    grid=g.objective,
                    linear=lp,
                    delta=lp - g.objective,
                    passed=g.objective <= lp + MONOTONE_TOL and lp - g.objective <= 2.0 / GRID_RESOLUTION,
                )
            grid_rows.append(entry)
        report["grid"] = {
            "skipped": False,
            "resolution": GRID_RESOLUTION,
            "results": grid_rows,
            "passed": all(e["passed"] for e in grid_rows),
        }

    bound_failures = []
    checked = 0
    for rho in (0.0, *rhos):
        opts = GpConfig(rts=RTS(rts), regularization=RegularizationConfig.scalar(rho))
        for d in panel.dmus:
            run = solve_gpsbm(panel, d, opts)
            if not run.ok:
                continue
            for g in panel.config.dimension_ids:
                chk = linear_bound(run, g, MONOTONE_TOL)
                checked += 1
                if not chk.holds:
                    bound_failures.append(f"rho={rho!r} {d}/{g}: 1-theta={1 - chk.theta!r} > d={chk.deviation!r}")
    report["linear_bound"] = {"checked": checked, "violations": bound_failures, "passed": not bound_failures}

    violations: list[str] = []
    base = {m: _evaluate(m, panel, rts, RegularizationConfig(), None) for m in MODELS}
    if given_scores is not None:
        model, scores = given_scores
        violations += _monotone_violations(base[model], scores, f"{model} given scores")
        checked_rhos: list[float] = []
    else:
        checked_rhos = list(rhos)
        for rho in rhos:
            for m in MODELS:
                t = _evaluate(m, panel, rts, RegularizationConfig.scalar(rho), None)
                other = {(d, p, g): s for d, p, g, s in t.rows()}
                violations += _monotone_violations(base[m], other, f"{m} rho={rho!r}")
    report["regularization_monotone"] = {
        "rhos": checked_rhos,
        "tolerance": MONOTONE_TOL,
        "violations": violations,
        "passed": not violations,
    }
    report["passed"] = all(report[k]["passed"] for k in ("dinkelbach", "grid", "linear_bound", "regularization_monotone"))
    return report


def cmd_validate(args: argparse.Namespace) -> int:
    inputs = _load_inputs(args)
    given = None
    if args.scores:
        text = _read(args.scores)
        try:
            meta, rows = read_score_csv(text)
        except (ValueError, StopIteration) as exc:
            raise CliError(EXIT_VALIDATION, "validation", f"cannot parse {args.scores}: {exc}") from None
        model = meta.get("model", args.model if args.model in MODELS else "sbm")
        given = (model, {(d, p, g): s for d, p, g, s in rows})
    rhos = list(VALIDATE_RHOS)
    if args.rho is not None:
        extra = _regularization(args.rho)
        if not extra.by_role and not extra.by_variable and not extra.cells and extra.default > 0:
            rhos = sorted({*rhos, extra.default})
    report = validation_report(inputs, args.rts, rhos, given)
    text = json.dumps(report, indent=2) + "\n"
    if args.out:
        _emit({"validate.json": text}, args.out)
    sys.stdout.write(text)
    if not report["passed"]:
        raise CliError(EXIT_CHECK, "check", "one or more validation checks failed")
    return EXIT_OK


# ---------------------------------------------------------------- parser


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        raise CliError(EXIT_USAGE, "usage", message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dyndea", description="Dynamic multi-dimension slack-based DEA.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def common(p: argparse.ArgumentParser, default_model: str = "sbm", models: Sequence[str] = MODELS) -> None:
        p.add_argument("--data", help="long-format CSV: dmu,period,variable,value")
        p.add_argument("--config", help="JSON dimension/variable config")
        p.add_argument("--model", choices=models, default=default_model)
        p.add_argument("--rts", choices=[r.value for r in RTS], default=RTS.VRS.value)
        p.add_argument("--rho", help="scalar rho or path to a JSON regularization file")
        p.add_argument("--epsilon", type=float, help="replace zero values by this positive number")
        p.add_argument("--jobs", type=int, default=None, help="solve DMUs on this many threads")

    def output(p: argparse.ArgumentParser, default_out: str | None = ".") -> None:
        p.add_argument("--out", default=default_out, help="output directory")
        p.add_argument("--format", choices=["csv", "json"], default="csv")
        p.add_argument("--no-timestamp", action="store_true", help="omit the timestamp metadata field")

    run = sub.add_parser("run", help="score every DMU with one model")
    common(run)
    output(run)
    run.add_argument("--dump-lp", metavar="DIR", help="also write each DMU's LP in CPLEX LP format")
    run.set_defaults(func=cmd_run)

    sweep = sub.add_parser("sweep", help="mean scores over a grid of scalar rho values")
    common(sweep, default_model="all", models=(*MODELS, "all"))
    output(sweep)
    sweep.add_argument("--rho-grid", help="start:stop:step, stop included")
    sweep.set_defaults(func=cmd_sweep)

    compare = sub.add_parser("compare", help="TOPSIS, COPRAS, SBM and GP-SBM rankings with Spearman matrix")
    common(compare)
    output(compare)
    compare.add_argument("--scores", help="mean_scores.csv to rank directly instead of running models")
    compare.set_defaults(func=cmd_compare)

    example = sub.add_parser("example", help="write the built-in four-DMU example and its config")
    example.add_argument("--out", default=".")
    example.set_defaults(func=cmd_example)

    validate = sub.add_parser("validate", help="oracle and bound checks on a small instance")
    common(validate)
    output(validate, default_out=None)
    validate.add_argument("--scores", help="scores.csv to check against a fresh rho=0 run")
    validate.set_defaults(func=cmd_validate)
    return parser


def _report_error(err: CliError) -> None:
    doc = {"error": err.kind, "exit_code": err.code, "message": str(err)}
    if err.details:
        doc["details"] = err.details
    sys.stderr.write(json.dumps(doc) + "\n")


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help(sys.stderr)
            raise CliError(EXIT_USAGE, "usage", "a command is required")
        func: Callable[[argparse.Namespace], int] = args.func
        if getattr(args, "jobs", None) is not None and args.jobs < 1:
            raise CliError(EXIT_USAGE, "usage", "--jobs must be >= 1")
        return func(args)
    except CliError as err:
        _report_error(err)
        return err.code


if __name__ == "__main__":
    sys.exit(main())
