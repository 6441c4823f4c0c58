from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dyndea.envelopment import RTS, envelopment_rows
from dyndea.fixtures import random_panel, table1_config, table1_panel
from dyndea.gpsbm import GpConfig, evaluate_all_gpsbm
from dyndea.lp import LpStatus
from dyndea.panel import Dimension, DimensionConfig, PanelDataset, Role, VariableSpec, prepare
from dyndea.regularization import RegularizationConfig
from dyndea.sbm import SbmConfig, build_sbm, dimension_score, evaluate_all_sbm, overall_score, solve_sbm


def reg(rho: float) -> SbmConfig:
    return SbmConfig(regularization=RegularizationConfig.scalar(rho))


def test_structure_counts(table1):
    # q + 4 DMUs x 2 periods intensities + 5 slacks per period
    p = build_sbm(table1, "A")
    assert p.num_variables == 1 + 8 + 10
    # 10 envelopment rows, 1 carry-over link, 2 convexity rows, 1 normalization
    assert p.num_constraints == 14
    crs = build_sbm(table1, "A", SbmConfig(rts=RTS.CRS))
    assert crs.num_constraints == p.num_constraints - 2


def test_rho_shifts_every_data_row(table1):
    base = build_sbm(table1, "A")
    shifted = build_sbm(table1, "A", reg(0.03))
    for row in envelopment_rows(table1.config):
        name = f"env[{row.variable}|{row.period}" + (f"|{row.dimension}]" if row.dimension else "]")
        i = base.constraint_names.index(name)
        assert shifted.b[i] - base.b[i] == pytest.approx(0.03 * row.sign)
    others = [i for i, n in enumerate(base.constraint_names) if not n.startswith("env[")]
    assert np.all(shifted.b[others] == base.b[others])


def test_frontier_dmu_has_zero_first_period_slacks(table1):
    run = solve_sbm(table1, "B")
    assert run.ok and run.q > 0
    assert all(v <= 1e-9 for (var, p, g), v in run.slacks.items() if p == "T1")
    assert overall_score(run, table1, "B", 0) == pytest.approx(1.0)


def test_dmu_d_first_period_slack_ratios(table1):
    run = solve_sbm(table1, "D")
    y = table1.data("y")[3, 0]
    b1 = table1.data("b1")[3, 0]
    b2 = table1.data("b2")[3, 0]
    assert run.slacks[("y", "T1", "theta1")] / y == pytest.approx(2.0)
    assert run.slacks[("b1", "T1", "theta2")] / b1 == pytest.approx(0.5)
    assert run.slacks[("b2", "T1", "theta3")] / b2 == pytest.approx(0.5)
    assert run.slacks[("x", "T1", None)] == pytest.approx(0.0, abs=1e-9)
    assert run.slacks[("z", "T1", None)] == pytest.approx(0.0, abs=1e-9)
    assert overall_score(run, table1, "D", 0) == pytest.approx(0.5)


@pytest.mark.parametrize(
    "dmu, g, t, expected",
    [("A", "theta1", 0, 0.667), ("C", "theta2", 0, 0.667)],
)
def test_dimension_scores_unregularized(table1, dmu, g, t, expected):
    assert dimension_score(solve_sbm(table1, dmu), table1, dmu, g, t) == pytest.approx(expected, abs=0.0015)


@pytest.mark.parametrize("dmu, t, expected", [("A", 0, 0.857), ("C", 1, 0.621)])
def test_overall_scores_unregularized(table1, dmu, t, expected):
    assert overall_score(solve_sbm(table1, dmu), table1, dmu, t) == pytest.approx(expected, abs=0.0015)


def test_regularized_dimension_score(table1):
    run = solve_sbm(table1, "A", reg(0.03))
    assert dimension_score(run, table1, "A", "theta2", 0) == pytest.approx(0.903, abs=0.0015)


def test_zero_slacks_score_one(table1):
    zero = {row.key: 0.0 for row in envelopment_rows(table1.config)}
    assert dimension_score(zero, table1, "A", "theta1", 0) == 1.0
    assert overall_score(zero, table1, "A", 1) == 1.0


def test_single_dmu_scores_one():
    cfg = DimensionConfig(
        ("1", "2"),
        (Dimension("g"),),
        (
            VariableSpec("x", Role.INPUT),
            VariableSpec("y", Role.DESIRABLE_OUTPUT, ("g",)),
            VariableSpec("z", Role.UNDESIRABLE_CARRYOVER),
        ),
    )
    raw = PanelDataset(("A",), cfg.periods, cfg.variable_names, np.array([[[2.0, 3.0, 1.0], [1.0, 5.0, 4.0]]]))
    panel = prepare(raw, cfg)
    for table in (evaluate_all_sbm(panel), evaluate_all_gpsbm(panel)):
        assert all(s == pytest.approx(1.0) for *_, s in table.rows())


def _cells(table) -> dict:
    return {r[:3]: r[3] for r in table.rows()}


def test_continuity_at_zero(table1):
    a = _cells(evaluate_all_sbm(table1))
    b = _cells(evaluate_all_sbm(table1, reg(1e-12)))
    assert max(abs(a[k] - b[k]) for k in a) < 1e-6


def test_mean_scores_non_increasing_over_rho_grid(table1):
    grid = [k / 1000 for k in range(11)]
    runs = {
        "sbm": lambda rho: evaluate_all_sbm(table1, reg(rho)),
        "gpsbm": lambda rho: evaluate_all_gpsbm(table1, GpConfig(regularization=RegularizationConfig.scalar(rho))),
    }
    for evaluate in runs.values():
        previous = None
        for rho in grid:
            table = evaluate(rho)
            means = {(r.dmu, g): s for r in table.reports for g, s in r.means().items()}
            if previous is not None:
                assert all(means[k] <= previous[k] + 1e-9 for k in means)
            previous = means


def test_regularized_scores_not_above_unregularized_on_example(table1):
    base = _cells(evaluate_all_sbm(table1))
    for rho in (0.001, 0.005, 0.01, 0.03):
        cells = _cells(evaluate_all_sbm(table1, reg(rho)))
        assert all(cells[k] <= base[k] + 1e-9 for k in cells)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([0.001, 0.005, 0.01, 0.1]))
def test_objective_non_increasing_in_rho(seed, rho):
    # the fractional objective (period-averaged ratio) is what regularization provably lowers
    panel = prepare(*random_panel(np.random.default_rng(seed)))
    for dmu in panel.dmus:
        a = solve_sbm(panel, dmu)
        b = solve_sbm(panel, dmu, reg(rho))
        if b.ok:
            assert b.objective <= a.objective + 1e-9


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_score_one_iff_zero_slacks(seed):
    panel = prepare(*random_panel(np.random.default_rng(seed)))
    cfg = panel.config
    tol = SbmConfig().solver.feasibility_tol
    for dmu in panel.dmus:
        run = solve_sbm(panel, dmu)
        for t, p in enumerate(cfg.periods):
            for g in cfg.dimension_ids:
                des, und = cfg.members(g)
                keys = [(v, p, None) for v in cfg.inputs] + [(v, p, g) for v in (*des, *und)]
                theta = dimension_score(run, panel, dmu, g, t)
                if all(run.slacks[k] <= tol for k in keys):
                    # slacks below tolerance move the score by at most a few tolerances
                    assert theta >= 1.0 - 1e-7
                else:
                    assert theta < 1.0


def _with_dominated(raw: PanelDataset, cfg: DimensionConfig, rng: np.random.Generator, keep_carryovers: bool):
    j = int(rng.integers(raw.n))
    v = raw.values[j].copy()
    for k, name in enumerate(raw.variables):
        role = cfg.role_of(name)
        if role in (Role.DESIRABLE_CARRYOVER, Role.UNDESIRABLE_CARRYOVER) and keep_carryovers:
            continue
        f = rng.uniform(1.0, 1.5, raw.T)
        v[:, k] = v[:, k] / f if role.is_desirable else v[:, k] * f
    return PanelDataset((*raw.dmus, "NEW"), raw.periods, raw.variables, np.concatenate([raw.values, v[None]]))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_dominated_insertion_changes_nothing(seed):
    rng = np.random.default_rng(seed)
    raw, cfg = random_panel(rng)
    bigger = _with_dominated(raw, cfg, rng, keep_carryovers=True)
    for evaluate in (evaluate_all_sbm, evaluate_all_gpsbm):
        a = prepare(raw, cfg)
        b = prepare(bigger, cfg)
        for dmu in raw.dmus:
            ra, rb = evaluate(a).report(dmu), evaluate(b).report(dmu)
            for (p, g, s) in ra.cells():
                assert rb.score(g, p) == pytest.approx(s, abs=1e-7)


def test_dominated_insertion_with_worse_carryover_can_move_frontier():
    # linking rows are equalities, so a DMU with worse carry-overs can still open new peer mixes
    rng = np.random.default_rng(3)
    for _ in range(5):
        raw, cfg = random_panel(rng)
        bigger = _with_dominated(raw, cfg, rng, keep_carryovers=False)
    # sample 4 of this stream: two periods, one undesirable carry-over
    assert cfg.F == 1 and len(cfg.periods) == 2
    a = [solve_sbm(prepare(raw, cfg), d).objective for d in raw.dmus]
    b = [solve_sbm(prepare(bigger, cfg), d).objective for d in raw.dmus]
    assert max(x - y for x, y in zip(a, b)) > 1e-3


def test_infeasible_large_rho_names_binding_row(table1):
    run = solve_sbm(table1, "A", reg(0.6))
    assert run.status == LpStatus.INFEASIBLE.value
    assert "env[" in run.message


def test_infeasible_dmu_kept_in_batch(table1):
    table = evaluate_all_sbm(table1, reg(0.6))
    assert {r.dmu for r in table.failures} == {"A", "C", "D"}
    assert table.report("B").ok


def test_gp_scores_at_least_sbm_on_example(table1):
    for rho in (0.0, 0.03):
        s = _cells(evaluate_all_sbm(table1, reg(rho)))
        g = _cells(evaluate_all_gpsbm(table1, GpConfig(regularization=RegularizationConfig.scalar(rho))))
        assert all(g[k] >= s[k] - 1e-9 for k in s)


def test_mean_overall_is_period_average(table1):
    r = evaluate_all_sbm(table1).report("C")
    assert r.mean_overall == pytest.approx(math.fsum(r.overall) / 2)


def test_parallel_matches_serial(table1):
    assert evaluate_all_sbm(table1, reg(0.03), max_workers=4).rows() == evaluate_all_sbm(table1, reg(0.03)).rows()


def test_crs_scores_not_above_vrs(table1):
    vrs = {d: solve_sbm(table1, d).objective for d in table1.dmus}
    crs = {d: solve_sbm(table1, d, SbmConfig(rts=RTS.CRS)).objective for d in table1.dmus}
    assert all(crs[d] <= vrs[d] + 1e-9 for d in vrs)


def test_table1_config_unchanged_by_evaluation():
    raw = table1_panel()
    before = raw.values.copy()
    evaluate_all_sbm(prepare(raw, table1_config()))
    np.testing.assert_array_equal(raw.values, before)


def _face_max_dimension_score(panel, dmu: str, t: int, g: str) -> float:
    """Largest dimension score over every optimum of the unregularized program."""
    from dyndea.lp import build, solve
    from dyndea.oracle import _fractional_parts, _lam, _slack

    cfg = panel.config
    o = panel.dmus.index(dmu)
    p = cfg.periods[t]
    opt = solve_sbm(panel, dmu).objective
    cons, wn, wd = _fractional_parts(panel, o)
    for q in cfg.periods:
        cons.append(({_lam(d, q): 1.0 for d in panel.dmus}, "=", 1.0))
    # N - opt*D <= 0 cuts the feasible set down to its optimal face
    face = {v: -w for v, w in wn.items()}
    for v, w in wd.items():
        face[v] = face.get(v, 0.0) - opt * w
    cons.append((face, "<=", opt - 1 + 1e-9))
    variables = [_lam(d, q) for q in cfg.periods for d in panel.dmus] + list(wn) + list(wd)
    des, und = cfg.members(g)
    num = {_slack(v, p, None): 1 / (cfg.I * panel.data(v)[o, t]) for v in cfg.inputs}
    den = {_slack(v, p, g): 1 / ((len(des) + len(und)) * panel.data(v)[o, t]) for v in (*des, *und)}
    mu = 0.0
    for _ in range(50):
        obj = {v: -c for v, c in num.items()}
        obj.update({v: obj.get(v, 0.0) - mu * c for v, c in den.items()})
        sol = solve(build(variables, cons, ("max", obj)))
        N = 1 - sum(c * sol[v] for v, c in num.items())
        D = 1 + sum(c * sol[v] for v, c in den.items())
        if abs(N - mu * D) <= 1e-12:
            break
        mu = N / D
    return mu


def test_regularized_cell_can_exceed_every_unregularized_optimum():
    # the objective falls with rho but a single period-dimension cell need not
    rng = np.random.default_rng(20240)
    for _ in range(16):
        raw, cfg = random_panel(rng)
    panel = prepare(raw, cfg)
    t = cfg.periods.index("t1")
    best = _face_max_dimension_score(panel, "D4", t, "g0")
    raised = dimension_score(solve_sbm(panel, "D4", reg(0.005)), panel, "D4", "g0", t)
    assert raised > best + 0.02
    assert solve_sbm(panel, "D4", reg(0.005)).objective <= solve_sbm(panel, "D4").objective
