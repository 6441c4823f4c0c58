"""Built-in four-DMU, two-period example with three efficiency dimensions."""

from __future__ import annotations

import json

import numpy as np

from dyndea.panel import (
    Dimension,
    DimensionConfig,
    PanelDataset,
    Role,
    VariableSpec,
    load_config,
    parse_panel_csv,
)

__all__ = [
    "TABLE1_ROWS",
    "table1_csv",
    "table1_config_json",
    "table1_panel",
    "table1_config",
    "synthetic_panel",
    "random_panel",
    "TABLE7",
    "TABLE7_CRITERIA",
    "table7_mean_scores_csv",
]

# dmu -> period -> (x, y, b1, b2, z)
TABLE1_ROWS = {
    "A": {"T1": (1, 2, 1, 1, 1), "T2": (2, 4, 1, 2, 2)},
    "B": {"T1": (1, 3, 1, 1, 1), "T2": (2, 2, 3, 3, 2)},
    "C": {"T1": (1, 1, 2, 1, 1), "T2": (2, 2, 2, 3, 2)},
    "D": {"T1": (1, 1, 2, 2, 1), "T2": (2, 3, 1, 2, 2)},
}
VARIABLES = ("x", "y", "b1", "b2", "z")

TABLE1_CONFIG = {
    "periods": ["T1", "T2"],
    "dimensions": [
        {"id": "theta1", "name": "desirable output y"},
        {"id": "theta2", "name": "undesirable output b1"},
        {"id": "theta3", "name": "undesirable output b2"},
    ],
    "variables": [
        {"name": "x", "role": "input", "dimensions": []},
        {"name": "y", "role": "desirable_output", "dimensions": ["theta1"]},
        {"name": "b1", "role": "undesirable_output", "dimensions": ["theta2"]},
        {"name": "b2", "role": "undesirable_output", "dimensions": ["theta3"]},
        {"name": "z", "role": "undesirable_carryover", "dimensions": []},
    ],
}


def table1_csv() -> str:
    lines = ["dmu,period,variable,value"]
    for dmu, periods in TABLE1_ROWS.items():
        for period, values in periods.items():
            lines += [f"{dmu},{period},{v},{x}" for v, x in zip(VARIABLES, values)]
    return "\n".join(lines) + "\n"


def table1_config_json() -> str:
    return json.dumps(TABLE1_CONFIG, indent=2) + "\n"


def table1_config() -> DimensionConfig:
    return load_config(TABLE1_CONFIG)


def table1_panel() -> PanelDataset:
    return parse_panel_csv(table1_csv(), table1_config())


def synthetic_panel(
    rng: np.random.Generator,
    n: int,
    T: int,
    G: int,
    I: int = 1,  # noqa: E741
    C: int = 0,
    F: int = 0,
    desirable_share: float = 0.6,
    low: float = 0.1,
) -> tuple[PanelDataset, DimensionConfig]:
    """Random positive panel with one output per dimension.

    Each dimension's output is desirable with probability ``desirable_share``;
    values are uniform on ``[low, 1)``.
    """
    variables = [VariableSpec(f"x{i}", Role.INPUT) for i in range(I)]
    for k in range(G):
        if rng.random() < desirable_share:
            variables.append(VariableSpec(f"y{k}", Role.DESIRABLE_OUTPUT, (f"g{k}",)))
        else:
            variables.append(VariableSpec(f"b{k}", Role.UNDESIRABLE_OUTPUT, (f"g{k}",)))
    variables += [VariableSpec(f"e{c}", Role.DESIRABLE_CARRYOVER) for c in range(C)]
    variables += [VariableSpec(f"z{f}", Role.UNDESIRABLE_CARRYOVER) for f in range(F)]
    config = DimensionConfig(
        tuple(f"t{t}" for t in range(T)), tuple(Dimension(f"g{k}") for k in range(G)), tuple(variables)
    )
    values = rng.uniform(low, 1.0, (n, T, len(variables)))
    panel = PanelDataset(tuple(f"D{j}" for j in range(n)), config.periods, config.variable_names, values)
    return panel, config


def random_panel(
    rng: np.random.Generator, max_dmus: int = 8, max_periods: int = 3, max_dimensions: int = 3
) -> tuple[PanelDataset, DimensionConfig]:
    """Small random panel: 3..max_dmus DMUs, 1-2 inputs, at most one carry-over of each kind."""
    n = int(rng.integers(3, max_dmus + 1))
    T = int(rng.integers(1, max_periods + 1))
    G = int(rng.integers(1, max_dimensions + 1))
    I = int(rng.integers(1, 3))  # noqa: E741
    C = int(rng.integers(0, 2))
    F = int(rng.integers(0, 2))
    return synthetic_panel(rng, n, T, G, I, C, F)


# Published hospital benchmark: per-dimension mean scores, then the printed
# (score, rank) of TOPSIS, COPRAS, SBM and GP-SBM.
TABLE7_CRITERIA = ("technical", "clinical", "patient")
TABLE7 = {
    "H1": ((0.166, 0.929, 0.606), (0.455, 9), (0.555, 10), (0.716, 10), (0.776, 10)),
    "H2": ((0.106, 0.922, 0.607), (0.438, 10), (0.529, 11), (0.607, 12), (0.720, 12)),
    "H3": ((0.990, 0.987, 0.877), (0.928, 2), (1.000, 1), (0.964, 1), (0.966, 1)),
    "H4": ((0.530, 0.739, 0.835), (0.553, 6), (0.728, 7), (0.916, 4), (0.923, 4)),
    "H5": ((0.444, 0.973, 0.831), (0.666, 4), (0.760, 5), (0.831, 7), (0.855, 7)),
    "H6": ((0.796, 0.974, 0.908), (0.869, 3), (0.929, 3), (0.869, 6), (0.885, 6)),
    "H7": ((0.854, 0.643, 0.397), (0.398, 11), (0.673, 9), (0.913, 5), (0.919, 5)),
    "H8": ((0.878, 0.979, 0.949), (0.928, 1), (0.979, 2), (0.928, 3), (0.932, 3)),
    "H9": ((0.399, 0.570, 0.474), (0.196, 12), (0.497, 12), (0.681, 11), (0.759, 11)),
    "H10": ((0.570, 0.771, 0.652), (0.490, 7), (0.688, 8), (0.802, 8), (0.828, 8)),
    "H11": ((0.932, 0.654, 0.488), (0.456, 8), (0.740, 6), (0.953, 2), (0.955, 2)),
    "H12": ((0.669, 0.960, 0.597), (0.617, 5), (0.763, 4), (0.793, 9), (0.827, 9)),
}


def table7_mean_scores_csv(with_models: bool = True) -> str:
    """The benchmark criteria as a ``mean_scores.csv``; model scores as ``method:`` rows."""
    lines = ["dmu,dimension,mean_score"]
    for h, (crit, _, _, sbm, gp) in TABLE7.items():
        lines += [f"{h},{c},{v!r}" for c, v in zip(TABLE7_CRITERIA, crit)]
        if with_models:
            lines += [f"{h},method:sbm,{sbm[0]!r}", f"{h},method:gpsbm,{gp[0]!r}"]
    return "\n".join(lines) + "\n"
