"""Panel datasets: DMUs observed over ordered periods on typed variables.

Raw data arrive as long-format CSV (``dmu,period,variable,value``); the
model structure (variable roles, efficiency dimensions, period order) comes
from a JSON config.  ``validate`` checks the two against each other and
``normalize`` divides every column by its per-period maximum across DMUs.
"""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "Role",
    "VariableSpec",
    "Dimension",
    "DimensionConfig",
    "PanelDataset",
    "ValidatedPanel",
    "NormalizedPanel",
    "PanelError",
    "ValidationError",
    "EpsilonSubstitutionWarning",
    "parse_panel_csv",
    "panel_to_csv",
    "load_config",
    "validate",
    "normalize",
    "prepare",
]

HEADER = ("dmu", "period", "variable", "value")


class PanelError(ValueError):
    """Malformed panel data (bad rows, duplicates, missing cells)."""


class ValidationError(ValueError):
    """One or more validation failures; ``errors`` lists each of them."""

    def __init__(self, errors: Sequence[str]) -> None:
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class EpsilonSubstitutionWarning(UserWarning):
    pass


class Role(str, Enum):
    INPUT = "input"
    DESIRABLE_OUTPUT = "desirable_output"
    UNDESIRABLE_OUTPUT = "undesirable_output"
    DESIRABLE_CARRYOVER = "desirable_carryover"
    UNDESIRABLE_CARRYOVER = "undesirable_carryover"

    @property
    def is_output(self) -> bool:
        return self in (Role.DESIRABLE_OUTPUT, Role.UNDESIRABLE_OUTPUT)

    @property
    def is_desirable(self) -> bool:
        return self in (Role.DESIRABLE_OUTPUT, Role.DESIRABLE_CARRYOVER)


@dataclass(frozen=True)
class VariableSpec:
    name: str
    role: Role
    dimensions: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "role", Role(self.role))
        object.__setattr__(self, "dimensions", tuple(self.dimensions))


@dataclass(frozen=True)
class Dimension:
    id: str
    name: str = ""


@dataclass(frozen=True)
class DimensionConfig:
    """Model structure: period order, efficiency dimensions and variable roles.

    A desirable or undesirable output may belong to several dimensions; each
    membership gets its own envelopment row and slack.
    """

    periods: tuple[str, ...]
    dimensions: tuple[Dimension, ...]
    variables: tuple[VariableSpec, ...]
    dmus: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "periods", tuple(str(p) for p in self.periods))
        object.__setattr__(self, "dimensions", tuple(self.dimensions))
        object.__setattr__(self, "variables", tuple(self.variables))
        if self.dmus is not None:
            object.__setattr__(self, "dmus", tuple(str(d) for d in self.dmus))

    def problems(self) -> list[str]:
        """Structural problems with this config (empty when consistent)."""
        errs = []
        names = [v.name for v in self.variables]
        if len(set(names)) != len(names):
            errs.append("duplicate variable names in config")
        dim_ids = [d.id for d in self.dimensions]
        if len(set(dim_ids)) != len(dim_ids):
            errs.append("duplicate dimension ids in config")
        if len(set(self.periods)) != len(self.periods):
            errs.append("duplicate periods in config")
        if not self.periods:
            errs.append("config declares no periods")
        if not self.dimensions:
            errs.append("config declares no dimensions (G must be >= 1)")
        if not self.inputs:
            errs.append("config declares no inputs (I must be >= 1)")
        for v in self.variables:
            if v.role.is_output and not v.dimensions:
                errs.append(f"output {v.name!r} belongs to no dimension")
            if not v.role.is_output and v.dimensions:
                errs.append(f"{v.role.value} {v.name!r} must not carry dimension membership")
            for g in v.dimensions:
                if g not in dim_ids:
                    errs.append(f"variable {v.name!r} references unknown dimension {g!r}")
        for g in dim_ids:
            if not self.members(g)[0] and not self.members(g)[1]:
                errs.append(f"dimension {g!r} has no outputs")
        return errs

    @property
    def variable_names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.variables)

    @property
    def dimension_ids(self) -> tuple[str, ...]:
        return tuple(d.id for d in self.dimensions)

    def _by_role(self, role: Role) -> tuple[str, ...]:
        return tuple(v.name for v in self.variables if v.role is role)

    @property
    def inputs(self) -> tuple[str, ...]:
        return self._by_role(Role.INPUT)

    @property
    def desirable_carryovers(self) -> tuple[str, ...]:
        return self._by_role(Role.DESIRABLE_CARRYOVER)

    @property
    def undesirable_carryovers(self) -> tuple[str, ...]:
        return self._by_role(Role.UNDESIRABLE_CARRYOVER)

    def members(self, g: str) -> tuple[tuple[str, ...], tuple[str, ...]]:
        """(desirable, undesirable) outputs measured in dimension ``g``."""
        des = tuple(v.name for v in self.variables if v.role is Role.DESIRABLE_OUTPUT and g in v.dimensions)
        und = tuple(v.name for v in self.variables if v.role is Role.UNDESIRABLE_OUTPUT and g in v.dimensions)
        return des, und

    def role_of(self, name: str) -> Role:
        for v in self.variables:
            if v.name == name:
                return v.role
        raise KeyError(name)

    # set sizes
    @property
    def I(self) -> int:  # noqa: E743
        return len(self.inputs)

    @property
    def C(self) -> int:
        return len(self.desirable_carryovers)

    @property
    def F(self) -> int:
        return len(self.undesirable_carryovers)

    @property
    def G(self) -> int:
        return len(self.dimensions)

    def R_g(self, g: str) -> int:
        return len(self.members(g)[0])

    def K_g(self, g: str) -> int:
        return len(self.members(g)[1])

    @property
    def R(self) -> int:
        return sum(self.R_g(g) for g in self.dimension_ids)

    @property
    def K(self) -> int:
        return sum(self.K_g(g) for g in self.dimension_ids)

    def restrict_to(self, g: str) -> DimensionConfig:
        """Single-dimension config keeping inputs, carry-overs and ``g``'s outputs."""
        keep = []
        for v in self.variables:
            if v.role.is_output:
                if g in v.dimensions:
                    keep.append(VariableSpec(v.name, v.role, (g,)))
            else:
                keep.append(v)
        dim = next(d for d in self.dimensions if d.id == g)
        return DimensionConfig(self.periods, (dim,), tuple(keep), self.dmus)

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "periods": list(self.periods),
            "dimensions": [{"id": d.id, "name": d.name} for d in self.dimensions],
            "variables": [
                {"name": v.name, "role": v.role.value, "dimensions": list(v.dimensions)} for v in self.variables
            ],
        }
        if self.dmus is not None:
            out["dmus"] = list(self.dmus)
        return out

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> DimensionConfig:
        try:
            periods = [str(p) for p in data["periods"]]
            dims = [Dimension(str(d["id"]), str(d.get("name", d["id"]))) for d in data["dimensions"]]
            variables = [
                VariableSpec(str(v["name"]), Role(v["role"]), tuple(str(g) for g in v.get("dimensions", ())))
                for v in data["variables"]
            ]
        except KeyError as exc:
            raise ValidationError([f"config is missing key {exc.args[0]!r}"]) from None
        except ValueError as exc:
            raise ValidationError([f"config: {exc}"]) from None
        dmus = data.get("dmus")
        return cls(tuple(periods), tuple(dims), tuple(variables), tuple(dmus) if dmus is not None else None)


def load_config(source: str | Path | Mapping[str, Any]) -> DimensionConfig:
    """Read a config from a JSON file path, a JSON string, or a parsed mapping."""
    if isinstance(source, Mapping):
        return DimensionConfig.from_dict(source)
    if isinstance(source, str) and source.lstrip().startswith("{"):
        text = source
    else:
        text = Path(source).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError([f"config is not valid JSON: {exc}"]) from None
    return DimensionConfig.from_dict(data)


@dataclass(frozen=True)
class PanelDataset:
    """Complete dmu x period x variable grid of raw values."""

    dmus: tuple[str, ...]
    periods: tuple[str, ...]
    variables: tuple[str, ...]
    values: np.ndarray  # shape (n, T, V)

    def __post_init__(self) -> None:
        vals = np.array(self.values, dtype=float)
        if vals.shape != (len(self.dmus), len(self.periods), len(self.variables)):
            raise PanelError(f"values shape {vals.shape} does not match labels")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def n(self) -> int:
        return len(self.dmus)

    @property
    def T(self) -> int:
        return len(self.periods)

    def value(self, dmu: str, period: str, variable: str) -> float:
        return float(
            self.values[self.dmus.index(dmu), self.periods.index(period), self.variables.index(variable)]
        )

    def column(self, variable: str) -> np.ndarray:
        """(n, T) slice for one variable."""
        return self.values[:, :, self.variables.index(variable)]

    def with_values(self, values: np.ndarray) -> PanelDataset:
        return PanelDataset(self.dmus, self.periods, self.variables, values)

    def subset(self, dmus: Iterable[str]) -> PanelDataset:
        dmus = tuple(dmus)
        idx = [self.dmus.index(d) for d in dmus]
        return PanelDataset(dmus, self.periods, self.variables, self.values[idx])


@dataclass(frozen=True)
class ValidatedPanel:
    """A panel whose variables follow ``config`` order and whose values are all > 0."""

    panel: PanelDataset
    config: DimensionConfig

    @property
    def dmus(self) -> tuple[str, ...]:
        return self.panel.dmus

    @property
    def periods(self) -> tuple[str, ...]:
        return self.panel.periods

    @property
    def values(self) -> np.ndarray:
        return self.panel.values


@dataclass(frozen=True)
class NormalizedPanel(ValidatedPanel):
    """Validated panel with every (variable, period) column scaled to max 1."""

    _vindex: dict[str, int] = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self) -> None:
        self._vindex.update({v: k for k, v in enumerate(self.panel.variables)})

    def data(self, variable: str) -> np.ndarray:
        """(n, T) normalized values of one variable."""
        return self.panel.values[:, :, self._vindex[variable]]


def _fail_row(lineno: int, message: str) -> PanelError:
    return PanelError(f"line {lineno}: {message}")


def parse_panel_csv(text: str | io.TextIOBase, config: DimensionConfig | None = None) -> PanelDataset:
    """Parse long-format ``dmu,period,variable,value`` CSV into a dense panel.

    With a config, periods follow its declared order and variables its
    declaration order; otherwise both follow first appearance.  DMUs always
    follow first appearance unless the config lists them.
    """
    stream = io.StringIO(text) if isinstance(text, str) else text
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise PanelError("empty panel file") from None
    if tuple(h.strip().lower() for h in header) != HEADER:
        raise _fail_row(1, f"expected header {','.join(HEADER)}, got {','.join(header)}")

    cells: dict[tuple[str, str, str], float] = {}
    dmus: dict[str, None] = {}
    periods: dict[str, None] = {}
    variables: dict[str, None] = {}
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 4:
            raise _fail_row(lineno, f"expected 4 fields, got {len(row)}")
        dmu, period, var, raw = (c.strip() for c in row)
        if not dmu or not period or not var:
            raise _fail_row(lineno, "empty identifier")
        try:
            value = float(raw)
        except ValueError:
            raise _fail_row(lineno, f"non-numeric value {raw!r}") from None
        if not math.isfinite(value):
            raise _fail_row(lineno, f"non-finite value {raw!r}")
        key = (dmu, period, var)
        if key in cells:
            raise _fail_row(lineno, f"duplicate cell {key}")
        cells[key] = value
        dmus.setdefault(dmu)
        periods.setdefault(period)
        variables.setdefault(var)

    dmu_order = list(dmus)
    period_order = list(periods)
    var_order = list(variables)
    if config is not None:
        unknown = [p for p in period_order if p not in config.periods]
        if unknown:
            raise PanelError(f"periods not declared in config: {unknown}")
        period_order = list(config.periods)
        declared = [v for v in config.variable_names]
        var_order = declared + [v for v in var_order if v not in declared]
        if config.dmus is not None:
            extra = [d for d in dmu_order if d not in config.dmus]
            if extra:
                raise PanelError(f"DMUs not declared in config: {extra}")
            dmu_order = list(config.dmus)

    values = np.empty((len(dmu_order), len(period_order), len(var_order)))
    for a, d in enumerate(dmu_order):
        for b, p in enumerate(period_order):
            for c, v in enumerate(var_order):
                try:
                    values[a, b, c] = cells[(d, p, v)]
                except KeyError:
                    raise PanelError(f"missing cell (dmu={d}, period={p}, variable={v})") from None
    return PanelDataset(tuple(dmu_order), tuple(period_order), tuple(var_order), values)


def panel_to_csv(panel: PanelDataset) -> str:
    """Serialize to long-format CSV; ``repr`` floats round-trip exactly."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(HEADER)
    for a, d in enumerate(panel.dmus):
        for b, p in enumerate(panel.periods):
            for c, v in enumerate(panel.variables):
                writer.writerow((d, p, v, repr(float(panel.values[a, b, c]))))
    return out.getvalue()


def validate(panel: PanelDataset, config: DimensionConfig, epsilon: float | None = None) -> ValidatedPanel:
    """Check a raw panel against its config.

    Non-positive values are errors unless ``epsilon`` is given, in which case
    zeros are replaced by ``epsilon`` (with a warning).  Negative values are
    always rejected.  Raises :class:`ValidationError` listing every problem.
    """
    errors = config.problems()
    unknown = [v for v in panel.variables if v not in config.variable_names]
    if unknown:
        errors.append(f"unknown variable(s) in data: {unknown}")
    missing = [v for v in config.variable_names if v not in panel.variables]
    if missing:
        errors.append(f"variable(s) declared in config but absent from data: {missing}")
    if tuple(panel.periods) != tuple(config.periods):
        if set(panel.periods) == set(config.periods):
            panel = PanelDataset(
                panel.dmus,
                config.periods,
                panel.variables,
                panel.values[:, [panel.periods.index(p) for p in config.periods], :],
            )
        else:
            errors.append(f"data periods {list(panel.periods)} do not match config periods {list(config.periods)}")
    if errors:
        raise ValidationError(errors)

    order = [panel.variables.index(v) for v in config.variable_names]
    values = np.array(panel.values[:, :, order], dtype=float)
    if np.isnan(values).any():
        raise ValidationError(["panel contains missing values"])
    negative = np.argwhere(values < 0)
    zero = np.argwhere(values == 0)
    for a, b, c in negative:
        errors.append(
            f"negative value at (dmu={panel.dmus[a]}, period={panel.periods[b]}, "
            f"variable={config.variable_names[c]})"
        )
    if zero.size and epsilon is None:
        for a, b, c in zero:
            errors.append(
                f"zero value at (dmu={panel.dmus[a]}, period={panel.periods[b]}, "
                f"variable={config.variable_names[c]}); enable epsilon substitution to replace zeros"
            )
    if errors:
        raise ValidationError(errors)
    if zero.size:
        if not epsilon > 0:
            raise ValidationError([f"epsilon must be positive, got {epsilon}"])
        warnings.warn(
            f"replaced {len(zero)} zero value(s) by epsilon={epsilon}",
            EpsilonSubstitutionWarning,
            stacklevel=2,
        )
        values[values == 0] = epsilon
    clean = PanelDataset(panel.dmus, panel.periods, config.variable_names, values)
    return ValidatedPanel(clean, config)


def normalize(panel: ValidatedPanel) -> NormalizedPanel:
    """Divide each value by its (variable, period) maximum across DMUs."""
    vals = panel.values
    scaled = vals / vals.max(axis=0, keepdims=True)
    return NormalizedPanel(panel.panel.with_values(scaled), panel.config)


def prepare(panel: PanelDataset, config: DimensionConfig, epsilon: float | None = None) -> NormalizedPanel:
    """validate + normalize."""
    return normalize(validate(panel, config, epsilon))
