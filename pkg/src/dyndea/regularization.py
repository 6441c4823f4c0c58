"""Right-hand-side regularization parameters (rho) for the envelopment rows."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from dyndea.panel import Role

__all__ = ["RegularizationConfig", "load_regularization"]

CellKey = tuple[str, "str | None", "str | None"]


@dataclass(frozen=True)
class RegularizationConfig:
    """rho values, resolved from most to least specific.

    Lookup order for a row (variable, period, dimension): an exact cell, a
    cell with the dimension or period wildcarded (``None``), the variable
    override, the role override, then ``default``.
    """

    default: float = 0.0
    by_role: Mapping[Role, float] = field(default_factory=dict)
    by_variable: Mapping[str, float] = field(default_factory=dict)
    cells: Mapping[CellKey, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "by_role", {Role(k): float(v) for k, v in self.by_role.items()})
        object.__setattr__(self, "by_variable", {str(k): float(v) for k, v in self.by_variable.items()})
        object.__setattr__(self, "cells", {tuple(k): float(v) for k, v in self.cells.items()})
        values = [self.default, *self.by_role.values(), *self.by_variable.values(), *self.cells.values()]
        for v in values:
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"regularization parameters must be finite and >= 0, got {v}")

    @classmethod
    def scalar(cls, rho: float) -> RegularizationConfig:
        return cls(default=float(rho))

    @property
    def is_zero(self) -> bool:
        return self.default == 0 and not any(
            v != 0 for v in (*self.by_role.values(), *self.by_variable.values(), *self.cells.values())
        )

    def rho(self, variable: str, role: Role, period: str, dimension: str | None = None) -> float:
        for key in ((variable, period, dimension), (variable, period, None), (variable, None, dimension), (variable, None, None)):
            if key in self.cells:
                return self.cells[key]
        if variable in self.by_variable:
            return self.by_variable[variable]
        if role in self.by_role:
            return self.by_role[role]
        return self.default

    def describe(self) -> str:
        if not (self.by_role or self.by_variable or self.cells):
            return repr(self.default)
        return json.dumps(self.to_dict(), sort_keys=True)

    def to_dict(self) -> dict[str, Any]:
        return {
            "default": self.default,
            "roles": {r.value: v for r, v in self.by_role.items()},
            "variables": dict(self.by_variable),
            "cells": [
                {"variable": k[0], "period": k[1], "dimension": k[2], "rho": v} for k, v in self.cells.items()
            ],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> RegularizationConfig:
        cells = {
            (str(c["variable"]), c.get("period"), c.get("dimension")): float(c["rho"]) for c in data.get("cells", [])
        }
        return cls(
            default=float(data.get("default", 0.0)),
            by_role={Role(k): v for k, v in data.get("roles", {}).items()},
            by_variable=data.get("variables", {}),
            cells=cells,
        )


def load_regularization(spec: str | float) -> RegularizationConfig:
    """Parse ``--rho``: a float, or a path to a JSON file in :meth:`RegularizationConfig.to_dict` layout."""
    if isinstance(spec, (int, float)):
        return RegularizationConfig.scalar(float(spec))
    try:
        rho = float(spec)
    except ValueError:
        rho = None
    if rho is not None:
        return RegularizationConfig.scalar(rho)
    data = json.loads(Path(spec).read_text(encoding="utf-8"))
    return RegularizationConfig.from_dict(data)
