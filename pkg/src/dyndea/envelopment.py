"""Envelopment constraint layout shared by the SBM and GP-SBM builders."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from dyndea.lp import LpBuilder
from dyndea.panel import DimensionConfig, NormalizedPanel, Role
from dyndea.regularization import RegularizationConfig

__all__ = [
    "RTS",
    "SlackKey",
    "EnvelopmentRow",
    "envelopment_rows",
    "intensity_name",
    "add_envelopment",
]

# (variable, period, dimension); dimension is None for inputs and carry-overs
SlackKey = tuple[str, str, "str | None"]


class RTS(str, Enum):
    VRS = "vrs"
    CRS = "crs"


@dataclass(frozen=True)
class EnvelopmentRow:
    variable: str
    role: Role
    period: str
    t: int
    dimension: str | None = None

    @property
    def key(self) -> SlackKey:
        return (self.variable, self.period, self.dimension)

    @property
    def slack_name(self) -> str:
        if self.dimension is None:
            return f"s[{self.variable}|{self.period}]"
        return f"s[{self.variable}|{self.period}|{self.dimension}]"

    @property
    def sign(self) -> float:
        """+1 when the slack is an excess (inputs, undesirables), -1 for a shortfall."""
        return -1.0 if self.role.is_desirable else 1.0


def envelopment_rows(config: DimensionConfig) -> list[EnvelopmentRow]:
    """Rows in build order: per period, inputs, then each dimension's outputs, then carry-overs."""
    rows = []
    for t, p in enumerate(config.periods):
        rows += [EnvelopmentRow(v, Role.INPUT, p, t) for v in config.inputs]
        for g in config.dimension_ids:
            des, und = config.members(g)
            rows += [EnvelopmentRow(v, Role.DESIRABLE_OUTPUT, p, t, g) for v in des]
            rows += [EnvelopmentRow(v, Role.UNDESIRABLE_OUTPUT, p, t, g) for v in und]
        rows += [EnvelopmentRow(v, Role.DESIRABLE_CARRYOVER, p, t) for v in config.desirable_carryovers]
        rows += [EnvelopmentRow(v, Role.UNDESIRABLE_CARRYOVER, p, t) for v in config.undesirable_carryovers]
    return rows


def intensity_name(dmu: str, period: str) -> str:
    return f"lambda[{dmu}|{period}]"


def add_envelopment(
    builder: LpBuilder,
    panel: NormalizedPanel,
    o: int,
    rows: list[EnvelopmentRow],
    regularization: RegularizationConfig,
    rts: RTS,
    scale: str | None,
) -> None:
    """Add intensity variables, slacks and all envelopment/linking/convexity rows.

    With ``scale`` naming a variable (the Charnes-Cooper ``q``), the evaluated
    DMU's data multiply it on the left; otherwise they sit on the right-hand
    side.  rho is added unscaled in both cases, positive for excess rows and
    negative for shortfall rows.
    """
    config = panel.config
    dmus, periods = panel.dmus, config.periods
    for p in periods:
        for d in dmus:
            builder.add_variable(intensity_name(d, p))
    for row in rows:
        builder.add_variable(row.slack_name)

    for row in rows:
        data = panel.data(row.variable)[:, row.t]
        coeffs = {intensity_name(d, row.period): float(data[j]) for j, d in enumerate(dmus)}
        coeffs[row.slack_name] = row.sign
        rho = regularization.rho(row.variable, row.role, row.period, row.dimension)
        rhs = row.sign * rho
        if scale is None:
            rhs += float(data[o])
        else:
            coeffs[scale] = coeffs.get(scale, 0.0) - float(data[o])
        label = f"env[{row.variable}|{row.period}" + (f"|{row.dimension}]" if row.dimension else "]")
        builder.add_constraint(coeffs, "=", rhs, name=label)

    for v in (*config.desirable_carryovers, *config.undesirable_carryovers):
        data = panel.data(v)
        for t in range(len(periods) - 1):
            coeffs: dict[str, float] = {}
            for j, d in enumerate(dmus):
                coeffs[intensity_name(d, periods[t])] = float(data[j, t])
                coeffs[intensity_name(d, periods[t + 1])] = -float(data[j, t])
            builder.add_constraint(coeffs, "=", 0.0, name=f"link[{v}|{periods[t]}]")

    if rts is RTS.VRS:
        for p in periods:
            coeffs = {intensity_name(d, p): 1.0 for d in dmus}
            if scale is None:
                builder.add_constraint(coeffs, "=", 1.0, name=f"convex[{p}]")
            else:
                coeffs[scale] = -1.0
                builder.add_constraint(coeffs, "=", 0.0, name=f"convex[{p}]")
