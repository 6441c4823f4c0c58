"""Overall and per-dimension efficiency scores from optimal slacks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Mapping

from dyndea.envelopment import SlackKey
from dyndea.panel import NormalizedPanel

__all__ = ["ScoreReport", "dimension_score", "overall_score", "score_report", "OVERALL"]

OVERALL = "overall"


def _slacks(run: object) -> Mapping[SlackKey, float]:
    return getattr(run, "slacks", run)  # type: ignore[return-value]


def _ratio(slacks: Mapping[SlackKey, float], panel: NormalizedPanel, o: int, var: str, t: int, g: str | None) -> float:
    period = panel.config.periods[t]
    return slacks[(var, period, g)] / float(panel.data(var)[o, t])


def dimension_score(run: object, panel: NormalizedPanel, dmu: str, g: str, t: int) -> float:
    """Score of dimension ``g`` in period index ``t``.

    The input excess over ``I`` sits in the numerator; the shortfalls and
    excesses of the dimension's own outputs, averaged over ``R_g + K_g``, in
    the denominator.  Ratios use the evaluated DMU's normalized data.
    """
    cfg = panel.config
    s = _slacks(run)
    o = panel.dmus.index(dmu)
    des, und = cfg.members(g)
    num = 1.0 - sum(_ratio(s, panel, o, v, t, None) for v in cfg.inputs) / cfg.I
    den = 1.0 + sum(_ratio(s, panel, o, v, t, g) for v in (*des, *und)) / (len(des) + len(und))
    return num / den


def overall_score(run: object, panel: NormalizedPanel, dmu: str, t: int) -> float:
    """Aggregate score in period index ``t``.

    Numerator averages input and undesirable carry-over excesses over
    ``I + F``; the denominator averages every output membership plus the
    desirable carry-over shortfalls over ``sum_g (R_g + K_g) + C``.
    """
    cfg = panel.config
    s = _slacks(run)
    o = panel.dmus.index(dmu)
    excess = sum(_ratio(s, panel, o, v, t, None) for v in (*cfg.inputs, *cfg.undesirable_carryovers))
    num = 1.0 - excess / (cfg.I + cfg.F)
    short = sum(
        _ratio(s, panel, o, v, t, g) for g in cfg.dimension_ids for v in (*cfg.members(g)[0], *cfg.members(g)[1])
    )
    short += sum(_ratio(s, panel, o, v, t, None) for v in cfg.desirable_carryovers)
    den = 1.0 + short / (cfg.R + cfg.K + cfg.C)
    return num / den


@dataclass(frozen=True)
class ScoreReport:
    """Per-period dimension and overall scores of one DMU.

    A failed solve leaves ``status`` != "optimal" and the score maps empty.
    """

    dmu: str
    periods: tuple[str, ...]
    dimensions: tuple[str, ...]
    dimension_scores: Mapping[str, tuple[float, ...]] = field(default_factory=dict)
    overall: tuple[float, ...] = ()
    status: str = "optimal"
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status == "optimal"

    @property
    def mean_overall(self) -> float:
        return math.fsum(self.overall) / len(self.overall) if self.overall else math.nan

    def mean_dimension(self, g: str) -> float:
        vals = self.dimension_scores.get(g, ())
        return math.fsum(vals) / len(vals) if vals else math.nan

    def score(self, dimension: str, period: str) -> float:
        t = self.periods.index(period)
        if dimension == OVERALL:
            return self.overall[t]
        return self.dimension_scores[dimension][t]

    def cells(self) -> Iterator[tuple[str, str, float]]:
        """(period, dimension, score) with dimensions in config order, then overall."""
        if not self.ok:
            return
        for t, p in enumerate(self.periods):
            for g in self.dimensions:
                yield p, g, self.dimension_scores[g][t]
            yield p, OVERALL, self.overall[t]

    def means(self) -> dict[str, float]:
        out = {g: self.mean_dimension(g) for g in self.dimensions}
        out[OVERALL] = self.mean_overall
        return out


def score_report(run: object, panel: NormalizedPanel, dmu: str) -> ScoreReport:
    cfg = panel.config
    T = len(cfg.periods)
    dims = {g: tuple(dimension_score(run, panel, dmu, g, t) for t in range(T)) for g in cfg.dimension_ids}
    overall = tuple(overall_score(run, panel, dmu, t) for t in range(T))
    return ScoreReport(dmu, cfg.periods, cfg.dimension_ids, dims, overall)


def failed_report(panel: NormalizedPanel, dmu: str, status: str, message: str) -> ScoreReport:
    cfg = panel.config
    return ScoreReport(dmu, cfg.periods, cfg.dimension_ids, {}, (), status, message)
