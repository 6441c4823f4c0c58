"""Score tables and their CSV/JSON serialization.

CSV files start with ``# key=value`` metadata lines, then a header row.
``scores.csv`` holds ``dmu,period,dimension,score`` (dimension ``overall``
included) and ``mean_scores.csv`` holds ``dmu,dimension,mean_score``.
DMUs whose solve failed have no score rows; they are listed in the
metadata as ``failure=<dmu>:<status>:<message>``.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Mapping

from dyndea.scores import OVERALL, ScoreReport

__all__ = ["ScoreTable", "read_score_csv", "read_mean_scores", "format_score", "write_text_atomic"]

SCORE_HEADER = ("dmu", "period", "dimension", "score")
MEAN_HEADER = ("dmu", "dimension", "mean_score")


def format_score(x: float) -> str:
    return repr(float(x))


@dataclass(frozen=True)
class ScoreTable:
    model: str
    reports: tuple[ScoreReport, ...]
    metadata: Mapping[str, str] = field(default_factory=dict)

    def report(self, dmu: str) -> ScoreReport:
        for r in self.reports:
            if r.dmu == dmu:
                return r
        raise KeyError(dmu)

    @property
    def dmus(self) -> tuple[str, ...]:
        return tuple(r.dmu for r in self.reports)

    @property
    def failures(self) -> list[ScoreReport]:
        return [r for r in self.reports if not r.ok]

    def rows(self) -> list[tuple[str, str, str, float]]:
        return [(r.dmu, p, g, s) for r in self.reports for p, g, s in r.cells()]

    def mean_rows(self) -> list[tuple[str, str, float]]:
        return [(r.dmu, g, s) for r in self.reports if r.ok for g, s in r.means().items()]

    def means(self, dimension: str = OVERALL) -> dict[str, float]:
        return {r.dmu: (r.mean_overall if dimension == OVERALL else r.mean_dimension(dimension)) for r in self.reports if r.ok}

    def _header(self, extra: Mapping[str, str], timestamp: bool) -> dict[str, str]:
        meta = dict(self.metadata)
        meta.update(extra)
        if timestamp:
            meta["timestamp"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
        return meta

    def _failure_lines(self) -> list[str]:
        return [f"{r.dmu}:{r.status}:{r.message}" for r in self.failures]

    def to_csv(self, extra: Mapping[str, str] | None = None, timestamp: bool = True) -> tuple[str, str]:
        """(scores.csv text, mean_scores.csv text)."""
        meta = self._header(extra or {}, timestamp)
        texts = []
        for header, rows in ((SCORE_HEADER, self.rows()), (MEAN_HEADER, self.mean_rows())):
            out = io.StringIO()
            for k in sorted(meta):
                out.write(f"# {k}={meta[k]}\n")
            for f in self._failure_lines():
                out.write(f"# failure={f}\n")
            w = csv.writer(out, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow((*row[:-1], format_score(row[-1])))
            texts.append(out.getvalue())
        return texts[0], texts[1]

    def to_json(self, extra: Mapping[str, str] | None = None, timestamp: bool = True) -> str:
        meta = self._header(extra or {}, timestamp)
        doc: dict[str, Any] = {
            "metadata": dict(sorted(meta.items())),
            "scores": [dict(zip(SCORE_HEADER, row)) for row in self.rows()],
            "mean_scores": [dict(zip(MEAN_HEADER, row)) for row in self.mean_rows()],
            "failures": [{"dmu": r.dmu, "status": r.status, "message": r.message} for r in self.failures],
        }
        return json.dumps(doc, indent=2) + "\n"

    def outputs(self, fmt: str = "csv", extra: Mapping[str, str] | None = None, timestamp: bool = True) -> dict[str, str]:
        """File name -> content for the chosen format."""
        if fmt == "json":
            return {"scores.json": self.to_json(extra, timestamp)}
        scores, means = self.to_csv(extra, timestamp)
        return {"scores.csv": scores, "mean_scores.csv": means}


def write_text_atomic(files: Mapping[str, str], out_dir: Path) -> list[Path]:
    """Write all files or none: contents are staged to temporaries first."""
    out_dir.mkdir(parents=True, exist_ok=True)
    staged = []
    try:
        for name, text in files.items():
            tmp = out_dir / f".{name}.tmp"
            tmp.write_text(text, encoding="utf-8")
            staged.append((tmp, out_dir / name))
    except OSError:
        for tmp, _ in staged:
            tmp.unlink(missing_ok=True)
        raise
    for tmp, final in staged:
        tmp.replace(final)
    return [final for _, final in staged]


def _split_metadata(text: str) -> tuple[dict[str, str], list[str], list[str]]:
    meta: dict[str, str] = {}
    failures: list[str] = []
    body = []
    for line in text.splitlines():
        if line.startswith("#"):
            k, _, v = line[1:].strip().partition("=")
            if k == "failure":
                failures.append(v)
            else:
                meta[k] = v
        elif line.strip():
            body.append(line)
    return meta, failures, body


def read_score_csv(source: str | Path) -> tuple[dict[str, str], list[tuple[str, str, str, float]]]:
    """Parse a ``scores.csv`` file (or its text) into metadata and rows."""
    text = Path(source).read_text(encoding="utf-8") if isinstance(source, Path) or "\n" not in str(source) else str(source)
    meta, _, body = _split_metadata(text)
    reader = csv.reader(body)
    header = tuple(next(reader))
    if header != SCORE_HEADER:
        raise ValueError(f"expected header {','.join(SCORE_HEADER)}, got {','.join(header)}")
    return meta, [(d, p, g, float(s)) for d, p, g, s in reader]


def read_mean_scores(source: str | Path) -> tuple[dict[str, str], dict[str, dict[str, float]]]:
    """Parse a ``mean_scores.csv`` file into metadata and ``{dmu: {dimension: score}}``."""
    text = Path(source).read_text(encoding="utf-8") if isinstance(source, Path) or "\n" not in str(source) else str(source)
    meta, _, body = _split_metadata(text)
    reader = csv.reader(body)
    header = tuple(next(reader))
    if header != MEAN_HEADER:
        raise ValueError(f"expected header {','.join(MEAN_HEADER)}, got {','.join(header)}")
    out: dict[str, dict[str, float]] = {}
    for d, g, s in reader:
        out.setdefault(d, {})[g] = float(s)
    return meta, out
