"""Run reports and comparison tables."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Sequence

from .model import ConVRPTWError, Instance, Solution, evaluate_solution

REPORT_FORMAT = "convrptw-report"


class ReportError(ConVRPTWError, ValueError):
    pass


@dataclass(frozen=True)
class RunReport:
    instance: str
    n_vehicles: int
    travel_time_hours: float
    distance_km: float
    ptw: float  # % of visits outside their window
    ltw: float  # lateness as % of travel time
    cpu_seconds: float
    seed: int
    command: str = "solve"
    delta_tt: float | None = None  # % travel-time improvement over a baseline
    ic: float | None = None  # % of retained customers that changed driver
    inconsistency: float | None = None  # % of visits off the base assignment
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("ptw", "ltw", "ic", "inconsistency"):
            value = getattr(self, name)
            if value is not None and not 0 <= value <= 100 + 1e-9:
                raise ReportError(f"{name} must be a percentage, got {value}")
        if self.cpu_seconds < 0:
            raise ReportError("cpu_seconds must be nonnegative")

    @classmethod
    def from_solution(cls, instance: Instance, solution: Solution, cpu_seconds: float,
                      seed: int, **extra) -> "RunReport":
        m = evaluate_solution(instance, solution)
        return cls(instance=instance.name, n_vehicles=m.n_vehicles,
                   travel_time_hours=m.travel_time / 60, distance_km=m.distance,
                   ptw=m.ptw, ltw=m.ltw, cpu_seconds=cpu_seconds, seed=seed, **extra)

    def to_dict(self) -> dict:
        return {"format": REPORT_FORMAT, **asdict(self)}

    @classmethod
    def from_dict(cls, doc: dict) -> "RunReport":
        if doc.get("format") != REPORT_FORMAT:
            raise ReportError(f"not a run report (format {doc.get('format')!r})")
        known = {f.name for f in fields(cls)}
        try:
            return cls(**{k: v for k, v in doc.items() if k in known})
        except TypeError as exc:
            raise ReportError(f"malformed run report: {exc}") from None


def write_report(report: RunReport, path) -> None:
    Path(path).write_text(json.dumps(report.to_dict(), sort_keys=True, indent=1) + "\n")


def read_report(path) -> RunReport:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ReportError(f"{path}: {exc}") from None
    return RunReport.from_dict(doc)


def improvement(base: float, new: float) -> float:
    """Percent reduction from ``base`` to ``new``."""
    if base == 0:
        raise ReportError("cannot compute an improvement over a zero baseline")
    return 100.0 * (base - new) / base


COLUMNS = ["run", "NV", "TT", "PTW", "LTW", "IC", "CPU", "seed"]
DELTA_COLUMNS = ["Δ_NV", "Δ_TT"]


def _fmt(x, digits: int = 1) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return f"{x:.{digits}f}"
    return str(x)


@dataclass
class ReportTable:
    columns: list[str]
    rows: list[list[str]]

    def to_text(self) -> str:
        widths = [max(len(c), *(len(r[i]) for r in self.rows)) for i, c in enumerate(self.columns)]
        lines = ["  ".join(c.ljust(w) for c, w in zip(self.columns, widths)).rstrip()]
        for r in self.rows:
            lines.append("  ".join(x.rjust(w) if i else x.ljust(w)
                                   for i, (x, w) in enumerate(zip(r, widths))).rstrip())
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        writer.writerows(self.rows)
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "ReportTable":
        rows = list(csv.reader(io.StringIO(text)))
        return cls(rows[0], rows[1:])


def build_table(reports: Sequence[RunReport], names: Sequence[str] | None = None,
                baseline: RunReport | None = None) -> ReportTable:
    """One row per run; improvement columns when a baseline run is given."""
    if not reports:
        raise ReportError("no runs to report")
    instances = {r.instance for r in reports} | ({baseline.instance} if baseline else set())
    if len(instances) > 1:
        raise ReportError(f"runs of different instances cannot be aggregated: {sorted(instances)}")
    names = list(names) if names else [f"run{i}" for i in range(len(reports))]
    columns = COLUMNS + (DELTA_COLUMNS if baseline else [])
    rows = []
    for name, r in zip(names, reports):
        ic = r.ic if r.ic is not None else r.inconsistency
        row = [name, str(r.n_vehicles), _fmt(r.travel_time_hours), _fmt(r.ptw), _fmt(r.ltw),
               _fmt(ic), _fmt(r.cpu_seconds, 2), str(r.seed)]
        if baseline:
            row += [_fmt(improvement(baseline.n_vehicles, r.n_vehicles)),
                    _fmt(improvement(baseline.travel_time_hours, r.travel_time_hours))]
        rows.append(row)
    return ReportTable(columns, rows)
