"""Plain-text run reports.

A report is a list of sections. ``[meta]``, ``[config]``, ``[metrics]`` and
``[checks]`` hold ``key = value`` lines; ``[table NAME]`` holds a
tab-separated header row followed by data rows. Floats are written with
``repr`` so that parsing reproduces them exactly::

    [meta]
    command = train
    seed = 42
    [metrics]
    test_accuracy = 0.985
    [table epochs]
    epoch	lr	train_loss
    1	0.003	1.21
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path


class ReportFormatError(ValueError):
    pass


@dataclass
class Table:
    columns: list[str]
    rows: list[list[str]] = field(default_factory=list)

    def add(self, *values) -> None:
        if len(values) != len(self.columns):
            raise ValueError(f"row has {len(values)} cells, table has {len(self.columns)} columns")
        self.rows.append([_cell(v) for v in values])

    def column(self, name: str) -> list[str]:
        i = self.columns.index(name)
        return [row[i] for row in self.rows]

    def floats(self, name: str) -> list[float]:
        return [float(v) for v in self.column(name)]


@dataclass
class RunReport:
    command: str
    seed: int
    wall_time: float = 0.0
    config: dict[str, str] = field(default_factory=dict)
    metrics: dict[str, float] = field(default_factory=dict)
    checks: dict[str, bool] = field(default_factory=dict)
    tables: dict[str, Table] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def table(self, name: str, columns) -> Table:
        t = Table(list(columns))
        self.tables[name] = t
        return t

    def to_text(self) -> str:
        lines = ["[meta]", f"command = {self.command}", f"seed = {self.seed}",
                 f"wall_time = {self.wall_time!r}"]
        lines.append("[config]")
        lines += [f"{k} = {v}" for k, v in self.config.items()]
        lines.append("[metrics]")
        lines += [f"{k} = {float(v)!r}" for k, v in self.metrics.items()]
        lines.append("[checks]")
        lines += [f"{k} = {'pass' if ok else 'fail'}" for k, ok in self.checks.items()]
        for name, t in self.tables.items():
            lines.append(f"[table {name}]")
            lines.append("\t".join(t.columns))
            lines += ["\t".join(row) for row in t.rows]
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.to_text(), encoding="utf-8")


def _cell(v) -> str:
    text = repr(float(v)) if isinstance(v, float) else str(v)
    if "\t" in text or "\n" in text:
        raise ValueError(f"table cell {text!r} contains a tab or newline")
    return text


def _pair(line: str, lineno: int) -> tuple[str, str]:
    if " = " not in line:
        raise ReportFormatError(f"line {lineno}: expected 'key = value', got {line!r}")
    key, value = line.split(" = ", 1)
    return key, value


def parse_report(text: str) -> RunReport:
    meta: dict[str, str] = {}
    report = RunReport(command="", seed=0)
    section = None
    table = None
    for lineno, line in enumerate(text.splitlines(), 1):
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1]
            table = None
            if section.startswith("table "):
                table = report.tables[section[6:]] = Table([])
            elif section not in ("meta", "config", "metrics", "checks"):
                raise ReportFormatError(f"line {lineno}: unknown section {section!r}")
            continue
        if section is None:
            if line.strip():
                raise ReportFormatError(f"line {lineno}: content before the first section")
            continue
        if table is not None:
            cells = line.split("\t")
            if not table.columns:
                table.columns = cells
            elif len(cells) != len(table.columns):
                raise ReportFormatError(f"line {lineno}: {len(cells)} cells for {len(table.columns)} columns")
            else:
                table.rows.append(cells)
            continue
        key, value = _pair(line, lineno)
        if section == "meta":
            meta[key] = value
        elif section == "config":
            report.config[key] = value
        elif section == "metrics":
            report.metrics[key] = float(value)
        else:
            if value not in ("pass", "fail"):
                raise ReportFormatError(f"line {lineno}: check status must be pass or fail")
            report.checks[key] = value == "pass"
    try:
        report.command = meta["command"]
        report.seed = int(meta["seed"])
        report.wall_time = float(meta.get("wall_time", "0.0"))
    except (KeyError, ValueError) as exc:
        raise ReportFormatError(f"incomplete [meta] section: {exc}") from exc
    return report


def load_report(path) -> RunReport:
    return parse_report(Path(path).read_text(encoding="utf-8"))


def same_report(a: RunReport, b: RunReport) -> bool:
    """Equality that treats NaN metrics as equal to each other."""
    def norm(r):
        return {k: ("nan" if math.isnan(v) else v) for k, v in r.metrics.items()}
    return (a.command, a.seed, a.wall_time, a.config, a.checks, a.tables) == \
        (b.command, b.seed, b.wall_time, b.config, b.checks, b.tables) and norm(a) == norm(b)
