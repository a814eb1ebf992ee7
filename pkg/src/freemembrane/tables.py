"""Rectangular result tables and their CSV form.

Headers carry the unit as a ``_unit`` suffix (``v_pullin_V``). Numbers are
written in scientific notation with 13 significant digits so a re-parse is
exact to well below 1e-12 relative.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .errors import IoFailure, NonRectangularTable

_FMT = "{:.12e}"


@dataclass(frozen=True)
class ResultTable:
    columns: tuple[str, ...]
    rows: tuple[tuple, ...]

    def __init__(self, columns: Sequence[str], rows: Sequence[Sequence]):
        cols = tuple(str(c) for c in columns)
        if not cols:
            raise NonRectangularTable("a table needs at least one column")
        if len(set(cols)) != len(cols):
            raise NonRectangularTable(f"duplicate column names in {cols}")
        body = tuple(tuple(r) for r in rows)
        for i, r in enumerate(body):
            if len(r) != len(cols):
                raise NonRectangularTable(f"row {i} has {len(r)} cells, expected {len(cols)}")
        object.__setattr__(self, "columns", cols)
        object.__setattr__(self, "rows", body)

    def column(self, name: str) -> list:
        k = self.columns.index(name)
        return [r[k] for r in self.rows]

    def __len__(self) -> int:
        return len(self.rows)


def _cell(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float) or hasattr(v, "dtype"):
        x = float(v)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return _FMT.format(x)
    return str(v)


def format_csv(table: ResultTable) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(table.columns)
    for r in table.rows:
        w.writerow([_cell(v) for v in r])
    return buf.getvalue()


def emit_csv(table: ResultTable, path) -> Path:
    if not isinstance(table, ResultTable):
        table = ResultTable(*table)
    path = Path(path)
    try:
        path.write_text(format_csv(table))
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}", path=str(path)) from exc
    return path


def _parse(s: str):
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


def read_csv(path) -> ResultTable:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}", path=str(path)) from exc
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise NonRectangularTable(f"{path} is empty")
    return ResultTable(rows[0], [[_parse(c) for c in r] for r in rows[1:]])
