"""Tabular results with CSV and JSON encodings that carry the same values."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Any, TextIO

Cell = Any  # float | int | str | bool | None


@dataclass
class Table:
    columns: list[str]
    rows: list[list[Cell]]
    meta: dict[str, Cell] = field(default_factory=dict)

    def records(self) -> list[dict[str, Cell]]:
        return [dict(zip(self.columns, r)) for r in self.rows]

    def column(self, name: str) -> list[Cell]:
        i = self.columns.index(name)
        return [r[i] for r in self.rows]


def _cell_text(v: Cell) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse_cell(text: str) -> Cell:
    if text == "":
        return None
    if text in ("true", "false"):
        return text == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def write_csv(table: Table, out: TextIO) -> None:
    """Header row preceded by ``# key: value`` metadata lines (JSON values)."""
    for k, v in table.meta.items():
        out.write(f"# {k}: {json.dumps(v, sort_keys=True)}\n")
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(table.columns)
    for row in table.rows:
        writer.writerow([_cell_text(v) for v in row])


def read_csv(text: str) -> Table:
    meta: dict[str, Cell] = {}
    body = []
    for line in text.splitlines():
        if line.startswith("# "):
            key, _, value = line[2:].partition(": ")
            meta[key] = json.loads(value)
        else:
            body.append(line)
    reader = csv.reader(io.StringIO("\n".join(body)))
    columns = next(reader)
    rows = [[_parse_cell(c) for c in r] for r in reader if r]
    return Table(columns, rows, meta)


def write_json(table: Table, out: TextIO) -> None:
    json.dump({"meta": table.meta, "columns": table.columns, "rows": table.rows}, out, indent=2, allow_nan=False)
    out.write("\n")


def read_json(text: str) -> Table:
    doc = json.loads(text)
    return Table(doc["columns"], doc["rows"], doc["meta"])


def render(table: Table, fmt: str) -> str:
    buf = io.StringIO()
    if fmt == "csv":
        write_csv(table, buf)
    elif fmt == "json":
        write_json(table, buf)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    return buf.getvalue()
