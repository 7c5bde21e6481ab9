"""Tabular experiment output with CSV and JSON serialization."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = ["ResultTable", "write_results", "read_results", "format_csv", "FORMATS"]

FORMATS = ("csv", "json")


@dataclass
class ResultTable:
    """Named numeric columns, row-major data and free-form metadata.

    Standard errors live in companion columns suffixed ``_stderr``.
    """

    columns: list
    rows: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.columns = [str(c) for c in self.columns]
        if len(set(self.columns)) != len(self.columns):
            raise ValueError("column names must be unique")
        self.rows = [[float(x) for x in row] for row in self.rows]
        for i, row in enumerate(self.rows):
            if len(row) != len(self.columns):
                raise ValueError(f"row {i} has {len(row)} cells, expected {len(self.columns)}")

    def append(self, row):
        row = [float(x) for x in row]
        if len(row) != len(self.columns):
            raise ValueError(f"row has {len(row)} cells, expected {len(self.columns)}")
        self.rows.append(row)

    def column(self, name):
        """Column ``name`` as a float array."""
        i = self.columns.index(name)
        return np.array([r[i] for r in self.rows], dtype=float)

    def as_array(self):
        return np.array(self.rows, dtype=float).reshape(len(self.rows), len(self.columns))

    def __eq__(self, other):
        if not isinstance(other, ResultTable):
            return NotImplemented
        return (self.columns == other.columns and self.metadata == other.metadata
                and len(self.rows) == len(other.rows)
                and all(_same(a, b) for ra, rb in zip(self.rows, other.rows) for a, b in zip(ra, rb)))

    def to_dict(self):
        return {"columns": list(self.columns), "rows": [_json_row(r) for r in self.rows],
                "metadata": self.metadata}


def _same(a, b):
    return a == b or (math.isnan(a) and math.isnan(b))


def _json_row(row):
    # NaN has no JSON literal; it maps to null
    return [None if math.isnan(x) else x for x in row]


def format_csv(table):
    """CSV text: metadata as `# key: json` lines, then header and rows."""
    buf = io.StringIO()
    for key in sorted(table.metadata):
        buf.write(f"# {key}: {json.dumps(table.metadata[key], sort_keys=True)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(table.columns)
    for row in table.rows:
        w.writerow([repr(x) for x in row])
    return buf.getvalue()


def write_results(table: ResultTable, path, format="csv"):
    """Write ``table`` as CSV (metadata in ``#`` comment lines) or JSON."""
    if format not in FORMATS:
        raise ValueError(f"unknown format {format!r}; expected one of {FORMATS}")
    text = (format_csv(table) if format == "csv"
            else json.dumps(table.to_dict(), indent=2, sort_keys=False) + "\n")
    path = Path(path)
    try:
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc.strerror or exc}") from exc


def read_results(path, format=None):
    """Parse a table written by :func:`write_results`; the format defaults to the suffix."""
    path = Path(path)
    format = format or ("json" if path.suffix.lower() == ".json" else "csv")
    try:
        text = path.read_text()
    except OSError as exc:
        raise OSError(f"cannot read results from {path}: {exc.strerror or exc}") from exc
    if format == "json":
        data = json.loads(text)
        rows = [[math.nan if x is None else x for x in r] for r in data["rows"]]
        return ResultTable(data["columns"], rows, data["metadata"])
    meta, body = {}, []
    for line in text.splitlines():
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition(": ")
            meta[key] = json.loads(value)
        elif line:
            body.append(line)
    reader = csv.reader(body)
    columns = next(reader)
    return ResultTable(columns, [[float(x) for x in r] for r in reader], meta)
