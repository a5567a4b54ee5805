"""Labeled sweep tables and their CSV/JSON serialization."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np


@dataclass
class SweepResult:
    """Generic labeled table: one axis, named result columns, row status.

    Provenance entries (config hash, tool version, ground truth of
    synthetic generators, ...) are emitted as '#'-prefixed header lines.
    """

    axis_name: str
    axis: np.ndarray
    columns: dict[str, np.ndarray]
    status: list[str] | None = None
    provenance: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        self.axis = np.asarray(self.axis)
        for name, col in self.columns.items():
            col = np.asarray(col)
            if len(col) != len(self.axis):
                raise ValueError(f"column {name!r} length mismatch")
            self.columns[name] = col
        if self.status is not None and len(self.status) != len(self.axis):
            raise ValueError("status length mismatch")

    @property
    def header_names(self) -> list[str]:
        names = [self.axis_name, *self.columns.keys()]
        if self.status is not None:
            names.append("status")
        return names

    def rows(self):
        cols = [self.axis, *self.columns.values()]
        for j in range(len(self.axis)):
            row = [fmt_number(c[j]) for c in cols]
            if self.status is not None:
                row.append(self.status[j])
            yield row

    def write_csv(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for key, val in self.provenance.items():
                fh.write(f"# {key} = {val}\n")
            fh.write(",".join(self.header_names) + "\n")
            for row in self.rows():
                fh.write(",".join(row) + "\n")

    def write_json(self, path):
        payload = {
            "provenance": dict(self.provenance),
            "axis": {"name": self.axis_name,
                     "values": [fmt_number(v) for v in self.axis]},
            "columns": {name: [fmt_number(v) for v in col]
                        for name, col in self.columns.items()},
        }
        if self.status is not None:
            payload["status"] = list(self.status)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")


def fmt_number(x) -> str:
    """Portable fixed-precision number formatting for golden files."""
    if isinstance(x, str):
        return x
    return format(float(x), ".12g")


def read_table_csv(path):
    """Read a SweepResult-style CSV back into (provenance, header, columns)."""
    provenance = {}
    header = None
    data: list[list[str]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line.lstrip("#").strip()
                if "=" in body:
                    key, _, val = body.partition("=")
                    provenance[key.strip()] = val.strip()
                continue
            if header is None:
                header = [h.strip() for h in line.split(",")]
                continue
            data.append([c.strip() for c in line.split(",")])
    if header is None:
        raise ValueError(f"no header row in {path}")
    columns: dict[str, np.ndarray | list[str]] = {}
    for j, name in enumerate(header):
        vals = [row[j] for row in data]
        try:
            columns[name] = np.array([float(v) for v in vals])
        except ValueError:
            columns[name] = vals
    return provenance, header, columns
