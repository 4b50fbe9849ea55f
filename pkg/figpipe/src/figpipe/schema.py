"""Sweep-CSV schema: loading and validation.

The upstream harness emits one row per post-selection angle with a fixed
header. Figure inputs must carry at least the sweep columns; the tomogram
kind additionally needs the density-matrix columns that fig4/sweep files
append.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

SWEEP_COLUMNS = (
    "theta_f",
    "re_wv_true",
    "im_wv_true",
    "re_wv_extracted",
    "im_wv_extracted",
    "re_stderr",
    "im_stderr",
    "fidelity",
    "acceptance",
    "extraction",
    "error",
)

TOMOGRAM_COLUMNS = SWEEP_COLUMNS + (
    "eta",
    "rho11_true",
    "re_rho12_true",
    "im_rho12_true",
    "rho11_est",
    "re_rho12_est",
    "im_rho12_est",
)

_STRING_COLUMNS = {"extraction", "error"}


class SchemaError(Exception):
    """CSV header does not carry the expected columns."""

    def __init__(self, path, missing, extra):
        self.path = str(path)
        self.missing = sorted(missing)
        self.extra = sorted(extra)
        super().__init__(
            f"{path}: missing columns {self.missing}"
            + (f", unexpected columns {self.extra}" if extra else "")
        )


@dataclass
class SweepTable:
    """Parsed rows: numeric columns as floats, label columns as strings."""

    path: str
    columns: tuple
    rows: list

    def values(self, column: str, rows=None):
        return [r[column] for r in (self.rows if rows is None else rows)]

    def good_rows(self, extraction: str | None = None) -> list:
        out = [r for r in self.rows if not r["error"]]
        if extraction is not None:
            out = [r for r in out if r["extraction"] == extraction]
        return out

    def extraction_variants(self) -> list:
        seen = []
        for r in self.rows:
            if r["extraction"] not in seen:
                seen.append(r["extraction"])
        return seen


def load_table(path, required=SWEEP_COLUMNS) -> SweepTable:
    """Read and validate one sweep CSV.

    Columns beyond ``required`` are kept (fig4 appends density-matrix
    columns); a header missing required columns raises SchemaError with the
    column diff.
    """
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = tuple(reader.fieldnames or ())
        missing = set(required) - set(header)
        if missing:
            raise SchemaError(path, missing, set(header) - set(TOMOGRAM_COLUMNS))
        rows = []
        for raw in reader:
            row = {}
            for col in header:
                if col in _STRING_COLUMNS:
                    row[col] = raw[col]
                else:
                    try:
                        row[col] = float(raw[col])
                    except (TypeError, ValueError):
                        row[col] = math.nan
            rows.append(row)
    return SweepTable(str(path), header, rows)
