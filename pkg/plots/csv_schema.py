"""CSV loading with named-column validation for the plot scripts.

The scripts are read-only consumers of the benchmark CSV contracts; they
parse what the CLI wrote and never recompute any filter quantity.
"""

from __future__ import annotations

import csv


class SchemaError(ValueError):
    """An input CSV does not match the expected column layout."""


def read_rows(path: str, required: tuple[str, ...]) -> tuple[list[str], list[dict]]:
    """Read a CSV into dict rows, failing loudly on missing columns.

    Returns the header in file order and the data rows. Each missing
    required column is reported by name.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = list(reader.fieldnames or [])
        missing = [column for column in required if column not in header]
        if missing:
            raise SchemaError(
                f"{path}: missing required column(s) "
                + ", ".join(repr(c) for c in missing)
            )
        rows = list(reader)
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    return header, rows


def column_floats(rows: list[dict], column: str, path: str = "") -> list[float]:
    """Parse one column as floats, naming the column on bad cells."""
    out = []
    for row in rows:
        cell = row[column]
        try:
            out.append(float(cell))
        except (TypeError, ValueError):
            raise SchemaError(
                f"{path or 'input'}: column {column!r} has non-numeric "
                f"value {cell!r}"
            ) from None
    return out
