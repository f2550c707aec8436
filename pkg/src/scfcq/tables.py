"""CSV input/output in a fixed dialect: comma separated, header row, '.' decimals."""

from __future__ import annotations

import csv
import math

import numpy as np

from .errors import ScfcqError


class CsvFormatError(ScfcqError):
    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


def fmt(value):
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        return repr(value)
    if isinstance(value, (np.integer,)):
        return str(int(value))
    return str(value)


def write_rows(path, columns, rows):
    """Write dict rows; floats use the shortest round-trip representation."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([fmt(row[c]) for c in columns])


def read_table(path):
    """Return ``(header, rows)`` with every field as a string.

    Raises ``CsvFormatError`` naming the offending line for ragged rows or
    empty fields.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvFormatError("empty file (a header row is required)", 1) from None
        header = [h.strip() for h in header]
        if len(set(header)) != len(header):
            raise CsvFormatError("duplicate column names in header", 1)
        rows = []
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != len(header):
                raise CsvFormatError(f"expected {len(header)} fields, found {len(row)}", line)
            for name, val in zip(header, row):
                if val.strip() == "":
                    raise CsvFormatError(f"missing value in column {name!r}", line)
            rows.append((line, row))
    return header, rows


def numeric_columns(path, names):
    """Read the named columns as float arrays (hard error on non-numeric)."""
    header, rows = read_table(path)
    idx = {}
    for name in names:
        if name not in header:
            raise KeyError(name)
        idx[name] = header.index(name)
    out = {name: np.empty(len(rows)) for name in names}
    for r, (line, row) in enumerate(rows):
        for name, j in idx.items():
            try:
                val = float(row[j])
            except ValueError:
                raise CsvFormatError(f"non-numeric value {row[j]!r} in column {name!r}", line) from None
            if not math.isfinite(val):
                raise CsvFormatError(f"non-finite value in column {name!r}", line)
            out[name][r] = val
    return out
