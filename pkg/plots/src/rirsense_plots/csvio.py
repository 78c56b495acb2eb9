"""Schema-checked loading of the analysis CSV outputs.

Each figure kind consumes one documented CSV schema. Loading validates
the header, converts the declared columns and ignores unknown columns
with a warning; it never reorders or filters rows, so the loaded table
is an exact image of the file.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List

import numpy as np

__all__ = ["SchemaError", "Table", "SCHEMAS", "load_table"]


class SchemaError(ValueError):
    """The CSV does not match the declared schema."""


# Declared columns per schema: name -> converter kind ('float' | 'str').
SCHEMAS = {
    "coherence": {
        "time_s": "float",
        "gamma": "float",
        "gamma_expected": "float",
        "gamma_ir": "float",
        "defined_flag": "float",
    },
    "sensitivity": {
        "condition_id": "str",
        "pair_id": "str",
        "band_center_hz": "str",  # numeric or the 'broadband' marker
        "gamma_rating": "float",
        "truncation_s": "float",
        "status": "str",
    },
    "tfmap": {
        "time_s": "float",
        "freq_hz": "float",
        "gamma": "float",
    },
    "tf_sensitivity": {
        "freq_hz": "float",
        "gamma_rating": "float",
        "status": "str",
    },
}


@dataclass
class Table:
    """Columnar view of one CSV file, in file order."""

    path: Path
    columns: Dict[str, np.ndarray]
    warnings: List[str] = field(default_factory=list)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.columns[name]

    @property
    def n_rows(self) -> int:
        first = next(iter(self.columns.values()))
        return first.size


def _convert(kind: str, values: List[str]) -> np.ndarray:
    if kind == "float":
        try:
            return np.array([float(v) for v in values], dtype=np.float64)
        except ValueError as exc:
            raise SchemaError(f"non-numeric value in a numeric column: {exc}") from exc
    return np.array(values, dtype=object)


def load_table(path, schema: str) -> Table:
    """Load a CSV against a named schema.

    Raises SchemaError naming the first missing column; unknown columns
    are kept out of the table and reported in Table.warnings.
    """
    if schema not in SCHEMAS:
        raise SchemaError(f"unknown schema {schema!r}; expected one of {sorted(SCHEMAS)}")
    spec = SCHEMAS[schema]
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"input CSV not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        rows = list(reader)
    for column in spec:
        if column not in header:
            raise SchemaError(f"{path}: missing required column '{column}' for schema {schema!r}")
    warnings = [
        f"{path.name}: ignoring unknown column '{name}'" for name in header if name not in spec
    ]
    by_name = {}
    for column, kind in spec.items():
        idx = header.index(column)
        try:
            raw = [row[idx] for row in rows]
        except IndexError:
            raise SchemaError(f"{path}: ragged row (fewer fields than header)") from None
        by_name[column] = _convert(kind, raw)
    return Table(path=path, columns=by_name, warnings=warnings)
