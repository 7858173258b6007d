"""Result tables: CSV emission with a commented metadata header.

Numeric cells are serialized with ``repr``, which round-trips 64-bit floats
exactly; the bundled reader restores ints, floats (including inf) and
empty-cell None values, so ``read_result_table(write(...))`` reproduces the
table bit-for-bit.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

Cell = Union[int, float, str, None]


def config_hash(config: dict) -> str:
    """Stable hash of the semantic config content (key order ignored)."""
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


@dataclass
class ResultTable:
    columns: list[str]
    rows: list[tuple]
    metadata: dict[str, str] = field(default_factory=dict)

    def append(self, *cells: Cell) -> None:
        if len(cells) != len(self.columns):
            raise ValueError(f"row with {len(cells)} cells against "
                             f"{len(self.columns)} columns")
        self.rows.append(tuple(cells))


def _format_cell(cell: Cell) -> str:
    if cell is None:
        return ""
    if isinstance(cell, bool):
        raise TypeError("boolean cells are ambiguous; use 0/1")
    if isinstance(cell, (int, float)):
        return repr(cell)
    return str(cell)


def _parse_cell(text: str) -> Cell:
    if text == "":
        return None
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


def write_result_table(table: ResultTable, path: str) -> None:
    lines = []
    for key, value in table.metadata.items():
        lines.append(f"# {key} = {value}")
    lines.append(",".join(table.columns))
    for row in table.rows:
        if len(row) != len(table.columns):
            raise ValueError("ragged row in result table")
        lines.append(",".join(_format_cell(c) for c in row))
    with open(path, "w", newline="\n") as handle:
        handle.write("\n".join(lines) + "\n")


def read_result_table(path: str) -> ResultTable:
    metadata: dict[str, str] = {}
    columns: Optional[list[str]] = None
    rows: list[tuple] = []
    with open(path) as handle:
        for line in handle:
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line[1:].partition("=")
                metadata[key.strip()] = value.strip()
                continue
            if columns is None:
                columns = line.split(",")
                continue
            rows.append(tuple(_parse_cell(c) for c in line.split(",")))
    if columns is None:
        raise ValueError(f"no header line found in {path}")
    return ResultTable(columns=columns, rows=rows, metadata=metadata)
