"""Render tables, stick lists and summaries as CSV or JSON text."""

from __future__ import annotations

import json
import math
from typing import TYPE_CHECKING, Any, Dict, Iterable, Mapping, Sequence

import numpy as np

from .util import format_float
from .vibronic import BareSpectrum

if TYPE_CHECKING:
    from _typeshed import SupportsWrite


class WriterContext:
    def __init__(self, target: SupportsWrite[str]) -> None:
        self._target = target
        self._new_line = True

    def write(self, s: str) -> None:
        self._target.write(s)
        self._new_line = s.endswith("\n")

    def finish_line(self, s: str = "") -> None:
        self.write(s)
        self.write("\n")

    def write_row(self, cells: Iterable[object]) -> None:
        if not self._new_line:
            self.finish_line()
        self.finish_line(",".join(_cell(c) for c in cells))


def _cell(value: object) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format_float(float(value))
    text = str(value)
    if any(c in text for c in ',"\n'):
        return '"' + text.replace('"', '""') + '"'
    return text


def write_table(
    columns: Sequence[str], data: Sequence[Sequence[Any]], target: SupportsWrite[str]
) -> None:
    """Write equally long columns as CSV with a header row."""
    lengths = {len(column) for column in data}
    if len(columns) != len(data) or len(lengths) > 1:
        raise ValueError("columns must be named once and have equal length")
    context = WriterContext(target)
    context.write_row(columns)
    for row in zip(*data):
        context.write_row(row)


def write_sticks(spectrum: BareSpectrum, target: SupportsWrite[str]) -> None:
    write_table(
        ("state", "frequency", "weight"),
        (spectrum.states, spectrum.frequencies, spectrum.weights),
        target,
    )


def _jsonable(value: Any) -> Any:
    if isinstance(value, Mapping):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def write_json(document: Any, target: SupportsWrite[str]) -> None:
    """Sorted, indented JSON with a trailing newline; non-finite floats become null."""
    json.dump(_jsonable(document), target, sort_keys=True, indent=2)
    target.write("\n")


def table_document(
    columns: Sequence[str], data: Sequence[Sequence[Any]]
) -> Mapping[str, Any]:
    """The JSON form of a table: one list per column, plus the column order."""
    document: Dict[str, Any] = {"columns": list(columns)}
    document.update((name, list(column)) for name, column in zip(columns, data))
    return document
