import json
import math
from io import StringIO

import numpy as np
import pytest

from polariton_rates.vibronic import BareSpectrum
from polariton_rates.writer import (
    WriterContext,
    table_document,
    write_json,
    write_sticks,
    write_table,
)


def test_write_row_cells() -> None:
    target = StringIO()
    context = WriterContext(target)
    context.write_row(["a,b", 1, np.int64(2), 0.1, True])
    assert target.getvalue() == '"a,b",1,2,0.10000000000000001,true\n'


def test_write_row_finishes_open_line() -> None:
    target = StringIO()
    context = WriterContext(target)
    context.write("# comment")
    context.write_row(["x"])
    assert target.getvalue() == "# comment\nx\n"


class TestWriteTable:
    def test_header_and_rows(self) -> None:
        target = StringIO()
        write_table(("omega", "value"), (np.array([1.0, 2.0]), [0.5, 0.25]), target)
        assert target.getvalue() == "omega,value\n1,0.5\n2,0.25\n"

    def test_header_only(self) -> None:
        target = StringIO()
        write_table(("omega",), ([],), target)
        assert target.getvalue() == "omega\n"

    def test_unequal_columns(self) -> None:
        with pytest.raises(ValueError):
            write_table(("a", "b"), ([1.0], [1.0, 2.0]), StringIO())


def test_write_sticks() -> None:
    spectrum = BareSpectrum(
        np.array([0.09, 0.08]), np.array([0.25, 0.5]), np.array([1, 2]), 0.0015
    )
    target = StringIO()
    write_sticks(spectrum, target)
    assert target.getvalue() == (
        "state,frequency,weight\n"
        "1,0.089999999999999997,0.25\n"
        "2,0.080000000000000002,0.5\n"
    )


class TestWriteJson:
    def test_sorted_with_newline(self) -> None:
        target = StringIO()
        write_json({"b": np.float64(1.5), "a": [np.int64(1)]}, target)
        text = target.getvalue()
        assert text.endswith("}\n")
        assert text.index('"a"') < text.index('"b"')
        assert json.loads(text) == {"a": [1], "b": 1.5}

    def test_non_finite_is_null(self) -> None:
        target = StringIO()
        write_json({"rate": math.nan}, target)
        assert json.loads(target.getvalue()) == {"rate": None}


def test_table_document() -> None:
    document = table_document(("x", "y"), ([1.0], [2.0]))
    assert document == {"columns": ["x", "y"], "x": [1.0], "y": [2.0]}
