import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from scfcq.svg import line_chart
from scfcq.tables import CsvFormatError, numeric_columns, read_table, write_rows

finite = st.floats(allow_nan=False, allow_infinity=False)


@given(st.lists(st.tuples(finite, finite), min_size=1, max_size=30))
def test_float_round_trip(tmp_path_factory, pairs):
    path = tmp_path_factory.mktemp("rt") / "t.csv"
    write_rows(path, ("a", "b"), [dict(a=a, b=b) for a, b in pairs])
    back = numeric_columns(path, ["a", "b"])
    assert np.array_equal(back["a"], [p[0] for p in pairs])
    assert np.array_equal(back["b"], [p[1] for p in pairs])


def test_header_required(tmp_path):
    path = tmp_path / "e.csv"
    path.write_text("")
    with pytest.raises(CsvFormatError) as err:
        read_table(path)
    assert err.value.line == 1


def test_duplicate_header(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("a,a\n1,2\n")
    with pytest.raises(CsvFormatError):
        read_table(path)


def test_non_finite_rejected(tmp_path):
    path = tmp_path / "n.csv"
    path.write_text("a\n1\nnan\n")
    with pytest.raises(CsvFormatError) as err:
        numeric_columns(path, ["a"])
    assert err.value.line == 3


def test_missing_column_is_key_error(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text("a\n1\n")
    with pytest.raises(KeyError):
        numeric_columns(path, ["b"])


def test_line_chart_is_deterministic(tmp_path):
    x = np.linspace(0.3, 0.99, 20)
    series = {"alpha": 1 + 0.1 * x, "x": 1 - 0.1 * x}
    bands = {"alpha": (0.9 + 0.1 * x, 1.1 + 0.1 * x)}
    a, b = tmp_path / "a.svg", tmp_path / "b.svg"
    line_chart(a, x, series, bands=bands, title="t")
    line_chart(b, x, series, bands=bands, title="t")
    text = a.read_text()
    assert a.read_bytes() == b.read_bytes()
    assert text.startswith("<svg") and text.rstrip().endswith("</svg>")
    assert text.count("<polyline") == 2 and text.count("<polygon") == 1
