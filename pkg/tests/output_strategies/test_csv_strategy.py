import pytest

from funcpattern.output_strategies.base_strategy import format_value
from funcpattern.output_strategies.csv_strategy import CSVTableStrategy


@pytest.fixture
def csv_strategy():
    """Fixture to provide a clean CSVTableStrategy instance for each test."""
    return CSVTableStrategy()


def test_render(csv_strategy):
    text = "".join(csv_strategy.render(["t", "F", "reject"], [[0.0, 1.5, False], [0.1, float("inf"), True]]))
    assert text == "t,F,reject\n0.0,1.5,false\n0.1,inf,true\n"


def test_quoting(csv_strategy):
    csv_strategy.format_start(["group", "note"])
    assert csv_strategy.format_row(["a,b", 'say "hi"']) == '"a,b","say ""hi"""\n'


def test_floats_round_trip():
    value = 0.1 + 0.2
    assert float(format_value(value)) == value
    assert format_value(None) == ""
    assert format_value(7) == "7"


def test_row_length_mismatch(csv_strategy):
    csv_strategy.format_start(["a", "b"])
    with pytest.raises(ValueError):
        csv_strategy.format_row([1, 2, 3])


def test_file_extension(csv_strategy):
    assert csv_strategy.get_file_extension() == ".csv"
