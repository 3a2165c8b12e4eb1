import json

import numpy as np
import pytest

from funcpattern.output_strategies.json_strategy import JSONTableStrategy, jsonable


@pytest.fixture
def json_strategy():
    """Fixture to provide a clean JSONTableStrategy instance for each test."""
    return JSONTableStrategy()


def test_render_rows(json_strategy):
    text = "".join(json_strategy.render(["group", "variate", "mean"], [["happy", "AU12", 2.5], ["sad", "AU04", 1]]))
    assert json.loads(text) == [
        {"group": "happy", "variate": "AU12", "mean": 2.5},
        {"group": "sad", "variate": "AU04", "mean": 1},
    ]
    assert text.endswith("\n]\n")


def test_empty_table(json_strategy):
    assert "".join(json_strategy.render(["t"], [])) == "[]\n"


def test_special_characters(json_strategy):
    json_strategy.format_start(["label"])
    row = json_strategy.format_row(['say "hi"\n'])
    assert json.loads(row.strip()) == {"label": 'say "hi"\n'}


def test_non_finite_and_numpy_values(json_strategy):
    text = "".join(json_strategy.render(["F", "reject"], [[np.float64("inf"), np.bool_(True)], [float("nan"), False]]))
    assert json.loads(text) == [{"F": None, "reject": True}, {"F": None, "reject": False}]


def test_row_length_mismatch(json_strategy):
    json_strategy.format_start(["a", "b"])
    with pytest.raises(ValueError):
        json_strategy.format_row([1])


def test_strategy_reuse(json_strategy):
    "".join(json_strategy.render(["a"], [[1], [2]]))
    assert json.loads("".join(json_strategy.render(["a"], [[3]]))) == [{"a": 3}]


def test_jsonable_nested():
    assert jsonable({1: np.array([[1.5, np.nan]]), "k": (np.int64(2), "x")}) == {"1": [[1.5, None]], "k": [2, "x"]}


def test_file_extension():
    """Test the get_file_extension method."""
    assert JSONTableStrategy().get_file_extension() == ".json"
