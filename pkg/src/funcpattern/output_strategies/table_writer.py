"""Writing tables and JSON documents to disk."""

import json
import logging
from collections.abc import Iterable, Sequence
from pathlib import Path
from typing import Any, Union

from .base_strategy import TableOutputStrategy
from .json_strategy import jsonable

logger = logging.getLogger(__name__)


def write_table(
    path: Union[str, Path], columns: Sequence[str], rows: Iterable[Sequence[Any]], strategy: TableOutputStrategy
) -> Path:
    """Stream a table to ``path`` through ``strategy``, creating parent directories as needed."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    with target.open("w", encoding="utf-8", newline="") as handle:
        for piece in strategy.render(columns, rows):
            handle.write(piece)
    logger.debug("Wrote %s", target)
    return target


def write_json(path: Union[str, Path], document: Any) -> Path:
    """Write a JSON document with sorted keys and two-space indentation."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(jsonable(document), sort_keys=True, indent=2, allow_nan=False)
    target.write_text(text + "\n", encoding="utf-8")
    logger.debug("Wrote %s", target)
    return target


def read_json(path: Union[str, Path]) -> Any:
    """Read a JSON document written by `write_json`."""
    return json.loads(Path(path).read_text(encoding="utf-8"))
