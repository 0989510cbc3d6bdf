# app/utils/csv_writer.py
"""Deterministic CSV tables and key = value reports"""
import csv
import logging
from pathlib import Path
from typing import Any, Iterable, List, Sequence, Union

import numpy as np
from pydantic import BaseModel

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def format_value(value: Any) -> str:
    """17 significant digits for floats, lower-case booleans, empty for None"""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".16e")
    if hasattr(value, "value"):  # str enums
        return str(value.value)
    return str(value)


def write_csv(path: PathLike, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_value(v) for v in row])
            count += 1
    logger.debug(f"Wrote {count} rows to {path}")
    return path


def _flatten(prefix: str, value: Any, lines: List[str]) -> None:
    if isinstance(value, dict):
        for key, item in value.items():
            _flatten(f"{prefix}.{key}" if prefix else str(key), item, lines)
    elif isinstance(value, list) and value and isinstance(value[0], (dict, list)):
        for index, item in enumerate(value):
            _flatten(f"{prefix}.{index}", item, lines)
    elif isinstance(value, list):
        lines.append(f"{prefix} = [{', '.join(format_value(v) for v in value)}]")
    else:
        lines.append(f"{prefix} = {format_value(value)}")


def write_report(path: PathLike, record: BaseModel) -> Path:
    """Text record of dotted `key = value` lines plus a JSON twin next to it"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines: List[str] = []
    _flatten("", record.model_dump(mode="json"), lines)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    path.with_suffix(".json").write_text(record.model_dump_json(indent=2) + "\n", encoding="utf-8")
    return path


def eps_tag(epsilon: float) -> str:
    """Stable file-name form of epsilon"""
    return format(float(epsilon), ".6g")
