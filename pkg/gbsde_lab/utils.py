# -*- coding: utf-8 -*-
#
# Copyright Contributors to the gbsde-lab project.
# SPDX-License-Identifier: MIT
#

import csv
import json
import math
import logging

from pathlib import Path
from typing import Any, Iterable, List, Sequence, Union

import yaml

from gbsde_lab.constants import NUMBER_FORMAT
from gbsde_lab.exceptions import GBSDEConfigError

logger = logging.getLogger(__name__)

NON_FINITE = {"inf": math.inf, "+inf": math.inf, "-inf": -math.inf}


def get_file_content(filename: Path) -> str:
    with open(str(filename), encoding="utf-8") as f:
        return f.read()


def save_file_content(content: str, filename: Path):
    with open(str(filename), "w", encoding="utf-8") as f:
        f.write(content)


def get_yaml_data(filename_path: Path) -> dict:
    """
    Read a JSON or YAML configuration.
    JSON is a subset of YAML, so both go through yaml.safe_load.
    """
    filename_path = Path(filename_path)
    logger.debug(f"Reading configuration {filename_path}")
    if not filename_path.exists():
        raise GBSDEConfigError(f"configuration {filename_path} does not exist")
    try:
        content = get_file_content(filename_path)
    except (OSError, UnicodeDecodeError) as ex:
        raise GBSDEConfigError(f"configuration {filename_path} is not readable: {ex}")
    try:
        data = yaml.safe_load(content)
    except yaml.YAMLError as ye:
        raise GBSDEConfigError(f"configuration {filename_path} is not parseable: {ye}")
    if not isinstance(data, dict):
        raise GBSDEConfigError(f"configuration {filename_path} must be a mapping")
    return data


def parse_real(value: Any, name: str = "value") -> float:
    """Accepts numbers and the strings "inf" / "-inf"."""
    if isinstance(value, bool):
        raise GBSDEConfigError(f"{name}: expected a number, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str) and value.strip().lower() in NON_FINITE:
        return NON_FINITE[value.strip().lower()]
    if isinstance(value, str):
        # YAML 1.1 reads exponent literals without a dot, such as 1e-3, as strings
        try:
            return float(value)
        except ValueError:
            pass
    raise GBSDEConfigError(f"{name}: expected a number, got {value!r}")


def format_number(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, str):
        return value
    if isinstance(value, int):
        return str(value)
    return format(float(value), NUMBER_FORMAT)


def _json_text(obj: Any, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end_pad = " " * (indent * level)
    if obj is None or isinstance(obj, bool):
        return json.dumps(obj)
    if isinstance(obj, (int, float)) and not isinstance(obj, bool):
        number = float(obj)
        if not math.isfinite(number):
            return json.dumps(format_number(number))
        return format_number(obj)
    if hasattr(obj, "item") and callable(obj.item):
        return _json_text(obj.item(), indent, level)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [
            f"{pad}{json.dumps(str(key))}: {_json_text(value, indent, level + 1)}"
            for key, value in obj.items()
        ]
        return "{\n" + ",\n".join(items) + "\n" + end_pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [f"{pad}{_json_text(value, indent, level + 1)}" for value in obj]
        return "[\n" + ",\n".join(items) + "\n" + end_pad + "]"
    if hasattr(obj, "tolist"):
        return _json_text(obj.tolist(), indent, level)
    raise GBSDEConfigError(f"cannot serialize {type(obj).__name__}")


def dump_json(obj: Any, indent: int = 2) -> str:
    """
    Serialize to JSON with every real number written with 17 significant digits.
    Non-finite numbers become the strings "inf", "-inf" and "nan".
    """
    return _json_text(obj, indent, 0) + "\n"


def write_json(obj: Any, filename: Path):
    save_file_content(dump_json(obj), filename)


def write_csv(header: Sequence[str], rows: Iterable[Sequence[Any]], filename: Path):
    with open(str(filename), "w", newline="") as fd:
        writer = csv.writer(fd, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_number(value) for value in row])


def rows_to_records(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> List[dict]:
    return [dict(zip(header, row)) for row in rows]


def write_table(
    header: Sequence[str], rows: Iterable[Sequence[Any]], filename: Path, output_format: str = "csv"
) -> Path:
    rows = list(rows)
    filename = Path(filename)
    if output_format == "json":
        filename = filename.with_suffix(".json")
        write_json(rows_to_records(header, rows), filename)
    else:
        filename = filename.with_suffix(".csv")
        write_csv(header, rows, filename)
    logger.debug(f"Wrote {len(rows)} rows to {filename}")
    return filename


def ensure_dir(path: Union[str, Path]) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    return path
