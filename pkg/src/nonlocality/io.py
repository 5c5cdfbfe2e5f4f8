"""Reading and writing counts files, behaviors, and result tables.

Counts file layout::

    {"dims": {"nx": 2, "ny": 2, "na": 3, "nb": 3},
     "blocks": [{"x": 1, "y": 1, "counts": [[...], ...], "background": [[...], ...]}, ...]}

Settings ``x``/``y`` are 1-based in files; outcome rows and columns are the
0-based outcomes ``a`` and ``b``. Every setting pair appears exactly once.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Any

import numpy as np

from .behavior import BehaviorTable, CountsRecord, Dims
from .exceptions import InvalidParameter, ParseError, SchemaError

RESULT_COLUMNS = (
    "gamma",
    "i3",
    "i3_ns",
    "dist_local_raw",
    "dist_local_ns",
    "dist_ns",
    "capacity_ns",
)


def _read_json(path) -> Any:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"{path}: cannot read file ({exc.strerror})") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc


def _parse_dims(obj) -> Dims:
    if not isinstance(obj, dict):
        raise SchemaError("'dims' must be an object with nx, ny, na, nb")
    missing = [k for k in ("nx", "ny", "na", "nb") if k not in obj]
    if missing:
        raise SchemaError(f"'dims' is missing {', '.join(missing)}")
    for key in ("nx", "ny", "na", "nb"):
        if isinstance(obj[key], bool) or not isinstance(obj[key], int):
            raise SchemaError(f"dims.{key} must be an integer")
    try:
        return Dims(obj["nx"], obj["ny"], obj["na"], obj["nb"])
    except InvalidParameter as exc:
        raise SchemaError(f"dims: {exc}") from exc


def _parse_matrix(value, dims: Dims, where: str, integer: bool) -> np.ndarray:
    if (
        not isinstance(value, list)
        or len(value) != dims.na
        or any(not isinstance(row, list) or len(row) != dims.nb for row in value)
    ):
        raise SchemaError(f"{where} must be a {dims.na}x{dims.nb} nested list")
    for row in value:
        for v in row:
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise SchemaError(f"{where} contains a non-numeric entry {v!r}")
            if integer and not (isinstance(v, int) or float(v).is_integer()):
                raise SchemaError(f"{where} contains a non-integer count {v!r}")
    return np.array(value, dtype=float)


def counts_from_dict(obj: dict) -> CountsRecord:
    if not isinstance(obj, dict):
        raise SchemaError("top level must be an object")
    if "dims" not in obj or "blocks" not in obj:
        raise SchemaError("top level needs 'dims' and 'blocks'")
    dims = _parse_dims(obj["dims"])
    blocks = obj["blocks"]
    if not isinstance(blocks, list):
        raise SchemaError("'blocks' must be a list")
    counts = np.zeros(dims.shape)
    background = np.zeros(dims.shape)
    has_background = False
    seen = set()
    for i, block in enumerate(blocks):
        if not isinstance(block, dict):
            raise SchemaError(f"blocks[{i}] must be an object")
        x, y = block.get("x"), block.get("y")
        if not isinstance(x, int) or not isinstance(y, int) or isinstance(x, bool) or isinstance(y, bool):
            raise SchemaError(f"blocks[{i}] needs integer 'x' and 'y'")
        if not (1 <= x <= dims.nx and 1 <= y <= dims.ny):
            raise SchemaError(f"blocks[{i}]: setting pair (x={x}, y={y}) out of range")
        if (x, y) in seen:
            raise SchemaError(f"blocks[{i}]: setting pair (x={x}, y={y}) appears twice")
        seen.add((x, y))
        if "counts" not in block:
            raise SchemaError(f"blocks[{i}] has no 'counts'")
        where = f"blocks[{i}] (x={x}, y={y})"
        c = _parse_matrix(block["counts"], dims, f"{where} counts", integer=True)
        if c.min() < 0:
            a, b = np.argwhere(c < 0)[0]
            raise SchemaError(f"negative count {c[a, b]:g} at (x={x}, y={y}, a={a}, b={b})")
        counts[x - 1, y - 1] = c
        if block.get("background") is not None:
            bg = _parse_matrix(block["background"], dims, f"{where} background", integer=False)
            if bg.min() < 0:
                a, b = np.argwhere(bg < 0)[0]
                raise SchemaError(f"negative background at (x={x}, y={y}, a={a}, b={b})")
            background[x - 1, y - 1] = bg
            has_background = True
    missing = [(x, y) for x in range(1, dims.nx + 1) for y in range(1, dims.ny + 1) if (x, y) not in seen]
    if missing:
        raise SchemaError(f"missing setting pairs {missing}")
    return CountsRecord(dims, counts.astype(np.int64), background if has_background else None)


def counts_to_dict(record: CountsRecord) -> dict:
    blocks = []
    for x in range(record.dims.nx):
        for y in range(record.dims.ny):
            block = {"x": x + 1, "y": y + 1, "counts": record.counts[x, y].tolist()}
            if record.background is not None:
                block["background"] = record.background[x, y].tolist()
            blocks.append(block)
    return {"dims": record.dims.as_dict(), "blocks": blocks}


def load_counts(path) -> CountsRecord:
    """Read and validate a counts file. Raises ParseError or SchemaError."""
    return counts_from_dict(_read_json(path))


def dump_counts(record: CountsRecord, path) -> None:
    Path(path).write_text(json.dumps(counts_to_dict(record), indent=1) + "\n")


def behavior_to_dict(p: BehaviorTable) -> dict:
    blocks = [
        {"x": x + 1, "y": y + 1, "probabilities": p.p[x, y].tolist()}
        for x in range(p.dims.nx)
        for y in range(p.dims.ny)
    ]
    return {"dims": p.dims.as_dict(), "blocks": blocks}


def behavior_from_dict(obj: dict) -> BehaviorTable:
    dims = _parse_dims(obj.get("dims"))
    arr = np.full(dims.shape, np.nan)
    for block in obj.get("blocks", []):
        x, y = block["x"], block["y"]
        arr[x - 1, y - 1] = _parse_matrix(block["probabilities"], dims, f"block (x={x}, y={y})", False)
    if np.isnan(arr).any():
        raise SchemaError("behavior is missing setting pairs")
    try:
        return BehaviorTable(dims, arr)
    except InvalidParameter as exc:
        raise SchemaError(str(exc)) from exc


def _format_cell(value) -> str:
    if value is None:
        return ""
    # repr round-trips floats exactly
    return repr(float(value))


def _parse_cell(text: str):
    if text == "":
        return None
    value = float(text)
    return None if math.isnan(value) else value


def write_results_csv(rows: list[dict], path, columns=None) -> None:
    columns = list(columns or (rows[0].keys() if rows else RESULT_COLUMNS))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_format_cell(row.get(col)) for col in columns])


def read_results_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        return [{col: _parse_cell(cell) for col, cell in zip(header, line)} for line in reader]


def write_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
