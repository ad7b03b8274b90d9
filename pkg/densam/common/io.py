"""
Result I/O - CSV tables, JSON documents, content hashes and atomic writes
"""

import hashlib
import json
import logging
import math
import os
import tempfile
from pathlib import Path
from typing import Any, Iterable, Sequence, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel

from densam.memory.errors import InvalidPatternsError

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"
PathLike = Union[str, Path]


def git_blob_sha1(content: bytes) -> str:
    """SHA-1 of content framed as a git blob object"""
    header = f"blob {len(content)}\0".encode("ascii")
    return hashlib.sha1(header + content).hexdigest()


def file_sha1(path: PathLike) -> str:
    return git_blob_sha1(Path(path).read_bytes())


def atomic_write_bytes(path: PathLike, content: bytes) -> Path:
    """Write through a temporary file in the same directory, then rename over path"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(content)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def atomic_write_text(path: PathLike, text: str) -> Path:
    return atomic_write_bytes(path, text.encode("utf-8"))


def json_safe(obj: Any) -> Any:
    """Convert numpy values, pydantic models and non-finite floats into plain JSON types"""
    if isinstance(obj, BaseModel):
        return json_safe(obj.model_dump(mode="json"))
    if isinstance(obj, dict):
        return {str(k): json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [json_safe(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [json_safe(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    return obj


def dumps_json(obj: Any) -> str:
    return json.dumps(json_safe(obj), indent=2, sort_keys=True) + "\n"


def write_json(path: PathLike, obj: Any) -> Path:
    return atomic_write_text(path, dumps_json(obj))


def rows_frame(rows: Sequence[BaseModel]) -> pd.DataFrame:
    """DataFrame with one column per model field, list fields joined by ';'"""
    records = []
    for row in rows:
        record = row.model_dump()
        for key, value in record.items():
            if isinstance(value, list):
                record[key] = ";".join(FLOAT_FORMAT % v for v in value)
        records.append(record)
    columns = list(type(rows[0]).model_fields) if rows else None
    return pd.DataFrame.from_records(records, columns=columns)


def write_rows_csv(rows: Sequence[BaseModel], path: PathLike) -> Path:
    """Write model rows as CSV with round-trip float precision"""
    frame = rows_frame(rows)
    text = frame.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return atomic_write_text(path, text)


def write_frame_csv(frame: pd.DataFrame, path: PathLike) -> Path:
    text = frame.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return atomic_write_text(path, text)


def read_matrix_csv(path: PathLike, columns: int) -> np.ndarray:
    """
    Read a header-less numeric CSV whose rows have the given width

    Raises:
        InvalidPatternsError: If the file is missing, malformed or of the wrong width
    """
    path = Path(path)
    try:
        data = pd.read_csv(path, header=None, float_precision="round_trip").to_numpy(dtype=float)
    except FileNotFoundError:
        raise InvalidPatternsError(f"File not found: {path}") from None
    except (pd.errors.EmptyDataError, pd.errors.ParserError, ValueError) as e:
        raise InvalidPatternsError(f"Malformed CSV {path}: {e}") from e
    if data.shape[1] != columns or not np.all(np.isfinite(data)):
        raise InvalidPatternsError(f"{path} must hold finite rows of width {columns}, got shape {data.shape}")
    return data


def hashed_outputs(paths: Iterable[PathLike]) -> list:
    """[{path, sha1}] for existing files"""
    return [{"path": str(p), "sha1": file_sha1(p)} for p in paths if Path(p).exists()]
