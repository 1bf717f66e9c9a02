"""
File system utilities for run artifacts.

This module provides directory creation, CSV writing and reading with
full-precision floats, and content hashing for run manifests.
"""

import hashlib
from pathlib import Path
from typing import Union
import logging

import pandas as pd

from ..errors import OutputError

logger = logging.getLogger(__name__)

CSV_FLOAT_FORMAT = "%.17g"


def create_directory(path: Union[str, Path]) -> Path:
    """Create directory if it doesn't exist."""
    try:
        p = Path(path)
        p.mkdir(parents=True, exist_ok=True)
        return p
    except OSError as e:
        raise OutputError(f"Failed to create directory {path}: {e}")


def write_csv(frame: pd.DataFrame, file_path: Union[str, Path]) -> Path:
    """Write a frame as UTF-8 CSV with LF line endings and 17 significant digits."""
    output_path = Path(file_path)
    create_directory(output_path.parent)
    try:
        frame.to_csv(
            output_path,
            index=False,
            float_format=CSV_FLOAT_FORMAT,
            lineterminator="\n",
            encoding="utf-8",
        )
    except OSError as e:
        raise OutputError(f"Failed to write CSV to {file_path}: {e}")
    logger.debug(f"Wrote {len(frame)} rows to {output_path}")
    return output_path


def read_csv(file_path: Union[str, Path]) -> pd.DataFrame:
    """Read a CSV written by write_csv, recovering floats exactly."""
    try:
        return pd.read_csv(file_path, float_precision="round_trip")
    except OSError as e:
        raise OutputError(f"Failed to read CSV from {file_path}: {e}")


def file_digest(file_path: Union[str, Path]) -> str:
    """SHA-256 of a file's bytes."""
    try:
        return hashlib.sha256(Path(file_path).read_bytes()).hexdigest()
    except OSError as e:
        raise OutputError(f"Failed to hash {file_path}: {e}")
