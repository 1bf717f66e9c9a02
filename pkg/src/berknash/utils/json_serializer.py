"""
JSON serialization utilities for results and manifests.

Floats are written with Python's shortest round-trip repr so a document
re-parses to bit-identical values; numpy scalars and arrays are converted
to plain Python values first.
"""

import json
from enum import Enum
from pathlib import Path
from typing import Any, Union
import logging

import numpy as np

from ..errors import OutputError

logger = logging.getLogger(__name__)


def to_jsonable(data: Any) -> Any:
    """Recursively convert numpy values, enums and paths to JSON-native types."""
    if isinstance(data, dict):
        return {str(k): to_jsonable(v) for k, v in data.items()}
    if isinstance(data, (list, tuple)):
        return [to_jsonable(v) for v in data]
    if isinstance(data, np.ndarray):
        return to_jsonable(data.tolist())
    if isinstance(data, np.bool_):
        return bool(data)
    if isinstance(data, np.integer):
        return int(data)
    if isinstance(data, np.floating):
        return float(data)
    if isinstance(data, Enum):
        return data.value
    if isinstance(data, Path):
        return str(data)
    return data


def format_json_output(data: Any, indent: int = 2) -> str:
    """
    Format data as a pretty JSON string with sorted keys.

    Non-finite floats are rejected so every document is standard JSON.
    """
    try:
        return json.dumps(to_jsonable(data), indent=indent, ensure_ascii=False, sort_keys=True, allow_nan=False)
    except (TypeError, ValueError) as e:
        raise OutputError(f"Failed to format JSON output: {e}")


def save_json_to_file(data: Any, file_path: Union[str, Path], indent: int = 2) -> Path:
    """
    Save data as JSON to the given filepath, creating parent directories.
    """
    output_path = Path(file_path)
    json_text = format_json_output(data, indent=indent)
    try:
        output_path.parent.mkdir(parents=True, exist_ok=True)
        with open(output_path, "w", encoding="utf-8", newline="\n") as f:
            f.write(json_text + "\n")
    except OSError as e:
        raise OutputError(f"Failed to save JSON to {file_path}: {e}")
    logger.info(f"Saved JSON data to {file_path}")
    return output_path


def load_json_from_file(file_path: Union[str, Path]) -> Any:
    """
    Load and parse a JSON file.
    """
    try:
        with open(file_path, "r", encoding="utf-8") as f:
            return json.load(f)
    except OSError as e:
        raise OutputError(f"Failed to load JSON from {file_path}: {e}")
