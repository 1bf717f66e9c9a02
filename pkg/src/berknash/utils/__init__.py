from .file_utils import (
    create_directory,
    write_csv,
    read_csv,
    file_digest,
)

from .json_serializer import (
    to_jsonable,
    save_json_to_file,
    load_json_from_file,
    format_json_output,
)

from .linalg import (
    solve_linear,
    inverse,
    spectral_radius,
    operator_norm,
)

__all__ = [
    "create_directory",
    "write_csv",
    "read_csv",
    "file_digest",
    "to_jsonable",
    "save_json_to_file",
    "load_json_from_file",
    "format_json_output",
    "solve_linear",
    "inverse",
    "spectral_radius",
    "operator_norm",
]
