"""Plain CSV input/output for matrices and vectors.

Format: comma-separated decimal floating point, no header, one matrix row
per line.  Files with ragged rows or non-numeric cells are rejected with
the offending line number.  Numbers are written with 17 significant
digits so that float64 values round-trip exactly.
"""

import numpy as np

from .errors import InputError

FLOAT_FORMAT = "%.17g"


def load_matrix_csv(path) -> np.ndarray:
    """Read a rectangular numeric CSV file into an (n, p) float64 array."""
    rows = []
    width = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            cells = line.split(",")
            if width is None:
                width = len(cells)
            elif len(cells) != width:
                raise InputError(
                    f"{path}: parse error at line {lineno}: expected {width} "
                    f"columns, found {len(cells)}"
                )
            try:
                rows.append([float(c) for c in cells])
            except ValueError as exc:
                raise InputError(
                    f"{path}: parse error at line {lineno}: non-numeric cell"
                ) from exc
    if not rows:
        raise InputError(f"{path}: parse error: empty file")
    return np.asarray(rows, dtype=np.float64)


def save_matrix_csv(path, matrix) -> None:
    """Write a matrix as headerless CSV with full float64 precision."""
    matrix = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    with open(path, "w", encoding="utf-8") as fh:
        for row in matrix:
            fh.write(",".join(FLOAT_FORMAT % v for v in row))
            fh.write("\n")


def load_vector_csv(path) -> np.ndarray:
    """Read a single-column (or single-row) CSV file into a 1-D array."""
    m = load_matrix_csv(path)
    if 1 not in m.shape:
        raise InputError(
            f"{path}: expected a single row or column, got shape {m.shape}"
        )
    return m.ravel()


def save_vector_csv(path, vector) -> None:
    save_matrix_csv(path, np.asarray(vector, dtype=np.float64).reshape(-1, 1))
