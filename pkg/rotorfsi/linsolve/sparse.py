from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
from scipy import io as scipy_io
from scipy import sparse

from rotorfsi.errors import IoError

logger = logging.getLogger(__name__)


def finalize(matrix) -> sparse.csr_matrix:
    """CSR copy with sorted, unique column indices and no stored zeros"""
    result = sparse.csr_matrix(matrix, dtype=float, copy=True)
    result.sum_duplicates()
    result.eliminate_zeros()
    result.sort_indices()
    return result


def write_matrix_market(path, matrix, comment: str = "") -> Path:
    """Coordinate Matrix Market dump of a sparse matrix or dense vector"""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        if sparse.issparse(matrix):
            scipy_io.mmwrite(str(path), sparse.coo_matrix(matrix), comment)
        else:
            column = np.asarray(matrix, dtype=float).reshape(-1, 1)
            scipy_io.mmwrite(str(path), column, comment)
    except OSError as error:
        raise IoError(f"cannot write {path}: {error}") from error
    # mmwrite adds the extension when it is missing
    written = path if path.suffix == ".mtx" else path.with_suffix(".mtx")
    logger.debug("wrote %s", written)
    return written


def read_matrix_market(path) -> sparse.csr_matrix | np.ndarray:
    try:
        value = scipy_io.mmread(str(path))
    except (OSError, ValueError) as error:
        raise IoError(f"cannot read {path}: {error}") from error
    if sparse.issparse(value):
        return finalize(value)
    return np.asarray(value).reshape(-1)
