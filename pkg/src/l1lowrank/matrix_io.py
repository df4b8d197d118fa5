"""Matrix files: dense CSV rows (no header) with an optional ``.meta`` JSON
sidecar, or sparse ``i j v`` coordinate lines (0-based)."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import InvalidInputError

SPARSE_SUFFIXES = (".coo", ".ijv")


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def _meta_path(path: Path) -> Path:
    return path.with_name(path.name + ".meta")


def _read_meta(path: Path):
    meta = _meta_path(path)
    if not meta.exists():
        return None
    info = json.loads(meta.read_text())
    return int(info["rows"]), int(info["cols"])


def read_matrix(path):
    """Dense ``ndarray`` for CSV, ``csr_matrix`` for coordinate files."""
    path = Path(path)
    if path.suffix in SPARSE_SUFFIXES:
        return read_sparse(path)
    rows = []
    for lineno, line in enumerate(path.read_text().splitlines(), 1):
        if not line.strip():
            continue
        try:
            rows.append([float(v) for v in line.split(",")])
        except ValueError:
            raise InvalidInputError(f"{path}:{lineno}: not a numeric CSV row") from None
    if not rows:
        shape = _read_meta(path)
        if shape is None:
            raise InvalidInputError(f"{path}: empty matrix file")
        return np.zeros(shape)
    if len({len(r) for r in rows}) != 1:
        raise InvalidInputError(f"{path}: ragged rows")
    A = np.array(rows)
    shape = _read_meta(path)
    if shape is not None and shape != A.shape:
        raise InvalidInputError(f"{path}: shape {A.shape} disagrees with sidecar {shape}")
    return A


def read_sparse(path) -> sp.csr_matrix:
    path = Path(path)
    ii, jj, vv = [], [], []
    for lineno, line in enumerate(path.read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise InvalidInputError(f"{path}:{lineno}: expected 'i j v'")
        try:
            ii.append(int(parts[0]))
            jj.append(int(parts[1]))
            vv.append(float(parts[2]))
        except ValueError:
            raise InvalidInputError(f"{path}:{lineno}: malformed entry") from None
    shape = _read_meta(path)
    if shape is None:
        shape = (max(ii, default=-1) + 1, max(jj, default=-1) + 1)
    if min(ii + jj, default=0) < 0 or (ii and (max(ii) >= shape[0] or max(jj) >= shape[1])):
        raise InvalidInputError(f"{path}: index outside shape {shape}")
    return sp.coo_matrix((vv, (ii, jj)), shape=shape).tocsr()


def matrix_to_csv(A) -> str:
    A = np.atleast_2d(np.asarray(A.toarray() if sp.issparse(A) else A, dtype=float))
    return "".join(",".join(fmt(v) for v in row) + "\n" for row in A)


def write_matrix(path, A, meta: bool = True):
    path = Path(path)
    if path.suffix in SPARSE_SUFFIXES:
        C = sp.coo_matrix(A)
        path.write_text("".join(f"{i} {j} {fmt(v)}\n" for i, j, v in zip(C.row, C.col, C.data)))
        shape = C.shape
    else:
        A = np.asarray(A, dtype=float)
        path.write_text(matrix_to_csv(A))
        shape = A.shape
    if meta:
        _meta_path(path).write_text(json.dumps({"rows": shape[0], "cols": shape[1]}) + "\n")
