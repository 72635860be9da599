"""Writer for the embedding interchange format.

A vector file starts with a ``count dim`` header line, followed by one
``row_id v1 ... vd`` line per row, whitespace separated; ``#`` lines are
comments.  Floats serialize with shortest-round-trip precision so a
reader recovers the exact binary64 values.
"""

from __future__ import annotations

import numpy as np


def write_vector_file(path, ids, vectors: np.ndarray, comment: str | None = None):
    vectors = np.asarray(vectors, dtype=np.float64)
    ids = [str(row_id) for row_id in ids]
    if vectors.ndim != 2:
        raise ValueError(f"vectors must be 2-dimensional, got shape {vectors.shape}")
    if len(ids) != vectors.shape[0]:
        raise ValueError(f"{len(ids)} ids for {vectors.shape[0]} vector rows")
    seen: set[str] = set()
    for row_id in ids:
        if not row_id or row_id.split() != [row_id]:
            raise ValueError(f"row id {row_id!r} is empty or contains whitespace")
        if row_id in seen:
            raise ValueError(f"duplicate row id {row_id!r}")
        seen.add(row_id)
    if vectors.size and not np.all(np.isfinite(vectors)):
        raise ValueError("vectors contain non-finite values")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(ids)} {vectors.shape[1]}\n")
        if comment:
            fh.write(f"# {comment}\n")
        for row_id, row in zip(ids, vectors):
            fh.write(row_id + " " + " ".join(repr(float(v)) for v in row) + "\n")
