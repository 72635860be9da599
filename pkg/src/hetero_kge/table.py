"""Trainable parameter storage, initialization and the vector-file format.

One flat (n_rows, d) float64 array holds every entity and relation row;
the model family fixes how many rows each entity or relation owns (two for
the complex/dual-row families).  A same-shaped accumulator array carries
the per-element Adagrad state so checkpoints capture optimizer state.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError, ParseError, ResolutionError

#: rows per entity and per relation for each scoring family
FAMILY_ROWS = {
    "transe": (1, 1),
    "distmult": (1, 1),
    "complex": (2, 2),  # real + imaginary rows for entities and relations
    "simple": (2, 2),  # head/tail entity rows, forward/inverse relation rows
}

#: labels of the two rows, per family, in storage order
ROW_LABELS = {
    "transe": (("vec",), ("vec",)),
    "distmult": (("vec",), ("vec",)),
    "complex": (("re", "im"), ("re", "im")),
    "simple": (("head", "tail"), ("fwd", "inv")),
}

_STREAM_INIT = 102  # rng stream label: parameter initialization

DEFAULT_GAMMA_INIT = 12.0
DEFAULT_EPSILON_INIT = 2.0


@dataclass
class EmbeddingTable:
    """Parameter rows plus Adagrad accumulators for one scoring family."""

    family: str
    dim: int
    n_entities: int
    n_relations: int
    params: np.ndarray = field(repr=False, default=None)
    accum: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if self.family not in FAMILY_ROWS:
            raise ConfigError(f"unknown scoring family {self.family!r}; choose from {sorted(FAMILY_ROWS)}")
        if self.dim <= 0:
            raise ConfigError(f"dimension must be positive, got {self.dim}")
        n_rows = self.n_rows
        if self.params is None:
            self.params = np.zeros((n_rows, self.dim))
        if self.accum is None:
            self.accum = np.zeros((n_rows, self.dim))
        for name in ("params", "accum"):
            arr = getattr(self, name)
            if arr.shape != (n_rows, self.dim):
                raise ConfigError(f"{name} shape {arr.shape} != expected {(n_rows, self.dim)}")

    @property
    def rows_per_entity(self) -> int:
        return FAMILY_ROWS[self.family][0]

    @property
    def rows_per_relation(self) -> int:
        return FAMILY_ROWS[self.family][1]

    @property
    def n_rows(self) -> int:
        epr, rpr = FAMILY_ROWS[self.family]
        return self.n_entities * epr + self.n_relations * rpr

    def entity_row(self, entity: int, k: int = 0) -> int:
        return entity * self.rows_per_entity + k

    def relation_row(self, relation: int, k: int = 0) -> int:
        return self.n_entities * self.rows_per_entity + relation * self.rows_per_relation + k

    def entity_rows(self, entity: int) -> list[int]:
        return [self.entity_row(entity, k) for k in range(self.rows_per_entity)]

    def check_finite(self):
        if not np.all(np.isfinite(self.params)):
            raise DataError("embedding table contains non-finite values")

    def copy(self) -> "EmbeddingTable":
        return EmbeddingTable(
            self.family, self.dim, self.n_entities, self.n_relations,
            params=self.params.copy(), accum=self.accum.copy(),
        )


def init_bound(dim: int, gamma_init=DEFAULT_GAMMA_INIT, epsilon_init=DEFAULT_EPSILON_INIT) -> float:
    return gamma_init + epsilon_init / dim


def init_random(table: EmbeddingTable, seed: int,
                gamma_init=DEFAULT_GAMMA_INIT, epsilon_init=DEFAULT_EPSILON_INIT) -> EmbeddingTable:
    """Fill every row i.i.d. uniform on [-(g + e/d), +(g + e/d)]; zero accumulators."""
    bound = init_bound(table.dim, gamma_init, epsilon_init)
    rng = np.random.default_rng([int(seed), _STREAM_INIT])
    table.params[:] = rng.uniform(-bound, bound, size=table.params.shape)
    table.accum[:] = 0.0
    return table


def init_from_vectors(table: EmbeddingTable, ids, vectors: np.ndarray, id_mapping,
                      fallback_seed: int,
                      gamma_init=DEFAULT_GAMMA_INIT, epsilon_init=DEFAULT_EPSILON_INIT) -> EmbeddingTable:
    """Seed entity rows from an anchor table, falling back to random init.

    `id_mapping` maps dense entity index -> row id in the anchor table.  A
    mapped entity receives the anchor vector in every one of its rows (both
    real/imaginary and head/tail rows for two-row families).  Unmapped
    entities keep random-init values; relation rows are never altered here
    and stay randomly initialized.
    """
    vectors = np.asarray(vectors, dtype=np.float64)
    if vectors.ndim != 2 or vectors.shape[1] != table.dim:
        raise ConfigError(
            f"anchor vectors have dimension {vectors.shape[-1] if vectors.ndim == 2 else '?'}, "
            f"table expects {table.dim}"
        )
    row_of = {row_id: i for i, row_id in enumerate(ids)}
    init_random(table, fallback_seed, gamma_init, epsilon_init)
    for entity, row_id in id_mapping.items():
        src = row_of.get(row_id)
        if src is None:
            raise ResolutionError(f"anchor row {row_id!r} not present in the vector file")
        for row in table.entity_rows(int(entity)):
            table.params[row] = vectors[src]
    table.accum[:] = 0.0
    return table


# -- vector file format -------------------------------------------------------
#
# Line 1: `count dim`.  Body: `row_id v1 ... vd`, space separated, UTF-8,
# full-precision decimal floats (shortest round-trip form), so binary64
# values survive a write/read cycle exactly.  Lines starting with `#` are
# ignored.  This one format serves anchors, checkpoints and exports.


def write_vector_file(path, ids, vectors: np.ndarray, comment: str | None = None):
    vectors = np.asarray(vectors, dtype=np.float64)
    if vectors.ndim != 2 or len(ids) != len(vectors):
        raise DataError(f"ids/vectors mismatch: {len(ids)} ids, {vectors.shape} vectors")
    if not np.all(np.isfinite(vectors)):
        raise DataError("refusing to write non-finite vector values")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(ids)} {vectors.shape[1]}\n")
        if comment:
            fh.write(f"# {comment}\n")
        for row_id, vec in zip(ids, vectors):
            row_id = str(row_id)
            if any(ch.isspace() for ch in row_id):
                raise DataError(f"row id {row_id!r} contains whitespace; not representable")
            fh.write(row_id + " " + " ".join(repr(float(v)) for v in vec) + "\n")


def read_vector_file(path) -> tuple[list[str], np.ndarray]:
    """Parse a vector file into (row ids, (count, dim) float64 matrix)."""
    ids: list[str] = []
    with open(path, encoding="utf-8") as fh:
        header = None
        lineno = 0
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            header = line
            break
        if header is None:
            raise ParseError(path, lineno, "missing `count dim` header")
        parts = header.split()
        if len(parts) != 2:
            raise ParseError(path, lineno, f"header must be `count dim`, got {header!r}")
        try:
            count, dim = int(parts[0]), int(parts[1])
        except ValueError:
            raise ParseError(path, lineno, f"header must be two integers, got {header!r}") from None
        if count < 0 or dim <= 0:
            raise ParseError(path, lineno, f"invalid header values {header!r}")
        vectors = np.empty((count, dim))
        row = 0
        for lineno, raw in enumerate(fh, start=lineno + 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != dim + 1:
                raise ParseError(path, lineno, f"expected row id + {dim} values, got {len(parts)} fields")
            if row >= count:
                raise ParseError(path, lineno, f"more than the declared {count} rows")
            ids.append(parts[0])
            try:
                vectors[row] = [float(v) for v in parts[1:]]
            except ValueError:
                raise ParseError(path, lineno, "non-numeric vector value") from None
            row += 1
        if row != count:
            raise ParseError(path, lineno, f"header declares {count} rows, body has {row}")
    if len(set(ids)) != len(ids):
        raise ParseError(path, 0, "duplicate row ids in vector file")
    return ids, vectors


# -- checkpoints --------------------------------------------------------------
#
# A checkpoint is a directory holding two vector files (params + Adagrad
# accumulators, rows keyed by dense row index) and a JSON manifest with the
# table layout, training progress and the config hash.

CHECKPOINT_FILES = ("params.vec", "accum.vec", "manifest.json")


def save_checkpoint(table: EmbeddingTable, out_dir, epoch: int, step: int, config_hash: str,
                    extra=None):
    os.makedirs(out_dir, exist_ok=True)
    table.check_finite()
    row_ids = [str(i) for i in range(table.n_rows)]
    write_vector_file(os.path.join(out_dir, "params.vec"), row_ids, table.params)
    write_vector_file(os.path.join(out_dir, "accum.vec"), row_ids, table.accum)
    manifest = {
        "family": table.family,
        "dim": table.dim,
        "n_entities": table.n_entities,
        "n_relations": table.n_relations,
        "epoch": epoch,
        "step": step,
        "config_hash": config_hash,
    }
    if extra:
        manifest.update(extra)
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_checkpoint(ckpt_dir) -> tuple[EmbeddingTable, dict]:
    for name in CHECKPOINT_FILES:
        if not os.path.exists(os.path.join(ckpt_dir, name)):
            raise ConfigError(f"not a checkpoint: missing {name} in {ckpt_dir}")
    with open(os.path.join(ckpt_dir, "manifest.json"), encoding="utf-8") as fh:
        manifest = json.load(fh)
    ids_p, params = read_vector_file(os.path.join(ckpt_dir, "params.vec"))
    ids_a, accum = read_vector_file(os.path.join(ckpt_dir, "accum.vec"))
    table = EmbeddingTable(
        manifest["family"], manifest["dim"], manifest["n_entities"], manifest["n_relations"]
    )
    order_p = np.argsort(np.asarray(ids_p, dtype=np.int64))
    order_a = np.argsort(np.asarray(ids_a, dtype=np.int64))
    if len(params) != table.n_rows or len(accum) != table.n_rows:
        raise ConfigError("checkpoint row count does not match the manifest layout")
    table.params[:] = params[order_p]
    table.accum[:] = accum[order_a]
    return table, manifest
