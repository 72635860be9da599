"""Typed entity/relation universe, triple ingestion, splits and augmentation.

Triples are stored as int64 arrays of shape (n, 3) holding dense
(head, relation, tail) indices.  External string ids are kept in the
registry; dense indices are assigned in first-appearance order so that
embedding rows can be looked up in O(1).
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ParseError, ResolutionError, SchemaError
from .validation import check_ratios

log = logging.getLogger(__name__)

CANONICAL_ENTITY_TYPES = ("drug", "protein", "pathway", "category", "atc", "text", "structure")

#: entity types reserved for augmentation pseudo nodes
PSEUDO_TYPES = ("text", "structure")

#: relation linking an ATC code to its immediate parent code
ATC_HYPERNYM_RELATION = "ATChypernym"

#: ATC code lengths per hierarchy level and the parent length for each
_ATC_LEVEL_LENGTHS = (1, 3, 4, 5, 7)
_ATC_PARENT_LENGTH = {7: 5, 5: 4, 4: 3, 3: 1}

#: declared augmentation field names; "structure" yields structure-typed nodes
AUGMENTATION_FIELDS = (
    "name",
    "description",
    "synonyms",
    "indication",
    "pharmacodynamics",
    "mechanism-of-action",
    "metabolism",
    "gene-name",
    "structure",
)


def _iter_tsv(path, n_fields):
    """Yield (lineno, fields) from a TSV file, skipping blanks and # comments."""
    with open(path, encoding="utf-8", newline="") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\r\n")
            if not line or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != n_fields:
                raise ParseError(path, lineno, f"expected {n_fields} tab-separated fields, got {len(fields)}")
            if any(f == "" for f in fields):
                raise ParseError(path, lineno, "empty field")
            yield lineno, fields


class EntityRegistry:
    """External string id <-> dense index <-> entity type."""

    def __init__(self):
        self.ids: list[str] = []
        self.index: dict[str, int] = {}
        self.type_names: list[str] = []
        self._type_code: dict[str, int] = {}
        self.type_codes: list[int] = []
        self._by_type: dict[int, list[int]] = {}

    def __len__(self):
        return len(self.ids)

    def type_code(self, type_name: str) -> int:
        code = self._type_code.get(type_name)
        if code is None:
            code = len(self.type_names)
            self.type_names.append(type_name)
            self._type_code[type_name] = code
            self._by_type[code] = []
        return code

    def has_type(self, type_name: str) -> bool:
        return type_name in self._type_code

    def add(self, entity_id: str, type_name: str) -> int:
        """Register an entity; re-adding with the same type is a no-op."""
        if not entity_id or not type_name:
            raise SchemaError("entity id and type name must be non-empty")
        code = self.type_code(type_name)
        existing = self.index.get(entity_id)
        if existing is not None:
            if self.type_codes[existing] != code:
                raise SchemaError(
                    f"entity {entity_id!r} registered as {self.type_names[self.type_codes[existing]]!r}, "
                    f"conflicting re-registration as {type_name!r}"
                )
            return existing
        idx = len(self.ids)
        self.ids.append(entity_id)
        self.index[entity_id] = idx
        self.type_codes.append(code)
        self._by_type[code].append(idx)
        return idx

    def resolve(self, entity_id: str) -> int:
        idx = self.index.get(entity_id)
        if idx is None:
            raise ResolutionError(f"unknown entity {entity_id!r}")
        return idx

    def type_of(self, idx: int) -> str:
        return self.type_names[self.type_codes[idx]]

    def entities_of_type(self, type_name: str) -> np.ndarray:
        """Dense indices of all entities with the given type (ascending)."""
        code = self._type_code.get(type_name)
        if code is None:
            return np.empty(0, dtype=np.int64)
        return np.asarray(self._by_type[code], dtype=np.int64)

    def type_counts(self) -> dict[str, int]:
        return {name: len(self._by_type[self._type_code[name]]) for name in self.type_names}

    def copy(self) -> "EntityRegistry":
        new = EntityRegistry()
        new.ids = list(self.ids)
        new.index = dict(self.index)
        new.type_names = list(self.type_names)
        new._type_code = dict(self._type_code)
        new.type_codes = list(self.type_codes)
        new._by_type = {code: list(v) for code, v in self._by_type.items()}
        return new


@dataclass(frozen=True)
class Relation:
    name: str
    head_type: str
    tail_type: str
    symmetric: bool = False


class RelationSchema:
    """Relation name -> (head type, tail type, symmetric flag)."""

    def __init__(self, relations=()):
        self.relations: list[Relation] = []
        self.index: dict[str, int] = {}
        for rel in relations:
            self.add(rel)

    def __len__(self):
        return len(self.relations)

    def __iter__(self):
        return iter(self.relations)

    def add(self, relation: Relation) -> int:
        if relation.name in self.index:
            existing = self.relations[self.index[relation.name]]
            if existing != relation:
                raise SchemaError(f"relation {relation.name!r} already declared with a different signature")
            return self.index[relation.name]
        idx = len(self.relations)
        self.relations.append(relation)
        self.index[relation.name] = idx
        return idx

    def resolve(self, name: str) -> int:
        idx = self.index.get(name)
        if idx is None:
            raise ResolutionError(f"unknown relation {name!r}")
        return idx

    def relation(self, idx: int) -> Relation:
        return self.relations[idx]

    def copy(self) -> "RelationSchema":
        return RelationSchema(self.relations)


def load_entity_types(path, allowed_types=None) -> EntityRegistry:
    """Read a TSV of `entity_id<TAB>type_name` lines into a registry.

    Dense indices follow first appearance.  With `allowed_types` given, any
    other type name raises SchemaError (closed schema).  Duplicate ids with
    conflicting types are rejected.
    """
    registry = EntityRegistry()
    for lineno, (entity_id, type_name) in _iter_tsv(path, 2):
        if allowed_types is not None and type_name not in allowed_types:
            raise SchemaError(f"{path}:{lineno}: unknown entity type {type_name!r}")
        try:
            registry.add(entity_id, type_name)
        except SchemaError as exc:
            raise SchemaError(f"{path}:{lineno}: {exc}") from None
    return registry


def load_schema(path) -> RelationSchema:
    """Read `relation<TAB>head_type<TAB>tail_type<TAB>{sym|asym}` lines."""
    schema = RelationSchema()
    for lineno, (name, head_type, tail_type, flag) in _iter_tsv(path, 4):
        if flag not in ("sym", "asym"):
            raise ParseError(path, lineno, f"symmetry flag must be 'sym' or 'asym', got {flag!r}")
        try:
            schema.add(Relation(name, head_type, tail_type, symmetric=(flag == "sym")))
        except SchemaError as exc:
            raise SchemaError(f"{path}:{lineno}: {exc}") from None
    return schema


def load_triples(path, registry: EntityRegistry, schema: RelationSchema, dedup=True) -> np.ndarray:
    """Read `head_id<TAB>relation<TAB>tail_id` lines into an (n, 3) index array.

    Every accepted triple satisfies the schema's type constraints.  Exact
    duplicate lines are dropped with a warning count when `dedup` is on.
    """
    rows = []
    for lineno, (head_id, rel_name, tail_id) in _iter_tsv(path, 3):
        try:
            h = registry.resolve(head_id)
            r = schema.resolve(rel_name)
            t = registry.resolve(tail_id)
        except ResolutionError as exc:
            raise ResolutionError(f"{path}:{lineno}: {exc}") from None
        rel = schema.relation(r)
        if registry.type_of(h) != rel.head_type or registry.type_of(t) != rel.tail_type:
            raise SchemaError(
                f"{path}:{lineno}: triple ({head_id}, {rel_name}, {tail_id}) violates schema "
                f"{rel.head_type}->{rel.tail_type}: got {registry.type_of(h)}->{registry.type_of(t)}"
            )
        rows.append((h, r, t))
    triples = np.asarray(rows, dtype=np.int64).reshape(-1, 3)
    if dedup:
        triples, dropped = dedup_triples(triples)
        if dropped:
            log.warning("%s: dropped %d duplicate triples", path, dropped)
    return triples


def dedup_triples(triples: np.ndarray) -> tuple[np.ndarray, int]:
    """Drop exact duplicate rows, keeping first occurrence order."""
    if len(triples) == 0:
        return triples, 0
    _, first = np.unique(triples, axis=0, return_index=True)
    if len(first) == len(triples):
        return triples, 0
    keep = np.sort(first)
    return triples[keep], len(triples) - len(keep)


def split_triples(triples: np.ndarray, ratios, seed: int):
    """Uniform random partition into (train, valid, test).

    Sizes use the largest-remainder rounding so they always sum to the
    total; the permutation is deterministic for a fixed seed.
    """
    ratios = check_ratios(ratios)
    n = len(triples)
    sizes = _partition_sizes(n, ratios)
    rng = np.random.default_rng([int(seed), _STREAM_SPLIT])
    perm = rng.permutation(n)
    bounds = np.cumsum(sizes)
    train = triples[np.sort(perm[: bounds[0]])]
    valid = triples[np.sort(perm[bounds[0] : bounds[1]])]
    test = triples[np.sort(perm[bounds[1] :])]
    return train, valid, test


_STREAM_SPLIT = 101  # rng stream label: splitting


def _partition_sizes(n: int, ratios) -> list[int]:
    base = [int(np.floor(n * r)) for r in ratios]
    remainder = n - sum(base)
    frac = [n * r - b for r, b in zip(ratios, base)]
    for i in sorted(range(3), key=lambda i: -frac[i])[:remainder]:
        base[i] += 1
    return base


def derive_atc_hierarchy(codes, registry: EntityRegistry, schema: RelationSchema) -> np.ndarray:
    """Link every ATC code (level >= 2) to its immediate parent prefix.

    Works transitively: parents missing from the input are registered as
    `atc` entities and linked upward in turn, e.g. A10BA02 yields the chain
    A10BA02 -> A10BA -> A10B -> A10 -> A.  Returns the new ATChypernym
    triples; the relation is registered in the schema if absent.
    """
    for code in codes:
        if len(code) not in _ATC_LEVEL_LENGTHS:
            raise SchemaError(
                f"invalid ATC code {code!r}: length must be one of {_ATC_LEVEL_LENGTHS}"
            )
    rel_idx = schema.add(Relation(ATC_HYPERNYM_RELATION, "atc", "atc", symmetric=False))
    rows = []
    pending = sorted(codes)
    seen = set(pending)
    while pending:
        code = pending.pop()
        if len(code) == 1:
            continue
        parent = code[: _ATC_PARENT_LENGTH[len(code)]]
        child_idx = registry.add(code, "atc")
        parent_idx = registry.add(parent, "atc")
        rows.append((child_idx, rel_idx, parent_idx))
        if parent not in seen:
            seen.add(parent)
            pending.append(parent)
    triples = np.asarray(rows, dtype=np.int64).reshape(-1, 3)
    triples, _ = dedup_triples(triples[np.lexsort((triples[:, 2], triples[:, 0]))])
    return triples


def load_item_table(path) -> list[tuple[str, str, str]]:
    """Read `entity_id<TAB>field_name<TAB>text_key` rows (order-preserving)."""
    rows = []
    for lineno, (entity_id, field_name, text_key) in _iter_tsv(path, 3):
        if field_name not in AUGMENTATION_FIELDS:
            raise SchemaError(
                f"{path}:{lineno}: unknown augmentation field {field_name!r}; "
                f"declared fields: {', '.join(AUGMENTATION_FIELDS)}"
            )
        rows.append((entity_id, field_name, text_key))
    return rows


@dataclass
class KnowledgeGraph:
    """Finalized typed triple store with train/valid/test splits.

    `pseudo_keys` maps augmentation pseudo-node ids to the row ids of the
    vector file that carries their text embeddings.
    """

    registry: EntityRegistry
    schema: RelationSchema
    train: np.ndarray
    valid: np.ndarray
    test: np.ndarray
    pseudo_keys: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        for name in ("train", "valid", "test"):
            arr = np.asarray(getattr(self, name), dtype=np.int64).reshape(-1, 3)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        self.validate()

    # -- core accessors -------------------------------------------------

    @property
    def n_entities(self) -> int:
        return len(self.registry)

    @property
    def n_relations(self) -> int:
        return len(self.schema)

    def splits(self):
        return {"train": self.train, "valid": self.valid, "test": self.test}

    def all_triples(self) -> np.ndarray:
        return np.concatenate([self.train, self.valid, self.test], axis=0)

    def relation_counts(self, split: np.ndarray) -> dict[str, int]:
        counts = np.bincount(split[:, 1], minlength=self.n_relations) if len(split) else np.zeros(self.n_relations, int)
        return {rel.name: int(counts[i]) for i, rel in enumerate(self.schema)}

    def candidate_pool(self, relation_idx: int, side: str) -> np.ndarray:
        """Dense indices of entities whose type fits `side` of the relation."""
        rel = self.schema.relation(relation_idx)
        type_name = rel.head_type if side == "head" else rel.tail_type
        return self.registry.entities_of_type(type_name)

    # -- validation ------------------------------------------------------

    def validate(self):
        """Check type conformance, split disjointness and entity coverage.

        Symmetric relations are additionally checked for reverse triples
        landing in the same split; violations are logged as warnings only.
        """
        all_triples = self.all_triples()
        if len(all_triples):
            if all_triples.min() < 0 or all_triples[:, [0, 2]].max() >= self.n_entities:
                raise SchemaError("triple references an entity index outside the registry")
            if all_triples[:, 1].max() >= self.n_relations:
                raise SchemaError("triple references an unknown relation index")
            type_codes = np.asarray(self.registry.type_codes, dtype=np.int64)
            head_req = np.asarray(
                [self.registry.type_code(rel.head_type) for rel in self.schema], dtype=np.int64
            )
            tail_req = np.asarray(
                [self.registry.type_code(rel.tail_type) for rel in self.schema], dtype=np.int64
            )
            bad = (type_codes[all_triples[:, 0]] != head_req[all_triples[:, 1]]) | (
                type_codes[all_triples[:, 2]] != tail_req[all_triples[:, 1]]
            )
            if bad.any():
                i = int(np.flatnonzero(bad)[0])
                h, r, t = all_triples[i]
                raise SchemaError(
                    f"triple ({self.registry.ids[h]}, {self.schema.relation(r).name}, "
                    f"{self.registry.ids[t]}) violates the relation type signature"
                )
        seen = set()
        for name, split in self.splits().items():
            as_set = set(map(tuple, split.tolist()))
            if len(as_set) != len(split):
                raise SchemaError(f"{name} split contains duplicate triples")
            overlap = seen & as_set
            if overlap:
                raise SchemaError(f"splits are not disjoint: {len(overlap)} shared triples")
            seen |= as_set
        self._warn_symmetric_split_violations()

    def _warn_symmetric_split_violations(self):
        sym_rels = {i for i, rel in enumerate(self.schema) if rel.symmetric}
        if not sym_rels:
            return
        for name, split in self.splits().items():
            members = set(map(tuple, split.tolist()))
            missing = sum(
                1 for h, r, t in members if r in sym_rels and (t, r, h) not in members
            )
            if missing:
                log.warning(
                    "%s split: %d symmetric-relation triples lack their reverse in the same split",
                    name,
                    missing,
                )


def augment_with_pseudo_nodes(kg: KnowledgeGraph, item_table, detect_duplicates=True) -> KnowledgeGraph:
    """Attach one pseudo node per (entity, field) item and link it in train.

    Each item row `(entity_id, field, text_key)` creates a pseudo node of
    type `text` (or `structure` for the structure field) and one train
    triple `(entity, has-<field>, pseudo)`.  When several entity types share
    a field, the relation name is qualified per type (`has-<type>-<field>`)
    so relations stay singly typed.  Valid/test splits are untouched.  With
    duplicate detection on, items whose pseudo node already exists add
    nothing, making the call idempotent.
    """
    registry = kg.registry.copy()
    schema = kg.schema.copy()
    pseudo_keys = dict(kg.pseudo_keys)

    field_owner_types: dict[str, set[str]] = {}
    for entity_id, field_name, _ in item_table:
        if field_name not in AUGMENTATION_FIELDS:
            raise SchemaError(f"unknown augmentation field {field_name!r}")
        field_owner_types.setdefault(field_name, set()).add(
            registry.type_of(registry.resolve(entity_id))
        )

    new_rows = []
    skipped = 0
    for entity_id, field_name, text_key in item_table:
        owner_idx = registry.resolve(entity_id)
        owner_type = registry.type_of(owner_idx)
        node_type = "structure" if field_name == "structure" else "text"
        if len(field_owner_types[field_name]) == 1:
            rel_name = f"has-{field_name}"
        else:
            rel_name = f"has-{owner_type}-{field_name}"
        rel_idx = schema.add(Relation(rel_name, owner_type, node_type, symmetric=False))
        pseudo_id = f"{entity_id}::{field_name}"
        if pseudo_id in registry.index:
            if not detect_duplicates:
                raise SchemaError(f"pseudo node id {pseudo_id!r} already exists")
            skipped += 1
            continue
        pseudo_idx = registry.add(pseudo_id, node_type)
        pseudo_keys[pseudo_id] = text_key
        new_rows.append((owner_idx, rel_idx, pseudo_idx))
    if skipped:
        log.warning("augmentation skipped %d items whose pseudo nodes already exist", skipped)

    new_triples = np.asarray(new_rows, dtype=np.int64).reshape(-1, 3)
    train = np.concatenate([kg.train, new_triples], axis=0)
    return KnowledgeGraph(registry, schema, train, kg.valid, kg.test, pseudo_keys)


# -- bundle serialization ---------------------------------------------------

_BUNDLE_FILES = ("entities.tsv", "schema.tsv", "train.tsv", "valid.tsv", "test.tsv", "manifest.json")


def save_bundle(kg: KnowledgeGraph, out_dir, extra_manifest=None):
    """Write a kg bundle: registry, schema, split triple files, manifest."""
    import os

    os.makedirs(out_dir, exist_ok=True)
    join = lambda name: os.path.join(out_dir, name)
    with open(join("entities.tsv"), "w", encoding="utf-8") as fh:
        for idx, entity_id in enumerate(kg.registry.ids):
            fh.write(f"{entity_id}\t{kg.registry.type_of(idx)}\n")
    with open(join("schema.tsv"), "w", encoding="utf-8") as fh:
        for rel in kg.schema:
            flag = "sym" if rel.symmetric else "asym"
            fh.write(f"{rel.name}\t{rel.head_type}\t{rel.tail_type}\t{flag}\n")
    for name, split in kg.splits().items():
        with open(join(f"{name}.tsv"), "w", encoding="utf-8") as fh:
            for h, r, t in split:
                fh.write(f"{kg.registry.ids[h]}\t{kg.schema.relation(r).name}\t{kg.registry.ids[t]}\n")
    if kg.pseudo_keys:
        with open(join("pseudo_keys.tsv"), "w", encoding="utf-8") as fh:
            for pseudo_id, key in kg.pseudo_keys.items():
                fh.write(f"{pseudo_id}\t{key}\n")
    manifest = {
        "n_entities": kg.n_entities,
        "n_relations": kg.n_relations,
        "split_sizes": {name: len(split) for name, split in kg.splits().items()},
    }
    if extra_manifest:
        manifest.update(extra_manifest)
    with open(join("manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_bundle(bundle_dir) -> KnowledgeGraph:
    """Load a bundle written by `save_bundle`."""
    import os

    join = lambda name: os.path.join(bundle_dir, name)
    for name in _BUNDLE_FILES:
        if not os.path.exists(join(name)):
            raise ConfigError(f"not a kg bundle: missing {name} in {bundle_dir}")
    registry = load_entity_types(join("entities.tsv"))
    schema = load_schema(join("schema.tsv"))
    splits = {
        name: load_triples(join(f"{name}.tsv"), registry, schema, dedup=False)
        for name in ("train", "valid", "test")
    }
    pseudo_keys = {}
    if os.path.exists(join("pseudo_keys.tsv")):
        for _, (pseudo_id, key) in _iter_tsv(join("pseudo_keys.tsv"), 2):
            pseudo_keys[pseudo_id] = key
    return KnowledgeGraph(registry, schema, splits["train"], splits["valid"], splits["test"], pseudo_keys)


def format_stats(kg: KnowledgeGraph) -> str:
    """Entity and per-relation count tables, mirroring the dataset reports."""
    lines = ["# entities", "type\tcount"]
    for type_name, count in sorted(kg.registry.type_counts().items()):
        lines.append(f"{type_name}\t{count}")
    lines.append(f"total\t{kg.n_entities}")
    lines.append("")
    lines.append("# relations")
    lines.append("relation\tall\ttrain\tvalid\ttest")
    per_split = {name: kg.relation_counts(split) for name, split in kg.splits().items()}
    structural_total = [0, 0, 0, 0]
    derived_lines = []
    for rel in kg.schema:
        counts = [per_split[name][rel.name] for name in ("train", "valid", "test")]
        row = f"{rel.name}\t{sum(counts)}\t{counts[0]}\t{counts[1]}\t{counts[2]}"
        if rel.name == ATC_HYPERNYM_RELATION or rel.tail_type in PSEUDO_TYPES:
            derived_lines.append(row)
        else:
            structural_total = [a + b for a, b in zip(structural_total, [sum(counts)] + counts)]
            lines.append(row)
    lines.append(
        "total\t" + "\t".join(str(c) for c in structural_total)
    )
    if derived_lines:
        lines.append("")
        lines.append("# derived/augmentation relations (train only, excluded from evaluation)")
        lines.extend(derived_lines)
    return "\n".join(lines) + "\n"
