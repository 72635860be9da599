"""Item-table parsing and per-entity text assembly.

The input is a TSV of ``row_id<TAB>field<TAB>text`` lines.  One export
run targets a single text field: rows of that field are gathered per
entity (several rows, as with synonym lists, join with commas), entities
that lack the field fall back to their ``name`` text, and entities with
nothing usable are skipped with a warning.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

log = logging.getLogger("kge_text_exporter")

FALLBACK_FIELD = "name"


class ItemTableError(ValueError):
    """Malformed or inconsistent item-table input."""


@dataclass(frozen=True)
class ItemRow:
    row_id: str
    field: str
    text: str


def load_item_rows(path) -> list[ItemRow]:
    """Parse an item TSV; blank lines and ``#`` comments are ignored."""
    rows: list[ItemRow] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ItemTableError(
                    f"{path}:{lineno}: expected 3 tab-separated columns, got {len(parts)}"
                )
            row_id, field, text = (p.strip() for p in parts)
            if not row_id or not field:
                raise ItemTableError(f"{path}:{lineno}: empty row id or field name")
            rows.append(ItemRow(row_id, field, text))
    return rows


def target_field_of(rows: list[ItemRow]) -> str:
    """The single non-fallback field present, or the fallback field itself."""
    fields = {row.field for row in rows} - {FALLBACK_FIELD}
    if len(fields) > 1:
        raise ItemTableError(
            f"item table mixes fields {sorted(fields)}; export one field per run "
            f"(extra '{FALLBACK_FIELD}' rows are allowed as fallback text)"
        )
    return next(iter(fields), FALLBACK_FIELD)


def assemble_texts(rows: list[ItemRow], target_field: str | None = None) -> list[tuple[str, str]]:
    """One (row_id, text) pair per entity, in first-appearance order.

    Duplicate rows of the target field comma-join in input order.
    """
    if target_field is None:
        target_field = target_field_of(rows)
    order: list[str] = []
    grouped: dict[str, dict[str, list[str]]] = {}
    for row in rows:
        if row.row_id not in grouped:
            grouped[row.row_id] = {}
            order.append(row.row_id)
        grouped[row.row_id].setdefault(row.field, []).append(row.text)

    out: list[tuple[str, str]] = []
    for row_id in order:
        fields = grouped[row_id]
        texts = [t for t in fields.get(target_field, []) if t]
        if not texts and target_field != FALLBACK_FIELD:
            texts = [t for t in fields.get(FALLBACK_FIELD, []) if t]
        if not texts:
            log.warning(
                "skipping %s: no usable %r text and no %r fallback",
                row_id, target_field, FALLBACK_FIELD,
            )
            continue
        out.append((row_id, ",".join(texts)))
    return out
