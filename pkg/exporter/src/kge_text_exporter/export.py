"""End-to-end export: item table in, encoded vector file out."""

from __future__ import annotations

import logging

from .encoders import resolve_encoder
from .items import assemble_texts, load_item_rows
from .vectors import write_vector_file

log = logging.getLogger("kge_text_exporter")

# characters commonly seen in SMILES strings; anything else is worth a
# warning but still encodes (string model, no chemistry validation)
SMILES_CHARACTERS = frozenset(
    "ABCDEFGHIKLMNOPRSTUVWXYZabcdefghiklmnoprstuvwxy"
    "0123456789()[]{}@+-=#$%/\\.*:~,"
)


def export_items(input_path, output_path, encoder_spec: str,
                 max_len: int = 512, batch_size: int = 32,
                 smiles: bool = False) -> int:
    """Encode one item table into a vector file; returns the row count.

    Row ids come through unchanged and order-preserving, so the output
    plugs directly into the engine's anchor-vector options.
    """
    if max_len < 1:
        raise ValueError(f"max_len must be >= 1, got {max_len}")
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    pairs = assemble_texts(load_item_rows(input_path))
    if smiles:
        for row_id, text in pairs:
            odd = sorted(set(text) - SMILES_CHARACTERS)
            if odd:
                log.warning("row %s: characters %s are unusual for SMILES; "
                            "encoding anyway", row_id, "".join(odd))
    encoder = resolve_encoder(encoder_spec)
    texts = [text for _, text in pairs]
    vectors = encoder.encode(texts, max_len=max_len, batch_size=batch_size)
    comment = f"encoder {encoder_spec}, first-token pooling, max_len {max_len}"
    write_vector_file(output_path, [row_id for row_id, _ in pairs], vectors,
                      comment=comment)
    return len(pairs)
