"""Turn entity text fields and SMILES strings into anchor vector files."""

from .encoders import EncoderError, HashEncoder, TransformerEncoder, resolve_encoder
from .export import export_items
from .items import FALLBACK_FIELD, ItemRow, ItemTableError, assemble_texts, load_item_rows
from .vectors import write_vector_file

__all__ = [
    "EncoderError",
    "FALLBACK_FIELD",
    "HashEncoder",
    "ItemRow",
    "ItemTableError",
    "TransformerEncoder",
    "assemble_texts",
    "export_items",
    "load_item_rows",
    "resolve_encoder",
    "write_vector_file",
]
