"""Embedding engine for heterogeneous, typed knowledge graphs.

Builds typed triple stores from TSV inputs, trains TransE, DistMult,
ComplEx or SimplE embeddings with Adagrad, evaluates by filtered
type-restricted ranking, and exchanges vectors through a plain-text
format shared with external encoders.
"""

from .errors import (
    ConfigError,
    DataError,
    KGEError,
    NumericError,
    ParseError,
    ResolutionError,
    SamplingError,
    SchemaError,
)
from .estimator import KnowledgeGraphEmbedder, entity_matrix, export_embeddings
from .evaluator import EvalReport, FilterIndex, RelationMetrics, evaluate, rank
from .graph import (
    EntityRegistry,
    KnowledgeGraph,
    Relation,
    RelationSchema,
    augment_with_pseudo_nodes,
    derive_atc_hierarchy,
    load_bundle,
    load_entity_types,
    load_item_table,
    load_schema,
    load_triples,
    save_bundle,
    split_triples,
)
from .objective import (
    AlignmentAnchors,
    LabeledBatch,
    alignment_penalty,
    hinge_loss,
    logistic_loss,
)
from .sampling import CorruptionPolicy, corrupt
from .scoring import ScoringModel
from .table import (
    EmbeddingTable,
    init_from_vectors,
    init_random,
    load_checkpoint,
    read_vector_file,
    save_checkpoint,
    write_vector_file,
)
from .trainer import TrainingConfig, TrainResult, adagrad_step, train

__version__ = "0.1.0"

__all__ = [
    "AlignmentAnchors",
    "ConfigError",
    "CorruptionPolicy",
    "DataError",
    "EmbeddingTable",
    "EntityRegistry",
    "EvalReport",
    "FilterIndex",
    "KGEError",
    "KnowledgeGraph",
    "KnowledgeGraphEmbedder",
    "LabeledBatch",
    "NumericError",
    "ParseError",
    "Relation",
    "RelationMetrics",
    "RelationSchema",
    "ResolutionError",
    "SamplingError",
    "SchemaError",
    "ScoringModel",
    "TrainResult",
    "TrainingConfig",
    "adagrad_step",
    "alignment_penalty",
    "augment_with_pseudo_nodes",
    "corrupt",
    "derive_atc_hierarchy",
    "entity_matrix",
    "evaluate",
    "export_embeddings",
    "hinge_loss",
    "init_from_vectors",
    "init_random",
    "load_bundle",
    "load_checkpoint",
    "load_entity_types",
    "load_item_table",
    "load_schema",
    "load_triples",
    "logistic_loss",
    "rank",
    "read_vector_file",
    "save_bundle",
    "save_checkpoint",
    "split_triples",
    "train",
    "write_vector_file",
]
