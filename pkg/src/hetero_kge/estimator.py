"""Scikit-learn style front door for the embedding engine.

``KnowledgeGraphEmbedder`` follows the estimator protocol: constructor
arguments are stored verbatim, ``fit`` learns state into underscore
attributes, ``get_params``/``set_params`` come from ``BaseEstimator`` and
make the embedder grid-searchable and cloneable.  ``X`` is a
``KnowledgeGraph`` rather than a feature matrix; ``transform`` maps
entity ids to their learned vectors and ``predict`` scores triples.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .errors import ConfigError, ResolutionError
from .evaluator import DEFAULT_HITS_KS, EvalReport, evaluate
from .graph import KnowledgeGraph
from .scoring import ScoringModel
from .table import (
    DEFAULT_EPSILON_INIT,
    DEFAULT_GAMMA_INIT,
    EmbeddingTable,
    ROW_LABELS,
    read_vector_file,
    write_vector_file,
)
from .trainer import ADAGRAD_EPS, TrainingConfig, TrainResult, train


def entity_matrix(table: EmbeddingTable, indices) -> np.ndarray:
    """Entity vectors as one row per entity.

    Families with two rows per entity concatenate them, so the output is
    (n, rows_per_entity * dim).
    """
    base = np.asarray(indices, dtype=np.int64) * table.rows_per_entity
    if table.rows_per_entity == 1:
        return table.params[base].copy()
    parts = [table.params[base + k] for k in range(table.rows_per_entity)]
    return np.concatenate(parts, axis=1)


def export_embeddings(table: EmbeddingTable, kg: KnowledgeGraph, path,
                      entity_ids=None) -> int:
    """Write entity embeddings as a vector file; returns the row count.

    ``entity_ids`` restricts and orders the output; unknown ids fail.  The
    header comment records how multi-row families lay out their columns.
    """
    if entity_ids is None:
        ids = list(kg.registry.ids)
        indices = np.arange(kg.n_entities, dtype=np.int64)
    else:
        ids = [str(e) for e in entity_ids]
        indices = np.asarray([kg.registry.resolve(e) for e in ids], dtype=np.int64)
    matrix = entity_matrix(table, indices)
    labels = ROW_LABELS[table.family][0]
    comment = None
    if len(labels) > 1:
        comment = (f"{table.family}: columns are the {' then '.join(labels)} rows, "
                   f"{table.dim} values each")
    write_vector_file(path, ids, matrix, comment=comment)
    return len(ids)


class KnowledgeGraphEmbedder(BaseEstimator):
    """Learn entity/relation embeddings from a typed knowledge graph.

    Parameters mirror ``TrainingConfig``; ``model`` selects the scoring
    family.  ``anchors`` may be a path to a vector file or an
    ``(ids, vectors)`` pair and feeds the initialization/alignment
    methods.

    Attributes after ``fit``: ``kg_`` (the training graph), ``table_``
    (learned parameters), ``model_`` (scoring window over the table),
    ``loss_log_`` (per-step training losses).
    """

    def __init__(self, model: str = "distmult", dim: int = 128,
                 loss: str = "default", n_negatives: int = 1,
                 margin: float = 1.0, lambda_l2: float = 9e-9,
                 lambda_align: float = 1e-6, learning_rate: float = 0.25,
                 batch_size: int = 4096, epochs: int = 100, seed: int = 0,
                 method: str = "none", anchors=None,
                 negative_side: str = "both-alternating",
                 exclude_known_positives: bool = False,
                 gamma_init: float = DEFAULT_GAMMA_INIT,
                 epsilon_init: float = DEFAULT_EPSILON_INIT,
                 adagrad_eps: float = ADAGRAD_EPS):
        self.model = model
        self.dim = dim
        self.loss = loss
        self.n_negatives = n_negatives
        self.margin = margin
        self.lambda_l2 = lambda_l2
        self.lambda_align = lambda_align
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.epochs = epochs
        self.seed = seed
        self.method = method
        self.anchors = anchors
        self.negative_side = negative_side
        self.exclude_known_positives = exclude_known_positives
        self.gamma_init = gamma_init
        self.epsilon_init = epsilon_init
        self.adagrad_eps = adagrad_eps

    # -- estimator plumbing ------------------------------------------------

    def _config(self) -> TrainingConfig:
        return TrainingConfig(
            family=self.model, dim=self.dim, loss=self.loss,
            n_negatives=self.n_negatives, margin=self.margin,
            lambda_l2=self.lambda_l2, lambda_align=self.lambda_align,
            learning_rate=self.learning_rate, batch_size=self.batch_size,
            epochs=self.epochs, seed=self.seed, method=self.method,
            negative_side=self.negative_side,
            exclude_known_positives=self.exclude_known_positives,
            gamma_init=self.gamma_init, epsilon_init=self.epsilon_init,
            adagrad_eps=self.adagrad_eps,
        )

    def _resolved_anchors(self):
        if self.anchors is None:
            return None
        if isinstance(self.anchors, (str, bytes)) or hasattr(self.anchors, "__fspath__"):
            return read_vector_file(self.anchors)
        ids, vectors = self.anchors
        return list(ids), np.asarray(vectors, dtype=np.float64)

    def _check_fitted(self):
        if not hasattr(self, "table_"):
            raise NotFittedError(
                "This KnowledgeGraphEmbedder instance is not fitted yet; call fit first."
            )

    # -- the estimator API ---------------------------------------------------

    def fit(self, X: KnowledgeGraph, y=None) -> "KnowledgeGraphEmbedder":
        """Train on ``X.train``; ``y`` is accepted for API compatibility."""
        if not isinstance(X, KnowledgeGraph):
            raise ConfigError("fit expects a KnowledgeGraph")
        result: TrainResult = train(X, self._config(), anchors=self._resolved_anchors())
        self.kg_ = X
        self.table_ = result.table
        self.model_ = ScoringModel(self.model, result.table)
        self.loss_log_ = result.loss_log
        return self

    def transform(self, X=None) -> np.ndarray:
        """Entity ids -> embedding rows (two-row families concatenate).

        ``X`` is an iterable of entity id strings; None yields every
        entity in registry order.
        """
        self._check_fitted()
        if X is None:
            indices = np.arange(self.kg_.n_entities, dtype=np.int64)
        else:
            indices = np.asarray([self.kg_.registry.resolve(str(e)) for e in X],
                                 dtype=np.int64)
        return entity_matrix(self.table_, indices)

    def fit_transform(self, X: KnowledgeGraph, y=None) -> np.ndarray:
        return self.fit(X, y).transform()

    def predict(self, X) -> np.ndarray:
        """Plausibility scores for triples.

        ``X`` is an (n, 3) array of dense indices, or an iterable of
        (head_id, relation_name, tail_id) string triples.
        """
        self._check_fitted()
        triples = self._resolve_triples(X)
        if len(triples) == 0:
            return np.empty(0, dtype=np.float64)
        return self.model_.score_batch(triples[:, 0], triples[:, 1], triples[:, 2])

    def _resolve_triples(self, X) -> np.ndarray:
        arr = np.asarray(X)
        if arr.dtype.kind in "iu":
            out = arr.reshape(-1, 3).astype(np.int64)
            if len(out):
                if out.min() < 0 or out[:, [0, 2]].max() >= self.kg_.n_entities:
                    raise ResolutionError("triple entity index out of range")
                if out[:, 1].max() >= self.kg_.n_relations:
                    raise ResolutionError("triple relation index out of range")
            return out
        rows = []
        for h, r, t in X:
            rows.append((self.kg_.registry.resolve(str(h)),
                         self.kg_.schema.resolve(str(r)),
                         self.kg_.registry.resolve(str(t))))
        return np.asarray(rows, dtype=np.int64).reshape(-1, 3)

    def evaluate(self, split: str = "test", ks=DEFAULT_HITS_KS,
                 ties: str = "pessimistic", filtered: bool = True,
                 threads: int = 0) -> EvalReport:
        """Ranking metrics on one of the fitted graph's splits."""
        self._check_fitted()
        return evaluate(self.model_, self.kg_, split=split, ks=ks, ties=ties,
                        filtered=filtered, threads=threads)
