"""Mini-batch Adagrad training loop.

Every stochastic choice draws from a generator seeded with a labeled
stream: ``[seed, stream, epoch]`` for the per-epoch shuffle and
``[seed, stream, epoch, batch]`` for negative sampling.  Streams are keyed
by absolute epoch and batch numbers, so a run resumed from a checkpoint
walks the same sequence as one that never stopped, and results match
bit for bit under single-threaded execution.

The optimizer updates only rows touched by the batch; each touched row
is updated exactly once per step after gradient accumulation.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
from dataclasses import dataclass, field, asdict

import numpy as np

from .errors import ConfigError, NumericError
from .graph import KnowledgeGraph
from .objective import (
    DEFAULT_LOSS,
    AlignmentAnchors,
    LabeledBatch,
    accumulate,
    alignment_penalty,
    hinge_loss,
    logistic_loss,
)
from .sampling import SIDES, CorruptionPolicy, corrupt_batch
from .scoring import FAMILIES, ScoringModel
from .table import (
    CHECKPOINT_FILES,
    DEFAULT_EPSILON_INIT,
    DEFAULT_GAMMA_INIT,
    EmbeddingTable,
    init_from_vectors,
    init_random,
    load_checkpoint,
    save_checkpoint,
)
from . import validation as v

log = logging.getLogger(__name__)

_STREAM_SHUFFLE = 103    # rng stream label: epoch shuffles
_STREAM_NEGATIVES = 104  # rng stream label: negative sampling

ADAGRAD_EPS = 1e-10

LOSSES = ("default", "hinge", "logistic")
METHODS = ("none", "init", "align", "augment")

LOSS_LOG_NAME = "loss_log.csv"


@dataclass
class TrainingConfig:
    """Everything that determines a training run, with engine defaults."""

    family: str = "distmult"
    dim: int = 768
    loss: str = "default"
    n_negatives: int = 1
    margin: float = 1.0
    lambda_l2: float = 9e-9
    lambda_align: float = 1e-6
    learning_rate: float = 0.25
    batch_size: int = 4096
    epochs: int = 100
    seed: int = 0
    method: str = "none"
    negative_side: str = "both-alternating"
    exclude_known_positives: bool = False
    gamma_init: float = DEFAULT_GAMMA_INIT
    epsilon_init: float = DEFAULT_EPSILON_INIT
    adagrad_eps: float = ADAGRAD_EPS
    # Checkpoint cadence in epochs; 0 writes the final state only.
    checkpoint_every: int = 0

    def validate(self) -> "TrainingConfig":
        v.check_choice(self.family, "family", FAMILIES)
        v.check_choice(self.loss, "loss", LOSSES)
        v.check_choice(self.method, "method", METHODS)
        v.check_choice(self.negative_side, "negative_side", SIDES)
        v.check_positive_int(self.dim, "dim")
        v.check_positive_int(self.n_negatives, "n_negatives")
        v.check_positive_int(self.batch_size, "batch_size")
        v.check_nonneg_int(self.epochs, "epochs")
        v.check_nonneg_int(self.checkpoint_every, "checkpoint_every")
        v.check_nonneg_int(self.seed, "seed")
        v.check_positive_float(self.learning_rate, "learning_rate")
        v.check_nonneg_float(self.margin, "margin")
        v.check_nonneg_float(self.lambda_l2, "lambda_l2")
        v.check_nonneg_float(self.lambda_align, "lambda_align")
        v.check_nonneg_float(self.gamma_init, "gamma_init")
        v.check_nonneg_float(self.epsilon_init, "epsilon_init")
        v.check_positive_float(self.adagrad_eps, "adagrad_eps")
        return self

    def resolved_loss(self) -> str:
        return DEFAULT_LOSS[self.family] if self.loss == "default" else self.loss

    def config_hash(self) -> str:
        """Digest of the fields that define model identity.

        Epoch count and checkpoint cadence are excluded: a checkpoint from
        a shorter run is a valid prefix of a longer one, so raising
        ``epochs`` and rerunning resumes instead of restarting.
        """
        ident = asdict(self)
        ident["loss"] = self.resolved_loss()
        del ident["epochs"]
        del ident["checkpoint_every"]
        blob = json.dumps(ident, sort_keys=True)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


@dataclass
class TrainResult:
    table: EmbeddingTable
    # Rows of (epoch, step, loss) for the steps executed by this call.
    loss_log: list[tuple[int, int, float]] = field(default_factory=list)
    start_epoch: int = 0
    end_epoch: int = 0
    steps: int = 0


def adagrad_step(row: np.ndarray, grad: np.ndarray, accum: np.ndarray,
                 eta: float, eps: float = ADAGRAD_EPS):
    """One Adagrad update; works on a single row or a (m, d) block.

    Returns (new_row, new_accum) where new_accum = accum + grad**2 and
    new_row = row - eta * grad / sqrt(new_accum + eps).
    """
    new_accum = accum + grad * grad
    new_row = row - eta * grad / np.sqrt(new_accum + eps)
    return new_row, new_accum


def anchor_mapping(kg: KnowledgeGraph, ids) -> dict[int, str]:
    """Match anchor-file row ids against the graph's entities.

    A pseudo node matches through its recorded source key, every other
    entity through its own id.  Returns dense entity index -> row id.
    """
    available = set(ids)
    mapping: dict[int, str] = {}
    for idx, eid in enumerate(kg.registry.ids):
        key = kg.pseudo_keys.get(eid, eid)
        if key in available:
            mapping[idx] = key
    return mapping


def _build_table(kg: KnowledgeGraph, config: TrainingConfig, anchors) -> EmbeddingTable:
    table = EmbeddingTable(config.family, config.dim, kg.n_entities, kg.n_relations)
    if anchors is None:
        if config.method == "init":
            raise ConfigError("method 'init' requires anchor vectors")
        if config.method == "align":
            raise ConfigError("method 'align' requires anchor vectors")
        return init_random(table, config.seed, config.gamma_init, config.epsilon_init)
    ids, vectors = anchors
    if config.method in ("init", "augment"):
        mapping = anchor_mapping(kg, ids)
        if not mapping:
            log.warning("no anchor ids matched any entity; falling back to random init")
        return init_from_vectors(table, ids, vectors, mapping, config.seed,
                                 config.gamma_init, config.epsilon_init)
    return init_random(table, config.seed, config.gamma_init, config.epsilon_init)


def _alignment_anchors(kg: KnowledgeGraph, config: TrainingConfig, anchors):
    if config.method != "align":
        return None
    if anchors is None:
        raise ConfigError("method 'align' requires anchor vectors")
    ids, vectors = anchors
    vectors = np.asarray(vectors, dtype=np.float64)
    if vectors.ndim != 2 or vectors.shape[1] != config.dim:
        raise ConfigError(
            f"anchor vectors have dimension {vectors.shape[-1] if vectors.ndim == 2 else '?'}, "
            f"run expects {config.dim}"
        )
    row_of = {rid: i for i, rid in enumerate(ids)}
    anchor_of = {e: vectors[row_of[rid]] for e, rid in anchor_mapping(kg, ids).items()}
    if not anchor_of:
        log.warning("no anchor ids matched any entity; alignment term is inert")
    return AlignmentAnchors(anchor_of, config.lambda_align)


def _try_resume(out_dir, config_hash: str):
    if out_dir is None:
        return None
    if not all(os.path.exists(os.path.join(out_dir, f)) for f in CHECKPOINT_FILES):
        return None
    table, manifest = load_checkpoint(out_dir)
    if manifest.get("config_hash") != config_hash:
        log.warning("checkpoint in %s belongs to a different configuration; retraining", out_dir)
        return None
    return table, int(manifest["epoch"]), int(manifest["step"])


def _flush_loss_log(out_dir, rows, fresh: bool):
    path = os.path.join(out_dir, LOSS_LOG_NAME)
    mode = "w" if fresh else "a"
    with open(path, mode, encoding="utf-8") as fh:
        if fresh:
            fh.write("epoch,step,loss\n")
        for epoch, step, loss in rows:
            fh.write(f"{epoch},{step},{loss!r}\n")


def _batch_entities(positives: np.ndarray, negatives: np.ndarray) -> np.ndarray:
    return np.concatenate([
        positives[:, 0], positives[:, 2], negatives[:, 0], negatives[:, 2]
    ])


def train(kg: KnowledgeGraph, config: TrainingConfig, anchors=None,
          out_dir=None, resume: bool = True) -> TrainResult:
    """Train embeddings on ``kg.train``; valid/test are never touched.

    ``anchors`` is an (ids, vectors) pair as returned by
    ``read_vector_file``; required for methods 'init' and 'align',
    optional for 'augment', ignored for 'none'.  With ``out_dir`` set the
    final table, the Adagrad state and a per-step loss log are written
    there, and an existing checkpoint with the same configuration digest
    is resumed rather than recomputed.
    """
    config.validate()
    if len(kg.train) == 0:
        raise ConfigError("training split is empty")
    chash = config.config_hash()

    start_epoch, global_step = 0, 0
    table = None
    if resume:
        resumed = _try_resume(out_dir, chash)
        if resumed is not None:
            table, start_epoch, global_step = resumed
            log.info("resuming from epoch %d (step %d)", start_epoch, global_step)
    fresh_run = table is None
    if fresh_run:
        table = _build_table(kg, config, anchors)
    if table.n_entities != kg.n_entities or table.n_relations != kg.n_relations:
        raise ConfigError("checkpoint entity/relation counts do not match the graph")

    model = ScoringModel(config.family, table)
    align = _alignment_anchors(kg, config, anchors)
    policy = CorruptionPolicy(config.n_negatives, config.negative_side,
                              config.exclude_known_positives)
    loss_name = config.resolved_loss()

    loss_log: list[tuple[int, int, float]] = []
    flushed = 0

    def checkpoint(completed_epoch: int):
        nonlocal flushed
        if out_dir is None:
            return
        save_checkpoint(table, out_dir, completed_epoch, global_step, chash)
        _flush_loss_log(out_dir, loss_log[flushed:], fresh=fresh_run and flushed == 0)
        flushed = len(loss_log)

    n_train = len(kg.train)
    for epoch in range(start_epoch, config.epochs):
        perm = np.random.default_rng(
            [config.seed, _STREAM_SHUFFLE, epoch]).permutation(n_train)
        for batch_idx, lo in enumerate(range(0, n_train, config.batch_size)):
            positives = kg.train[perm[lo:lo + config.batch_size]]
            rng = np.random.default_rng(
                [config.seed, _STREAM_NEGATIVES, epoch, batch_idx])
            negatives = corrupt_batch(positives, policy, kg, rng)
            batch = LabeledBatch(positives, negatives)

            if loss_name == "hinge":
                loss, blocks = hinge_loss(batch, model, config.margin, config.lambda_l2)
            else:
                loss, blocks = logistic_loss(batch, model, config.lambda_l2)
            if align is not None:
                a_loss, a_blocks = alignment_penalty(
                    _batch_entities(positives, negatives), model, align)
                loss += a_loss
                blocks = blocks + a_blocks

            if not np.isfinite(loss):
                raise NumericError(
                    f"loss became non-finite ({loss}) at epoch {epoch}, step {global_step}",
                    epoch=epoch, step=global_step)

            rows, grads = accumulate(blocks, config.dim)
            new_rows, new_accum = adagrad_step(
                table.params[rows], grads, table.accum[rows],
                config.learning_rate, config.adagrad_eps)
            if not np.all(np.isfinite(new_rows)):
                raise NumericError(
                    f"parameter update became non-finite at epoch {epoch}, step {global_step}",
                    epoch=epoch, step=global_step)
            table.params[rows] = new_rows
            table.accum[rows] = new_accum

            loss_log.append((epoch, global_step, float(loss)))
            global_step += 1

        if config.checkpoint_every and (epoch + 1) % config.checkpoint_every == 0:
            checkpoint(epoch + 1)
        if log.isEnabledFor(logging.INFO) and loss_log:
            log.info("epoch %d done, last step loss %.6g", epoch, loss_log[-1][2])

    end_epoch = max(start_epoch, config.epochs)
    if start_epoch < config.epochs or fresh_run:
        checkpoint(end_epoch)
    return TrainResult(table, loss_log, start_epoch=start_epoch,
                       end_epoch=end_epoch, steps=global_step)
