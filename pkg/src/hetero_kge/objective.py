"""Training objectives: logistic and pairwise hinge, plus penalties.

Both losses carry an L2 term over the distinct parameter rows the batch
touches (never the whole table), matching the sparse update rule.  The
alignment penalty pulls entity rows toward fixed anchor vectors and is
likewise restricted to rows present in the batch.

Gradients flow as (row_indices, per-triple gradients) blocks;
``accumulate`` merges all blocks into one (unique_rows, summed) pair so a
parameter row receives exactly one update per step no matter how many
triples touched it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .scoring import ScoringModel

# Pairs each family with the loss it trains best under; "default" in a
# config resolves through this table.
DEFAULT_LOSS = {
    "transe": "hinge",
    "distmult": "hinge",
    "complex": "logistic",
    "simple": "logistic",
}

GradBlocks = list[tuple[np.ndarray, np.ndarray]]


@dataclass
class LabeledBatch:
    """One optimizer step's worth of positives and their corruptions."""

    positives: np.ndarray            # (B, 3) int64
    negatives: np.ndarray            # (B * n, 3) int64
    positive_of: np.ndarray = field(default=None)  # (B * n,) owner index

    def __post_init__(self):
        b = self.positives.shape[0]
        m = self.negatives.shape[0]
        if b == 0:
            raise ConfigError("batch must contain at least one positive")
        if m % b != 0:
            raise ConfigError(f"{m} negatives do not evenly cover {b} positives")
        if self.positive_of is None:
            n = m // b
            self.positive_of = np.repeat(np.arange(b, dtype=np.int64), n)


def _softplus(x: np.ndarray) -> np.ndarray:
    # log(1 + e^x) without overflow for large |x|.
    return np.log1p(np.exp(-np.abs(x))) + np.maximum(x, 0.0)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _scaled_blocks(blocks: GradBlocks, coef: np.ndarray) -> GradBlocks:
    return [(rows, grads * coef[:, None]) for rows, grads in blocks]


def _touched_rows(model: ScoringModel, batch: LabeledBatch) -> np.ndarray:
    rows = np.concatenate([
        model.involved_rows(batch.positives[:, 0], batch.positives[:, 1], batch.positives[:, 2]),
        model.involved_rows(batch.negatives[:, 0], batch.negatives[:, 1], batch.negatives[:, 2]),
    ])
    return np.unique(rows)


def _l2_term(model: ScoringModel, batch: LabeledBatch, lam: float) -> tuple[float, GradBlocks]:
    if lam == 0.0:
        return 0.0, []
    rows = _touched_rows(model, batch)
    vals = model.table.params[rows]
    loss = lam * float(np.sum(vals * vals))
    return loss, [(rows, 2.0 * lam * vals)]


def logistic_loss(batch: LabeledBatch, model: ScoringModel, lambda_l2: float = 0.0):
    """Sum of log(1 + exp(-y f)) over labeled triples, plus batch-row L2.

    Positives carry y=+1, corruptions y=-1.  Returns (loss, grad blocks).
    """
    pos, neg = batch.positives, batch.negatives
    f_pos = model.score_batch(pos[:, 0], pos[:, 1], pos[:, 2])
    f_neg = model.score_batch(neg[:, 0], neg[:, 1], neg[:, 2])
    loss = float(np.sum(_softplus(-f_pos)) + np.sum(_softplus(f_neg)))

    # d/df log(1 + e^{-yf}) = -y * sigmoid(-y f)
    coef_pos = -_sigmoid(-f_pos)
    coef_neg = _sigmoid(f_neg)
    blocks = _scaled_blocks(model.gradient_batch(pos[:, 0], pos[:, 1], pos[:, 2]), coef_pos)
    blocks += _scaled_blocks(model.gradient_batch(neg[:, 0], neg[:, 1], neg[:, 2]), coef_neg)

    l2, l2_blocks = _l2_term(model, batch, lambda_l2)
    return loss + l2, blocks + l2_blocks


def hinge_loss(batch: LabeledBatch, model: ScoringModel, margin: float = 1.0,
               lambda_l2: float = 0.0):
    """Sum of max(0, margin - f_pos + f_neg) over pairs, plus batch-row L2.

    Each corruption pairs with the positive it was drawn from.  Inactive
    pairs (margin already met) contribute no loss and no gradient.
    """
    pos, neg = batch.positives, batch.negatives
    f_pos = model.score_batch(pos[:, 0], pos[:, 1], pos[:, 2])
    f_neg = model.score_batch(neg[:, 0], neg[:, 1], neg[:, 2])
    viol = margin - f_pos[batch.positive_of] + f_neg
    active = viol > 0
    loss = float(np.sum(viol[active])) if active.any() else 0.0

    coef_neg = active.astype(np.float64)
    coef_pos = -np.bincount(batch.positive_of, weights=coef_neg,
                            minlength=pos.shape[0]).astype(np.float64)
    blocks = _scaled_blocks(model.gradient_batch(pos[:, 0], pos[:, 1], pos[:, 2]), coef_pos)
    blocks += _scaled_blocks(model.gradient_batch(neg[:, 0], neg[:, 1], neg[:, 2]), coef_neg)

    l2, l2_blocks = _l2_term(model, batch, lambda_l2)
    return loss + l2, blocks + l2_blocks


@dataclass
class AlignmentAnchors:
    """Fixed target vectors for a subset of entities.

    ``anchor_of`` maps dense entity index -> (d,) float64 anchor.  Every
    row of an anchored entity (both rows for two-row families) is pulled
    toward the same anchor.
    """

    anchor_of: dict[int, np.ndarray]
    strength: float

    def __post_init__(self):
        if self.strength < 0:
            raise ConfigError(f"alignment strength must be >= 0, got {self.strength}")


def alignment_penalty(entities: np.ndarray, model: ScoringModel,
                      anchors: AlignmentAnchors):
    """lambda_a * sum ||row - anchor||^2 over anchored rows among ``entities``.

    Returns (loss, grad blocks); entities without anchors contribute
    nothing.  ``entities`` may contain duplicates; each anchored entity
    is penalized once.
    """
    table = model.table
    lam = anchors.strength
    if lam == 0.0 or not anchors.anchor_of:
        return 0.0, []
    hit = [e for e in np.unique(entities) if int(e) in anchors.anchor_of]
    if not hit:
        return 0.0, []
    rows = []
    targets = []
    for e in hit:
        a = anchors.anchor_of[int(e)]
        for k in range(table.rows_per_entity):
            rows.append(int(e) * table.rows_per_entity + k)
            targets.append(a)
    rows = np.asarray(rows, dtype=np.int64)
    targets = np.asarray(targets, dtype=np.float64)
    diff = table.params[rows] - targets
    loss = lam * float(np.sum(diff * diff))
    return loss, [(rows, 2.0 * lam * diff)]


def accumulate(blocks: GradBlocks, dim: int) -> tuple[np.ndarray, np.ndarray]:
    """Merge gradient blocks into (unique_rows, per-row summed gradients).

    Scatter-add order is fixed by block order, so results are reproducible
    run to run.
    """
    if not blocks:
        return np.empty(0, dtype=np.int64), np.empty((0, dim), dtype=np.float64)
    rows_cat = np.concatenate([rows for rows, _ in blocks])
    grads_cat = np.concatenate([grads for _, grads in blocks])
    uniq, inverse = np.unique(rows_cat, return_inverse=True)
    summed = np.zeros((uniq.shape[0], dim), dtype=np.float64)
    np.add.at(summed, inverse, grads_cat)
    return uniq, summed


def merge_gradients(blocks: GradBlocks, dim: int) -> dict[int, np.ndarray]:
    """Dict view of ``accumulate`` for single-triple inspection and tests."""
    rows, summed = accumulate(blocks, dim)
    return {int(r): summed[i] for i, r in enumerate(rows)}
