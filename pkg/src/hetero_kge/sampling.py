"""Type-restricted negative sampling.

Corrupting a triple replaces its head or tail with a different entity of
the same declared type, drawn uniformly from that type's candidate pool.
Uniformity over "pool minus the original" uses a position shift: draw
j in [0, m-2] and bump j past the original's position, so no rejection
loop is needed in the common case.

With ``exclude_known_positives`` enabled, corruptions that form a triple
present in any split are rejected and redrawn; if the pool offers no
admissible replacement at all, sampling fails loudly rather than silently
emitting a false negative.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, SamplingError
from .graph import KnowledgeGraph

SIDES = ("head", "tail", "both-alternating")

# Bounded number of uniform redraws before falling back to enumerating the
# admissible pool exactly.  Only reachable with exclude_known_positives.
_MAX_REDRAWS = 64


@dataclass(frozen=True)
class CorruptionPolicy:
    """How to manufacture negatives for one positive triple."""

    n_negatives: int = 1
    side: str = "both-alternating"
    exclude_known_positives: bool = False

    def __post_init__(self):
        if self.n_negatives < 1:
            raise ConfigError(f"n_negatives must be >= 1, got {self.n_negatives}")
        if self.side not in SIDES:
            raise ConfigError(f"side must be one of {SIDES}, got {self.side!r}")


def positives_index(kg: KnowledgeGraph) -> dict[tuple[int, int, int], set[int]]:
    """Map (relation, side-code, anchor) -> entities completing a known triple.

    Side code 0 queries heads for a fixed tail, 1 queries tails for a fixed
    head.  Covers all three splits; built once per graph and cached on it.
    """
    cached = getattr(kg, "_positives_cache", None)
    if cached is not None:
        return cached
    index: dict[tuple[int, int, int], set[int]] = {}
    for h, r, t in kg.all_triples():
        index.setdefault((int(r), 0, int(t)), set()).add(int(h))
        index.setdefault((int(r), 1, int(h)), set()).add(int(t))
    object.__setattr__(kg, "_positives_cache", index)
    return index


def _draw_replacement(
    pool: np.ndarray,
    original: int,
    rng: np.random.Generator,
    excluded: set[int] | None,
) -> int:
    m = pool.shape[0]
    if m < 2:
        raise SamplingError(
            f"candidate pool of size {m} has no replacement for entity {original}"
        )
    pos = int(np.searchsorted(pool, original))
    has_original = pos < m and int(pool[pos]) == original
    span = m - 1 if has_original else m
    if span < 1:
        raise SamplingError(f"no replacement available for entity {original}")

    for _ in range(_MAX_REDRAWS):
        j = int(rng.integers(span))
        if has_original and j >= pos:
            j += 1
        candidate = int(pool[j])
        if excluded is None or candidate not in excluded:
            return candidate

    # Exhaustive fallback keeps the draw uniform over what actually remains.
    allowed = [int(e) for e in pool if e != original and e not in excluded]
    if not allowed:
        raise SamplingError(
            f"every candidate for entity {original} completes a known positive"
        )
    return allowed[int(rng.integers(len(allowed)))]


def corrupt(
    triple,
    policy: CorruptionPolicy,
    kg: KnowledgeGraph,
    rng: np.random.Generator,
    base_draw: int = 0,
) -> np.ndarray:
    """Produce ``policy.n_negatives`` corrupted copies of one triple.

    ``both-alternating`` corrupts heads on even draw indices and tails
    on odd ones; ``base_draw`` offsets the index so a caller iterating a
    batch alternates globally rather than restarting at every triple.
    Returns an int64 array of shape (n_negatives, 3).
    """
    h, r, t = (int(x) for x in triple)
    known = positives_index(kg) if policy.exclude_known_positives else None
    out = np.empty((policy.n_negatives, 3), dtype=np.int64)
    for j in range(policy.n_negatives):
        if policy.side == "both-alternating":
            side = "head" if (base_draw + j) % 2 == 0 else "tail"
        else:
            side = policy.side
        pool = kg.candidate_pool(r, side)
        if side == "head":
            excluded = known.get((r, 0, t), set()) if known is not None else None
            new_h = _draw_replacement(pool, h, rng, excluded)
            out[j] = (new_h, r, t)
        else:
            excluded = known.get((r, 1, h), set()) if known is not None else None
            new_t = _draw_replacement(pool, t, rng, excluded)
            out[j] = (h, r, new_t)
    return out


def corrupt_batch(
    positives: np.ndarray,
    policy: CorruptionPolicy,
    kg: KnowledgeGraph,
    rng: np.random.Generator,
) -> np.ndarray:
    """Corrupt every triple of a batch with one shared generator.

    Triple i consumes draw indices [i*n, (i+1)*n), so alternation in
    ``both-alternating`` mode is even across the whole batch.
    Returns shape (len(positives) * n_negatives, 3).
    """
    n = policy.n_negatives
    out = np.empty((positives.shape[0] * n, 3), dtype=np.int64)
    for i, triple in enumerate(positives):
        out[i * n:(i + 1) * n] = corrupt(triple, policy, kg, rng, base_draw=i * n)
    return out
