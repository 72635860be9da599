"""Filtered, type-restricted ranking evaluation.

Each evaluation triple yields two samples: rank the true head against all
entities of the head type, and the true tail against all entities of the
tail type.  Filtering removes candidates that complete a triple present
in any split, except the query's own answer, which always competes.

Ties resolve pessimistically by default: the true answer ranks below
every candidate with an equal score, so a collapsed model scoring all
candidates identically earns the worst possible rank, never a flattering
one.

Relations that exist only to carry auxiliary signal are excluded: the
code-hierarchy relation, and any relation whose head or tail type is a
pseudo-node type.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, KGEError
from .graph import ATC_HYPERNYM_RELATION, PSEUDO_TYPES, KnowledgeGraph
from .sampling import positives_index
from .scoring import ScoringModel

log = logging.getLogger(__name__)

TIE_MODES = ("pessimistic", "optimistic", "mean")
DEFAULT_HITS_KS = (1, 3, 10)


class FilterIndex:
    """All known completions of (relation, fixed side) queries, all splits."""

    def __init__(self, kg: KnowledgeGraph):
        self._index = positives_index(kg)

    def known_heads(self, r: int, t: int) -> set[int]:
        return self._index.get((int(r), 0, int(t)), set())

    def known_tails(self, r: int, h: int) -> set[int]:
        return self._index.get((int(r), 1, int(h)), set())


def excluded_relations(kg: KnowledgeGraph) -> set[int]:
    """Relation indices that never count toward ranking metrics."""
    out = set()
    for i, rel in enumerate(kg.schema):
        if rel.name == ATC_HYPERNYM_RELATION:
            out.add(i)
        elif rel.head_type in PSEUDO_TYPES or rel.tail_type in PSEUDO_TYPES:
            out.add(i)
    return out


def rank(model: ScoringModel, triple, side: str, kg: KnowledgeGraph,
         filter_index: FilterIndex | None = None, ties: str = "pessimistic",
         filtered: bool = True):
    """Rank of the triple's true entity on one side among typed candidates.

    Integer for pessimistic/optimistic ties, float for mean.  ``filtered``
    requires a prebuilt ``filter_index``.
    """
    if ties not in TIE_MODES:
        raise ConfigError(f"ties must be one of {TIE_MODES}, got {ties!r}")
    h, r, t = (int(x) for x in triple)
    pool = kg.candidate_pool(r, side)
    true_entity = h if side == "head" else t
    pos = int(np.searchsorted(pool, true_entity))
    if pos >= pool.shape[0] or int(pool[pos]) != true_entity:
        raise KGEError(
            "internal error: the query's true entity is missing from its candidate pool"
        )
    scores = model.score_candidates(h, r, t, side, pool)
    s_true = scores[pos]

    rivals = np.ones(pool.shape[0], dtype=bool)
    rivals[pos] = False
    if filtered:
        if filter_index is None:
            raise ConfigError("filtered ranking needs a FilterIndex")
        known = (filter_index.known_heads(r, t) if side == "head"
                 else filter_index.known_tails(r, h))
        known_rivals = known - {true_entity}
        if known_rivals:
            rivals &= ~np.isin(pool, np.fromiter(known_rivals, dtype=np.int64,
                                                 count=len(known_rivals)))

    greater = int(np.count_nonzero(scores[rivals] > s_true))
    tied = int(np.count_nonzero(scores[rivals] == s_true))
    if ties == "pessimistic":
        return 1 + greater + tied
    if ties == "optimistic":
        return 1 + greater
    return 1.0 + greater + 0.5 * tied


@dataclass
class RelationMetrics:
    samples: int
    mrr: float
    hits: dict[int, float]


@dataclass
class EvalReport:
    split: str
    ties: str
    filtered: bool
    ks: tuple[int, ...]
    per_relation: dict[str, RelationMetrics]
    micro: RelationMetrics
    macro_mrr: float
    macro_hits: dict[int, float] = field(default_factory=dict)

    def to_tsv(self) -> str:
        cols = ["relation", "count", "mrr"] + [f"hits{k}" for k in self.ks]
        lines = ["\t".join(cols)]

        def fmt(name, m: RelationMetrics):
            cells = [name, str(m.samples), f"{m.mrr:.6f}"]
            cells += [f"{m.hits[k]:.6f}" for k in self.ks]
            return "\t".join(cells)

        for name in sorted(self.per_relation):
            lines.append(fmt(name, self.per_relation[name]))
        lines.append(fmt("ALL_micro", self.micro))
        macro_cells = ["ALL_macro", str(len(self.per_relation)), f"{self.macro_mrr:.6f}"]
        macro_cells += [f"{self.macro_hits[k]:.6f}" for k in self.ks]
        lines.append("\t".join(macro_cells))
        return "\n".join(lines) + "\n"

    def format_table(self) -> str:
        name_w = max([len("relation"), len("ALL_micro"), len("ALL_macro")]
                     + [len(n) for n in self.per_relation])
        header = (f"{'relation':<{name_w}}  {'samples':>8}  {'mrr':>8}  "
                  + "  ".join(f"{'hits@' + str(k):>8}" for k in self.ks))
        rows = [header, "-" * len(header)]

        def line(name, samples, mrr, hits):
            cells = f"{name:<{name_w}}  {samples:>8}  {mrr:>8.4f}  "
            cells += "  ".join(f"{hits[k]:>8.4f}" for k in self.ks)
            return cells

        for name in sorted(self.per_relation):
            m = self.per_relation[name]
            rows.append(line(name, m.samples, m.mrr, m.hits))
        rows.append("-" * len(header))
        rows.append(line("ALL_micro", self.micro.samples, self.micro.mrr, self.micro.hits))
        rows.append(line("ALL_macro", len(self.per_relation), self.macro_mrr, self.macro_hits))
        return "\n".join(rows) + "\n"


def _metrics(ranks: np.ndarray, ks) -> RelationMetrics:
    inv = 1.0 / ranks
    return RelationMetrics(
        samples=int(ranks.shape[0]),
        mrr=float(np.mean(inv)),
        hits={k: float(np.mean(ranks <= k)) for k in ks},
    )


def evaluate(model: ScoringModel, kg: KnowledgeGraph, split: str = "test",
             ks=DEFAULT_HITS_KS, ties: str = "pessimistic", filtered: bool = True,
             threads: int = 0) -> EvalReport:
    """Rank every triple of a split on both sides and aggregate.

    Micro metrics average over samples, macro over relations.  ``threads``
    is the ranking worker count: 0 picks one per CPU (capped at 8), 1 is
    serial.  Results are identical for any count because each sample's
    rank is independent and aggregation order is fixed by the input order.
    """
    if threads < 0:
        raise ConfigError(f"threads must be >= 0, got {threads}")
    splits = kg.splits()
    if split not in splits:
        raise ConfigError(f"unknown split {split!r}; expected one of {sorted(splits)}")
    triples = splits[split]
    if len(triples) == 0:
        raise ConfigError(f"split {split!r} is empty")
    ks = tuple(sorted(int(k) for k in ks))
    skip = excluded_relations(kg)
    eligible = triples[~np.isin(triples[:, 1], np.fromiter(skip, dtype=np.int64, count=len(skip)))] \
        if skip else triples
    if len(eligible) == 0:
        raise ConfigError(
            f"split {split!r} contains no triples of ranked relations"
        )
    findex = FilterIndex(kg) if filtered else None

    def rank_pair(triple):
        return (
            rank(model, triple, "head", kg, findex, ties, filtered),
            rank(model, triple, "tail", kg, findex, ties, filtered),
        )

    if threads == 0:
        threads = min(8, os.cpu_count() or 1)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            pairs = list(pool.map(rank_pair, eligible, chunksize=64))
    else:
        pairs = [rank_pair(tr) for tr in eligible]

    by_relation: dict[str, list] = {}
    all_ranks: list = []
    for triple, (rh, rt) in zip(eligible, pairs):
        name = kg.schema.relation(int(triple[1])).name
        by_relation.setdefault(name, []).extend((rh, rt))
        all_ranks.extend((rh, rt))

    per_relation = {name: _metrics(np.asarray(r, dtype=np.float64), ks)
                    for name, r in by_relation.items()}
    micro = _metrics(np.asarray(all_ranks, dtype=np.float64), ks)
    macro_mrr = float(np.mean([m.mrr for m in per_relation.values()]))
    macro_hits = {k: float(np.mean([m.hits[k] for m in per_relation.values()])) for k in ks}
    return EvalReport(split=split, ties=ties, filtered=filtered, ks=ks,
                      per_relation=per_relation, micro=micro,
                      macro_mrr=macro_mrr, macro_hits=macro_hits)
