"""The four triple-scoring kernels and their analytic gradients.

Higher scores mean more plausible triples for every family:

* ``transe``    f = -|h + r - t|_2
* ``distmult``  f = sum_i h_i r_i t_i
* ``complex``   f = Real(h^T diag(r) conj(t)) over complex h, r, t
* ``simple``    f = (1/2)(<h_head, r_fwd, t_tail> + <h_tail, r_inv, t_head>)

The complex kernel conjugates the tail, restoring the family's ability to
model asymmetric relations.  Scalar and candidate-batched paths share the
same elementwise expressions and reduce with ``np.sum`` over the last axis,
so both produce bit-identical scores for identical rows.

All computation is float64; the scalar entry points return Python floats.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError
from .table import FAMILY_ROWS, EmbeddingTable

FAMILIES = tuple(FAMILY_ROWS)


def _transe_score(h, r, t):
    delta = h + r - t
    return -np.sqrt(np.sum(delta * delta, axis=-1))


def _distmult_score(h, r, t):
    return np.sum(h * r * t, axis=-1)


def _complex_score(hre, him, rre, rim, tre, tim):
    parts = hre * rre * tre + him * rre * tim + hre * rim * tim - him * rim * tre
    return np.sum(parts, axis=-1)


def _simple_score(hh, ht, rf, ri, th, tt):
    return 0.5 * (np.sum(hh * rf * tt, axis=-1) + np.sum(ht * ri * th, axis=-1))


class ScoringModel:
    """Bind one scoring family to an embedding table."""

    def __init__(self, family: str, table: EmbeddingTable):
        if family not in FAMILY_ROWS:
            raise ConfigError(f"unknown scoring family {family!r}; choose from {sorted(FAMILY_ROWS)}")
        if table.family != family:
            raise ConfigError(f"table was built for family {table.family!r}, not {family!r}")
        self.family = family
        self.table = table

    # -- row gathering ---------------------------------------------------

    def _erow(self, entity, k=0):
        return self.table.params[np.asarray(entity) * self.table.rows_per_entity + k]

    def _rrow(self, relation, k=0):
        base = self.table.n_entities * self.table.rows_per_entity
        return self.table.params[base + np.asarray(relation) * self.table.rows_per_relation + k]

    # -- scoring ----------------------------------------------------------

    def score(self, h: int, r: int, t: int) -> float:
        return float(self.score_batch(np.asarray([h]), np.asarray([r]), np.asarray([t]))[0])

    def score_batch(self, h, r, t) -> np.ndarray:
        """Scores for parallel arrays of head/relation/tail indices."""
        if self.family == "transe":
            return _transe_score(self._erow(h), self._rrow(r), self._erow(t))
        if self.family == "distmult":
            return _distmult_score(self._erow(h), self._rrow(r), self._erow(t))
        if self.family == "complex":
            return _complex_score(
                self._erow(h, 0), self._erow(h, 1),
                self._rrow(r, 0), self._rrow(r, 1),
                self._erow(t, 0), self._erow(t, 1),
            )
        return _simple_score(
            self._erow(h, 0), self._erow(h, 1),
            self._rrow(r, 0), self._rrow(r, 1),
            self._erow(t, 0), self._erow(t, 1),
        )

    def score_candidates(self, h: int, r: int, t: int, side: str, candidates: np.ndarray) -> np.ndarray:
        """Score one triple against every candidate replacement on one side.

        A single pass over the candidate rows: O(len(candidates) * d).
        Produces exactly the values ``score`` would for each substituted
        triple.
        """
        if side == "head":
            return self.score_batch(candidates, np.asarray(r), np.asarray(t))
        if side == "tail":
            return self.score_batch(np.asarray(h), np.asarray(r), candidates)
        raise ConfigError(f"side must be 'head' or 'tail', got {side!r}")

    # -- gradients ---------------------------------------------------------

    def gradient(self, h: int, r: int, t: int) -> dict[int, np.ndarray]:
        """Sparse df/drow for one triple; duplicate-row contributions summed."""
        merged: dict[int, np.ndarray] = {}
        for rows, grads in self.gradient_batch(np.asarray([h]), np.asarray([r]), np.asarray([t])):
            row = int(rows[0])
            if row in merged:
                merged[row] = merged[row] + grads[0]
            else:
                merged[row] = grads[0].copy()
        return merged

    def gradient_batch(self, h, r, t) -> list[tuple[np.ndarray, np.ndarray]]:
        """Per-role gradient blocks for parallel index arrays.

        Returns one (row_indices, df/drow) pair per involved row role:
        three pairs for the single-row families, six for complex/simple.
        The caller scales by dLoss/df and accumulates per row.
        """
        h = np.asarray(h)
        r = np.asarray(r)
        t = np.asarray(t)
        epr, rpr = FAMILY_ROWS[self.family]
        rel_base = self.table.n_entities * epr
        erow = lambda e, k=0: e * epr + k
        rrow = lambda q, k=0: rel_base + q * rpr + k

        if self.family == "transe":
            H, R, T = self._erow(h), self._rrow(r), self._erow(t)
            delta = H + R - T
            norm = np.sqrt(np.sum(delta * delta, axis=-1))
            unit = np.zeros_like(delta)
            np.divide(delta, norm[..., None], out=unit, where=norm[..., None] > 0)
            return [(erow(h), -unit), (rrow(r), -unit), (erow(t), unit)]

        if self.family == "distmult":
            H, R, T = self._erow(h), self._rrow(r), self._erow(t)
            return [(erow(h), R * T), (rrow(r), H * T), (erow(t), H * R)]

        if self.family == "complex":
            hre, him = self._erow(h, 0), self._erow(h, 1)
            rre, rim = self._rrow(r, 0), self._rrow(r, 1)
            tre, tim = self._erow(t, 0), self._erow(t, 1)
            return [
                (erow(h, 0), rre * tre + rim * tim),
                (erow(h, 1), rre * tim - rim * tre),
                (rrow(r, 0), hre * tre + him * tim),
                (rrow(r, 1), hre * tim - him * tre),
                (erow(t, 0), hre * rre - him * rim),
                (erow(t, 1), hre * rim + him * rre),
            ]

        hh, ht = self._erow(h, 0), self._erow(h, 1)
        rf, ri = self._rrow(r, 0), self._rrow(r, 1)
        th, tt = self._erow(t, 0), self._erow(t, 1)
        return [
            (erow(h, 0), 0.5 * rf * tt),
            (erow(h, 1), 0.5 * ri * th),
            (rrow(r, 0), 0.5 * hh * tt),
            (rrow(r, 1), 0.5 * ht * th),
            (erow(t, 0), 0.5 * ht * ri),
            (erow(t, 1), 0.5 * hh * rf),
        ]

    def involved_rows(self, h, r, t) -> np.ndarray:
        """Flat row indices touched by the given triples (with repeats)."""
        return np.concatenate([rows for rows, _ in self.gradient_batch(h, r, t)])
