"""Estimator protocol front door and vector-file export."""

from __future__ import annotations

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from hetero_kge.errors import ConfigError, ResolutionError
from hetero_kge.estimator import (
    KnowledgeGraphEmbedder,
    entity_matrix,
    export_embeddings,
)
from hetero_kge.evaluator import evaluate
from hetero_kge.table import read_vector_file

from kg_fixtures import make_table


def small_embedder(**overrides) -> KnowledgeGraphEmbedder:
    params = dict(model="distmult", dim=8, epochs=2, batch_size=32,
                  learning_rate=0.1, seed=0, gamma_init=1.0, epsilon_init=0.0)
    params.update(overrides)
    return KnowledgeGraphEmbedder(**params)


# -- estimator protocol -------------------------------------------------------


def test_get_params_round_trips_through_set_params():
    est = small_embedder(lambda_l2=0.25, method="none")
    params = est.get_params()
    assert params["model"] == "distmult"
    assert params["dim"] == 8
    assert params["lambda_l2"] == 0.25
    other = KnowledgeGraphEmbedder().set_params(**params)
    assert other.get_params() == params


def test_clone_copies_parameters_not_state(synthetic_kg):
    est = small_embedder().fit(synthetic_kg)
    fresh = clone(est)
    assert fresh.get_params() == est.get_params()
    assert not hasattr(fresh, "table_")


def test_fit_returns_self_and_sets_state(synthetic_kg):
    est = small_embedder()
    assert est.fit(synthetic_kg) is est
    assert est.kg_ is synthetic_kg
    assert est.table_.family == "distmult"
    assert est.model_.table is est.table_
    assert len(est.loss_log_) > 0


def test_unfitted_access_raises(synthetic_kg):
    est = small_embedder()
    with pytest.raises(NotFittedError):
        est.transform()
    with pytest.raises(NotFittedError):
        est.predict([(0, 0, 1)])
    with pytest.raises(NotFittedError):
        est.evaluate()


def test_fit_rejects_non_graph_input():
    with pytest.raises(ConfigError, match="KnowledgeGraph"):
        small_embedder().fit(np.zeros((4, 3), dtype=np.int64))


def test_fit_is_deterministic(synthetic_kg):
    a = small_embedder().fit(synthetic_kg)
    b = small_embedder().fit(synthetic_kg)
    assert np.array_equal(a.table_.params, b.table_.params)
    assert a.loss_log_ == b.loss_log_


def test_epochs_zero_fits_without_steps(synthetic_kg):
    est = small_embedder(epochs=0).fit(synthetic_kg)
    assert est.loss_log_ == []


# -- transform ----------------------------------------------------------------


def test_transform_returns_all_entities_in_registry_order(synthetic_kg):
    est = small_embedder().fit(synthetic_kg)
    out = est.transform()
    assert out.shape == (synthetic_kg.n_entities, 8)
    assert np.array_equal(out, est.table_.params[:synthetic_kg.n_entities])


def test_transform_resolves_ids(synthetic_kg):
    est = small_embedder().fit(synthetic_kg)
    ids = [synthetic_kg.registry.ids[3], synthetic_kg.registry.ids[0]]
    out = est.transform(ids)
    assert np.array_equal(out[0], est.table_.params[3])
    assert np.array_equal(out[1], est.table_.params[0])
    with pytest.raises(ResolutionError):
        est.transform(["no-such-entity"])


def test_transform_concatenates_two_row_families(synthetic_kg):
    est = small_embedder(model="complex", dim=4).fit(synthetic_kg)
    out = est.transform([synthetic_kg.registry.ids[2]])
    assert out.shape == (1, 8)
    assert np.array_equal(out[0, :4], est.table_.params[4])
    assert np.array_equal(out[0, 4:], est.table_.params[5])


def test_fit_transform_matches_fit_then_transform(synthetic_kg):
    direct = small_embedder().fit_transform(synthetic_kg)
    staged = small_embedder().fit(synthetic_kg).transform()
    assert np.array_equal(direct, staged)


def test_transform_output_is_a_copy(synthetic_kg):
    est = small_embedder().fit(synthetic_kg)
    out = est.transform()
    before = est.table_.params.copy()
    out[:] = 0.0
    assert np.array_equal(est.table_.params, before)


# -- predict --------------------------------------------------------------------


def test_predict_scores_index_triples(synthetic_kg):
    est = small_embedder().fit(synthetic_kg)
    triples = synthetic_kg.train[:5]
    scores = est.predict(triples)
    expected = est.model_.score_batch(triples[:, 0], triples[:, 1],
                                      triples[:, 2])
    assert np.array_equal(scores, expected)


def test_predict_resolves_name_triples(synthetic_kg):
    est = small_embedder().fit(synthetic_kg)
    h, r, t = (int(x) for x in synthetic_kg.train[0])
    named = [(synthetic_kg.registry.ids[h],
              synthetic_kg.schema.relation(r).name,
              synthetic_kg.registry.ids[t])]
    assert est.predict(named)[0] == est.predict([(h, r, t)])[0]


def test_predict_validates_indices(synthetic_kg):
    est = small_embedder().fit(synthetic_kg)
    with pytest.raises(ResolutionError, match="entity index"):
        est.predict([(0, 0, synthetic_kg.n_entities)])
    with pytest.raises(ResolutionError, match="relation index"):
        est.predict([(0, synthetic_kg.n_relations, 1)])
    with pytest.raises(ResolutionError):
        est.predict([("ghost", "interact", "also-ghost")])


def test_predict_empty_input(synthetic_kg):
    est = small_embedder().fit(synthetic_kg)
    out = est.predict(np.empty((0, 3), dtype=np.int64))
    assert out.shape == (0,)


# -- evaluate -------------------------------------------------------------------


def test_evaluate_delegates_to_the_ranking_engine(synthetic_kg):
    est = small_embedder().fit(synthetic_kg)
    report = est.evaluate(split="test", threads=1)
    direct = evaluate(est.model_, synthetic_kg, split="test", threads=1)
    assert report.micro == direct.micro
    assert report.per_relation == direct.per_relation


def test_evaluate_passes_split_through(synthetic_kg):
    est = small_embedder().fit(synthetic_kg)
    assert est.evaluate(split="valid", threads=1).split == "valid"


def test_anchor_pair_feeds_initialization(synthetic_kg):
    ids = [synthetic_kg.registry.ids[0], synthetic_kg.registry.ids[7]]
    vectors = np.full((2, 8), 0.5)
    est = small_embedder(method="init", anchors=(ids, vectors), epochs=0)
    est.fit(synthetic_kg)
    assert np.array_equal(est.table_.params[0], vectors[0])
    assert np.array_equal(est.table_.params[7], vectors[1])


def test_anchor_file_feeds_initialization(synthetic_kg, tmp_path):
    path = tmp_path / "anchors.vec"
    eid = synthetic_kg.registry.ids[4]
    path.write_text(f"1 8\n{eid} " + " ".join(["0.25"] * 8) + "\n")
    est = small_embedder(method="init", anchors=str(path), epochs=0)
    est.fit(synthetic_kg)
    assert np.array_equal(est.table_.params[4], np.full(8, 0.25))


# -- export ---------------------------------------------------------------------


def test_export_writes_every_entity(synthetic_kg, tmp_path):
    est = small_embedder().fit(synthetic_kg)
    path = tmp_path / "entities.vec"
    n = export_embeddings(est.table_, synthetic_kg, path)
    assert n == synthetic_kg.n_entities
    ids, vectors = read_vector_file(path)
    assert ids == list(synthetic_kg.registry.ids)
    assert np.array_equal(vectors, est.transform())


def test_export_respects_id_filter_and_order(synthetic_kg, tmp_path):
    est = small_embedder().fit(synthetic_kg)
    subset = [synthetic_kg.registry.ids[9], synthetic_kg.registry.ids[2]]
    path = tmp_path / "subset.vec"
    assert export_embeddings(est.table_, synthetic_kg, path, subset) == 2
    ids, vectors = read_vector_file(path)
    assert ids == subset
    assert np.array_equal(vectors, est.transform(subset))
    with pytest.raises(ResolutionError):
        export_embeddings(est.table_, synthetic_kg, path, ["ghost"])


def test_export_two_row_layout_is_documented(synthetic_kg, tmp_path):
    est = small_embedder(model="simple", dim=4).fit(synthetic_kg)
    path = tmp_path / "simple.vec"
    export_embeddings(est.table_, synthetic_kg, path)
    text = path.read_text()
    ids, vectors = read_vector_file(path)
    assert vectors.shape == (synthetic_kg.n_entities, 8)
    comment = [l for l in text.splitlines() if l.startswith("#")]
    assert comment and "head" in comment[0] and "tail" in comment[0]


def test_entity_matrix_single_and_double_rows():
    single = make_table("transe", 3, n_entities=4, n_relations=1, seed=0)
    out = entity_matrix(single, [2, 0])
    assert np.array_equal(out, single.params[[2, 0]])
    double = make_table("complex", 3, n_entities=4, n_relations=1, seed=0)
    out = entity_matrix(double, [1])
    assert np.array_equal(out[0], np.concatenate([double.params[2],
                                                  double.params[3]]))
