"""Ranking and metrics: filters, ties, aggregates, oracle equivalence."""

from __future__ import annotations

import numpy as np
import pytest

from hetero_kge.errors import ConfigError, KGEError
from hetero_kge.evaluator import (
    FilterIndex,
    evaluate,
    excluded_relations,
    rank,
)
from hetero_kge.graph import (
    EntityRegistry,
    KnowledgeGraph,
    Relation,
    RelationSchema,
    augment_with_pseudo_nodes,
    derive_atc_hierarchy,
)
from hetero_kge.scoring import ScoringModel
from hetero_kge.table import EmbeddingTable

from kg_fixtures import make_model
from oracles import oracle_rank, oracle_report


def scalar_kg(drug_values, protein_values, train, valid, test):
    """1-d DistMult world: score(h, r, t) = value(h) * value(t).

    Entity values live in the table rows, the single relation row is 1, so
    rank order is fully hand-controlled.
    """
    reg = EntityRegistry()
    for i in range(len(drug_values)):
        reg.add(f"d{i}", "drug")
    for i in range(len(protein_values)):
        reg.add(f"p{i}", "protein")
    schema = RelationSchema([Relation("target", "drug", "protein")])
    as_arr = lambda rows: np.asarray(rows, dtype=np.int64).reshape(-1, 3)
    kg = KnowledgeGraph(reg, schema, as_arr(train), as_arr(valid), as_arr(test))
    values = list(drug_values) + list(protein_values) + [1.0]
    table = EmbeddingTable("distmult", 1, kg.n_entities, 1,
                           params=np.asarray(values)[:, None],
                           accum=np.zeros((len(values), 1)))
    return kg, ScoringModel("distmult", table)


@pytest.fixture()
def spec_rank_world():
    """Both sides of the three test queries rank exactly [1, 2, 4].

    Train positives are placed so the filter removes exactly the rivals
    needed for each target rank; p3..p5 are unfiltered fillers.
    """
    return scalar_kg(
        drug_values=[1.0, 2.0, 3.0, 4.0],
        protein_values=[10.0, 4.5, 1.0, 5.0, 4.0, 3.0],
        train=[(1, 0, 4), (2, 0, 4), (3, 0, 4), (2, 0, 5), (3, 0, 5)],
        valid=[],
        test=[(0, 0, 4), (0, 0, 5), (0, 0, 6)],
    )


# -- rank -------------------------------------------------------------------


def test_rank_one_when_true_entity_scores_highest():
    kg, model = scalar_kg([1.0], [5.0, 2.0, 3.0], [(0, 0, 2)], [], [(0, 0, 1)])
    findex = FilterIndex(kg)
    assert rank(model, (0, 0, 1), "tail", kg, findex) == 1


def test_filtered_rank_one_raw_rank_two():
    # five entities; the one higher-scoring rival is a known train triple
    kg, model = scalar_kg([1.0, 2.0], [1.0, 2.0, 0.5],
                          train=[(0, 0, 3)], valid=[], test=[(0, 0, 2)])
    findex = FilterIndex(kg)
    assert rank(model, (0, 0, 2), "tail", kg, findex, filtered=False) == 2
    assert rank(model, (0, 0, 2), "tail", kg, findex, filtered=True) == 1


def test_type_filter_keeps_other_types_out_of_the_pool():
    # the giant-scoring drug cannot rival a protein-side query
    kg, model = scalar_kg([1.0, 1000.0], [5.0, 2.0],
                          train=[(1, 0, 2)], valid=[], test=[(0, 0, 2)])
    findex = FilterIndex(kg)
    assert rank(model, (0, 0, 2), "head", kg, findex, filtered=False) == 2
    assert rank(model, (0, 0, 2), "tail", kg, findex) == 1


def test_rank_missing_true_entity_is_internal_error(toy_kg):
    model = make_model("distmult", 4, toy_kg.n_entities, toy_kg.n_relations,
                       seed=0)
    findex = FilterIndex(toy_kg)
    with pytest.raises(KGEError, match="internal"):
        rank(model, (5, 0, 1), "head", toy_kg, findex)  # p0 not a drug


def test_rank_tie_modes():
    kg, model = scalar_kg([1.0], [2.0, 2.0, 2.0, 1.0],
                          train=[(0, 0, 4)], valid=[], test=[(0, 0, 1)])
    findex = FilterIndex(kg)
    args = (model, (0, 0, 1), "tail", kg, findex)
    assert rank(*args, ties="pessimistic") == 3  # two tied rivals above
    assert rank(*args, ties="optimistic") == 1
    assert rank(*args, ties="mean") == 2.0


def test_rank_rejects_unknown_tie_mode(spec_rank_world):
    kg, model = spec_rank_world
    with pytest.raises(ConfigError, match="ties"):
        rank(model, (0, 0, 4), "tail", kg, FilterIndex(kg), ties="hopeful")


def test_rank_filtered_needs_index(spec_rank_world):
    kg, model = spec_rank_world
    with pytest.raises(ConfigError, match="FilterIndex"):
        rank(model, (0, 0, 4), "tail", kg, None, filtered=True)


def test_self_entity_never_filtered(spec_rank_world):
    # the query triple is itself a known positive; its own entity must stay
    kg, model = spec_rank_world
    findex = FilterIndex(kg)
    assert rank(model, (0, 0, 4), "tail", kg, findex) >= 1


# -- the [1, 2, 4] worked example ----------------------------------------------


def test_spec_rank_world_produces_1_2_4_per_side(spec_rank_world):
    kg, model = spec_rank_world
    findex = FilterIndex(kg)
    for side in ("head", "tail"):
        ranks = [rank(model, triple, side, kg, findex) for triple in kg.test]
        assert ranks == [1, 2, 4]


def test_mrr_and_hits_arithmetic(spec_rank_world):
    kg, model = spec_rank_world
    report = evaluate(model, kg, split="test", threads=1)
    assert report.micro.samples == 6
    assert report.micro.mrr == pytest.approx((1 + 0.5 + 0.25) / 3, rel=1e-12)
    assert report.micro.mrr == pytest.approx(0.5833, abs=5e-5)
    assert report.micro.hits[1] == pytest.approx(1 / 3)
    assert report.micro.hits[3] == pytest.approx(2 / 3)
    assert report.micro.hits[10] == 1.0
    only = report.per_relation["target"]
    assert only.samples == 6
    assert only.mrr == report.micro.mrr
    assert report.macro_mrr == pytest.approx(report.micro.mrr, rel=1e-12)


def test_macro_is_unweighted_mean_over_relations(synthetic_kg):
    model = make_model("distmult", 8, synthetic_kg.n_entities,
                       synthetic_kg.n_relations, seed=1)
    report = evaluate(model, synthetic_kg, split="test", threads=1)
    counts = [m.samples for m in report.per_relation.values()]
    assert len(set(counts)) > 1  # unequal counts, so macro != micro weighting
    assert report.macro_mrr == pytest.approx(
        np.mean([m.mrr for m in report.per_relation.values()]), rel=1e-12)
    for k in report.ks:
        assert report.macro_hits[k] == pytest.approx(
            np.mean([m.hits[k] for m in report.per_relation.values()]), rel=1e-12)


# -- oracle equivalence ------------------------------------------------------------


@pytest.mark.parametrize("family", ["distmult", "complex"])
def test_report_equals_brute_force_oracle(family, synthetic_kg):
    model = make_model(family, 6, synthetic_kg.n_entities,
                       synthetic_kg.n_relations, seed=2)
    report = evaluate(model, synthetic_kg, split="test", threads=1)
    per_rel, all_ranks, micro_mrr, micro_hits, macro_mrr = oracle_report(
        model, synthetic_kg, "test")

    known = {tuple(int(x) for x in row)
             for row in synthetic_kg.all_triples().tolist()}
    findex = FilterIndex(synthetic_kg)
    for triple in synthetic_kg.test:
        for side in ("head", "tail"):
            assert rank(model, triple, side, synthetic_kg, findex) == \
                oracle_rank(model, synthetic_kg, triple, side, known)

    assert set(report.per_relation) == set(per_rel)
    for name, (ranks, mrr, hits) in per_rel.items():
        assert report.per_relation[name].samples == len(ranks)
        assert report.per_relation[name].mrr == pytest.approx(mrr, rel=1e-12)
        for k in (1, 3, 10):
            assert report.per_relation[name].hits[k] == pytest.approx(
                hits[k], rel=1e-12)
    assert report.micro.mrr == pytest.approx(micro_mrr, rel=1e-12)
    assert report.macro_mrr == pytest.approx(macro_mrr, rel=1e-12)


def test_filtered_rank_never_exceeds_raw(synthetic_kg):
    model = make_model("simple", 5, synthetic_kg.n_entities,
                       synthetic_kg.n_relations, seed=3)
    findex = FilterIndex(synthetic_kg)
    strict = 0
    for triple in synthetic_kg.test:
        for side in ("head", "tail"):
            filt = rank(model, triple, side, synthetic_kg, findex)
            raw = rank(model, triple, side, synthetic_kg, findex,
                       filtered=False)
            assert filt <= raw
            strict += filt < raw
    assert strict > 0


# -- evaluate mechanics ----------------------------------------------------------


def test_evaluation_is_read_only(synthetic_kg):
    model = make_model("distmult", 6, synthetic_kg.n_entities,
                       synthetic_kg.n_relations, seed=4)
    before = model.table.params.tobytes()
    evaluate(model, synthetic_kg, split="test", threads=1)
    assert model.table.params.tobytes() == before


def test_thread_count_does_not_change_the_report(synthetic_kg):
    model = make_model("complex", 5, synthetic_kg.n_entities,
                       synthetic_kg.n_relations, seed=5)
    serial = evaluate(model, synthetic_kg, split="test", threads=1)
    threaded = evaluate(model, synthetic_kg, split="test", threads=4)
    auto = evaluate(model, synthetic_kg, split="test", threads=0)
    for other in (threaded, auto):
        assert other.micro == serial.micro
        assert other.per_relation == serial.per_relation
        assert other.macro_mrr == serial.macro_mrr


def test_evaluate_validates_inputs(synthetic_kg, toy_kg):
    model = make_model("distmult", 4, synthetic_kg.n_entities,
                       synthetic_kg.n_relations, seed=6)
    with pytest.raises(ConfigError, match="threads"):
        evaluate(model, synthetic_kg, split="test", threads=-1)
    with pytest.raises(ConfigError, match="holdout"):
        evaluate(model, synthetic_kg, split="holdout")
    empty = np.empty((0, 3), dtype=np.int64)
    kg = KnowledgeGraph(toy_kg.registry, toy_kg.schema, toy_kg.train, empty,
                        empty)
    toy_model = make_model("distmult", 4, kg.n_entities, kg.n_relations, seed=6)
    with pytest.raises(ConfigError, match="empty"):
        evaluate(toy_model, kg, split="test")


def test_evaluate_can_rank_validation_split(synthetic_kg):
    model = make_model("distmult", 4, synthetic_kg.n_entities,
                       synthetic_kg.n_relations, seed=7)
    report = evaluate(model, synthetic_kg, split="valid", threads=1)
    assert report.split == "valid"
    assert report.micro.samples == 2 * len(synthetic_kg.valid)


# -- relation exclusion -------------------------------------------------------------


def hierarchy_world(toy_kg):
    reg = toy_kg.registry.copy()
    schema = toy_kg.schema.copy()
    for code in ("N02BE01", "A10BA02"):
        reg.add(code, "atc")
    derived = derive_atc_hierarchy(["N02BE01", "A10BA02"], reg, schema)
    train = np.concatenate([toy_kg.train, derived])
    kg = KnowledgeGraph(reg, schema, train, toy_kg.valid, toy_kg.test)
    return augment_with_pseudo_nodes(kg, [("d0", "name", "k0"),
                                          ("p1", "description", "k1")])


def test_excluded_relations_cover_hierarchy_and_augmentation(toy_kg):
    kg = hierarchy_world(toy_kg)
    names = {kg.schema.relation(i).name for i in excluded_relations(kg)}
    assert names == {"ATChypernym", "has-name", "has-description"}


def test_report_never_contains_excluded_relations(toy_kg):
    kg = hierarchy_world(toy_kg)
    model = make_model("distmult", 4, kg.n_entities, kg.n_relations, seed=8)
    report = evaluate(model, kg, split="test", threads=1)
    assert set(report.per_relation) <= {"interact", "target"}


def test_split_of_only_excluded_relations_rejected(toy_kg):
    kg = hierarchy_world(toy_kg)
    hypernym = kg.schema.resolve("ATChypernym")
    only_derived = kg.train[kg.train[:, 1] == hypernym]
    rest = kg.train[~((kg.train[:, None] == only_derived[:1]).all(-1).any(-1))]
    probe = KnowledgeGraph(kg.registry, kg.schema, rest, kg.valid,
                           only_derived[:1])
    model = make_model("distmult", 4, probe.n_entities, probe.n_relations,
                       seed=9)
    with pytest.raises(ConfigError, match="no triples"):
        evaluate(model, probe, split="test")


# -- report formats -------------------------------------------------------------------


def test_tsv_format(spec_rank_world):
    kg, model = spec_rank_world
    tsv = evaluate(model, kg, split="test", threads=1).to_tsv()
    lines = tsv.splitlines()
    assert lines[0] == "relation\tcount\tmrr\thits1\thits3\thits10"
    rows = {line.split("\t")[0]: line.split("\t") for line in lines[1:]}
    assert set(rows) == {"target", "ALL_micro", "ALL_macro"}
    assert rows["target"][1] == "6"
    assert float(rows["target"][2]) == pytest.approx(0.583333, abs=1e-6)
    assert float(rows["ALL_micro"][4]) == pytest.approx(2 / 3, abs=1e-6)
    assert rows["ALL_macro"][1] == "1"


def test_pretty_table_lists_aggregates(spec_rank_world):
    kg, model = spec_rank_world
    text = evaluate(model, kg, split="test", threads=1).format_table()
    assert "target" in text
    assert "ALL_micro" in text and "ALL_macro" in text
    assert "hits@10" in text
