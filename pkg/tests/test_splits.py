import json

import pytest

from vlr.dataset import Dataset, QuestionRecord
from vlr.splits import (VariantMatcher, VariantPair, load_pairs,
                        make_generalization_splits)


def q(qid, text, program, split="train"):
    return QuestionRecord(qid=qid, image_id="img", text=text, answer="yes",
                          category="verify", program=program, split=split)


EXIST = "(select; {}) -> (exist; _)"
QUERY = "(select; {}) -> (query color; _)"


@pytest.fixture
def ds(vocab):
    questions = [
        q("q0", "Is there a cat?", EXIST.format("cat")),
        q("q1", "Is there a dog?", EXIST.format("dog")),
        q("q2", "Do you see any cat in the image?", EXIST.format("cat")),
        q("q3", "Do you see any car in the image?", EXIST.format("car")),
        q("q4", "Do you see any dog in the image?", EXIST.format("dog"), "test"),
        q("q5", "Is there a car?", EXIST.format("car"), "test"),
        q("q6", "What color is the cat?", QUERY.format("cat")),
        q("q7", "What color is the dog?", QUERY.format("dog"), "test"),
    ]
    return Dataset(vocab, {}, questions)


def exist_pair():
    return VariantPair("exist-phrasing",
                       VariantMatcher("starts_with", "is there"),
                       VariantMatcher("starts_with", "do you see"))


def test_matcher_kinds():
    assert VariantMatcher("starts_with", "is there").matches("Is   THERE a cat?")
    assert VariantMatcher("contains", "in the image").matches(
        "do you see any cat in the image?")
    assert VariantMatcher("regex", r"^do you see").matches("Do  You SEE any cat?")
    assert not VariantMatcher("starts_with", "is there").matches("so, is there one?")
    with pytest.raises(ValueError):
        VariantMatcher("glob", "is there*")


def test_pair_serialization(tmp_path):
    pair = exist_pair()
    doc = pair.to_dict()
    assert VariantPair.from_dict(doc) == pair
    path = tmp_path / "pairs.json"
    path.write_text(json.dumps([doc]), encoding="utf-8")
    assert load_pairs(path) == [pair]


def test_split_moves_test_variant_out_of_train(ds):
    # pooled counts: 3 train-variant and 3 test-variant phrasings of the
    # exist template, so it qualifies at min_count=3
    result = make_generalization_splits(ds, [exist_pair()], min_count=3)
    assert result.train_qids == ["q0", "q1", "q6"]
    assert result.test_qids == ["q4"]
    assert result.summary["train_removed"] == 2
    assert result.summary["test_dropped"] == 2
    assert result.summary["train_size"] == 3
    assert result.summary["test_size"] == 1
    assert result.summary["pairs"] == [
        {"name": "exist-phrasing", "qualifying_templates": 1}]


def test_min_count_boundary(ds):
    # counts sit exactly at 3: raising min_count by one disqualifies all
    at = make_generalization_splits(ds, [exist_pair()], min_count=3)
    above = make_generalization_splits(ds, [exist_pair()], min_count=4)
    assert at.summary["pairs"][0]["qualifying_templates"] == 1
    assert above.summary["pairs"][0]["qualifying_templates"] == 0
    assert above.train_qids == ["q0", "q1", "q2", "q3", "q6"]
    assert above.test_qids == []
    assert above.summary["test_dropped"] == 3


def test_one_sided_counts_do_not_qualify(ds):
    pair = VariantPair("query-phrasing",
                       VariantMatcher("starts_with", "what color"),
                       VariantMatcher("starts_with", "which color"))
    result = make_generalization_splits(ds, [pair], min_count=1)
    assert result.summary["pairs"][0]["qualifying_templates"] == 0
    assert result.summary["train_removed"] == 0


def test_questions_without_programs_are_never_held_out(ds):
    ds.questions[2].program = None  # q2 would otherwise be removed
    result = make_generalization_splits(ds, [exist_pair()], min_count=2)
    assert "q2" in result.train_qids


def test_empty_pairs_warns_and_keeps_partitions(ds, caplog):
    with caplog.at_level("WARNING", logger="vlr.splits"):
        result = make_generalization_splits(ds, [], min_count=3)
    assert "no variant pairs" in caplog.text
    assert result.train_qids == ["q0", "q1", "q2", "q3", "q6"]
    assert result.test_qids == ["q4", "q5", "q7"]
    assert result.summary["pairs"] == []


def test_min_count_must_be_positive(ds):
    with pytest.raises(ValueError):
        make_generalization_splits(ds, [exist_pair()], min_count=0)


def test_class_variants_pool_into_one_template(ds, vocab):
    # different object classes share one generalized template, so counts
    # pool across cat/dog/car phrasings rather than fragmenting
    result = make_generalization_splits(ds, [exist_pair()], min_count=3)
    assert result.summary["pairs"][0]["qualifying_templates"] == 1
