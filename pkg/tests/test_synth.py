import filecmp
from pathlib import Path

import numpy as np
import pytest

from vlr.dataset import load_dataset, save_dataset
from vlr.opseq import parse_question, render_program_string
from vlr.synth import DEFAULT_MIX, GenerationError, SynthSpec, gen_synthetic


def small_spec(**overrides):
    base = dict(seed=7, num_images=6, regions_per_image=5, num_object_classes=20,
                num_questions=60)
    base.update(overrides)
    return SynthSpec(**base)


def test_generation_is_deterministic(tmp_path):
    ds1 = gen_synthetic(small_spec())
    ds2 = gen_synthetic(small_spec())
    a, b = tmp_path / "a", tmp_path / "b"
    save_dataset(ds1, a)
    save_dataset(ds2, b)
    for rel in ("vocabulary.json", "templates.json", "questions.jsonl",
                "grounding.jsonl"):
        assert filecmp.cmp(a / rel, b / rel, shallow=False), rel
    for path in sorted((a / "scene_graphs").glob("*.json")):
        assert filecmp.cmp(path, b / "scene_graphs" / path.name, shallow=False)


def test_all_categories_present():
    ds = gen_synthetic(small_spec())
    categories = {q.category for q in ds.questions}
    assert categories == {"verify", "query", "logical", "choose", "compare"}


def test_round_trip_through_disk(tmp_path):
    ds = gen_synthetic(small_spec(num_questions=30))
    save_dataset(ds, tmp_path / "ds")
    loaded = load_dataset(tmp_path / "ds")
    assert [q.to_dict() for q in loaded.questions] == [q.to_dict() for q in ds.questions]
    assert set(loaded.scene_graphs) == set(ds.scene_graphs)
    assert loaded.grammar is not None
    for image_id, sg in ds.scene_graphs.items():
        other = loaded.scene_graphs[image_id]
        assert np.array_equal(sg.object_matrix, other.object_matrix)
        assert np.array_equal(sg.attribute_tensor, other.attribute_tensor)
        assert np.array_equal(sg.relation_tensor, other.relation_tensor)


def test_question_text_parses_to_gold_program():
    ds = gen_synthetic(small_spec(num_questions=120))
    for q in ds.questions:
        seq = parse_question(q.text, ds.grammar, ds.vocabulary)
        assert seq is not None, q.text
        assert render_program_string(seq) == q.program, q.text


def test_noise_zero_probabilities_are_binary():
    ds = gen_synthetic(small_spec(noise=0.0))
    for sg in ds.scene_graphs.values():
        for tensor in (sg.object_matrix, sg.attribute_tensor, sg.relation_tensor):
            assert set(np.unique(tensor)) <= {0.0, 1.0}


def test_noise_keeps_planted_entries_dominant():
    ds = gen_synthetic(small_spec(noise=0.3))
    for sg in ds.scene_graphs.values():
        for tensor in (sg.object_matrix, sg.relation_tensor):
            values = tensor[tensor > 0]
            planted = values[values >= 0.5]
            leaked = values[values < 0.5]
            assert np.all(planted == 0.7)
            assert leaked.size == 0 or np.max(leaked) <= 0.3


def test_noisy_generation_differs_only_in_tensors():
    clean = gen_synthetic(small_spec(noise=0.0))
    noisy = gen_synthetic(small_spec(noise=0.2))
    assert [q.to_dict() for q in clean.questions] == [q.to_dict() for q in noisy.questions]
    assert any(not np.array_equal(clean.scene_graphs[i].object_matrix,
                                  noisy.scene_graphs[i].object_matrix)
               for i in clean.scene_graphs)


def test_no_answers_have_no_grounding():
    ds = gen_synthetic(small_spec(num_questions=200))
    for q in ds.questions:
        if q.answer == "no":
            assert q.qid not in ds.grounding


def test_split_fractions():
    spec = small_spec(num_questions=50,
                      split_fractions={"train": 0.8, "dev": 0.2})
    ds = gen_synthetic(spec)
    counts = {}
    for q in ds.questions:
        counts[q.split] = counts.get(q.split, 0) + 1
    assert counts == {"train": 40, "dev": 10}


def test_reserved_answer_questions():
    spec = SynthSpec(seed=3, num_images=5, regions_per_image=4,
                     num_object_classes=12, reserved_answer_classes=5,
                     num_questions=10, question_mix={"query_name_reserved": 1})
    ds = gen_synthetic(spec)
    reserved = set(ds.vocabulary.object_classes[-5:])
    for q in ds.questions:
        assert q.answer in reserved
    # reserved names never appear in question text, so templates are clean of them
    for q in ds.questions:
        assert all(name not in q.text for name in reserved)


def test_chain_hops_plants_multi_hop_programs():
    spec = SynthSpec(seed=1, num_images=4, regions_per_image=6,
                     num_object_classes=10, num_questions=8, chain_hops=3,
                     question_mix={"relate_chain": 1})
    ds = gen_synthetic(spec)
    for q in ds.questions:
        assert q.program.count("(relate;") == 3
        assert q.text == ""
        assert q.answer == "yes"


def test_spec_round_trip():
    spec = small_spec(noise=0.1, question_mix={"exist_yes": 1})
    again = SynthSpec.from_dict(spec.to_dict())
    assert again.to_dict() == spec.to_dict()
    with pytest.raises(GenerationError):
        SynthSpec.from_dict({"bogus_field": 1})


@pytest.mark.parametrize("overrides", [
    {"noise": 1.0},
    {"noise": -0.1},
    {"num_questions": 0},
    {"num_object_classes": 4, "regions_per_image": 5},
    {"chain_hops": 5, "regions_per_image": 5},
    {"question_mix": {}},
    {"question_mix": {"nonsense_kind": 1}},
    {"question_mix": {"query_attr": 1}, "attributes_per_category": 1},
    {"question_mix": {"two_filter_exist": 1}, "num_attribute_categories": 1},
    {"question_mix": {"query_name_reserved": 1}, "reserved_answer_classes": 0},
])
def test_invalid_specs_raise(overrides):
    with pytest.raises(GenerationError):
        gen_synthetic(small_spec(**overrides))


def test_unplaceable_questions_raise():
    # one image with two regions and one relation supports only two unique edges
    spec = SynthSpec(seed=0, num_images=1, regions_per_image=2,
                     num_object_classes=4, num_object_categories=1,
                     num_relations=1, num_questions=3,
                     question_mix={"relate_exist_subject": 1})
    with pytest.raises(GenerationError):
        gen_synthetic(spec)


def test_mix_ratios_are_respected():
    spec = small_spec(num_questions=90,
                      question_mix={"exist_yes": 2, "query_attr": 1})
    ds = gen_synthetic(spec)
    counts = {}
    for q in ds.questions:
        counts[q.category] = counts.get(q.category, 0) + 1
    assert counts == {"verify": 60, "query": 30}
    # interleaved schedule: the two kinds alternate at the start
    assert [q.category for q in ds.questions[:2]] == ["verify", "query"]


def test_default_mix_covers_every_kind_category():
    categories = set()
    ds = gen_synthetic(small_spec(num_questions=len(DEFAULT_MIX) * 4))
    for q in ds.questions:
        categories.add(q.category)
    assert len(categories) == 5
