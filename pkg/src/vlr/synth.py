"""Synthetic oracle datasets with planted, provable answers.

The generator builds small worlds (regions with unique object classes, one
true attribute per category, planted relation edges), then derives question
text, gold program, gold answer, and grounding boxes from the same planted
facts.  Answers are computed constructively from the world, never by
running the decoder, so generated corpora act as an independent oracle for
the whole pipeline.

The noise model leaks probability mass from each true entry to a few
distractors.  Because every planted factor keeps probability 1 - noise
while any competing factor gets at most `noise` of mass, the planted
witness chain stays the arg-max path whenever noise < 0.5; at noise 0 all
probabilities are exactly 0 or 1.

Questions whose gold answer is "no" have no witness chain, so their
grounding annotation is left empty; the evaluation averages skip empty
categories.
"""

from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass, field

import numpy as np

from .dataset import Dataset, QuestionRecord
from .grounding import GroundingAnnotation
from .opseq import TemplateGrammar
from .sgraph import SceneGraph, Vocabulary

logger = logging.getLogger(__name__)


class GenerationError(ValueError):
    """Raised when a spec cannot be satisfied (e.g. chains longer than images)."""


# Name pools; generated vocabularies fall back to numbered names beyond them.
_OBJECT_WORDS = [
    "cat", "dog", "car", "chair", "table", "bird", "horse", "apple", "banana",
    "bottle", "cup", "book", "phone", "tree", "house", "boat", "plane", "train",
    "shirt", "hat", "shoe", "ball", "clock", "lamp", "fence", "flower", "fish",
    "cow", "sheep", "bear", "plate", "fork", "spoon", "knife", "bag", "box",
    "door", "window", "bench", "sign",
]
_OBJECT_CATEGORY_WORDS = ["animal", "vehicle", "furniture", "food",
                          "clothing", "container", "plant", "device"]
_ATTR_CATEGORY_WORDS = ["color", "size", "material", "shape", "pattern", "state"]
_ATTR_WORDS = {
    "color": ["red", "blue", "green", "white", "black", "yellow", "brown", "gray"],
    "size": ["small", "large", "tiny", "huge", "narrow", "wide", "tall", "short"],
    "material": ["wooden", "metal", "plastic", "glass", "cloth", "stone", "paper", "leather"],
    "shape": ["round", "square", "oval", "flat", "curved", "pointy", "thin", "thick"],
    "pattern": ["striped", "dotted", "plain", "checkered", "floral", "spotted", "woven", "printed"],
    "state": ["open", "closed", "full", "empty", "clean", "dirty", "dry", "wet"],
}
_RELATION_WORDS = ["near", "holding", "above", "below", "beside",
                   "behind", "carrying", "touching"]

DEFAULT_MIX = {
    "exist_yes": 2,
    "exist_no": 2,
    "relate_exist_subject": 1,
    "relate_exist_object": 1,
    "relate_exist_no": 1,
    "verify_attr_yes": 1,
    "verify_attr_no": 1,
    "two_filter_exist": 1,
    "query_name": 2,
    "query_name_restricted": 1,
    "query_attr": 2,
    "logical_and": 1,
    "logical_or": 1,
    "choose_attr": 1,
    "compare_same": 1,
    "compare_different": 1,
}

_KIND_CATEGORY = {
    "exist_yes": "verify", "exist_no": "verify",
    "relate_exist_subject": "verify", "relate_exist_object": "verify",
    "relate_exist_no": "verify",
    "verify_attr_yes": "verify", "verify_attr_no": "verify",
    "two_filter_exist": "verify", "relate_chain": "verify",
    "query_name": "query", "query_name_restricted": "query",
    "query_attr": "query", "query_name_reserved": "query",
    "logical_and": "logical", "logical_or": "logical",
    "choose_attr": "choose",
    "compare_same": "compare", "compare_different": "compare",
}


@dataclass
class SynthSpec:
    """Generator configuration; serializable for the synth CLI mode."""

    seed: int = 0
    num_images: int = 10
    regions_per_image: int = 6
    num_object_classes: int = 24
    num_object_categories: int = 4
    num_attribute_categories: int = 2
    attributes_per_category: int = 4
    num_relations: int = 3
    num_questions: int = 100
    noise: float = 0.0
    question_mix: dict = field(default_factory=lambda: dict(DEFAULT_MIX))
    split_fractions: dict = field(default_factory=lambda: {"train": 1.0})
    reserved_answer_classes: int = 0
    chain_hops: int = 1

    def validate(self):
        if not 0.0 <= self.noise < 1.0:
            raise GenerationError("noise must lie in [0, 1)")
        if self.regions_per_image < 1 or self.num_images < 1 or self.num_questions < 1:
            raise GenerationError("images, regions, and questions must be positive")
        usable_classes = self.num_object_classes - self.reserved_answer_classes
        reserved_regions = 1 if self.reserved_answer_classes else 0
        if usable_classes < self.regions_per_image - reserved_regions + 1:
            raise GenerationError("need more object classes than regions per image")
        if self.chain_hops >= self.regions_per_image:
            raise GenerationError("relation chains cannot exceed the region count")
        if not self.question_mix:
            raise GenerationError("question mix is empty")
        unknown = sorted(set(self.question_mix) - set(_KIND_CATEGORY))
        if unknown:
            raise GenerationError(f"unknown question kinds {unknown}")
        attr_kinds = {"verify_attr_yes", "verify_attr_no", "two_filter_exist",
                      "query_attr", "choose_attr", "compare_same", "compare_different"}
        if attr_kinds & set(self.question_mix) and self.attributes_per_category < 2:
            raise GenerationError("attribute questions need at least 2 attributes per category")
        if "two_filter_exist" in self.question_mix and self.num_attribute_categories < 2:
            raise GenerationError("two-filter questions need two attribute categories")
        if "query_name_reserved" in self.question_mix \
                and self.reserved_answer_classes < self.num_images:
            raise GenerationError("reserved-answer questions need one reserved class per image")

    def to_dict(self):
        return {
            "seed": self.seed,
            "num_images": self.num_images,
            "regions_per_image": self.regions_per_image,
            "num_object_classes": self.num_object_classes,
            "num_object_categories": self.num_object_categories,
            "num_attribute_categories": self.num_attribute_categories,
            "attributes_per_category": self.attributes_per_category,
            "num_relations": self.num_relations,
            "num_questions": self.num_questions,
            "noise": self.noise,
            "question_mix": dict(self.question_mix),
            "split_fractions": dict(self.split_fractions),
            "reserved_answer_classes": self.reserved_answer_classes,
            "chain_hops": self.chain_hops,
        }

    @classmethod
    def from_dict(cls, doc):
        spec = cls()
        for key, value in doc.items():
            if not hasattr(spec, key):
                raise GenerationError(f"unknown spec field {key!r}")
            setattr(spec, key, value)
        return spec


# -- vocabulary ---------------------------------------------------------------

def _names(pool, count, stem):
    names = list(pool[:count])
    names += [f"{stem}{i}" for i in range(len(names), count)]
    return names[:count]


def _build_vocabulary(spec):
    object_classes = _names(_OBJECT_WORDS, spec.num_object_classes, "object")
    categories = _names(_OBJECT_CATEGORY_WORDS, spec.num_object_categories, "group")
    members = {cat: [] for cat in categories}
    for i, cls in enumerate(object_classes):
        members[categories[i % len(categories)]].append(cls)
    attr_categories = []
    for name in _names(_ATTR_CATEGORY_WORDS, spec.num_attribute_categories, "aspect"):
        pool = _ATTR_WORDS.get(name, [])
        attr_categories.append((name, _names(pool, spec.attributes_per_category,
                                             f"{name}_")))
    relations = _names(_RELATION_WORDS, spec.num_relations, "relation")
    taken = set(object_classes)
    aliases = {}
    for cls in object_classes:
        plural = cls + "s"
        if plural not in taken:
            aliases[plural] = cls
    return Vocabulary(object_classes, attr_categories, relations, members, aliases)


# -- world --------------------------------------------------------------------

class _World:
    """Planted facts for one image; scene-graph tensors come later."""

    def __init__(self, image_id, region_classes, region_attrs, num_regions,
                 reserved_region=None):
        self.image_id = image_id
        self.region_classes = region_classes      # region -> class name
        self.region_attrs = region_attrs          # region -> {category: attr}
        self.num_regions = num_regions
        self.reserved_region = reserved_region
        self.edges = {}                           # (s, t) -> set of relations
        self.out_used = set()                     # (s, relation)
        self.in_used = set()                      # (t, relation)

    def class_region(self, cls):
        return self.region_classes.index(cls)

    def pickable_regions(self):
        return [r for r in range(self.num_regions) if r != self.reserved_region]

    def plant_edge(self, s, t, relation):
        self.edges.setdefault((s, t), set()).add(relation)
        self.out_used.add((s, relation))
        self.in_used.add((t, relation))

    def absent_classes(self, all_classes, reserved):
        present = set(self.region_classes)
        return [c for c in all_classes if c not in present and c not in reserved]

    def absent_attribute(self, vocabulary, category):
        members = vocabulary.attribute_members(category)
        used = {attrs[category] for attrs in self.region_attrs if category in attrs}
        for attr in reversed(members):
            if attr not in used:
                return attr
        return None


def _grid_boxes(n):
    cols = max(1, math.ceil(math.sqrt(n)))
    boxes = np.zeros((n, 4))
    for i in range(n):
        r, c = divmod(i, cols)
        boxes[i] = [c * 40.0 + 2.0, r * 40.0 + 2.0, c * 40.0 + 38.0, r * 40.0 + 38.0]
    return boxes


def _build_worlds(spec, vocabulary, rng):
    reserved = vocabulary.object_classes[len(vocabulary.object_classes)
                                         - spec.reserved_answer_classes:] \
        if spec.reserved_answer_classes else []
    usable = [c for c in vocabulary.object_classes if c not in reserved]
    worlds = []
    for i in range(spec.num_images):
        n = spec.regions_per_image
        reserved_region = None
        count = n
        if reserved:
            reserved_region = n - 1
            count = n - 1
        picks = rng.choice(len(usable), size=count, replace=False)
        region_classes = [usable[int(p)] for p in picks]
        if reserved:
            region_classes.append(reserved[i % len(reserved)])
        region_attrs = []
        for _ in range(n):
            attrs = {}
            for cat, members in vocabulary.attribute_categories:
                # the last member stays image-absent so "no" questions exist
                usable_attrs = members[:-1] if len(members) > 1 else members
                attrs[cat] = usable_attrs[int(rng.integers(len(usable_attrs)))]
            region_attrs.append(attrs)
        worlds.append(_World(f"img{i:04d}", region_classes, region_attrs, n,
                             reserved_region))
    return worlds, reserved


def _world_to_scene_graph(world, vocabulary, spec, noise_rng):
    """Materialize tensors; the noise stream is only consumed when noise > 0."""
    n = world.num_regions
    noise = spec.noise
    objects = np.zeros((n, len(vocabulary.object_classes)))
    attributes = np.zeros((n, len(vocabulary.attribute_categories),
                           vocabulary.max_category_size))
    relations = np.zeros((n, n, len(vocabulary.relation_classes)))

    def leak(row, true_idx, size):
        if noise <= 0.0 or size < 2:
            return
        d = min(3, size - 1)
        others = [j for j in range(size) if j != true_idx]
        picks = noise_rng.choice(len(others), size=d, replace=False)
        for p in picks:
            row[others[int(p)]] = noise / d

    for r in range(n):
        cls_idx = vocabulary.object_index[world.region_classes[r]]
        objects[r, cls_idx] = 1.0 - noise
        leak(objects[r], cls_idx, len(vocabulary.object_classes))
        for cat_idx, (cat, members) in enumerate(vocabulary.attribute_categories):
            j = vocabulary.attribute_index[cat_idx][world.region_attrs[r][cat]]
            attributes[r, cat_idx, j] = 1.0 - noise
            leak(attributes[r, cat_idx, :len(members)], j, len(members))

    planted = {(s, t, rel) for (s, t), rels in world.edges.items() for rel in rels}
    for s, t, rel in sorted(planted, key=lambda e: (e[0], e[1], e[2])):
        k = vocabulary.relation_index[rel]
        relations[s, t, k] = 1.0 - noise
        if noise > 0.0 and n > 1:
            for _ in range(2):
                s2 = int(noise_rng.integers(n))
                t2 = int(noise_rng.integers(n))
                if s2 != t2 and (s2, t2, rel) not in planted:
                    relations[s2, t2, k] = noise / 2
    sg = SceneGraph(world.image_id, _grid_boxes(n), objects, attributes,
                    relations, vocabulary)
    sg.validate()
    return sg


# -- question templates -------------------------------------------------------

def _grammar_entries(spec, vocabulary, kinds):
    entries = []

    def add(pattern, opseq):
        entries.append({"pattern": pattern, "opseq": opseq})

    if {"exist_yes", "exist_no"} & kinds:
        add("is there a(n) {OBJ}?", "(select; {OBJ}) -> (exist; _)")
        add("do you see any {OBJ} in the image?", "(select; {OBJ}) -> (exist; _)")
    if {"relate_exist_subject", "relate_exist_no", "relate_chain"} & kinds:
        add("is the {OBJ} {REL} a(n) {OBJ2}?",
            "(select; {OBJ}) -> (relate; {OBJ2},{REL},s) -> (exist; _)")
    if "relate_exist_object" in kinds:
        add("is there a(n) {OBJ} {REL} the {OBJ2}?",
            "(select; {OBJ2}) -> (relate; {OBJ},{REL},o) -> (exist; _)")
    if {"verify_attr_yes", "verify_attr_no"} & kinds:
        add("is the {OBJ} {ATTR}?", "(select; {OBJ}) -> (verify; {ATTR})")
    if "two_filter_exist" in kinds:
        add("is there a(n) {OBJ} that is {ATTR} and {ATTR2}?",
            "(select; {OBJ}) -> (filter; {ATTR}) -> (filter; {ATTR2}) -> (exist; _)")
    if {"query_name", "query_name_reserved"} & kinds:
        add("what is the {OBJ} {REL}?",
            "(select; {OBJ}) -> (relate; _,{REL},s) -> (query; name)")
    if "query_name_restricted" in kinds:
        for group in sorted(vocabulary.object_category_members):
            add(f"which {group} is the {{OBJ}} {{REL}}?",
                f"(select; {{OBJ}}) -> (relate; {group},{{REL}},s) -> (query; name)")
    if "query_attr" in kinds:
        for cat, _ in vocabulary.attribute_categories:
            add(f"what {cat} is the {{OBJ}}?", f"(select; {{OBJ}}) -> (query {cat}; _)")
    if "logical_and" in kinds:
        add("is there a(n) {OBJ} and a(n) {OBJ2}?",
            "(select; {OBJ}) -> (exist; _) -> (select; {OBJ2}) -> (exist; _) -> (and)")
    if "logical_or" in kinds:
        add("is there a(n) {OBJ} or a(n) {OBJ2}?",
            "(select; {OBJ}) -> (exist; _) -> (select; {OBJ2}) -> (exist; _) -> (or)")
    if "choose_attr" in kinds:
        for cat, _ in vocabulary.attribute_categories:
            add(f"what {cat} is the {{OBJ}}, {{OPT1}} or {{OPT2}}?",
                f"(select; {{OBJ}}) -> (choose {cat}; {{OPT1}},{{OPT2}})")
    if "compare_same" in kinds:
        for cat, _ in vocabulary.attribute_categories:
            add(f"are the {{OBJ}} and the {{OBJ2}} the same {cat}?",
                f"(select; {{OBJ}}) -> (select; {{OBJ2}}) -> (compare {cat}; same)")
    if "compare_different" in kinds:
        for cat, _ in vocabulary.attribute_categories:
            add(f"do the {{OBJ}} and the {{OBJ2}} differ in {cat}?",
                f"(select; {{OBJ}}) -> (select; {{OBJ2}}) -> (compare {cat}; different)")
    return entries


_AN_RE = re.compile(r"\ba\(n\) ([a-z])")


def _realize(pattern, slots):
    text = pattern
    for slot, surface in slots.items():
        text = text.replace("{" + slot + "}", surface)
    text = _AN_RE.sub(lambda m: ("an " if m.group(1) in "aeiou" else "a ") + m.group(1),
                      text)
    return text[0].upper() + text[1:] if text else text


def _program(*tuples):
    return " -> ".join(tuples)


# -- per-kind builders ---------------------------------------------------------

class _Builder:
    """Shared state while emitting one dataset's questions."""

    def __init__(self, spec, vocabulary, worlds, reserved, rng):
        self.spec = spec
        self.vocab = vocabulary
        self.worlds = worlds
        self.reserved = reserved
        self.rng = rng
        self.plural_toggle = 0

    def pick_region(self, world):
        regions = world.pickable_regions()
        return regions[int(self.rng.integers(len(regions)))]

    def pick_two_regions(self, world):
        regions = world.pickable_regions()
        if len(regions) < 2:
            return None
        picks = self.rng.choice(len(regions), size=2, replace=False)
        return regions[int(picks[0])], regions[int(picks[1])]

    def fresh_out_edge(self, world, target_region=None):
        """A (source, relation, target) with unique outgoing and incoming use."""
        candidates = []
        for s in world.pickable_regions():
            for rel in self.vocab.relation_classes:
                if (s, rel) in world.out_used:
                    continue
                targets = [target_region] if target_region is not None else \
                    [t for t in range(world.num_regions)
                     if t != world.reserved_region]
                for t in targets:
                    if t != s and (t, rel) not in world.in_used:
                        candidates.append((s, rel, t))
        if not candidates:
            return None
        return candidates[int(self.rng.integers(len(candidates)))]

    def attr_category(self):
        cats = self.vocab.attribute_categories
        return cats[int(self.rng.integers(len(cats)))][0]

    def surface(self, cls, plural=False):
        if plural and (cls + "s") in self.vocab.name_aliases:
            return cls + "s"
        return cls

    def boxes(self, world, regions):
        grid = _grid_boxes(world.num_regions)
        return [[float(v) for v in grid[r]] for r in regions]


def _make_question(builder, kind, world):
    """Returns (text, program, answer, annotation) or None if unplaceable."""
    vocab = builder.vocab
    rng = builder.rng

    if kind in ("exist_yes", "exist_no"):
        if kind == "exist_yes":
            region = builder.pick_region(world)
            cls, answer = world.region_classes[region], "yes"
            chain = [region]
        else:
            pool = world.absent_classes(vocab.object_classes, builder.reserved)
            if not pool:
                return None
            cls, answer = pool[int(rng.integers(len(pool)))], "no"
            chain = []
        builder.plural_toggle ^= 1
        if builder.plural_toggle:
            text = _realize("do you see any {OBJ} in the image?",
                            {"OBJ": builder.surface(cls, plural=True)})
        else:
            text = _realize("is there a(n) {OBJ}?", {"OBJ": cls})
        program = _program(f"(select; {cls})", "(exist; _)")
        ann = GroundingAnnotation(builder.boxes(world, chain),
                                  builder.boxes(world, chain),
                                  builder.boxes(world, chain)) if chain else None
        return text, program, answer, ann

    if kind == "relate_exist_subject":
        edge = builder.fresh_out_edge(world)
        if edge is None:
            return None
        s, rel, t = edge
        world.plant_edge(s, t, rel)
        a_cls, b_cls = world.region_classes[s], world.region_classes[t]
        text = _realize("is the {OBJ} {REL} a(n) {OBJ2}?",
                        {"OBJ": a_cls, "REL": rel, "OBJ2": b_cls})
        program = _program(f"(select; {a_cls})", f"(relate; {b_cls},{rel},s)",
                           "(exist; _)")
        ann = GroundingAnnotation(builder.boxes(world, [s, t]),
                                  builder.boxes(world, [t]),
                                  builder.boxes(world, [s, t]))
        return text, program, "yes", ann

    if kind == "relate_exist_object":
        edge = builder.fresh_out_edge(world)
        if edge is None:
            return None
        s, rel, t = edge
        world.plant_edge(s, t, rel)
        subj_cls, obj_cls = world.region_classes[s], world.region_classes[t]
        text = _realize("is there a(n) {OBJ} {REL} the {OBJ2}?",
                        {"OBJ": subj_cls, "REL": rel, "OBJ2": obj_cls})
        program = _program(f"(select; {obj_cls})", f"(relate; {subj_cls},{rel},o)",
                           "(exist; _)")
        ann = GroundingAnnotation(builder.boxes(world, [t, s]),
                                  builder.boxes(world, [s]),
                                  builder.boxes(world, [t, s]))
        return text, program, "yes", ann

    if kind == "relate_exist_no":
        pool = world.absent_classes(vocab.object_classes, builder.reserved)
        if not pool:
            return None
        region = builder.pick_region(world)
        anchor = world.region_classes[region]
        absent = pool[int(rng.integers(len(pool)))]
        rel = vocab.relation_classes[int(rng.integers(len(vocab.relation_classes)))]
        text = _realize("is the {OBJ} {REL} a(n) {OBJ2}?",
                        {"OBJ": anchor, "REL": rel, "OBJ2": absent})
        program = _program(f"(select; {anchor})", f"(relate; {absent},{rel},s)",
                           "(exist; _)")
        return text, program, "no", None

    if kind in ("verify_attr_yes", "verify_attr_no"):
        region = builder.pick_region(world)
        cls = world.region_classes[region]
        category = builder.attr_category()
        if kind == "verify_attr_yes":
            attr, answer = world.region_attrs[region][category], "yes"
            ann = GroundingAnnotation(builder.boxes(world, [region]),
                                      builder.boxes(world, [region]),
                                      builder.boxes(world, [region]))
        else:
            attr = world.absent_attribute(vocab, category)
            if attr is None:
                return None
            answer, ann = "no", None
        text = _realize("is the {OBJ} {ATTR}?", {"OBJ": cls, "ATTR": attr})
        program = _program(f"(select; {cls})", f"(verify; {attr})")
        return text, program, answer, ann

    if kind == "two_filter_exist":
        region = builder.pick_region(world)
        cls = world.region_classes[region]
        cats = vocab.attribute_categories
        c1, c2 = cats[0][0], cats[1][0]
        a1, a2 = world.region_attrs[region][c1], world.region_attrs[region][c2]
        text = _realize("is there a(n) {OBJ} that is {ATTR} and {ATTR2}?",
                        {"OBJ": cls, "ATTR": a1, "ATTR2": a2})
        program = _program(f"(select; {cls})", f"(filter; {a1})", f"(filter; {a2})",
                           "(exist; _)")
        ann = GroundingAnnotation(builder.boxes(world, [region]),
                                  builder.boxes(world, [region]),
                                  builder.boxes(world, [region]))
        return text, program, "yes", ann

    if kind in ("query_name", "query_name_restricted", "query_name_reserved"):
        target_region = world.reserved_region if kind == "query_name_reserved" else None
        edge = builder.fresh_out_edge(world, target_region=target_region)
        if edge is None:
            return None
        s, rel, t = edge
        world.plant_edge(s, t, rel)
        anchor, answer = world.region_classes[s], world.region_classes[t]
        ann = GroundingAnnotation(builder.boxes(world, [s, t]),
                                  builder.boxes(world, [t]),
                                  builder.boxes(world, [s, t]))
        if kind == "query_name_restricted":
            group = next(g for g, members in vocab.object_category_members.items()
                         if answer in members)
            text = _realize(f"which {group} is the {{OBJ}} {{REL}}?",
                            {"OBJ": anchor, "REL": rel})
            program = _program(f"(select; {anchor})", f"(relate; {group},{rel},s)",
                               "(query; name)")
        else:
            text = _realize("what is the {OBJ} {REL}?", {"OBJ": anchor, "REL": rel})
            program = _program(f"(select; {anchor})", f"(relate; _,{rel},s)",
                               "(query; name)")
        return text, program, answer, ann

    if kind == "query_attr":
        region = builder.pick_region(world)
        cls = world.region_classes[region]
        category = builder.attr_category()
        answer = world.region_attrs[region][category]
        text = _realize(f"what {category} is the {{OBJ}}?", {"OBJ": cls})
        program = _program(f"(select; {cls})", f"(query {category}; _)")
        ann = GroundingAnnotation(builder.boxes(world, [region]),
                                  builder.boxes(world, [region]),
                                  builder.boxes(world, [region]))
        return text, program, answer, ann

    if kind in ("logical_and", "logical_or"):
        op = "and" if kind == "logical_and" else "or"
        variant = int(rng.integers(3))  # 0: both present, 1: one absent, 2: both absent
        pair = builder.pick_two_regions(world)
        pool = world.absent_classes(vocab.object_classes, builder.reserved)
        if pair is None or len(pool) < 2:
            return None
        r1, r2 = pair
        present1, present2 = variant == 0, variant == 0
        if variant == 1:
            present2 = False
            present1 = True
        cls1 = world.region_classes[r1] if present1 else pool[0]
        cls2 = world.region_classes[r2] if present2 else pool[1]
        if variant == 2:
            present1 = present2 = False
            cls1, cls2 = pool[0], pool[1]
        truth = (present1 and present2) if op == "and" else (present1 or present2)
        text = _realize(f"is there a(n) {{OBJ}} {op} a(n) {{OBJ2}}?",
                        {"OBJ": cls1, "OBJ2": cls2})
        program = _program(f"(select; {cls1})", "(exist; _)",
                           f"(select; {cls2})", "(exist; _)", f"({op})")
        ann = None
        if present1 and present2:
            ann = GroundingAnnotation(builder.boxes(world, [r1, r2]),
                                      builder.boxes(world, [r1, r2]),
                                      builder.boxes(world, [r1, r2]))
        return text, program, "yes" if truth else "no", ann

    if kind == "choose_attr":
        region = builder.pick_region(world)
        cls = world.region_classes[region]
        category = builder.attr_category()
        members = vocab.attribute_members(category)
        true_attr = world.region_attrs[region][category]
        others = [m for m in members if m != true_attr]
        distractor = others[int(rng.integers(len(others)))]
        flip = bool(rng.integers(2))
        opt1, opt2 = (distractor, true_attr) if flip else (true_attr, distractor)
        text = _realize(f"what {category} is the {{OBJ}}, {{OPT1}} or {{OPT2}}?",
                        {"OBJ": cls, "OPT1": opt1, "OPT2": opt2})
        program = _program(f"(select; {cls})", f"(choose {category}; {opt1},{opt2})")
        ann = GroundingAnnotation(builder.boxes(world, [region]),
                                  builder.boxes(world, [region]),
                                  builder.boxes(world, [region]))
        return text, program, true_attr, ann

    if kind in ("compare_same", "compare_different"):
        mode = "same" if kind == "compare_same" else "different"
        category = builder.attr_category()
        regions = world.pickable_regions()
        want_equal = mode == "same"
        chosen = None
        offset = int(rng.integers(len(regions)))
        for i in range(len(regions)):
            for j in range(i + 1, len(regions)):
                r1 = regions[(i + offset) % len(regions)]
                r2 = regions[(j + offset) % len(regions)]
                if r1 == r2:
                    continue
                equal = world.region_attrs[r1][category] == world.region_attrs[r2][category]
                if equal == want_equal:
                    chosen = (r1, r2)
                    break
            if chosen:
                break
        if chosen is None:  # fall back to any pair; the gold answer stays honest
            pair = builder.pick_two_regions(world)
            if pair is None:
                return None
            chosen = pair
        r1, r2 = chosen
        equal = world.region_attrs[r1][category] == world.region_attrs[r2][category]
        truth = equal if mode == "same" else not equal
        cls1, cls2 = world.region_classes[r1], world.region_classes[r2]
        if mode == "same":
            text = _realize(f"are the {{OBJ}} and the {{OBJ2}} the same {category}?",
                            {"OBJ": cls1, "OBJ2": cls2})
        else:
            text = _realize(f"do the {{OBJ}} and the {{OBJ2}} differ in {category}?",
                            {"OBJ": cls1, "OBJ2": cls2})
        program = _program(f"(select; {cls1})", f"(select; {cls2})",
                           f"(compare {category}; {mode})")
        ann = GroundingAnnotation(builder.boxes(world, [r1, r2]),
                                  builder.boxes(world, [r1, r2]),
                                  builder.boxes(world, [r1, r2]))
        return text, program, "yes" if truth else "no", ann

    if kind == "relate_chain":
        hops = builder.spec.chain_hops
        regions = world.pickable_regions()
        if hops + 1 > len(regions):
            return None
        picks = rng.choice(len(regions), size=hops + 1, replace=False)
        chain = [regions[int(p)] for p in picks]
        rels = [vocab.relation_classes[int(rng.integers(len(vocab.relation_classes)))]
                for _ in range(hops)]
        for (s, t), rel in zip(zip(chain, chain[1:]), rels):
            world.plant_edge(s, t, rel)
        tuples = [f"(select; {world.region_classes[chain[0]]})"]
        for (s, t), rel in zip(zip(chain, chain[1:]), rels):
            tuples.append(f"(relate; {world.region_classes[t]},{rel},s)")
        tuples.append("(exist; _)")
        if hops == 1:
            text = _realize("is the {OBJ} {REL} a(n) {OBJ2}?",
                            {"OBJ": world.region_classes[chain[0]],
                             "REL": rels[0],
                             "OBJ2": world.region_classes[chain[1]]})
        else:
            text = ""  # multi-hop phrasings exceed the template grammar
        return text, _program(*tuples), "yes", None

    raise GenerationError(f"unhandled question kind {kind!r}")


# -- scheduling ----------------------------------------------------------------

def _kind_schedule(mix, total):
    kinds = sorted(mix)
    weights = np.array([float(mix[k]) for k in kinds])
    if weights.sum() <= 0:
        raise GenerationError("question mix weights must sum to a positive value")
    raw = weights / weights.sum() * total
    counts = {k: int(np.floor(r)) for k, r in zip(kinds, raw)}
    remainder = total - sum(counts.values())
    by_fraction = sorted(kinds, key=lambda k: (-(raw[kinds.index(k)]
                                                 - np.floor(raw[kinds.index(k)])), k))
    for k in by_fraction[:remainder]:
        counts[k] += 1
    schedule = []
    remaining = dict(counts)
    while len(schedule) < total:
        progress = False
        for k in kinds:
            if remaining[k] > 0:
                schedule.append(k)
                remaining[k] -= 1
                progress = True
        if not progress:
            break
    return schedule


def _split_labels(fractions, total):
    names = list(fractions)
    weights = np.array([float(fractions[n]) for n in names])
    if weights.sum() <= 0:
        raise GenerationError("split fractions must sum to a positive value")
    counts = np.floor(weights / weights.sum() * total).astype(int)
    while counts.sum() < total:
        counts[int(np.argmax(weights / weights.sum() * total - counts))] += 1
    labels = []
    for name, count in zip(names, counts):
        labels.extend([name] * count)
    return labels[:total]


def gen_synthetic(spec):
    """Generate a Dataset; identical specs yield byte-identical datasets."""
    spec.validate()
    rng_world = np.random.default_rng([spec.seed, 0])
    rng_noise = np.random.default_rng([spec.seed, 1])

    vocabulary = _build_vocabulary(spec)
    worlds, reserved = _build_worlds(spec, vocabulary, rng_world)
    builder = _Builder(spec, vocabulary, worlds, reserved, rng_world)

    schedule = _kind_schedule(spec.question_mix, spec.num_questions)
    labels = _split_labels(spec.split_fractions, spec.num_questions)

    questions = []
    grounding = {}
    for i, kind in enumerate(schedule):
        placed = None
        for offset in range(spec.num_images):
            world = worlds[(i + offset) % spec.num_images]
            placed = _make_question(builder, kind, world)
            if placed is not None:
                break
        if placed is None:
            raise GenerationError(f"could not place a {kind!r} question; "
                                  "grow the world or reduce the mix")
        text, program, answer, ann = placed
        qid = f"q{i:06d}"
        questions.append(QuestionRecord(
            qid=qid, image_id=world.image_id, text=text, answer=answer,
            category=_KIND_CATEGORY[kind], program=program, split=labels[i]))
        if ann is not None:
            grounding[qid] = ann

    scene_graphs = {}
    for world in worlds:
        scene_graphs[world.image_id] = _world_to_scene_graph(world, vocabulary,
                                                             spec, rng_noise)

    grammar = TemplateGrammar(_grammar_entries(spec, vocabulary,
                                               set(spec.question_mix)))
    ds = Dataset(vocabulary, scene_graphs, questions, grounding, grammar)
    ds.validate()
    return ds
