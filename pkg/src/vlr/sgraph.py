"""Probabilistic scene graphs over image regions.

A scene graph stores, for every detected region, a probability per object
class, a probability per attribute within each attribute category, and a
dense region-to-region probability per relation.  The functions in this
module answer the elementary questions the lattice builder asks: "how well
does each region match this name?" (emission vectors) and "how likely is a
hop from region x to region r under this relation?" (transition matrices).

All tensors are immutable after construction; query functions return fresh
arrays and never mutate stored state.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)

# Transition direction selectors.  "subject-to-object" means the path moves
# from the relation's subject region to its object region.
SUBJECT_TO_OBJECT = "subject-to-object"
OBJECT_TO_SUBJECT = "object-to-subject"

# Emission provenance tags.
SOURCE_CLASS = "object-class"
SOURCE_CATEGORY = "object-category"
SOURCE_ATTRIBUTE = "attribute"
SOURCE_UNIFORM = "uniform"

_ROW_SUM_TOLERANCE = 1e-6


class VocabularyError(ValueError):
    """Raised when a vocabulary violates its structural invariants."""


@dataclass
class EmissionVector:
    """Per-region match probabilities for one queried name."""

    values: np.ndarray
    source: str
    name: str = ""
    negated: bool = False


@dataclass
class TransitionMatrix:
    """Region-to-region hop probabilities; values[x][r] scores a move x -> r."""

    values: np.ndarray
    kind: str  # "relation" | "identity"
    name: str = ""

    def log_values(self):
        """Elementwise log with -inf on zeros, memoized.

        Decoders treat the matrix as frozen once built; the cached array
        would go stale if values were edited in place afterwards.
        """
        log = getattr(self, "_log", None)
        if log is None:
            with np.errstate(divide="ignore"):
                log = np.log(self.values)
            self._log = log
        return log


class Vocabulary:
    """Symbol tables shared by scene graphs, programs, and the parser.

    Parameters
    ----------
    object_classes : ordered object class names.
    attribute_categories : ordered (category, members) pairs; member order
        inside a category is the tie-break order for answers.
    relation_classes : ordered relation names.
    object_category_members : optional mapping of object-category name to the
        class names it contains (e.g. "animal" -> {"cat", "dog"}).
    name_aliases : optional surface-form to canonical-name mapping used by
        normalize_name (e.g. "cats" -> "cat").
    """

    def __init__(self, object_classes, attribute_categories, relation_classes,
                 object_category_members=None, name_aliases=None):
        self.object_classes = [str(c) for c in object_classes]
        self.attribute_categories = [(str(name), [str(m) for m in members])
                                     for name, members in attribute_categories]
        self.relation_classes = [str(r) for r in relation_classes]
        self.object_category_members = {
            str(k): [str(m) for m in v]
            for k, v in (object_category_members or {}).items()
        }
        self.name_aliases = {str(k): str(v) for k, v in (name_aliases or {}).items()}

        self._validate()

        self.object_index = {c: i for i, c in enumerate(self.object_classes)}
        self.relation_index = {r: i for i, r in enumerate(self.relation_classes)}
        self.category_index = {name: i for i, (name, _) in enumerate(self.attribute_categories)}
        self.attribute_index = [
            {attr: j for j, attr in enumerate(members)}
            for _, members in self.attribute_categories
        ]
        self.max_category_size = max((len(m) for _, m in self.attribute_categories), default=1)
        self.max_category_size = max(self.max_category_size, 1)
        self.attribute_names = {a for _, members in self.attribute_categories for a in members}
        self._known_names = (set(self.object_classes)
                             | set(self.object_category_members)
                             | set(self.category_index)
                             | self.attribute_names
                             | set(self.relation_classes))

    def _validate(self):
        for label, names in (("object class", self.object_classes),
                             ("relation", self.relation_classes),
                             ("attribute category", [n for n, _ in self.attribute_categories])):
            if len(names) != len(set(names)):
                raise VocabularyError(f"duplicate {label} names")
        for name, members in self.attribute_categories:
            if len(members) != len(set(members)):
                raise VocabularyError(f"duplicate attributes in category {name!r}")
        classes = set(self.object_classes)
        for cat, members in self.object_category_members.items():
            unknown = [m for m in members if m not in classes]
            if unknown:
                raise VocabularyError(f"object category {cat!r} lists unknown classes {unknown}")
        # Alias targets must resolve to something nameable: a class, category,
        # attribute, or relation.
        attrs = {a for _, members in self.attribute_categories for a in members}
        valid_targets = (classes | attrs | set(self.relation_classes)
                         | set(self.object_category_members)
                         | {n for n, _ in self.attribute_categories})
        for alias, target in self.name_aliases.items():
            if target not in valid_targets:
                raise VocabularyError(f"alias {alias!r} points at unknown name {target!r}")

    # -- lookups -----------------------------------------------------------

    def category_of_attribute(self, attribute):
        """First category (in vocabulary order) containing `attribute`, or None."""
        for name, members in self.attribute_categories:
            if attribute in members:
                return name
        return None

    def attribute_members(self, category):
        idx = self.category_index.get(category)
        if idx is None:
            return None
        return self.attribute_categories[idx][1]

    def is_object_category(self, name):
        return name in self.object_category_members

    def is_object_class(self, name):
        return name in self.object_index

    def is_relation(self, name):
        return name in self.relation_index

    def is_attribute(self, name):
        return name in self.attribute_names

    # -- serialization -----------------------------------------------------

    def to_dict(self):
        return {
            "object_classes": list(self.object_classes),
            "attribute_categories": [[n, list(m)] for n, m in self.attribute_categories],
            "relation_classes": list(self.relation_classes),
            "object_category_members": {k: list(v) for k, v in self.object_category_members.items()},
            "name_aliases": dict(self.name_aliases),
        }

    @classmethod
    def from_dict(cls, doc):
        return cls(
            doc.get("object_classes", []),
            [tuple(pair) for pair in doc.get("attribute_categories", [])],
            doc.get("relation_classes", []),
            doc.get("object_category_members", {}),
            doc.get("name_aliases", {}),
        )


def normalize_name(surface, vocabulary):
    """Map a surface form onto a canonical vocabulary name.

    Trims and case-folds, then tries a direct match against classes,
    categories, attributes, and relations, then the alias table.  Returns
    None when nothing matches; raises ValueError on an empty surface.
    """
    name = " ".join(str(surface).strip().lower().split())
    if not name:
        raise ValueError("cannot normalize an empty name")
    if name in vocabulary._known_names:
        return name
    target = vocabulary.name_aliases.get(name)
    if target is not None:
        return target
    return None


class SceneGraph:
    """Dense probabilistic scene graph for one image.

    Attributes
    ----------
    image_id : identifier copied from the source file.
    boxes : (N, 4) float array of [x0, y0, x1, y1] region boxes.
    object_matrix : (N, num_object_classes) class probabilities.
    attribute_tensor : (N, num_categories, max_category_size) attribute
        probabilities, zero-padded beyond each category's member count.
    relation_tensor : (N, N, num_relations); entry [s, o, k] is the
        probability that region s stands in relation k to region o.  The
        diagonal is structurally zero: no self-relations.
    """

    def __init__(self, image_id, boxes, object_matrix, attribute_tensor,
                 relation_tensor, vocabulary):
        self.image_id = str(image_id)
        self.boxes = np.asarray(boxes, dtype=np.float64)
        self.object_matrix = np.asarray(object_matrix, dtype=np.float64)
        self.attribute_tensor = np.asarray(attribute_tensor, dtype=np.float64)
        self.relation_tensor = np.asarray(relation_tensor, dtype=np.float64)
        self.vocabulary = vocabulary

    @property
    def num_regions(self):
        return int(self.object_matrix.shape[0])

    def validate(self):
        """Check structural invariants; raises ValueError on violation."""
        n = self.num_regions
        if n < 1:
            raise ValueError("scene graph needs at least one region")
        vocab = self.vocabulary
        if self.boxes.shape != (n, 4):
            raise ValueError("boxes must be (N, 4)")
        if self.object_matrix.shape != (n, len(vocab.object_classes)):
            raise ValueError("object matrix shape mismatch")
        if self.attribute_tensor.shape != (n, len(vocab.attribute_categories) or 0,
                                           vocab.max_category_size) \
                and self.attribute_tensor.size:
            raise ValueError("attribute tensor shape mismatch")
        if self.relation_tensor.shape != (n, n, len(vocab.relation_classes)):
            raise ValueError("relation tensor shape mismatch")
        for arr, label in ((self.object_matrix, "object"),
                           (self.attribute_tensor, "attribute"),
                           (self.relation_tensor, "relation")):
            if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
                raise ValueError(f"{label} probabilities outside [0, 1]")
        row_sums = self.object_matrix.sum(axis=1)
        if row_sums.size and row_sums.max() > 1.0 + _ROW_SUM_TOLERANCE:
            raise ValueError("object probability row exceeds 1")
        if self.relation_tensor.size:
            diag = np.einsum("iik->ik", self.relation_tensor)
            if np.any(diag != 0.0):
                raise ValueError("self-relations are not allowed")
        if np.any(self.boxes[:, 2] < self.boxes[:, 0]) or np.any(self.boxes[:, 3] < self.boxes[:, 1]):
            raise ValueError("degenerate region box")

    # -- serialization -----------------------------------------------------

    @classmethod
    def from_dict(cls, doc, vocabulary):
        """Build a scene graph from its JSON document; omitted entries are 0."""
        regions = doc.get("regions", [])
        n = len(regions)
        num_cats = len(vocabulary.attribute_categories)
        boxes = np.zeros((n, 4), dtype=np.float64)
        objects = np.zeros((n, len(vocabulary.object_classes)), dtype=np.float64)
        attributes = np.zeros((n, num_cats, vocabulary.max_category_size), dtype=np.float64)
        relations = np.zeros((n, n, len(vocabulary.relation_classes)), dtype=np.float64)

        for i, region in enumerate(regions):
            boxes[i] = np.asarray(region["box"], dtype=np.float64)
            for name, prob in region.get("objects", {}).items():
                idx = vocabulary.object_index.get(name)
                if idx is None:
                    raise ValueError(f"unknown object class {name!r} in {doc.get('image_id')!r}")
                objects[i, idx] = float(prob)
            for cat, row in region.get("attributes", {}).items():
                cat_idx = vocabulary.category_index.get(cat)
                if cat_idx is None:
                    raise ValueError(f"unknown attribute category {cat!r}")
                member_index = vocabulary.attribute_index[cat_idx]
                for attr, prob in row.items():
                    j = member_index.get(attr)
                    if j is None:
                        raise ValueError(f"attribute {attr!r} not in category {cat!r}")
                    attributes[i, cat_idx, j] = float(prob)

        for triple in doc.get("relations", []):
            s, o, rel, prob = triple
            s, o = int(s), int(o)
            if not (0 <= s < n and 0 <= o < n):
                raise ValueError(f"relation endpoint out of range: {triple}")
            if s == o:
                raise ValueError("self-relation in scene-graph file")
            k = vocabulary.relation_index.get(rel)
            if k is None:
                raise ValueError(f"unknown relation {rel!r}")
            relations[s, o, k] = float(prob)

        sg = cls(doc.get("image_id", ""), boxes, objects, attributes, relations, vocabulary)
        sg.validate()
        return sg

    def to_dict(self):
        """Canonical JSON document; zero probabilities are omitted."""
        vocab = self.vocabulary
        regions = []
        for i in range(self.num_regions):
            objects = {}
            for name in vocab.object_classes:
                p = float(self.object_matrix[i, vocab.object_index[name]])
                if p != 0.0:
                    objects[name] = p
            attributes = {}
            for cat_idx, (cat, members) in enumerate(vocab.attribute_categories):
                row = {}
                for j, attr in enumerate(members):
                    p = float(self.attribute_tensor[i, cat_idx, j])
                    if p != 0.0:
                        row[attr] = p
                if row:
                    attributes[cat] = row
            regions.append({
                "box": [float(v) for v in self.boxes[i]],
                "objects": objects,
                "attributes": attributes,
            })
        triples = []
        for s, o, k in zip(*np.nonzero(self.relation_tensor)):
            triples.append([int(s), int(o), vocab.relation_classes[int(k)],
                            float(self.relation_tensor[s, o, k])])
        triples.sort(key=lambda t: (t[0], t[1], vocab.relation_index[t[2]]))
        return {"image_id": self.image_id, "regions": regions, "relations": triples}


# -- file round trips --------------------------------------------------------

def _canonical_dumps(obj):
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def load_vocabulary(path):
    with open(path, encoding="utf-8") as fh:
        return Vocabulary.from_dict(json.load(fh))


def save_vocabulary(vocabulary, path):
    Path(path).write_text(_canonical_dumps(vocabulary.to_dict()), encoding="utf-8")


def load_scene_graph(path, vocabulary):
    with open(path, encoding="utf-8") as fh:
        return SceneGraph.from_dict(json.load(fh), vocabulary)


def save_scene_graph(sg, path):
    Path(path).write_text(_canonical_dumps(sg.to_dict()), encoding="utf-8")


# -- emission and transition queries -----------------------------------------

def emission_for_class(sg, class_name):
    """Per-region probabilities of one object class.

    Unknown names yield an all-zero vector plus a diagnostics warning; the
    question stays answerable and simply finds no support.
    """
    idx = sg.vocabulary.object_index.get(class_name)
    if idx is None:
        logger.warning("unknown object class %r; emitting zeros", class_name)
        return EmissionVector(np.zeros(sg.num_regions), SOURCE_CLASS, class_name)
    return EmissionVector(sg.object_matrix[:, idx].copy(), SOURCE_CLASS, class_name)


def emission_for_category(sg, category):
    """Summed member-class probabilities, clamped to 1 per region."""
    members = sg.vocabulary.object_category_members.get(category)
    if members is None:
        logger.warning("unknown object category %r; emitting zeros", category)
        return EmissionVector(np.zeros(sg.num_regions), SOURCE_CATEGORY, category)
    cols = [sg.vocabulary.object_index[m] for m in members]
    if not cols:
        return EmissionVector(np.zeros(sg.num_regions), SOURCE_CATEGORY, category)
    values = sg.object_matrix[:, cols].sum(axis=1)
    np.minimum(values, 1.0, out=values)
    return EmissionVector(values, SOURCE_CATEGORY, category)


def emission_for_attribute(sg, category, attribute, negated=False):
    """Per-region probabilities of an attribute, optionally negated (1 - p).

    When `category` is None the first category containing the attribute (in
    vocabulary order) is used.
    """
    vocab = sg.vocabulary
    if category is None:
        category = vocab.category_of_attribute(attribute)
        if category is None:
            logger.warning("attribute %r not in any category; emitting zeros", attribute)
            values = np.zeros(sg.num_regions)
            return EmissionVector(1.0 - values if negated else values,
                                  SOURCE_ATTRIBUTE, attribute, negated)
    cat_idx = vocab.category_index.get(category)
    j = None if cat_idx is None else vocab.attribute_index[cat_idx].get(attribute)
    if j is None:
        logger.warning("unknown attribute %r in category %r; emitting zeros",
                       attribute, category)
        values = np.zeros(sg.num_regions)
    else:
        values = sg.attribute_tensor[:, cat_idx, j].copy()
    if negated:
        values = 1.0 - values
    return EmissionVector(values, SOURCE_ATTRIBUTE, attribute, negated)


def identity_transition(num_regions):
    """Stay-on-region transition used by non-relation steps."""
    return TransitionMatrix(np.eye(num_regions), "identity")


def transition_for_relation(sg, relation, direction=SUBJECT_TO_OBJECT):
    """Hop probabilities for one relation.

    values[x][r] scores moving from region x to region r.  For
    SUBJECT_TO_OBJECT that is relation_tensor[x, r]; OBJECT_TO_SUBJECT uses
    the transpose.  The diagonal is forced to zero regardless of stored
    tensor contents: a relation step must leave its region.
    """
    if direction not in (SUBJECT_TO_OBJECT, OBJECT_TO_SUBJECT):
        raise ValueError(f"unknown direction {direction!r}")
    k = sg.vocabulary.relation_index.get(relation)
    if k is None:
        logger.warning("unknown relation %r; emitting zero transitions", relation)
        values = np.zeros((sg.num_regions, sg.num_regions))
    else:
        values = sg.relation_tensor[:, :, k].copy()
        if direction == OBJECT_TO_SUBJECT:
            values = values.T.copy()
    np.fill_diagonal(values, 0.0)
    return TransitionMatrix(values, "relation", relation)
