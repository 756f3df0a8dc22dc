"""On-disk dataset layout and the in-memory container the harness evaluates.

A dataset directory looks like::

    vocabulary.json          symbol tables (see sgraph.Vocabulary)
    templates.json           question-template grammar for the parser
    scene_graphs/<id>.json   one scene graph per image
    questions.jsonl          {"qid", "image_id", "text", "program",
                              "answer", "category", "split"}
    grounding.jsonl          {"qid", "Q": [...], "A": [...], "FA": [...]}

`program` may be null when only question text exists; `split` defaults to
"train".  Grounding records are optional per question; empty box lists mean
the category is unannotated.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

from .answer import QUESTION_TYPES
from .fileio import read_json, read_jsonl, write_jsonl
from .grounding import GroundingAnnotation
from .opseq import TemplateGrammar
from .sgraph import SceneGraph, Vocabulary, load_vocabulary, save_scene_graph, save_vocabulary

logger = logging.getLogger(__name__)

SCENE_GRAPH_DIR = "scene_graphs"


@dataclass
class QuestionRecord:
    qid: str
    image_id: str
    text: str
    answer: str
    category: str
    program: str | None = None
    split: str = "train"

    def to_dict(self):
        return {
            "qid": self.qid,
            "image_id": self.image_id,
            "text": self.text,
            "program": self.program,
            "answer": self.answer,
            "category": self.category,
            "split": self.split,
        }

    @classmethod
    def from_dict(cls, doc):
        return cls(
            qid=str(doc["qid"]),
            image_id=str(doc["image_id"]),
            text=doc.get("text", ""),
            answer=str(doc.get("answer", "")),
            category=doc.get("category", "query"),
            program=doc.get("program"),
            split=doc.get("split", "train"),
        )


@dataclass
class Dataset:
    vocabulary: Vocabulary
    scene_graphs: dict[str, SceneGraph]
    questions: list[QuestionRecord]
    grounding: dict[str, GroundingAnnotation] = field(default_factory=dict)
    grammar: TemplateGrammar | None = None
    root: str | None = None

    def validate(self):
        for q in self.questions:
            if q.image_id not in self.scene_graphs:
                raise ValueError(f"question {q.qid} references unknown image {q.image_id!r}")
            if q.category not in QUESTION_TYPES:
                raise ValueError(f"question {q.qid} has unknown category {q.category!r}")

    def subset(self, split=None, qids=None):
        """A shallow copy restricted to a split label and/or explicit qids."""
        questions = [q for q in self.questions
                     if (split is None or q.split == split)
                     and (qids is None or q.qid in qids)]
        kept = {q.qid for q in questions}
        return Dataset(
            vocabulary=self.vocabulary,
            scene_graphs=self.scene_graphs,
            questions=questions,
            grounding={k: v for k, v in self.grounding.items() if k in kept},
            grammar=self.grammar,
            root=self.root,
        )


def load_dataset(root):
    """Load a dataset directory; missing optional files are tolerated."""
    root = Path(root)
    vocabulary = load_vocabulary(root / "vocabulary.json")
    scene_graphs = {}
    for path in sorted((root / SCENE_GRAPH_DIR).glob("*.json")):
        doc = read_json(path)
        sg = SceneGraph.from_dict(doc, vocabulary)
        scene_graphs[sg.image_id] = sg
    questions = [QuestionRecord.from_dict(doc) for doc in read_jsonl(root / "questions.jsonl")]
    grounding = {}
    grounding_path = root / "grounding.jsonl"
    if grounding_path.exists():
        for doc in read_jsonl(grounding_path):
            grounding[str(doc["qid"])] = GroundingAnnotation.from_dict(doc)
    grammar = None
    templates_path = root / "templates.json"
    if templates_path.exists():
        grammar = TemplateGrammar.load(templates_path)
    ds = Dataset(vocabulary, scene_graphs, questions, grounding, grammar, root=str(root))
    ds.validate()
    return ds


def save_dataset(ds, root):
    """Write the canonical dataset layout; output bytes are deterministic."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    (root / SCENE_GRAPH_DIR).mkdir(exist_ok=True)
    save_vocabulary(ds.vocabulary, root / "vocabulary.json")
    for image_id in sorted(ds.scene_graphs):
        save_scene_graph(ds.scene_graphs[image_id], root / SCENE_GRAPH_DIR / f"{image_id}.json")
    write_jsonl([q.to_dict() for q in ds.questions], root / "questions.jsonl")
    write_jsonl([ds.grounding[q.qid].to_dict(q.qid) for q in ds.questions
                 if q.qid in ds.grounding],
                root / "grounding.jsonl")
    if ds.grammar is not None:
        ds.grammar.save(root / "templates.json")
    ds.root = str(root)
