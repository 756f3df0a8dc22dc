"""Compositional generalization splits over phrasing variants.

A variant pair names two surface phrasings of the same underlying program
template (e.g. "is there a ..." vs "do you see any ...").  For templates
attested at least `min_count` times in each variant, test-variant phrasings
are removed from the training partition, and the test partition keeps only
those phrasings.  Questions never move across the original partition
boundary; they are only dropped.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass

from .fileio import read_json
from .opseq import generalize_template, parse_program_string

logger = logging.getLogger(__name__)

_MATCHER_KINDS = ("starts_with", "contains", "regex")


@dataclass
class VariantMatcher:
    kind: str
    value: str

    def __post_init__(self):
        if self.kind not in _MATCHER_KINDS:
            raise ValueError(f"matcher kind must be one of {_MATCHER_KINDS}")
        if self.kind == "regex":
            self._regex = re.compile(self.value)

    def matches(self, text):
        folded = " ".join(text.casefold().split())
        if self.kind == "starts_with":
            return folded.startswith(self.value.casefold())
        if self.kind == "contains":
            return self.value.casefold() in folded
        return self._regex.search(folded) is not None

    def to_dict(self):
        return {"kind": self.kind, "value": self.value}

    @classmethod
    def from_dict(cls, doc):
        return cls(doc["kind"], doc["value"])


@dataclass
class VariantPair:
    name: str
    train_variant: VariantMatcher
    test_variant: VariantMatcher

    def to_dict(self):
        return {"name": self.name,
                "train_variant": self.train_variant.to_dict(),
                "test_variant": self.test_variant.to_dict()}

    @classmethod
    def from_dict(cls, doc):
        return cls(doc["name"],
                   VariantMatcher.from_dict(doc["train_variant"]),
                   VariantMatcher.from_dict(doc["test_variant"]))


def load_pairs(path):
    return [VariantPair.from_dict(doc) for doc in read_json(path)]


@dataclass
class SplitResult:
    train_qids: list
    test_qids: list
    summary: dict


def _template_key(record, vocabulary):
    if not record.program:
        return None
    return generalize_template(parse_program_string(record.program),
                               vocabulary).key()


def make_generalization_splits(ds, pairs, min_count=10):
    """Repartition ds.questions into a phrasing-generalization train/test.

    Template counts are pooled across the original train and test
    partitions before the min_count check, so a phrasing attested only in
    one partition still qualifies when frequent enough overall.
    """
    if min_count < 1:
        raise ValueError("min_count must be positive")
    if not pairs:
        logger.warning("no variant pairs given; split left unchanged")
        return SplitResult(
            [q.qid for q in ds.questions if q.split == "train"],
            [q.qid for q in ds.questions if q.split == "test"],
            {"pairs": [], "min_count": min_count})

    keys = {q.qid: _template_key(q, ds.vocabulary) for q in ds.questions}

    qualifying = {}  # pair name -> set of template keys
    pair_stats = []
    for pair in pairs:
        counts = {}  # template -> [train-variant n, test-variant n]
        for q in ds.questions:
            key = keys[q.qid]
            if key is None:
                continue
            entry = counts.setdefault(key, [0, 0])
            if pair.train_variant.matches(q.text):
                entry[0] += 1
            if pair.test_variant.matches(q.text):
                entry[1] += 1
        good = {k for k, (a, b) in counts.items()
                if a >= min_count and b >= min_count}
        qualifying[pair.name] = good
        pair_stats.append({"name": pair.name, "qualifying_templates": len(good)})

    def held_out(q):
        key = keys[q.qid]
        if key is None:
            return False
        return any(pair.test_variant.matches(q.text) and key in qualifying[pair.name]
                   for pair in pairs)

    train_qids, test_qids = [], []
    train_removed = test_dropped = 0
    for q in ds.questions:
        if q.split == "train":
            if held_out(q):
                train_removed += 1
            else:
                train_qids.append(q.qid)
        elif q.split == "test":
            if held_out(q):
                test_qids.append(q.qid)
            else:
                test_dropped += 1

    summary = {
        "pairs": pair_stats,
        "min_count": min_count,
        "train_size": len(train_qids),
        "test_size": len(test_qids),
        "train_removed": train_removed,
        "test_dropped": test_dropped,
    }
    return SplitResult(train_qids, test_qids, summary)
