"""Deterministic answers from decoded lattice paths.

Open questions read the arg-max vocabulary entry at the final path region;
existence-style questions threshold the geometric mean of the multiplied
path probabilities against a calibrated value tau; choose and compare
reduce to score comparisons at the final region(s).  Attention spreads
uniformly over the final region(s) of the 1-best path(s), which is what the
grounding metrics consume.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import sgraph
from .decode import geometric_mean_score, list_viterbi, viterbi
from .lattice import build_lattices
from .opseq import OpType

logger = logging.getLogger(__name__)

YES = "yes"
NO = "no"
UNKNOWN = "unknown"

#: Structural question categories.
QT_QUERY = "query"
QT_VERIFY = "verify"
QT_LOGICAL = "logical"
QT_CHOOSE = "choose"
QT_COMPARE = "compare"
QUESTION_TYPES = (QT_QUERY, QT_VERIFY, QT_LOGICAL, QT_CHOOSE, QT_COMPARE)


@dataclass
class AnswerConfig:
    """Knobs shared by the answer functions."""

    verify_threshold: float = 0.5  # tau, calibrated on a dev split
    nbest: int = 5

    def validate(self):
        if not 0.0 < self.verify_threshold < 1.0:
            raise ValueError("verify threshold must lie strictly between 0 and 1")
        if self.nbest < 1:
            raise ValueError("nbest must be positive")


@dataclass
class Answer:
    text: str
    question_type: str
    confidence: float
    final_regions: tuple[int, ...] = ()
    branch_confidences: tuple[float, ...] = ()


@dataclass
class AttentionMap:
    """Per-region attention weights; sums to 1 unless nothing was feasible."""

    weights: np.ndarray

    def nonzero(self):
        return {int(i): float(w) for i, w in enumerate(self.weights) if w > 0}


def attention_map(paths, num_regions):
    """Uniform weight over the distinct final regions of feasible paths."""
    weights = np.zeros(num_regions)
    finals = sorted({p.regions[-1] for p in paths if p.feasible and p.regions})
    if finals:
        share = 1.0 / len(finals)
        for r in finals:
            weights[r] = share
    return AttentionMap(weights)


def _argmax_name(scores, names, allowed=None):
    """Highest-scoring name; vocabulary order breaks ties."""
    best_name, best_score = None, -1.0
    for name, score in zip(names, scores):
        if allowed is not None and name not in allowed:
            continue
        if score > best_score:
            best_name, best_score = name, float(score)
    return best_name, best_score


def answer_query(path, sg, target="name", restriction=None):
    """Open answer at the final path region.

    target is "name" for object-class queries or an attribute-category name.
    restriction optionally narrows candidates to a class subset (e.g. the
    members of a selected object category).  Infeasible paths answer
    "unknown" with zero confidence.
    """
    if not path.feasible:
        return Answer(UNKNOWN, QT_QUERY, 0.0)
    region = path.regions[-1]
    vocab = sg.vocabulary
    if target in (None, "name"):
        names = vocab.object_classes
        scores = sg.object_matrix[region]
    else:
        cat_idx = vocab.category_index.get(target)
        if cat_idx is None:
            logger.warning("query target %r is not an attribute category", target)
            return Answer(UNKNOWN, QT_QUERY, 0.0, (region,))
        names = vocab.attribute_categories[cat_idx][1]
        scores = sg.attribute_tensor[region, cat_idx, :len(names)]
    name, _ = _argmax_name(scores, names, restriction)
    if name is None:
        return Answer(UNKNOWN, QT_QUERY, 0.0, (region,))
    gm = geometric_mean_score(path)
    return Answer(name, QT_QUERY, gm, (region,), (gm,))


def answer_verify(path, cfg):
    """Existence decision: yes iff the geometric path mean reaches tau."""
    gm = geometric_mean_score(path)
    text = YES if path.feasible and gm >= cfg.verify_threshold else NO
    regions = (path.regions[-1],) if path.regions else ()
    return Answer(text, QT_VERIFY, gm, regions, (gm,))


def answer_logical(path_a, path_b, op, cfg):
    """Combine two branch existence decisions with and/or."""
    a = answer_verify(path_a, cfg)
    b = answer_verify(path_b, cfg)
    truth_a, truth_b = a.text == YES, b.text == YES
    if op is OpType.AND or op == "and":
        truth = truth_a and truth_b
        confidence = min(a.confidence, b.confidence)
    elif op is OpType.OR or op == "or":
        truth = truth_a or truth_b
        confidence = max(a.confidence, b.confidence)
    else:
        raise ValueError(f"not a logical combiner: {op!r}")
    return Answer(YES if truth else NO, QT_LOGICAL, confidence,
                  a.final_regions + b.final_regions,
                  (a.confidence, b.confidence))


def answer_choose(path, sg, category, options):
    """Pick the better-scoring of two offered options at the final region.

    Confidence is the winning option's recognition score, so two options
    absent from the category answer with the first option at confidence 0.
    """
    if len(options) != 2:
        raise ValueError("choose expects exactly two options")
    if not path.feasible:
        return Answer(options[0], QT_CHOOSE, 0.0)
    region = path.regions[-1]
    vocab = sg.vocabulary

    def score(option):
        if category in (None, "name"):
            idx = vocab.object_index.get(option)
            return float(sg.object_matrix[region, idx]) if idx is not None else 0.0
        cat_idx = vocab.category_index.get(category)
        if cat_idx is None:
            return 0.0
        j = vocab.attribute_index[cat_idx].get(option)
        return float(sg.attribute_tensor[region, cat_idx, j]) if j is not None else 0.0

    s0, s1 = score(options[0]), score(options[1])
    winner, best = (options[0], s0) if s0 >= s1 else (options[1], s1)
    return Answer(winner, QT_CHOOSE, best, (region,),
                  (geometric_mean_score(path),))


def answer_compare(path_a, path_b, sg, category, mode):
    """Compare the arg-max attribute of two final regions.

    mode is "same" or "different"; an infeasible branch answers "no".
    """
    if mode not in ("same", "different"):
        raise ValueError(f"compare mode must be same|different, got {mode!r}")
    if not (path_a.feasible and path_b.feasible):
        return Answer(NO, QT_COMPARE, 0.0)
    vocab = sg.vocabulary
    cat_idx = vocab.category_index.get(category)
    if cat_idx is None:
        logger.warning("compare category %r unknown", category)
        return Answer(NO, QT_COMPARE, 0.0)
    names = vocab.attribute_categories[cat_idx][1]
    values = []
    for path in (path_a, path_b):
        region = path.regions[-1]
        name, _ = _argmax_name(sg.attribute_tensor[region, cat_idx, :len(names)], names)
        values.append(name)
    equal = values[0] == values[1] and values[0] is not None
    truth = equal if mode == "same" else not equal
    gms = (geometric_mean_score(path_a), geometric_mean_score(path_b))
    return Answer(YES if truth else NO, QT_COMPARE, min(gms),
                  (path_a.regions[-1], path_b.regions[-1]), gms)


# -- orchestration ------------------------------------------------------------

@dataclass
class QuestionResult:
    """Everything the harness needs about one answered question."""

    answer: Answer
    attention: AttentionMap
    paths: list = field(default_factory=list)
    lattices: list = field(default_factory=list)
    nbest: list = field(default_factory=list)


def _query_restriction(branch, vocab):
    """Class subset implied by the nearest category-valued select/relate."""
    for t in reversed(branch):
        name = None
        if t.op_type is OpType.SELECT:
            name = t.argument
        elif t.op_type is OpType.RELATE:
            name = t.relate_parts()[0]
        if name and name != "_":
            name = sgraph.normalize_name(name, vocab) or name
            if vocab.is_object_category(name):
                return set(vocab.object_category_members[name])
            return None
    return None


def produce_answer(seq, sg, cfg=None, with_nbest=False):
    """Build, decode, and answer one operation sequence end to end."""
    cfg = cfg or AnswerConfig()
    cfg.validate()
    lattices = build_lattices(seq, sg)
    paths = [viterbi(lat) for lat in lattices]
    terminal = seq.terminal

    if terminal.op_type is OpType.QUERY:
        target = terminal.qualifier
        if target is None and terminal.argument != "name":
            # GQA-style "(query; color)" spelling
            target = terminal.argument if terminal.argument in sg.vocabulary.category_index \
                else None
        restriction = _query_restriction(seq.branches()[0], sg.vocabulary) \
            if target in (None, "name") else None
        answer = answer_query(paths[0], sg, target=target or "name",
                              restriction=restriction)
    elif terminal.op_type in (OpType.VERIFY, OpType.EXIST):
        answer = answer_verify(paths[0], cfg)
    elif terminal.op_type in (OpType.AND, OpType.OR):
        answer = answer_logical(paths[0], paths[1], terminal.op_type, cfg)
    elif terminal.op_type is OpType.CHOOSE:
        answer = answer_choose(paths[0], sg, terminal.qualifier, list(terminal.args))
    elif terminal.op_type is OpType.COMPARE:
        answer = answer_compare(paths[0], paths[1], sg, terminal.qualifier,
                                terminal.argument)
    else:
        raise ValueError(f"terminal {terminal.render()} produces no answer")

    result = QuestionResult(
        answer=answer,
        attention=attention_map(paths, sg.num_regions),
        paths=paths,
        lattices=lattices,
    )
    if with_nbest:
        result.nbest = [list_viterbi(lat, cfg.nbest) for lat in lattices]
    return result
