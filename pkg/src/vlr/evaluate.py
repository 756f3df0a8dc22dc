"""Batch evaluation: accuracy, grounding averages, and threshold sweeps.

Reports are deterministic: per-question records depend only on the dataset
and config, and aggregation always runs in qid order, so the same inputs
produce byte-identical reports regardless of worker count.
"""

from __future__ import annotations

import logging
import multiprocessing
from dataclasses import dataclass, field

from .answer import (AnswerConfig, QT_QUERY, UNKNOWN, YES, NO, produce_answer)
from .grounding import (GroundingConfig, gqa_style_grounding, grounding_prf,
                        iou_grounding_score)
from .lattice import BuildError, build_lattices
from .decode import geometric_mean_score, viterbi
from .opseq import OpType, ParseError, parse_program_string, parse_question

logger = logging.getLogger(__name__)

BINARY_CATEGORIES = ("verify", "logical", "choose", "compare")
OPEN_CATEGORIES = ("query",)

_GROUNDING_KEYS = ("Q", "A", "FA", "gqa_style", "precision", "recall", "f1")


@dataclass
class RunConfig:
    """Evaluation settings; echoed verbatim into the report."""

    program_source: str = "gold"        # gold | parsed
    tau: float = 0.5
    nbest: int = 5
    iou_threshold: float = 0.5
    workers: int = 1
    fallback_to_gold: bool = False      # parsed mode: use gold program on parse failure
    split: str | None = None

    def validate(self):
        if self.program_source not in ("gold", "parsed"):
            raise ValueError("program_source must be 'gold' or 'parsed'")
        if not 0.0 < self.tau < 1.0:
            raise ValueError("tau must lie strictly between 0 and 1")
        if not 0.0 < self.iou_threshold <= 1.0:
            raise ValueError("iou_threshold must lie in (0, 1]")
        if self.nbest < 1 or self.workers < 1:
            raise ValueError("nbest and workers must be positive")

    def echo(self):
        # workers deliberately omitted: the report must not depend on them
        return {
            "program_source": self.program_source,
            "tau": self.tau,
            "nbest": self.nbest,
            "iou_threshold": self.iou_threshold,
            "fallback_to_gold": self.fallback_to_gold,
            "split": self.split,
        }


@dataclass
class EvalReport:
    aggregates: dict
    records: list = field(default_factory=list)

    def to_dict(self):
        return self.aggregates


def _resolve_program(record, ds, cfg):
    """Returns (sequence, parse_failed)."""
    if cfg.program_source == "gold":
        if record.program:
            return parse_program_string(record.program), False
        return None, True
    seq = None
    if record.text:
        seq = parse_question(record.text, ds.grammar, ds.vocabulary)
    if seq is None and cfg.fallback_to_gold and record.program:
        return parse_program_string(record.program), True
    return seq, seq is None


def _grounding_scores(attention, annotation, sg, cfg):
    gcfg = GroundingConfig(iou_threshold=cfg.iou_threshold)
    scores = {}
    scores["Q"] = iou_grounding_score(attention, annotation.q, sg, gcfg) \
        if annotation.q else None
    scores["A"] = iou_grounding_score(attention, annotation.a, sg, gcfg) \
        if annotation.a else None
    scores["FA"] = iou_grounding_score(attention, annotation.fa, sg, gcfg) \
        if annotation.fa else None
    if annotation.a:
        scores["gqa_style"] = gqa_style_grounding(attention, annotation.a, sg, gcfg)
        p, r, f1 = grounding_prf(attention, annotation.a, sg, gcfg)
        scores.update({"precision": p, "recall": r, "f1": f1})
    else:
        scores.update({"gqa_style": None, "precision": None,
                       "recall": None, "f1": None})
    return scores


def evaluate_question(record, ds, cfg):
    """One record -> one JSON-ready result row."""
    row = {
        "qid": record.qid,
        "image_id": record.image_id,
        "category": record.category,
        "gold": record.answer,
        "predicted": None,
        "correct": False,
        "confidence": 0.0,
        "parse_failed": False,
        "program": None,
        "final_regions": [],
        "grounding": None,
    }
    try:
        seq, parse_failed = _resolve_program(record, ds, cfg)
    except (ParseError, ValueError):
        seq, parse_failed = None, True
    row["parse_failed"] = bool(parse_failed)
    if seq is None:
        return row
    sg = ds.scene_graphs[record.image_id]
    try:
        result = produce_answer(seq, sg,
                                AnswerConfig(verify_threshold=cfg.tau,
                                             nbest=cfg.nbest))
    except (BuildError, ValueError):
        row["parse_failed"] = True
        return row
    answer = result.answer
    row["program"] = seq.render()
    row["predicted"] = answer.text
    row["correct"] = answer.text.casefold() == record.answer.casefold()
    row["confidence"] = float(answer.confidence)
    row["final_regions"] = [int(r) for r in answer.final_regions]
    annotation = ds.grounding.get(record.qid)
    if annotation is not None and annotation.pooled():
        row["grounding"] = _grounding_scores(result.attention, annotation, sg, cfg)
    return row


# Worker processes inherit the dataset through fork; re-pickling per task
# would dominate the runtime for large corpora.
_WORKER_STATE = {}


def _init_worker(ds, cfg):
    _WORKER_STATE["ds"] = ds
    _WORKER_STATE["cfg"] = cfg


def _eval_batch(qids):
    ds, cfg = _WORKER_STATE["ds"], _WORKER_STATE["cfg"]
    by_qid = {q.qid: q for q in ds.questions}
    return [evaluate_question(by_qid[qid], ds, cfg) for qid in qids]


def _collect_rows(ds, cfg):
    records = sorted(ds.questions, key=lambda q: q.qid)
    if cfg.workers <= 1 or len(records) < 2:
        return [evaluate_question(q, ds, cfg) for q in records]
    try:
        ctx = multiprocessing.get_context("fork")
    except ValueError:
        logger.warning("fork unavailable; evaluating in a single process")
        return [evaluate_question(q, ds, cfg) for q in records]
    qids = [q.qid for q in records]
    step = max(1, (len(qids) + cfg.workers - 1) // cfg.workers)
    chunks = [qids[i:i + step] for i in range(0, len(qids), step)]
    with ctx.Pool(processes=cfg.workers, initializer=_init_worker,
                  initargs=(ds, cfg)) as pool:
        batches = pool.map(_eval_batch, chunks)
    rows = [row for batch in batches for row in batch]
    rows.sort(key=lambda r: r["qid"])
    return rows


def _percent(num, den):
    return 100.0 * num / den if den else 0.0


def _mean(values):
    return sum(values) / len(values) if values else None


def aggregate(rows, cfg):
    total = len(rows)
    correct = sum(1 for r in rows if r["correct"])
    unanswered = sum(1 for r in rows if r["parse_failed"] and r["predicted"] is None)
    by_category = {}
    counts_by_category = {}
    for cat in sorted({r["category"] for r in rows}):
        cat_rows = [r for r in rows if r["category"] == cat]
        by_category[cat] = _percent(sum(1 for r in cat_rows if r["correct"]),
                                    len(cat_rows))
        counts_by_category[cat] = len(cat_rows)
    binary_rows = [r for r in rows if r["category"] in BINARY_CATEGORIES]
    open_rows = [r for r in rows if r["category"] in OPEN_CATEGORIES]

    grounding = {}
    annotated = [r for r in rows if r["grounding"]]
    for key in _GROUNDING_KEYS:
        values = [r["grounding"][key] for r in annotated
                  if r["grounding"][key] is not None]
        grounding[key] = _mean(values)
    grounding["num_annotated"] = len(annotated)

    return {
        "accuracy": {
            "overall": _percent(correct, total),
            "binary": _percent(sum(1 for r in binary_rows if r["correct"]),
                               len(binary_rows)),
            "open": _percent(sum(1 for r in open_rows if r["correct"]),
                             len(open_rows)),
            "by_category": by_category,
        },
        "grounding": grounding,
        "counts": {
            "questions": total,
            "correct": correct,
            "unanswered": unanswered,
            "by_category": counts_by_category,
        },
        "config": cfg.echo(),
    }


def evaluate(ds, cfg=None):
    """Evaluate every question in the dataset under one config."""
    cfg = cfg or RunConfig()
    cfg.validate()
    rows = _collect_rows(ds, cfg)
    return EvalReport(aggregates=aggregate(rows, cfg), records=rows)


# -- threshold sweep -----------------------------------------------------------

def parse_tau_grid(text):
    """Parse 'start:stop:step' into an inclusive list of thresholds."""
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError("grid must look like start:stop:step")
    start, stop, step = (float(p) for p in parts)
    if step <= 0 or stop < start:
        raise ValueError("grid must advance from start to stop")
    count = int((stop - start) / step + 1e-9) + 1
    return [round(start + k * step, 10) for k in range(count)]


@dataclass
class SweepResult:
    best_tau: float
    grid: list
    accuracies: list
    num_threshold_questions: int

    def to_dict(self):
        return {
            "best_tau": self.best_tau,
            "grid": list(self.grid),
            "accuracies": list(self.accuracies),
            "num_threshold_questions": self.num_threshold_questions,
        }


def _branch_means(seq, sg):
    """Geometric-mean score of each branch's 1-best path."""
    means = []
    for lat in build_lattices(seq, sg):
        path = viterbi(lat)
        means.append(geometric_mean_score(path))
    return means


def sweep_threshold(ds, grid, cfg=None):
    """Pick the smallest tau in the grid maximizing accuracy on ds.

    Verify-style questions (terminal verify/exist/and/or) are decoded once;
    only the thresholding is repeated per grid point.
    """
    if not grid:
        raise ValueError("threshold grid is empty")
    cfg = cfg or RunConfig()
    cfg.validate()

    const_correct = 0
    total = 0
    thresholded = []  # (combiner or None, branch geometric means, gold)
    for record in sorted(ds.questions, key=lambda q: q.qid):
        total += 1
        try:
            seq, _ = _resolve_program(record, ds, cfg)
        except (ParseError, ValueError):
            seq = None
        if seq is None:
            continue
        sg = ds.scene_graphs[record.image_id]
        terminal = seq.terminal.op_type
        if terminal in (OpType.VERIFY, OpType.EXIST, OpType.AND, OpType.OR):
            try:
                means = _branch_means(seq, sg)
            except BuildError:
                continue
            combiner = terminal if terminal in (OpType.AND, OpType.OR) else None
            thresholded.append((combiner, means, record.answer))
        else:
            row = evaluate_question(record, ds, cfg)
            const_correct += 1 if row["correct"] else 0

    if not thresholded:
        logger.warning("no threshold-dependent questions; keeping tau=0.5")
        accuracy = _percent(const_correct, total)
        return SweepResult(0.5, list(grid), [accuracy] * len(grid), 0)

    def answer_at(combiner, means, tau):
        votes = [YES if m >= tau else NO for m in means]
        if combiner is OpType.AND:
            return YES if all(v == YES for v in votes) else NO
        if combiner is OpType.OR:
            return YES if any(v == YES for v in votes) else NO
        return votes[0]

    accuracies = []
    for tau in grid:
        hits = sum(1 for combiner, means, gold in thresholded
                   if answer_at(combiner, means, tau) == gold)
        accuracies.append(_percent(const_correct + hits, total))

    best_tau, best_acc = grid[0], accuracies[0]
    for tau, acc in zip(grid[1:], accuracies[1:]):
        if acc > best_acc:
            best_tau, best_acc = tau, acc
    return SweepResult(best_tau, list(grid), accuracies, len(thresholded))
