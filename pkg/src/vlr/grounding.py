"""Attention-based grounding metrics over annotated ground-truth boxes.

A question's attention map is compared against annotated boxes in three
categories: objects mentioned in the question (Q), the short answer (A),
and the full answer (FA).  A region counts as matching a ground-truth box
when their IoU exceeds a threshold (0.5 by default).  The per-box variant
mirrors a widely used evaluation that sums attention once per matched
ground-truth box, so overlapping boxes can push a question's score past
1.0; it is reproduced here as the documented approximation it is.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class GroundingConfig:
    iou_threshold: float = 0.5

    def validate(self):
        if not 0.0 < self.iou_threshold <= 1.0:
            raise ValueError("IoU threshold must lie in (0, 1]")


@dataclass
class GroundingAnnotation:
    """Ground-truth boxes per annotation category for one question."""

    q: list = field(default_factory=list)
    a: list = field(default_factory=list)
    fa: list = field(default_factory=list)

    def pooled(self):
        return list(self.q) + list(self.a) + list(self.fa)

    def to_dict(self, qid=None):
        doc = {} if qid is None else {"qid": qid}
        doc.update({"Q": [list(map(float, b)) for b in self.q],
                    "A": [list(map(float, b)) for b in self.a],
                    "FA": [list(map(float, b)) for b in self.fa]})
        return doc

    @classmethod
    def from_dict(cls, doc):
        return cls(doc.get("Q", []), doc.get("A", []), doc.get("FA", []))


def iou(box_a, box_b):
    """Intersection over union of two [x0, y0, x1, y1] boxes.

    Degenerate boxes (zero-area union) score 0 rather than raising.
    """
    ax0, ay0, ax1, ay1 = box_a
    bx0, by0, bx1, by1 = box_b
    ix0, iy0 = max(ax0, bx0), max(ay0, by0)
    ix1, iy1 = min(ax1, bx1), min(ay1, by1)
    inter = max(0.0, ix1 - ix0) * max(0.0, iy1 - iy0)
    area_a = max(0.0, ax1 - ax0) * max(0.0, ay1 - ay0)
    area_b = max(0.0, bx1 - bx0) * max(0.0, by1 - by0)
    union = area_a + area_b - inter
    if union <= 0.0:
        return 0.0
    return float(inter / union)


def _weights(attention):
    return attention.weights if hasattr(attention, "weights") else np.asarray(attention)


def _matches(box, gt_boxes, threshold):
    return any(iou(box, g) > threshold for g in gt_boxes)


def iou_grounding_score(attention, gt_boxes, sg, cfg=None):
    """Attention mass on regions that overlap any ground-truth box.

    Each attended region is counted once, so the score stays within the
    attention total (1.0 for a normalized map).  Returns 0.0 when gt_boxes
    is empty; averaging policy for empty categories lives with the caller.
    """
    cfg = cfg or GroundingConfig()
    cfg.validate()
    weights = _weights(attention)
    if not gt_boxes:
        return 0.0
    score = 0.0
    for region in np.nonzero(weights)[0]:
        if _matches(sg.boxes[region], gt_boxes, cfg.iou_threshold):
            score += float(weights[region])
    return score


def gqa_style_grounding(attention, gt_boxes, sg, cfg=None):
    """Per-box attention sum: each matched ground-truth box adds its mass.

    Overlapping ground-truth boxes can each absorb the same attended
    region, so values above 1.0 are possible by design.
    """
    cfg = cfg or GroundingConfig()
    cfg.validate()
    weights = _weights(attention)
    score = 0.0
    for gt in gt_boxes:
        for region in np.nonzero(weights)[0]:
            if iou(sg.boxes[region], gt) > cfg.iou_threshold:
                score += float(weights[region])
    return score


def grounding_prf(attention, gt_boxes, sg, cfg=None):
    """Precision, recall, and F1 of attended regions versus annotated boxes.

    Precision: attended regions matching some box / attended regions.
    Recall: boxes matched by some attended region / boxes.  Empty sides
    yield zeros rather than errors.
    """
    cfg = cfg or GroundingConfig()
    cfg.validate()
    weights = _weights(attention)
    attended = list(np.nonzero(weights)[0])
    matched_regions = sum(
        1 for r in attended if _matches(sg.boxes[r], gt_boxes, cfg.iou_threshold))
    matched_boxes = sum(
        1 for g in gt_boxes
        if any(iou(sg.boxes[r], g) > cfg.iou_threshold for r in attended))
    precision = matched_regions / len(attended) if attended else 0.0
    recall = matched_boxes / len(gt_boxes) if gt_boxes else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return float(precision), float(recall), float(f1)
