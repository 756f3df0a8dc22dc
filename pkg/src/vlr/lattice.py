"""Compile operation sequences over a scene graph into decodable lattices.

A lattice has one layer per emission-producing tuple.  Layer 0 carries only
an emission vector; every later layer additionally carries the transition
matrix connecting it to the previous layer (identity for attribute steps,
a hollow relation matrix for relate steps).  Emissions and relation hop
probabilities are floored at EPSILON when the lattice is built so that
log-domain decoding only sees -inf on structurally forbidden moves: the
relation diagonal and identity off-diagonals.
"""

from __future__ import annotations

import logging
import weakref

import numpy as np

from . import sgraph
from .opseq import (ANSWER_OPS, COMBINER_OPS, DUAL_TERMINALS, OperationSequence,
                    OperationTuple, OpType)
from .sgraph import (OBJECT_TO_SUBJECT, SOURCE_UNIFORM, SUBJECT_TO_OBJECT,
                     EmissionVector, identity_transition, transition_for_relation)

logger = logging.getLogger(__name__)

#: Probability floor applied to emissions and non-structural transition zeros.
EPSILON = 1e-12


class BuildError(ValueError):
    """Raised when an operation sequence cannot be compiled to a lattice."""


class LatticeLayer:
    """One time step: floored emissions, incoming transition, source tuple."""

    __slots__ = ("emission", "transition", "source")

    def __init__(self, emission, transition, source):
        self.emission = emission
        self.transition = transition
        self.source = source


class Lattice:
    """A weighted DAG over image regions, one column of nodes per layer."""

    def __init__(self, layers, terminal_op, prior=1.0):
        if not layers:
            raise BuildError("lattice needs at least one layer")
        self.layers = layers
        self.terminal_op = terminal_op
        self.prior = float(prior)

    @property
    def num_layers(self):
        return len(self.layers)

    @property
    def num_regions(self):
        return int(self.layers[0].emission.shape[0])

    @property
    def num_factors(self):
        """Multiplied probabilities along a path: emissions plus relation hops.

        The start prior and identity hops equal 1 and are excluded, matching
        the factor count used by the geometric-mean answer score.
        """
        relation_hops = sum(1 for layer in self.layers
                            if layer.transition is not None and layer.transition.kind == "relation")
        return self.num_layers + relation_hops

    def to_dict(self):
        """JSON document used by the dump-paths CLI mode."""
        layers = []
        for layer in self.layers:
            if layer.transition is None:
                kind, nonzeros = None, []
            else:
                kind = layer.transition.kind
                values = layer.transition.values
                nonzeros = [[int(i), int(j), float(values[i, j])]
                            for i, j in zip(*np.nonzero(values))]
            layers.append({
                "emissions": [float(v) for v in layer.emission],
                "transition_kind": kind,
                "transition_nonzeros": nonzeros,
                "source_tuple": layer.source.render(),
            })
        return {"layers": layers, "prior": self.prior}


def _floor(values):
    return np.maximum(values, EPSILON)


def _floored_relation(matrix):
    """Relation transitions: off-diagonal floored, diagonal stays impossible."""
    values = _floor(matrix.values)
    np.fill_diagonal(values, 0.0)
    return sgraph.TransitionMatrix(values, "relation", matrix.name)


# Transition matrices are frozen once built, so lattices over the same graph
# share one instance per (relation, direction) plus one identity; editing a
# graph's tensors in place afterwards would leave these stale.
_transition_cache = weakref.WeakKeyDictionary()


def _graph_cache(sg):
    cache = _transition_cache.get(sg)
    if cache is None:
        cache = _transition_cache[sg] = {}
    return cache


def _shared_identity(sg):
    cache = _graph_cache(sg)
    matrix = cache.get("identity")
    if matrix is None:
        matrix = cache["identity"] = identity_transition(sg.num_regions)
    return matrix


def _shared_relation(sg, relation, direction):
    cache = _graph_cache(sg)
    key = (relation, direction)
    matrix = cache.get(key)
    if matrix is None:
        matrix = cache[key] = _floored_relation(
            transition_for_relation(sg, relation, direction))
    return matrix


def _resolve_object_emission(sg, raw_name):
    """Emission for a name that may be an object class or object category."""
    if raw_name == "_":
        return EmissionVector(np.ones(sg.num_regions), SOURCE_UNIFORM, "_")
    name = sgraph.normalize_name(raw_name, sg.vocabulary) or raw_name
    if sg.vocabulary.is_object_category(name):
        return sgraph.emission_for_category(sg, name)
    return sgraph.emission_for_class(sg, name)


def _resolve_attribute_emission(sg, qualifier, raw_name, negated):
    name = sgraph.normalize_name(raw_name, sg.vocabulary) or raw_name
    category = qualifier
    if category is not None:
        category = sgraph.normalize_name(category, sg.vocabulary) or category
    return sgraph.emission_for_attribute(sg, category, name, negated=negated)


def _build_branch(branch, terminal_op, sg):
    """Compile one branch's tuples into a Lattice."""
    layers = []

    def append(emission, transition_kind, source, relation=None, direction=None):
        if not layers:
            transition = None
        elif transition_kind == "identity":
            transition = _shared_identity(sg)
        else:
            transition = _shared_relation(sg, relation, direction)
        layers.append(LatticeLayer(_floor(emission.values.astype(np.float64)),
                                   transition, source))

    for t in branch:
        if t.op_type is OpType.SELECT:
            if layers:
                raise BuildError(f"select may only start a branch: {t.render()}")
            append(_resolve_object_emission(sg, t.argument), None, t)
        elif t.op_type is OpType.FILTER:
            append(_resolve_attribute_emission(sg, t.qualifier, t.argument, t.negated),
                   "identity", t)
        elif t.op_type is OpType.RELATE:
            if not layers:
                raise BuildError("relate needs a preceding layer to move from")
            target, relation, marker = t.relate_parts()
            direction = SUBJECT_TO_OBJECT if marker == "s" else OBJECT_TO_SUBJECT
            append(_resolve_object_emission(sg, target), "relation", t,
                   relation=relation, direction=direction)
        elif t.op_type in (OpType.VERIFY, OpType.EXIST):
            # verify on an attribute compiles to a filter layer before the
            # terminal; verify/exist on an object adds an object layer; a
            # bare "_" adds nothing and just closes the branch.
            if t.argument != "_":
                name = sgraph.normalize_name(t.argument, sg.vocabulary) or t.argument
                if t.qualifier is not None or sg.vocabulary.is_attribute(name):
                    append(_resolve_attribute_emission(
                        sg, t.qualifier, t.argument, t.negated), "identity", t)
                else:
                    append(_resolve_object_emission(sg, t.argument), "identity", t)
            if t is not branch[-1]:
                raise BuildError(f"{t.op_type.value} must terminate its branch")
        elif t.op_type in (OpType.QUERY, OpType.CHOOSE):
            if t is not branch[-1]:
                raise BuildError(f"{t.op_type.value} must terminate its branch")
        else:
            raise BuildError(f"unexpected tuple in branch: {t.render()}")

    if not layers:
        raise BuildError("branch produced no emission layers")
    return Lattice(layers, terminal_op)


def build_lattices(seq, sg):
    """Compile an OperationSequence into one or two lattices.

    Single-terminal sequences produce one lattice whose terminal_op is the
    final tuple.  Sequences ending in and/or/compare split at branch_split
    into two lattices; for and/or each branch keeps its own closing
    verify/exist as terminal_op, while compare serves as the terminal of
    both branches.
    """
    if isinstance(seq, str):
        raise TypeError("build_lattices expects an OperationSequence; parse first")
    tuples = seq.tuples
    terminal = tuples[-1]

    if terminal.op_type in ANSWER_OPS - {OpType.COMPARE}:
        return [_build_branch(list(tuples), terminal, sg)]

    if terminal.op_type in DUAL_TERMINALS:
        if seq.branch_split is None:
            raise BuildError("dual-branch terminal without branch_split")
        branches = seq.branches()
        lattices = []
        for branch in branches:
            branch = list(branch)
            if not branch:
                raise BuildError("empty branch after split")
            if terminal.op_type in COMBINER_OPS:
                if branch[-1].op_type not in (OpType.VERIFY, OpType.EXIST):
                    raise BuildError("and/or branches must close with verify or exist")
                branch_terminal = branch[-1]
            else:
                branch_terminal = terminal
            lattices.append(_build_branch(branch, branch_terminal, sg))
        return lattices

    raise BuildError(f"sequence has no answer-producing terminal: {terminal.render()}")
