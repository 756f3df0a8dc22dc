"""Operation sequences: the symbolic programs behind questions.

A program is a chain of (operation type, argument) tuples written as
``(select; cat) -> (relate; _,next to,s) -> (query; name)``.  Ten fundamental
operation types are recognized; composites found in question corpora reduce
to these.  This module parses and renders the notation, matches question
text against a template grammar, and abstracts concrete programs into
placeholder templates for split building.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .sgraph import normalize_name

logger = logging.getLogger(__name__)


class OpType(str, Enum):
    SELECT = "select"
    FILTER = "filter"
    RELATE = "relate"
    VERIFY = "verify"
    QUERY = "query"
    EXIST = "exist"
    AND = "and"
    OR = "or"
    CHOOSE = "choose"
    COMPARE = "compare"


#: Tuples that close a branch and produce an answer.
ANSWER_OPS = {OpType.VERIFY, OpType.QUERY, OpType.EXIST, OpType.CHOOSE, OpType.COMPARE}
#: Terminals that combine two decoded branches.
COMBINER_OPS = {OpType.AND, OpType.OR}
#: Terminals that require a second lattice.
DUAL_TERMINALS = COMBINER_OPS | {OpType.COMPARE}

#: Argument spellings that are notation, not vocabulary: never generalized.
FUNCTIONAL_ARGS = {"_", "name", "same", "different", "yes", "no",
                   "OBJ", "OBJ2", "ATTR", "ATTR2", "REL"}

RELATE_DIRECTIONS = ("s", "o")


class ParseError(ValueError):
    """Raised for malformed program strings; carries the offending span."""

    def __init__(self, message, span=""):
        self.span = span
        super().__init__(f"{message}: {span!r}" if span else message)


@dataclass(frozen=True)
class OperationTuple:
    """One program step.

    `argument` keeps the raw comma-joined payload ("dog,next to,s" for a
    relate, "red,green" for a choose).  `qualifier` carries the optional head
    modifier, e.g. the attribute category in "(verify color; red)".
    """

    op_type: OpType
    argument: str = "_"
    qualifier: str | None = None
    negated: bool = False

    def render(self):
        head = self.op_type.value if self.qualifier is None \
            else f"{self.op_type.value} {self.qualifier}"
        if self.op_type in COMBINER_OPS:
            return f"({head})"
        arg = f"not({self.argument})" if self.negated else self.argument
        return f"({head}; {arg})"

    @property
    def args(self):
        return tuple(a.strip() for a in self.argument.split(","))

    def relate_parts(self):
        """(target, relation, direction) of a relate tuple."""
        parts = self.args
        if self.op_type is not OpType.RELATE or len(parts) != 3:
            raise ValueError(f"not a relate tuple: {self.render()}")
        return parts


@dataclass(frozen=True)
class OperationSequence:
    """A parsed program: tuples plus the optional dual-lattice split point.

    branch_split is the index where the second branch begins; it is set
    exactly when the terminal tuple needs two decoded paths (and/or/compare).
    """

    tuples: tuple[OperationTuple, ...]
    branch_split: int | None = None

    @property
    def terminal(self):
        return self.tuples[-1]

    @property
    def is_dual(self):
        return self.branch_split is not None

    def branches(self):
        """Tuples per branch, excluding the shared combiner terminal."""
        if not self.is_dual:
            return [self.tuples]
        first = self.tuples[:self.branch_split]
        rest = self.tuples[self.branch_split:]
        if rest and rest[-1].op_type in DUAL_TERMINALS:
            rest = rest[:-1]
        return [first, rest]

    def render(self):
        return render_program_string(self)


_TUPLE_RE = re.compile(r"^\(\s*(?P<head>[^;()]+?)\s*(?:;\s*(?P<arg>[^()]*(?:\([^()]*\))?[^()]*?)\s*)?\)$")
_NOT_RE = re.compile(r"^not\(\s*(?P<inner>.*?)\s*\)$")


def _parse_tuple(span):
    m = _TUPLE_RE.match(span.strip())
    if m is None:
        raise ParseError("malformed operation tuple", span)
    head_tokens = m.group("head").split()
    try:
        op_type = OpType(head_tokens[0])
    except ValueError:
        raise ParseError(f"unknown operation type {head_tokens[0]!r}", span) from None
    qualifier = " ".join(head_tokens[1:]) or None
    raw_arg = m.group("arg")

    if op_type in COMBINER_OPS:
        if raw_arg not in (None, "", "_"):
            raise ParseError("and/or tuples carry no argument", span)
        return OperationTuple(op_type, "", qualifier)

    if raw_arg is None or raw_arg == "":
        raise ParseError("missing argument", span)
    negated = False
    not_match = _NOT_RE.match(raw_arg)
    if not_match:
        negated = True
        raw_arg = not_match.group("inner")
    argument = ",".join(part.strip() for part in raw_arg.split(","))

    if op_type is OpType.RELATE:
        parts = argument.split(",")
        if len(parts) != 3 or parts[2] not in RELATE_DIRECTIONS:
            raise ParseError("relate needs target,relation,direction with direction in {s,o}", span)
    if op_type is OpType.CHOOSE and len(argument.split(",")) != 2:
        raise ParseError("choose needs exactly two options", span)
    return OperationTuple(op_type, argument, qualifier, negated)


def _find_branch_split(tuples, text=""):
    """Second-branch start for dual-terminal sequences.

    Branches begin with select, and only there, so the second select starts
    branch two.  For and/or this coincides with the tuple after the first
    branch's own answer op.
    """
    select_positions = [i for i, t in enumerate(tuples) if t.op_type is OpType.SELECT]
    if len(select_positions) < 2:
        raise ParseError("dual-branch terminal without a second branch", text)
    return select_positions[1]


def parse_program_string(text):
    """Parse ``"(t; a) -> ..."`` notation into an OperationSequence."""
    if not str(text).strip():
        raise ParseError("empty program")
    spans = [s.strip() for s in str(text).split("->")]
    tuples = tuple(_parse_tuple(s) for s in spans)
    branch_split = None
    if tuples[-1].op_type in DUAL_TERMINALS:
        branch_split = _find_branch_split(tuples, text)
    return OperationSequence(tuples, branch_split)


def render_program_string(seq):
    """Inverse of parse_program_string, up to canonical spacing."""
    return " -> ".join(t.render() for t in seq.tuples)


# -- question templates ------------------------------------------------------

_SLOT_NAMES = ("OBJ", "OBJ2", "ATTR", "ATTR2", "REL", "OPT1", "OPT2")
_SLOT_RE = re.compile(r"\{(" + "|".join(_SLOT_NAMES) + r")\}")
# Slot captures: lowercase words, possibly multi-token; no commas so option
# lists and clause boundaries stay unambiguous.
_SLOT_PATTERN = r"[a-z0-9_'][a-z0-9_' -]*?"


@dataclass
class Template:
    """One grammar entry: a surface pattern plus a program skeleton."""

    pattern: str
    opseq: str
    index: int = 0
    regex: re.Pattern = field(init=False, repr=False)
    literal_tokens: int = field(init=False)

    def __post_init__(self):
        self.regex = _compile_pattern(self.pattern)
        stripped = _SLOT_RE.sub(" ", self.pattern).lower()
        self.literal_tokens = len(stripped.split())


def _compile_pattern(pattern):
    out = []
    # split() alternates literal text and captured slot names
    for i, piece in enumerate(_SLOT_RE.split(pattern)):
        if i % 2:
            out.append(f"(?P<{piece}>{_SLOT_PATTERN})")
        else:
            lit = re.escape(piece.lower())
            # "a(n)" style optional suffixes become non-capturing groups.
            lit = re.sub(r"\\\((.*?)\\\)", r"(?:\1)?", lit)
            out.append(lit)
    return re.compile("".join(out))


class TemplateGrammar:
    """Ordered template table; file order breaks literal-count ties."""

    def __init__(self, entries):
        self.templates = [Template(e["pattern"], e["opseq"], i)
                          for i, e in enumerate(entries)]

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls(json.load(fh))

    def save(self, path):
        doc = [{"pattern": t.pattern, "opseq": t.opseq} for t in self.templates]
        Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def default_grammar():
    """Grammar shipped with the package; replaceable per dataset."""
    return TemplateGrammar.load(Path(__file__).parent / "data" / "default_templates.json")


def parse_question(text, grammar, vocabulary=None):
    """Match question text against the grammar and instantiate its program.

    The longest literal-token match wins; ties fall back to file order.
    Captured slot values are normalized against the vocabulary when one is
    given (unmatched surfaces are kept verbatim and will simply score zero
    downstream).  Returns None when no template matches.
    """
    normalized = " ".join(str(text).strip().lower().split())
    best = None
    best_match = None
    for template in grammar.templates:
        m = template.regex.fullmatch(normalized)
        if m is None:
            continue
        key = (template.literal_tokens, -template.index)
        if best is None or key > (best.literal_tokens, -best.index):
            best, best_match = template, m
    if best is None:
        return None

    program = best.opseq
    for slot, captured in best_match.groupdict().items():
        if captured is None:
            continue
        value = captured.strip()
        if vocabulary is not None:
            value = normalize_name(value, vocabulary) or value
        program = program.replace("{" + slot + "}", value)
    return parse_program_string(program)


# -- template generalization -------------------------------------------------

@dataclass(frozen=True)
class ProgramTemplate:
    """A program with vocabulary names replaced by placeholder symbols."""

    tuples: tuple[OperationTuple, ...]
    branch_split: int | None = None

    def render(self):
        return " -> ".join(t.render() for t in self.tuples)

    def key(self):
        return self.render()

    def to_sequence(self):
        return OperationSequence(self.tuples, self.branch_split)

    def __str__(self):
        return self.render()


def _placeholder_for(name, vocabulary):
    if name in FUNCTIONAL_ARGS:
        return name
    if vocabulary.is_object_class(name) or vocabulary.is_object_category(name):
        return "OBJ"
    if vocabulary.is_attribute(name) or name in vocabulary.category_index:
        return "ATTR"
    if vocabulary.is_relation(name):
        return "REL"
    logger.warning("argument %r matches no vocabulary kind; left verbatim", name)
    return name


def generalize_template(seq, vocabulary):
    """Abstract concrete names into OBJ/ATTR/REL placeholders.

    Operation types, qualifiers, negation flags, and relate direction
    markers are preserved; only vocabulary names are replaced.  Applying
    the function to an already-generalized sequence is a no-op.
    """
    out = []
    for t in seq.tuples:
        if t.op_type in COMBINER_OPS:
            out.append(t)
            continue
        if t.op_type is OpType.RELATE:
            target, relation, direction = t.relate_parts()
            target = _placeholder_for(target, vocabulary)
            relation = "REL" if relation == "REL" or vocabulary.is_relation(relation) \
                else _placeholder_for(relation, vocabulary)
            argument = f"{target},{relation},{direction}"
        else:
            argument = ",".join(_placeholder_for(a, vocabulary) for a in t.args)
        out.append(OperationTuple(t.op_type, argument, t.qualifier, t.negated))
    return ProgramTemplate(tuple(out), seq.branch_split)
