"""Command-line entry points.

Subcommands:
  answer      answer one question against one scene graph
  evaluate    run a dataset and write report.json (+ records, figures)
  synth       generate a synthetic oracle dataset from a spec file
  split       build a phrasing-generalization train/test split
  dump-paths  emit lattices and n-best paths for one question
  sweep-tau   pick the verify threshold on a dev set
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import answer as answer_mod
from .dataset import load_dataset, save_dataset
from .evaluate import RunConfig, evaluate, parse_tau_grid, sweep_threshold
from .fileio import iter_write_jsonl, write_json
from .lattice import BuildError, build_lattices
from .decode import list_viterbi, viterbi
from .opseq import (ParseError, TemplateGrammar, default_grammar,
                    parse_program_string, parse_question)
from .sgraph import load_scene_graph, load_vocabulary
from .splits import load_pairs, make_generalization_splits
from .synth import GenerationError, SynthSpec, gen_synthetic


def _load_grammar(path):
    return TemplateGrammar.load(path) if path else default_grammar()


def _load_graph(args):
    sg_path = Path(args.scene_graph)
    vocab_path = args.vocabulary or sg_path.parent / "vocabulary.json"
    if not Path(vocab_path).exists():
        raise FileNotFoundError(
            f"no vocabulary at {vocab_path}; pass --vocabulary explicitly")
    vocabulary = load_vocabulary(vocab_path)
    return load_scene_graph(sg_path, vocabulary)


def _resolve_sequence(args, vocabulary):
    if getattr(args, "program", None):
        return parse_program_string(args.program)
    grammar = _load_grammar(getattr(args, "templates", None))
    seq = parse_question(args.question, grammar, vocabulary)
    if seq is None:
        raise ParseError(f"no template matches {args.question!r}")
    return seq


def _emit(doc, out=None):
    text = json.dumps(doc, indent=2, sort_keys=True)
    if out:
        Path(out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)


def _cmd_answer(args):
    sg = _load_graph(args)
    seq = _resolve_sequence(args, sg.vocabulary)
    cfg = answer_mod.AnswerConfig(verify_threshold=args.tau, nbest=args.nbest)
    result = answer_mod.produce_answer(seq, sg, cfg)
    attention = result.attention.weights
    _emit({
        "answer": result.answer.text,
        "question_type": result.answer.question_type,
        "confidence": result.answer.confidence,
        "final_regions": [int(r) for r in result.answer.final_regions],
        "program": seq.render(),
        "attention": {str(i): float(w) for i, w in enumerate(attention) if w > 0},
    })
    return 0


def _cmd_evaluate(args):
    ds = load_dataset(args.dataset)
    if args.split:
        ds = ds.subset(split=args.split)
    cfg = RunConfig(program_source=args.programs, tau=args.tau,
                    nbest=args.nbest, workers=args.workers,
                    fallback_to_gold=args.fallback_gold, split=args.split)
    report = evaluate(ds, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_json(report.aggregates, out / "report.json")
    if args.jsonl:
        iter_write_jsonl(report.records, out / "records.jsonl")
    if args.figures:
        from .figures import render_report_figures
        render_report_figures(report, out)
    print(json.dumps(report.aggregates["accuracy"], indent=2, sort_keys=True))
    return 0


def _cmd_synth(args):
    spec = SynthSpec.from_dict(json.loads(Path(args.spec).read_text(encoding="utf-8")))
    ds = gen_synthetic(spec)
    save_dataset(ds, args.out)
    print(f"wrote {len(ds.questions)} questions over "
          f"{len(ds.scene_graphs)} images to {args.out}")
    return 0


def _cmd_split(args):
    ds = load_dataset(args.dataset)
    pairs = load_pairs(args.pairs)
    result = make_generalization_splits(ds, pairs, min_count=args.min_count)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    by_qid = {q.qid: q for q in ds.questions}
    for name, qids in (("train", result.train_qids), ("test", result.test_qids)):
        iter_write_jsonl((by_qid[qid].to_dict() for qid in qids),
                         out / f"{name}_questions.jsonl")
    write_json(result.summary, out / "summary.json")
    print(json.dumps(result.summary, indent=2, sort_keys=True))
    return 0


def _cmd_dump_paths(args):
    sg = _load_graph(args)
    seq = _resolve_sequence(args, sg.vocabulary)
    lattices = build_lattices(seq, sg)
    paths = [[p.to_dict() for p in list_viterbi(lat, args.nbest)]
             for lat in lattices]
    _emit({
        "program": seq.render(),
        "lattices": [lat.to_dict() for lat in lattices],
        "paths": paths,
        "best": [viterbi(lat).to_dict() for lat in lattices],
    }, args.out)
    return 0


def _cmd_sweep_tau(args):
    ds = load_dataset(args.dev)
    cfg = RunConfig(program_source=args.programs)
    result = sweep_threshold(ds, parse_tau_grid(args.grid), cfg)
    _emit(result.to_dict())
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="vlr",
                                     description="Lattice retrieval over "
                                                 "probabilistic scene graphs")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("answer", help="answer one question")
    p.add_argument("--scene-graph", required=True)
    p.add_argument("--question", default=None)
    p.add_argument("--program", default=None)
    p.add_argument("--vocabulary", default=None)
    p.add_argument("--templates", default=None)
    p.add_argument("--nbest", type=int, default=5)
    p.add_argument("--tau", type=float, default=0.5)
    p.set_defaults(func=_cmd_answer)

    p = sub.add_parser("evaluate", help="evaluate a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--programs", choices=("gold", "parsed"), default="gold")
    p.add_argument("--tau", type=float, default=0.5)
    p.add_argument("--nbest", type=int, default=5)
    p.add_argument("--out", required=True)
    p.add_argument("--jsonl", action="store_true",
                   help="also write per-question records.jsonl")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--figures", action=argparse.BooleanOptionalAction,
                   default=True, help="render PNG figures next to the report")
    p.add_argument("--fallback-gold", action="store_true",
                   help="parsed mode: fall back to the gold program on "
                        "parse failure")
    p.add_argument("--split", default=None)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--spec", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("split", help="build a generalization split")
    p.add_argument("--dataset", required=True)
    p.add_argument("--pairs", required=True)
    p.add_argument("--min-count", type=int, default=10)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_split)

    p = sub.add_parser("dump-paths", help="dump lattices and n-best paths")
    p.add_argument("--scene-graph", required=True)
    p.add_argument("--question", default=None)
    p.add_argument("--program", default=None)
    p.add_argument("--vocabulary", default=None)
    p.add_argument("--templates", default=None)
    p.add_argument("--nbest", type=int, default=5)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_dump_paths)

    p = sub.add_parser("sweep-tau", help="sweep the verify threshold")
    p.add_argument("--dev", required=True)
    p.add_argument("--grid", default="0.05:0.95:0.05")
    p.add_argument("--programs", choices=("gold", "parsed"), default="gold")
    p.set_defaults(func=_cmd_sweep_tau)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command in ("answer", "dump-paths") \
            and not (args.question or args.program):
        parser.error("one of --question or --program is required")
    try:
        return args.func(args)
    except (ValueError, OSError, ParseError, BuildError, GenerationError,
            KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
