"""Question answering by lattice retrieval over probabilistic scene graphs.

Questions compile to operation sequences, operation sequences to weighted
region lattices, and a Viterbi decode of each lattice yields the inference
chain, the answer, and the attention map used for grounding evaluation.
"""

from .answer import (Answer, AnswerConfig, AttentionMap, attention_map,
                     produce_answer)
from .dataset import Dataset, QuestionRecord, load_dataset, save_dataset
from .decode import (ViterbiPath, geometric_mean_score, list_viterbi, viterbi)
from .evaluate import (EvalReport, RunConfig, evaluate, parse_tau_grid,
                       sweep_threshold)
from .grounding import (GroundingAnnotation, GroundingConfig,
                        gqa_style_grounding, grounding_prf, iou,
                        iou_grounding_score)
from .lattice import EPSILON, BuildError, Lattice, LatticeLayer, build_lattices
from .opseq import (OperationSequence, OperationTuple, OpType, ParseError,
                    ProgramTemplate, Template, TemplateGrammar,
                    default_grammar, generalize_template, parse_program_string,
                    parse_question, render_program_string)
from .sgraph import (SceneGraph, Vocabulary, VocabularyError, load_scene_graph,
                     load_vocabulary, normalize_name, save_scene_graph,
                     save_vocabulary)
from .splits import (SplitResult, VariantMatcher, VariantPair, load_pairs,
                     make_generalization_splits)
from .synth import DEFAULT_MIX, GenerationError, SynthSpec, gen_synthetic

__version__ = "0.1.0"

__all__ = [
    "Answer", "AnswerConfig", "AttentionMap", "attention_map", "produce_answer",
    "Dataset", "QuestionRecord", "load_dataset", "save_dataset",
    "ViterbiPath", "geometric_mean_score", "list_viterbi", "viterbi",
    "EvalReport", "RunConfig", "evaluate", "parse_tau_grid", "sweep_threshold",
    "GroundingAnnotation", "GroundingConfig", "gqa_style_grounding",
    "grounding_prf", "iou", "iou_grounding_score",
    "EPSILON", "BuildError", "Lattice", "LatticeLayer", "build_lattices",
    "OperationSequence", "OperationTuple", "OpType", "ParseError",
    "ProgramTemplate", "Template", "TemplateGrammar", "default_grammar",
    "generalize_template", "parse_program_string", "parse_question",
    "render_program_string",
    "SceneGraph", "Vocabulary", "VocabularyError", "load_scene_graph",
    "load_vocabulary", "normalize_name", "save_scene_graph", "save_vocabulary",
    "SplitResult", "VariantMatcher", "VariantPair", "load_pairs",
    "make_generalization_splits",
    "DEFAULT_MIX", "GenerationError", "SynthSpec", "gen_synthetic",
    "__version__",
]
