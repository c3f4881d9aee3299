"""Decode-time contextual biasing toolkit.

Builds trie and WFST views of per-utterance biasing lists, fuses their
scores with acoustic posteriors and LM scores in a beam-search decoder,
constructs biasing lists from corpora, and scores hypotheses with the
biased/unbiased WER decomposition.
"""

from ._backend import BACKEND
from .biasfst import BiasingFst, build_biasing_fst
from .biastrie import DETACHED, BiasTrie, BiasVector, build_trie
from .biaslists import (
    BiasingList,
    RareVocab,
    TrainingBiasSample,
    extract_rare_vocab,
    make_eval_list,
    make_training_sample,
)
from .decoder import (
    DecodeConfig,
    FusionWeights,
    Hypothesis,
    PosteriorLattice,
    beam_search,
    decode_corpus,
    load_lattices,
)
from .lm import BiasedLMConfig, NGramLM, biased_lm_score, train_ngram
from .metrics import AlignmentOp, WerReport, align, biased_wer, report_format
from .wordpiece import Vocab, detokenize, load_vocab, tokenize

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "BiasingFst",
    "BiasingList",
    "BiasTrie",
    "BiasVector",
    "BiasedLMConfig",
    "DecodeConfig",
    "DETACHED",
    "FusionWeights",
    "Hypothesis",
    "NGramLM",
    "PosteriorLattice",
    "RareVocab",
    "TrainingBiasSample",
    "Vocab",
    "WerReport",
    "AlignmentOp",
    "align",
    "beam_search",
    "biased_lm_score",
    "biased_wer",
    "build_biasing_fst",
    "build_trie",
    "decode_corpus",
    "detokenize",
    "extract_rare_vocab",
    "load_lattices",
    "load_vocab",
    "make_eval_list",
    "make_training_sample",
    "report_format",
    "tokenize",
    "train_ngram",
]
