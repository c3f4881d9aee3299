"""Synthetic decoding suites for tests and acceptance checks.

The efficacy suite plants one rare target word per utterance whose acoustics
lose to a common competitor word by a controlled margin. Margins are chosen
per utterance from the exactly replayed non-acoustic score gap of each fusion
configuration, so which configurations rescue which utterances is fixed by
construction:

  class A: rescued by FST boosting alone (and by everything stronger)
  class B: rescued only with biased-LM fusion on the small list; the large
           list dilutes the bias below the margin again
  class C: never rescued

With 80/60/60 utterances per class the expected B-WER ladder is
1.0 -> 0.6 -> 0.3 for acoustic-only -> +FST -> +FST+biased-LM on the
100-distractor lists, and 0.6 for the biased-LM run on 2000-distractor lists.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np

from ctxbias.biasfst import BiasingFst
from ctxbias.biastrie import BiasTrie
from ctxbias.biaslists import extract_rare_vocab, make_eval_list
from ctxbias.decoder import FusionWeights, PosteriorLattice, replay_components
from ctxbias.lm import BiasedLMConfig, BiasedNGramScorer, NGramLM
from ctxbias.rng import SplitMix64
from ctxbias.wordpiece import Vocab, tokenize

MARKER = "▁"

N_FILLERS = 10
N_CONT = 20
BOOST = 2.0
W_BASE = FusionWeights(0.0, 0.0, beam=8, nbest=4)
W_FST = FusionWeights(1.0, 0.0, beam=8, nbest=4)
W_S5 = FusionWeights(1.0, 0.5, beam=8, nbest=4)
BETA = 0.5

CLASS_SPLIT = {"A": 0.4, "B": 0.3, "C": 0.3}


@dataclass
class EfficacyUtt:
    utt_id: str
    ref_words: List[str]
    target: str
    margin_class: str
    lattice: PosteriorLattice
    list_small: List[str]
    list_large: List[str]


@dataclass
class EfficacySuite:
    vocab: Vocab
    lm: NGramLM
    utts: List[EfficacyUtt]
    boost: float = BOOST
    beta: float = BETA


def _filler_words() -> List[str]:
    return [f"f{chr(ord('a') + i)}" for i in range(N_FILLERS)]


def _rare_word(i: int, cont: int) -> str:
    return f"r{i:04d}k{cont:02d}"


def build_efficacy_vocab(n_rare: int) -> Vocab:
    pieces = [MARKER + f for f in _filler_words()]
    pieces.append(MARKER + "da")
    pieces.append("km")
    pieces += [MARKER + f"r{i:04d}" for i in range(n_rare)]
    pieces += [f"k{j:02d}" for j in range(N_CONT)]
    return Vocab(tuple(pieces))


def build_efficacy_suite(n_utts: int = 200, n_rare: int = 2500, seed: int = 20210520) -> EfficacySuite:
    assert n_utts <= n_rare
    gen = SplitMix64(seed)
    vocab = build_efficacy_vocab(n_rare)
    fillers = _filler_words()
    competitor = "dakm"
    rare_words = [_rare_word(i, i % N_CONT) for i in range(n_rare)]

    # frequency corpus: fillers and the competitor are common, everything
    # else occurs once
    freq_corpus = []
    for w in fillers + [competitor]:
        freq_corpus += [w] * 1000
    freq_corpus += rare_words
    rv = extract_rare_vocab(freq_corpus, N_FILLERS + 1)

    # LM text corpus: filler bigrams plus a couple of competitor mentions;
    # rare words only ever get unigram-floor mass
    lm_sentences = []
    for a in fillers:
        for b in fillers:
            lm_sentences.append([a, b])
    lm_sentences += [[competitor]] * 2
    lm_corpus = [tuple(t for w in s for t in tokenize(w, vocab)) for s in lm_sentences]
    lm = NGramLM.train(lm_corpus, 2, vocab.size)

    comp_tokens = tokenize(competitor, vocab)
    d = vocab.size
    n_a = round(n_utts * CLASS_SPLIT["A"])
    n_b = round(n_utts * CLASS_SPLIT["B"])
    classes = ["A"] * n_a + ["B"] * n_b + ["C"] * (n_utts - n_a - n_b)

    utts = []
    for i in range(n_utts):
        utt_id = f"utt{i:04d}"
        target = rare_words[i]
        fa = fillers[gen.randbelow(N_FILLERS)]
        fb = fillers[gen.randbelow(N_FILLERS)]
        ref = [fa, target, fb]

        small = make_eval_list(ref, rv, 100, seed, utt_id)
        large = make_eval_list(ref, rv, 2000, seed, utt_id)

        tgt_tokens = tokenize(target, vocab)
        path_t = tokenize(fa, vocab) + tgt_tokens + tokenize(fb, vocab)
        path_c = tokenize(fa, vocab) + comp_tokens + tokenize(fb, vocab)
        steps = len(path_t) + 1

        # non-acoustic advantage of the target path over the competitor path
        # under each fusion configuration, replayed exactly
        lattice0 = _skeleton_lattice(utt_id, steps, d)
        gaps = {}
        for name, weights, word_list in (
            ("fst", W_FST, small.sorted_words()),
            ("s5_small", W_S5, small.sorted_words()),
            ("s5_large", W_S5, large.sorted_words()),
        ):
            token_list = [tokenize(w, vocab) for w in word_list]
            trie = BiasTrie(token_list, vocab)
            fst = BiasingFst(token_list, BOOST, vocab)
            scorer = None
            if weights.mu > 0:
                scorer = BiasedNGramScorer(lm, trie, BiasedLMConfig(BETA))
            _, fst_t, lm_t = replay_components(path_t, True, lattice0, vocab, trie, fst, scorer)
            _, fst_c, lm_c = replay_components(path_c, True, lattice0, vocab, trie, fst, scorer)
            gaps[name] = weights.lambda_fst * (fst_t - fst_c) + weights.mu * (lm_t - lm_c)

        assert gaps["fst"] > 0.5
        assert gaps["s5_small"] > max(gaps["fst"], gaps["s5_large"]) + 0.3, gaps
        low = min(gaps.values())
        assert low > 0.2

        cls = classes[i]
        if cls == "A":
            margin = 0.5 * low
        elif cls == "B":
            margin = 0.5 * (max(gaps["fst"], gaps["s5_large"]) + gaps["s5_small"])
        else:
            margin = max(gaps.values()) + 2.0

        lattice = _efficacy_lattice(utt_id, vocab, path_t, path_c, margin)
        utts.append(EfficacyUtt(utt_id, ref, target, cls, lattice, small.sorted_words(), large.sorted_words()))

    return EfficacySuite(vocab, lm, utts)


def _skeleton_lattice(utt_id: str, steps: int, d: int) -> PosteriorLattice:
    rows = np.full((steps, d + 1), 1.0 / (d + 1))
    return PosteriorLattice(utt_id, np.log(rows))


def _efficacy_lattice(
    utt_id: str, vocab: Vocab, path_t: tuple, path_c: tuple, margin: float
) -> PosteriorLattice:
    """Competitor pieces dominate; the target's word-start piece trails by
    exactly `margin` in log space; everything else shares the leftover."""
    d = vocab.size
    steps = len(path_t) + 1
    rows = np.empty((steps, d + 1))
    for s in range(steps):
        peaks = {}
        if s == steps - 1:
            peaks[d] = 0.95
        elif path_t[s] == path_c[s]:
            peaks[path_c[s]] = 0.9
        else:
            peaks[path_c[s]] = 0.4
            if path_t[s] not in peaks:
                peaks[path_t[s]] = 0.4 * float(np.exp(-margin)) if s == 1 else 0.4
        rest = (1.0 - sum(peaks.values())) / (d + 1 - len(peaks))
        row = np.full(d + 1, rest)
        for tok, p in peaks.items():
            row[tok] = p
        rows[s] = np.log(row)
    return PosteriorLattice(utt_id, rows)


EXPECTED_BWER = {"base": 1.0, "fst": 0.6, "s5_small": 0.3, "s5_large": 0.6}


# -- small end-to-end corpus for CLI tests -----------------------------------


def mini_vocab() -> Vocab:
    return Vocab(
        (
            MARKER + "call",
            MARKER + "play",
            MARKER + "jo",
            MARKER + "ka",
            "e",
            "y",
            "rl",
            MARKER + "mu",
            "sic",
        )
    )


def mini_corpus() -> List[Tuple[str, List[str]]]:
    return [
        ("utt1", ["call", "joe"]),
        ("utt2", ["play", "music"]),
        ("utt3", ["call", "karl"]),
    ]


def lattice_for_words(
    vocab: Vocab, utt_id: str, words: List[str], peak: float = 0.85
) -> PosteriorLattice:
    tokens = [t for w in words for t in tokenize(w, vocab)]
    d = vocab.size
    rows = np.empty((len(tokens) + 1, d + 1))
    for s, tok in enumerate(tokens + [d]):
        p = 0.9 if tok == d else peak
        rest = (1.0 - p) / d
        row = np.full(d + 1, rest)
        row[tok] = p
        rows[s] = np.log(row)
    return PosteriorLattice(utt_id, rows)
