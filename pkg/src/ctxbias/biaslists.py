"""Rare-word extraction and per-utterance biasing-list sampling.

Evaluation lists carry every rare reference word plus N sampled distractors.
Training samples draw 400..800 distractors, keep each rare reference word
with probability 0.6, and zero the whole bias vector with probability 0.1.
All sampling runs on the seeded generator in rng, so identical seeds give
identical lists.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Sequence, Tuple

from .rng import SplitMix64, utterance_seed

logger = logging.getLogger(__name__)

TRAIN_DISTRACTORS = (400, 800)  # inclusive uniform range
REFERENCE_KEEP_PROB = 0.6
ZERO_BIAS_PROB = 0.1


@dataclass(frozen=True)
class RareVocab:
    """Frequency split of a training vocabulary into common and rare words."""

    common: frozenset
    rare: frozenset
    coverage: float
    rare_sorted: tuple = field(repr=False, default=())

    def is_rare(self, word: str) -> bool:
        return word in self.rare


@dataclass(frozen=True)
class BiasingList:
    utt_id: str
    words: frozenset
    provenance: dict  # word -> "reference" | "distractor"

    def sorted_words(self) -> List[str]:
        return sorted(self.words)


@dataclass(frozen=True)
class TrainingBiasSample:
    biasing: BiasingList
    zero_bias: bool


def normalize_word(word: str) -> str:
    return word.strip().strip(".,;:!?\"'()[]").lower()


def extract_rare_vocab(corpus_words: Iterable[str], k: int) -> RareVocab:
    """Split by corpus frequency: the top k words are common, the rest rare.
    Frequency ties at the boundary break lexicographically."""
    if k < 1:
        raise ValueError("k must be at least 1")
    counts: Dict[str, int] = {}
    total = 0
    for raw in corpus_words:
        w = normalize_word(raw)
        if not w:
            continue
        counts[w] = counts.get(w, 0) + 1
        total += 1
    if not counts:
        raise ValueError("empty corpus")
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    if k >= len(ranked):
        logger.warning("k=%d covers the whole %d-word vocabulary; rare set is empty", k, len(ranked))
        k = len(ranked)
    common = frozenset(w for w, _ in ranked[:k])
    rare = frozenset(w for w, _ in ranked[k:])
    covered = sum(c for w, c in counts.items() if w in common)
    return RareVocab(common, rare, covered / total, tuple(sorted(rare)))


def rare_reference_words(reference: Sequence[str], rv: RareVocab) -> List[str]:
    seen = []
    for raw in reference:
        w = normalize_word(raw)
        if w and rv.is_rare(w) and w not in seen:
            seen.append(w)
    return seen


def _sample_distractors(pool: Sequence[str], n: int, gen: SplitMix64) -> List[str]:
    if n > len(pool):
        logger.warning("distractor pool has %d words, requested %d; taking all", len(pool), n)
        n = len(pool)
    return gen.sample(list(pool), n)


def make_eval_list(
    reference: Sequence[str], rv: RareVocab, n: int, seed: int, utt_id: str = ""
) -> BiasingList:
    """All rare reference words plus n distinct distractors sampled without
    replacement from the remaining rare vocabulary."""
    if n < 0:
        raise ValueError("distractor count must be non-negative")
    gen = SplitMix64(utterance_seed(seed, utt_id) if utt_id else seed)
    refs = rare_reference_words(reference, rv)
    included = set(refs)
    pool = [w for w in rv.rare_sorted if w not in included]
    distractors = _sample_distractors(pool, n, gen)
    provenance = {w: "reference" for w in refs}
    provenance.update({w: "distractor" for w in distractors})
    return BiasingList(utt_id, frozenset(provenance), provenance)


def make_training_sample(
    reference: Sequence[str], rv: RareVocab, seed: int, utt_id: str = ""
) -> TrainingBiasSample:
    """Training-time list: uniform 400..800 distractors, 40% reference-word
    removal, 10% whole-vector zeroing. Draw order is fixed: distractor count,
    zero flag, per-reference keeps, then the distractor sample."""
    gen = SplitMix64(utterance_seed(seed, utt_id) if utt_id else seed)
    n = gen.randint(*TRAIN_DISTRACTORS)
    zero = gen.bernoulli(ZERO_BIAS_PROB)
    refs = [w for w in rare_reference_words(reference, rv) if gen.bernoulli(REFERENCE_KEEP_PROB)]
    included = set(refs)
    pool = [w for w in rv.rare_sorted if w not in included]
    distractors = _sample_distractors(pool, n, gen)
    provenance = {w: "reference" for w in refs}
    provenance.update({w: "distractor" for w in distractors})
    return TrainingBiasSample(BiasingList(utt_id, frozenset(provenance), provenance), zero)


def list_coverage(refs: Sequence[Tuple[str, Sequence[str]]], lists: Dict[str, "frozenset | set | list"]) -> Tuple[int, int]:
    """(covered, total) reference word tokens whose word is in the
    utterance's biasing list."""
    covered = 0
    total = 0
    for utt, words in refs:
        members = set(lists.get(utt, ()))
        for w in words:
            total += 1
            if w in members:
                covered += 1
    return covered, total


# -- file formats ------------------------------------------------------------


def read_reference_corpus(lines: Iterable[str]) -> List[Tuple[str, List[str]]]:
    """`<utt-id> <space-separated words>` per line."""
    out = []
    for raw in lines:
        line = raw.strip()
        if not line:
            continue
        parts = line.split()
        out.append((parts[0], [w.lower() for w in parts[1:]]))
    return out


def write_biasing_lists(out, lists: Iterable[BiasingList]) -> None:
    """`<utt-id>\\t<comma-separated words>` per line, words sorted."""
    for bl in lists:
        out.write(f"{bl.utt_id}\t{','.join(bl.sorted_words())}\n")


def read_biasing_lists(lines: Iterable[str]) -> Dict[str, List[str]]:
    """Inverse of write_biasing_lists; extra tab columns (the train-mode zero
    flag) are ignored."""
    out: Dict[str, List[str]] = {}
    for raw in lines:
        line = raw.rstrip("\n")
        if not line.strip():
            continue
        fields = line.split("\t")
        words = fields[1] if len(fields) > 1 else ""
        out[fields[0].strip()] = [w.strip().lower() for w in words.split(",") if w.strip()]
    return out
