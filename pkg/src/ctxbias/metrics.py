"""WER scoring with the biased/unbiased class decomposition.

Attribution rules: substitutions and deletions follow the reference word's
list membership; insertions follow the inserted hypothesis word's membership.
A substitution whose reference word is out of list therefore counts toward
the unbiased class even when the hypothesis word is in list.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

from ._backend import levenshtein_fill


@dataclass(frozen=True)
class AlignmentOp:
    kind: str  # match | substitution | deletion | insertion
    ref: Optional[str]
    hyp: Optional[str]


def align(ref: Sequence[str], hyp: Sequence[str]) -> List[AlignmentOp]:
    """Minimum-edit alignment with unit costs. Among minimal alignments the
    backtrace prefers match, then substitution, deletion, insertion."""
    ids: Dict[str, int] = {}
    a = [ids.setdefault(w, len(ids)) for w in ref]
    b = [ids.setdefault(w, len(ids)) for w in hyp]
    dist = levenshtein_fill(a, b)
    ops: List[AlignmentOp] = []
    i, j = len(ref), len(hyp)
    while i > 0 or j > 0:
        here = dist[i, j]
        if i > 0 and j > 0 and a[i - 1] == b[j - 1] and dist[i - 1, j - 1] == here:
            ops.append(AlignmentOp("match", ref[i - 1], hyp[j - 1]))
            i -= 1
            j -= 1
        elif i > 0 and j > 0 and dist[i - 1, j - 1] + 1 == here:
            ops.append(AlignmentOp("substitution", ref[i - 1], hyp[j - 1]))
            i -= 1
            j -= 1
        elif i > 0 and dist[i - 1, j] + 1 == here:
            ops.append(AlignmentOp("deletion", ref[i - 1], None))
            i -= 1
        else:
            ops.append(AlignmentOp("insertion", None, hyp[j - 1]))
            j -= 1
    ops.reverse()
    return ops


def edit_distance(ref: Sequence[str], hyp: Sequence[str]) -> int:
    ids: Dict[str, int] = {}
    a = [ids.setdefault(w, len(ids)) for w in ref]
    b = [ids.setdefault(w, len(ids)) for w in hyp]
    return int(levenshtein_fill(a, b)[len(a), len(b)])


@dataclass
class ClassCounts:
    substitutions: int = 0
    deletions: int = 0
    insertions: int = 0
    ref_words: int = 0

    @property
    def errors(self) -> int:
        return self.substitutions + self.deletions + self.insertions

    @property
    def rate(self) -> float:
        if self.ref_words == 0:
            return 0.0
        return self.errors / self.ref_words

    @property
    def degenerate(self) -> bool:
        """No reference words in this class; the reported rate of 0 hides any
        insertion errors, which stay visible in the counts."""
        return self.ref_words == 0

    def add(self, other: "ClassCounts") -> None:
        self.substitutions += other.substitutions
        self.deletions += other.deletions
        self.insertions += other.insertions
        self.ref_words += other.ref_words


@dataclass
class WerReport:
    overall: ClassCounts
    biased: ClassCounts
    unbiased: ClassCounts
    utterances: int = 0

    def add(self, other: "WerReport") -> None:
        self.overall.add(other.overall)
        self.biased.add(other.biased)
        self.unbiased.add(other.unbiased)
        self.utterances += other.utterances

    def to_records(self) -> List[dict]:
        out = []
        for name, c in (("overall", self.overall), ("biased", self.biased), ("unbiased", self.unbiased)):
            out.append(
                {
                    "class": name,
                    "substitutions": c.substitutions,
                    "deletions": c.deletions,
                    "insertions": c.insertions,
                    "errors": c.errors,
                    "ref_words": c.ref_words,
                    "rate": c.rate,
                    "degenerate": c.degenerate,
                }
            )
        return out


def score_pair(ref: Sequence[str], hyp: Sequence[str], biasing: Set[str]) -> WerReport:
    overall = ClassCounts()
    biased = ClassCounts()
    unbiased = ClassCounts()
    for w in ref:
        overall.ref_words += 1
        (biased if w in biasing else unbiased).ref_words += 1
    for op in align(ref, hyp):
        if op.kind == "match":
            continue
        if op.kind == "substitution":
            overall.substitutions += 1
            (biased if op.ref in biasing else unbiased).substitutions += 1
        elif op.kind == "deletion":
            overall.deletions += 1
            (biased if op.ref in biasing else unbiased).deletions += 1
        else:
            overall.insertions += 1
            (biased if op.hyp in biasing else unbiased).insertions += 1
    return WerReport(overall, biased, unbiased, utterances=1)


def biased_wer(pairs: Iterable[Tuple[Sequence[str], Sequence[str], Set[str]]]) -> WerReport:
    """Aggregate report over (reference, hypothesis, biasing set) triples."""
    total = WerReport(ClassCounts(), ClassCounts(), ClassCounts())
    for ref, hyp, biasing in pairs:
        total.add(score_pair(ref, hyp, biasing))
    return total


def report_format(report: WerReport) -> str:
    """Render `WER (U-WER/B-WER)` in percent; rates carry two and one decimal
    places respectively, with a footnote when a class has no reference words."""
    wer = 100.0 * report.overall.rate
    u = 100.0 * report.unbiased.rate
    b = 100.0 * report.biased.rate
    line = f"{wer:.2f} ({u:.1f}/{b:.1f})"
    notes = []
    if report.biased.degenerate:
        notes.append("biased class has no reference words")
    if report.unbiased.degenerate:
        notes.append("unbiased class has no reference words")
    if notes:
        line += "  [*] " + "; ".join(notes)
    return line
