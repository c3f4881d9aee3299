"""WordPiece vocabulary and deterministic greedy segmentation.

Every other module works on piece indices, so this is the one place that
knows about piece strings and the word-start marker convention.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, List, Sequence, TextIO

DEFAULT_MARKER = "▁"  # ▁

TokenSeq = tuple  # tuple[int, ...]; indices into a Vocab


class VocabError(ValueError):
    pass


class UnsegmentableWord(ValueError):
    def __init__(self, word: str, offset: int):
        super().__init__(f"cannot segment {word!r}: no piece matches at offset {offset}")
        self.word = word
        self.offset = offset


class MalformedSequence(ValueError):
    pass


@dataclass(frozen=True)
class Vocab:
    """Immutable piece inventory. Index i always maps to pieces[i]."""

    pieces: tuple
    marker: str = DEFAULT_MARKER

    @property
    def size(self) -> int:
        return len(self.pieces)

    def __post_init__(self):
        object.__setattr__(self, "_index", {p: i for i, p in enumerate(self.pieces)})
        starts = tuple(p.startswith(self.marker) for p in self.pieces)
        object.__setattr__(self, "_is_start", starts)
        # content = piece with the marker stripped, used for prefix matching
        content = tuple(p[len(self.marker):] if s else p for p, s in zip(self.pieces, starts))
        object.__setattr__(self, "_content", content)
        # content -> index maps per class make greedy matching O(max piece
        # length) per position instead of a full vocabulary scan
        start_map = {}
        cont_map = {}
        for i, (c, s) in enumerate(zip(content, starts)):
            (start_map if s else cont_map)[c] = i
        object.__setattr__(self, "_start_map", start_map)
        object.__setattr__(self, "_cont_map", cont_map)
        object.__setattr__(self, "_max_start", max((len(c) for c in start_map), default=0))
        object.__setattr__(self, "_max_cont", max((len(c) for c in cont_map), default=0))

    def is_word_start(self, token: int) -> bool:
        return self._is_start[token]

    def piece(self, token: int) -> str:
        return self.pieces[token]

    def index(self, piece: str) -> int:
        return self._index[piece]

    def word_start_flags(self) -> tuple:
        return self._is_start


def load_vocab(source: TextIO | Iterable[str], marker: str = DEFAULT_MARKER) -> Vocab:
    """Read one piece per line. Rejects duplicates (naming both line numbers),
    empty lines, and empty files."""
    pieces: List[str] = []
    seen: dict = {}
    lineno = 0
    for lineno, raw in enumerate(source, start=1):
        piece = raw.rstrip("\n")
        if piece == "":
            raise VocabError(f"empty line {lineno} in vocabulary")
        if piece in seen:
            raise VocabError(
                f"duplicate piece {piece!r} on lines {seen[piece]} and {lineno}"
            )
        seen[piece] = lineno
        pieces.append(piece)
    if not pieces:
        raise VocabError("empty vocabulary")
    return Vocab(tuple(pieces), marker)


def tokenize(word: str, vocab: Vocab) -> TokenSeq:
    """Greedy longest-match segmentation.

    The first piece is the longest word-start piece whose content prefixes the
    word; every later piece is the longest word-internal piece prefixing the
    remainder. Zero-length matches are skipped since they make no progress.
    """
    word = word.lower()
    if not word or any(c.isspace() for c in word):
        raise ValueError(f"tokenize expects a non-empty whitespace-free word, got {word!r}")
    tokens = []
    pos = 0
    want_start = True
    n = len(word)
    while pos < n:
        table = vocab._start_map if want_start else vocab._cont_map
        limit = vocab._max_start if want_start else vocab._max_cont
        best = -1
        for length in range(min(limit, n - pos), 0, -1):
            idx = table.get(word[pos : pos + length])
            if idx is not None:
                best = idx
                pos += length
                break
        if best < 0:
            raise UnsegmentableWord(word, pos)
        tokens.append(best)
        want_start = False
    return tuple(tokens)


def detokenize(seq: Sequence[int], vocab: Vocab) -> List[str]:
    """Inverse of tokenize: a word boundary opens at each word-start piece."""
    words: List[str] = []
    current: List[str] = []
    for token in seq:
        if token < 0 or token >= vocab.size:
            raise MalformedSequence(f"token {token} outside vocabulary of size {vocab.size}")
        if vocab._is_start[token]:
            if current:
                words.append("".join(current))
            current = [vocab._content[token]]
        else:
            if not current:
                raise MalformedSequence(
                    f"sequence begins with word-internal piece {vocab.pieces[token]!r}"
                )
            current.append(vocab._content[token])
    if current:
        words.append("".join(current))
    return words


def tokenize_words(words: Sequence[str], vocab: Vocab) -> TokenSeq:
    """Tokenize several words into one flat sequence."""
    out = []
    for w in words:
        out.extend(tokenize(w, vocab))
    return tuple(out)
