"""Trie over tokenized biasing words with O(1) bias-vector queries.

The trie is immutable after build. Continuation sets are materialized per
node as integer bitsets at build time, so a query is two table reads: the
shared start set and the current node's child set. A cursor is just a node
id; DETACHED means no live partial match (fresh cursors start detached).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, List, Sequence

from .wordpiece import Vocab

DETACHED = -1

TrieCursor = int  # node id, or DETACHED

MAX_BITSET_WIDTH = 65536


@dataclass(frozen=True)
class BiasVector:
    """Binary bias vector halves, each a D-bit integer bitset.

    Bit p of h_start: piece p can start a new biasing word.
    Bit p of h_continue: piece p continues the word in progress.
    """

    h_start: int
    h_continue: int
    width: int

    def start_pieces(self) -> List[int]:
        return _bits(self.h_start)

    def continue_pieces(self) -> List[int]:
        return _bits(self.h_continue)


def _bits(mask: int) -> List[int]:
    out = []
    p = 0
    while mask:
        if mask & 1:
            out.append(p)
        mask >>= 1
        p += 1
    return out


class BiasTrie:
    """Prefix tree over the token sequences of a biasing list."""

    def __init__(self, words: Iterable[Sequence[int]], vocab: Vocab):
        if vocab.size > MAX_BITSET_WIDTH:
            raise ValueError(f"vocab size {vocab.size} exceeds bitset width {MAX_BITSET_WIDTH}")
        self.vocab = vocab
        self._starts = vocab.word_start_flags()
        self.children: List[dict] = [{}]  # node id -> {piece: child id}
        self.end_flags: List[bool] = [False]
        self.root = 0
        for seq in words:
            self._insert(seq)
        # lookup[n] = bitset of pieces on arcs out of node n
        nbytes = (vocab.size + 7) // 8
        self.lookup: List[int] = [0] * len(self.children)
        for node, kids in enumerate(self.children):
            if len(kids) > 8:
                buf = bytearray(nbytes)
                for piece in kids:
                    buf[piece >> 3] |= 1 << (piece & 7)
                self.lookup[node] = int.from_bytes(buf, "little")
            else:
                mask = 0
                for piece in kids:
                    mask |= 1 << piece
                self.lookup[node] = mask
        self.start_set = self.lookup[self.root]

    def _insert(self, seq: Sequence[int]) -> None:
        if len(seq) == 0:
            raise ValueError("empty token sequence in biasing list")
        if not self._starts[seq[0]]:
            raise ValueError(
                f"biasing word tokenization must begin with a word-start piece, got {seq!r}"
            )
        for tok in seq[1:]:
            if self._starts[tok]:
                raise ValueError(
                    f"word-start piece {tok} inside a biasing word tokenization {seq!r}"
                )
        node = self.root
        for tok in seq:
            nxt = self.children[node].get(tok)
            if nxt is None:
                nxt = len(self.children)
                self.children.append({})
                self.end_flags.append(False)
                self.children[node][tok] = nxt
            node = nxt
        self.end_flags[node] = True

    @property
    def node_count(self) -> int:
        return len(self.children)

    def fresh_cursor(self) -> TrieCursor:
        return DETACHED

    def advance(self, cursor: TrieCursor, token: int) -> TrieCursor:
        """Word-start tokens re-enter from the root regardless of the current
        state; word-internal tokens follow a child arc or detach."""
        if self._starts[token]:
            return self.children[self.root].get(token, DETACHED)
        if cursor == DETACHED:
            return DETACHED
        return self.children[cursor].get(token, DETACHED)

    def query(self, cursor: TrieCursor) -> BiasVector:
        cont = self.lookup[cursor] if cursor != DETACHED else 0
        return BiasVector(self.start_set, cont, self.vocab.size)

    def at_word_end(self, cursor: TrieCursor) -> bool:
        return cursor != DETACHED and self.end_flags[cursor]

    def active_set(self, cursor: TrieCursor) -> int:
        """Bitset the biased LM interpolates toward: continuations while a
        partial match is live, otherwise the start set."""
        if cursor != DETACHED:
            return self.lookup[cursor]
        return self.start_set

    def dump(self, out) -> None:
        """Diagnostic dump, one JSON node record per line."""
        import json

        for node, kids in enumerate(self.children):
            rec = {
                "id": node,
                "children": {str(p): c for p, c in sorted(kids.items())},
                "end_of_word": self.end_flags[node],
            }
            out.write(json.dumps(rec, sort_keys=True) + "\n")


def build_trie(words: Iterable[Sequence[int]], vocab: Vocab) -> BiasTrie:
    return BiasTrie(words, vocab)
