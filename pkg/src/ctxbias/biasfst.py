"""Per-utterance keyword-boosting automaton with failure accounting.

Structure: the deterministic, epsilon-free acceptor of the biasing words'
piece sequences, built directly in that form and then shrunk by merging
states with identical (end flag, depth, outgoing arcs) signatures. Depth is
part of the signature because every state carries the boost accumulated on
its root path and the failure weight is its exact negation; merging across
depths would leave both ill-defined.

Scoring: each matched arc is worth a constant per-piece boost. Abandoning a
partial match refunds everything accumulated for it, so only words matched
end to end keep their boost. A word-start token is a word-boundary event:
the match in progress is committed if it sits on an end-of-word state and
refunded otherwise, then the token may re-enter from the start state. Under
the "on_completion" policy nothing is paid out per arc; the whole word boost
is granted at the boundary that confirms the match instead.

Bookkeeping is exact: the automaton counts matched pieces in integers and
scores are always the count scaled once by the boost, so a refund cancels a
partial match bit for bit no matter what the boost value is.
"""

from __future__ import annotations

from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np

from .wordpiece import Vocab

FstCursor = int  # state id

POLICIES = ("immediate", "on_completion")


class BiasingFst:
    def __init__(
        self,
        words: Iterable[Sequence[int]],
        boost: float,
        vocab: Vocab,
        policy: str = "immediate",
    ):
        if boost < 0:
            raise ValueError("negative boost (de-boosting) is not supported")
        if policy not in POLICIES:
            raise ValueError(f"unknown boost policy {policy!r}")
        self.boost = float(boost)
        self.vocab = vocab
        self.policy = policy
        self._starts = vocab.word_start_flags()

        arcs, ends, depths = self._build_minimized(list(words))
        self.arcs: List[Dict[int, int]] = arcs  # state -> {piece: next state}
        self.end_flags: List[bool] = ends
        self.start = 0
        # pieces matched along the root path; the boost accumulated at a
        # state is exactly boost * accum_count
        self.accum_count: List[int] = list(depths)
        self.fail_weight = [0.0 - self.boost * d for d in depths]

        d = vocab.size
        self._start_mask = np.array(self._starts, dtype=bool)
        root_entry = np.zeros(d, dtype=np.int64)
        for piece in self.arcs[self.start]:
            root_entry[piece] = 1
        self._root_entry = root_entry
        self._count_cache: Dict[int, np.ndarray] = {}

    def _build_minimized(self, words: List[Sequence[int]]):
        # raw trie
        children: List[Dict[int, int]] = [{}]
        end: List[bool] = [False]
        depth: List[int] = [0]
        for seq in words:
            if len(seq) == 0:
                raise ValueError("empty token sequence in biasing list")
            if not self._starts[seq[0]]:
                raise ValueError(f"biasing word must begin with a word-start piece: {seq!r}")
            if any(self._starts[t] for t in seq[1:]):
                raise ValueError(f"word-start piece inside a biasing word: {seq!r}")
            node = 0
            for tok in seq:
                nxt = children[node].get(tok)
                if nxt is None:
                    nxt = len(children)
                    children.append({})
                    end.append(False)
                    depth.append(depth[node] + 1)
                    children[node][tok] = nxt
                node = nxt
            end[node] = True

        # suffix sharing: hash-cons states bottom-up on
        # (end flag, depth, sorted outgoing arcs)
        order = sorted(range(len(children)), key=lambda n: -depth[n])
        canon_of: Dict[int, int] = {}
        signatures: Dict[tuple, int] = {}
        canon_arcs: List[Dict[int, int]] = []
        canon_end: List[bool] = []
        canon_depth: List[int] = []
        for node in order:
            sig = (
                end[node],
                depth[node],
                tuple(sorted((p, canon_of[c]) for p, c in children[node].items())),
            )
            state = signatures.get(sig)
            if state is None:
                state = len(canon_arcs)
                signatures[sig] = state
                canon_arcs.append({p: canon_of[c] for p, c in children[node].items()})
                canon_end.append(end[node])
                canon_depth.append(depth[node])
            canon_of[node] = state

        # re-index so the start state is 0 and ids follow a BFS order
        root = canon_of[0]
        remap = {root: 0}
        bfs = [root]
        for s in bfs:
            for _, c in sorted(canon_arcs[s].items()):
                if c not in remap:
                    remap[c] = len(remap)
                    bfs.append(c)
        n = len(remap)
        arcs: List[Dict[int, int]] = [dict() for _ in range(n)]
        ends = [False] * n
        depths = [0] * n
        for old, new in remap.items():
            arcs[new] = {p: remap[c] for p, c in canon_arcs[old].items()}
            ends[new] = canon_end[old]
            depths[new] = canon_depth[old]
        return arcs, ends, depths

    @property
    def state_count(self) -> int:
        return len(self.arcs)

    def start_cursor(self) -> FstCursor:
        return self.start

    def match_set(self, state: int) -> frozenset:
        return frozenset(self.arcs[state])

    def word_completion_check(self, cursor: FstCursor) -> bool:
        return self.end_flags[cursor]

    def cursor_accumulated(self, cursor: FstCursor) -> float:
        return self.boost * self.accum_count[cursor]

    def _commit_count(self, state: int) -> int:
        """Piece-count delta paid at a word-boundary event on `state`."""
        if self.policy == "immediate":
            # completed matches keep their boost, partial ones are refunded
            return 0 if self.end_flags[state] else -self.accum_count[state]
        return self.accum_count[state] if self.end_flags[state] else 0

    def advance_count(self, cursor: FstCursor, token: int, is_word_start: bool) -> Tuple[FstCursor, int]:
        """One token step in exact piece-count units."""
        match_gain = 1 if self.policy == "immediate" else 0
        if is_word_start:
            delta = self._commit_count(cursor)
            nxt = self.arcs[self.start].get(token)
            if nxt is not None:
                return nxt, delta + match_gain
            return self.start, delta
        nxt = self.arcs[cursor].get(token)
        if nxt is not None:
            return nxt, match_gain
        if self.policy == "immediate":
            return self.start, -self.accum_count[cursor]
        return self.start, 0

    def advance(self, cursor: FstCursor, token: int, is_word_start: bool) -> Tuple[FstCursor, float]:
        """One token step; returns the new cursor and the score delta
        (boost times the piece-count delta)."""
        nxt, delta = self.advance_count(cursor, token, is_word_start)
        return nxt, self.boost * delta

    def finalize_count(self, cursor: FstCursor) -> int:
        """Count delta applied when a hypothesis terminates: same
        commit-or-refund rule as a word boundary."""
        return self._commit_count(cursor)

    def finalize(self, cursor: FstCursor) -> float:
        return self.boost * self.finalize_count(cursor)

    def next_state(self, cursor: FstCursor, token: int, is_word_start: bool) -> FstCursor:
        if is_word_start:
            return self.arcs[self.start].get(token, self.start)
        return self.arcs[cursor].get(token, self.start)

    def count_vector(self, cursor: FstCursor) -> np.ndarray:
        """Piece-count deltas for every extension token at once; slot D holds
        the end-of-sequence finalization delta. Entries agree exactly with
        advance_count()/finalize_count()."""
        vec = self._count_cache.get(cursor)
        if vec is not None:
            return vec
        d = self.vocab.size
        vec = np.empty(d + 1, dtype=np.int64)
        commit = self._commit_count(cursor)
        if self.policy == "immediate":
            vec[:d] = np.where(self._start_mask, commit + self._root_entry, -self.accum_count[cursor])
            for tok in self.arcs[cursor]:
                vec[tok] = 1
        else:
            vec[:d] = np.where(self._start_mask, commit, 0)
            for tok in self.arcs[cursor]:
                vec[tok] = 0
        vec[d] = self.finalize_count(cursor)
        vec.setflags(write=False)
        self._count_cache[cursor] = vec
        return vec

    def dump(self, out) -> None:
        """Diagnostic arc dump: `src dst piece weight`, `src FAIL weight`,
        `state END` lines."""
        for s, kids in enumerate(self.arcs):
            for piece, dst in sorted(kids.items()):
                out.write(f"{s} {dst} {piece} {self.boost!r}\n")
        for s in range(1, self.state_count):
            out.write(f"{s} FAIL {self.fail_weight[s]!r}\n")
        for s in range(self.state_count):
            if self.end_flags[s]:
                out.write(f"{s} END\n")


def build_biasing_fst(
    words: Iterable[Sequence[int]],
    boost: float,
    vocab: Vocab,
    policy: str = "immediate",
) -> BiasingFst:
    return BiasingFst(words, boost, vocab, policy)
