"""Language-model scoring for fusion.

Three scorers share one interface (a log-probability vector over the D pieces
plus the end-of-sequence symbol, given the emitted context):

* NGramLM: interpolated absolute-discounting backoff model over WordPieces.
* biased n-gram: the same model with probability mass shifted toward pieces
  the bias trie currently admits. This is the deterministic stand-in that
  lets the full fusion pipeline run without any neural model.
* external scorer: line-protocol client for an out-of-process model.

All distributions include the end-of-sequence symbol as index D, matching the
lattice layout, so the decoder can score termination like any other token.
"""

from __future__ import annotations

import json
import queue
import shlex
import subprocess
import threading
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .biastrie import BiasTrie, TrieCursor

DISCOUNT = 0.75
UNIGRAM_FLOOR = 1e-6


@dataclass(frozen=True)
class BiasedLMConfig:
    """beta: probability mass shifted toward trie-active continuations."""

    beta: float

    def __post_init__(self):
        if not 0.0 <= self.beta < 1.0:
            raise ValueError(f"beta must be in [0, 1), got {self.beta}")


class NGramLM:
    """Backoff n-gram model over piece indices 0..D-1 plus EOS = D.

    Estimation is absolute discounting with discount 0.75, interpolated with
    the next-lower order; unigrams get an additive 1e-6 floor so every symbol
    has finite probability. Per-context distributions sum to one exactly up
    to float rounding.
    """

    def __init__(self, order: int, d: int):
        if not 1 <= order <= 5:
            raise ValueError(f"order must be in [1, 5], got {order}")
        self.order = order
        self.d = d
        self.eos = d
        self.n_symbols = d + 1
        self.unigram_log: Optional[np.ndarray] = None
        self.table: Dict[tuple, Dict[int, float]] = {}
        self.backoff: Dict[tuple, float] = {}
        self._vec_cache: Dict[tuple, np.ndarray] = {}

    # -- training ---------------------------------------------------------

    @classmethod
    def train(cls, corpus: Iterable[Sequence[int]], order: int, d: int) -> "NGramLM":
        lm = cls(order, d)
        counts: List[Dict[tuple, Dict[int, int]]] = [dict() for _ in range(order)]
        n_sentences = 0
        for sent in corpus:
            n_sentences += 1
            seq = tuple(sent) + (lm.eos,)
            for tok in seq:
                if not 0 <= tok <= lm.eos:
                    raise ValueError(f"token {tok} outside symbol range 0..{lm.eos}")
            for i in range(len(seq)):
                for n in range(1, order + 1):
                    if i - n + 1 < 0:
                        break
                    ctx = seq[i - n + 1 : i]
                    by_tok = counts[n - 1].setdefault(ctx, {})
                    by_tok[seq[i]] = by_tok.get(seq[i], 0) + 1
        if n_sentences == 0:
            raise ValueError("empty corpus")

        uni = counts[0].get((), {})
        total = sum(uni.values())
        probs = np.full(lm.n_symbols, UNIGRAM_FLOOR)
        for tok, c in uni.items():
            probs[tok] += c
        probs /= total + UNIGRAM_FLOOR * lm.n_symbols
        lm.unigram_log = np.log(probs)
        # exp(log) round trip keeps this bit-identical with a reloaded model
        lm._lin_unigram = np.exp(lm.unigram_log)

        # build higher orders bottom-up so lower-order scores exist
        for n in range(2, order + 1):
            for ctx, by_tok in sorted(counts[n - 1].items()):
                n_c = sum(by_tok.values())
                t_c = len(by_tok)
                gamma = DISCOUNT * t_c / n_c
                lower = lm._lin_vector(ctx[1:])
                entry = {}
                for tok, c in by_tok.items():
                    p = (c - DISCOUNT) / n_c + gamma * lower[tok]
                    entry[tok] = float(np.log(p))
                lm.table[ctx] = entry
                lm.backoff[ctx] = float(np.log(gamma))
            lm._vec_cache.clear()
        return lm

    # -- scoring ----------------------------------------------------------

    def _lin_vector(self, ctx: tuple) -> np.ndarray:
        """Linear-domain distribution for a context tuple of any length
        below the model order."""
        if len(ctx) == 0:
            return self._lin_unigram
        entry = self.table.get(ctx)
        lower = self._lin_vector(ctx[1:])
        if entry is None:
            return lower
        vec = np.exp(self.backoff[ctx]) * lower
        for tok, logp in entry.items():
            vec[tok] = np.exp(logp)
        return vec

    def log_vector(self, context: Sequence[int]) -> np.ndarray:
        """Log-probability vector over the D+1 symbols given the context."""
        ctx = tuple(context[max(0, len(context) - (self.order - 1)) :]) if self.order > 1 else ()
        cached = self._vec_cache.get(ctx)
        if cached is None:
            if len(self._vec_cache) > 200_000:
                self._vec_cache.clear()
            cached = np.log(self._lin_vector(ctx))
            cached.setflags(write=False)
            self._vec_cache[ctx] = cached
        return cached

    def score(self, context: Sequence[int], token: int) -> float:
        return float(self.log_vector(context)[token])

    # -- serialization ----------------------------------------------------

    def to_json(self) -> str:
        payload = {
            "order": self.order,
            "d": self.d,
            "unigram_log": [repr(x) for x in self.unigram_log.tolist()],
            "table": {
                " ".join(map(str, ctx)): {str(t): repr(lp) for t, lp in sorted(e.items())}
                for ctx, e in sorted(self.table.items())
            },
            "backoff": {" ".join(map(str, ctx)): repr(g) for ctx, g in sorted(self.backoff.items())},
        }
        return json.dumps(payload, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "NGramLM":
        payload = json.loads(text)
        lm = cls(payload["order"], payload["d"])
        lm.unigram_log = np.array([float(x) for x in payload["unigram_log"]])
        lm.unigram_log.setflags(write=False)
        lm._lin_unigram = np.exp(lm.unigram_log)
        for key, entry in payload["table"].items():
            ctx = tuple(int(t) for t in key.split()) if key else ()
            lm.table[ctx] = {int(t): float(lp) for t, lp in entry.items()}
        for key, g in payload["backoff"].items():
            ctx = tuple(int(t) for t in key.split()) if key else ()
            lm.backoff[ctx] = float(g)
        return lm


def train_ngram(corpus: Iterable[Sequence[int]], order: int, d: int) -> NGramLM:
    return NGramLM.train(corpus, order, d)


def biased_log_vector(
    lm_vec: np.ndarray, active_bits: int, beta: float
) -> np.ndarray:
    """Interpolate an LM distribution toward the uniform over the active set.

    out = log((1-beta) * p + beta * U_A); identity when the set is empty or
    beta is zero. Stays a proper distribution over all D+1 symbols.
    """
    if active_bits == 0 or beta == 0.0:
        return lm_vec
    nbytes = (len(lm_vec) + 7) // 8
    bits = np.unpackbits(
        np.frombuffer(active_bits.to_bytes(nbytes, "little"), dtype=np.uint8),
        bitorder="little",
    )[: len(lm_vec)]
    idx = np.nonzero(bits)[0]
    lin = np.exp(lm_vec) * (1.0 - beta)
    lin[idx] += beta / len(idx)
    return np.log(lin)


def biased_lm_score(
    lm: NGramLM,
    cfg: BiasedLMConfig,
    trie: BiasTrie,
    cursor: TrieCursor,
    context: Sequence[int],
    token: int,
) -> float:
    """Trie-conditioned LM score: the active set is h_continue while a match
    is live and h_start otherwise."""
    active = trie.active_set(cursor)
    vec = biased_log_vector(lm.log_vector(context), active, cfg.beta)
    return float(vec[token])


# -- scorer interface used by the decoder ---------------------------------


class NGramScorer:
    def __init__(self, lm: NGramLM):
        self.lm = lm

    def log_vector(self, context: tuple, trie_cursor) -> np.ndarray:
        return self.lm.log_vector(context)


class BiasedNGramScorer:
    def __init__(self, lm: NGramLM, trie: BiasTrie, cfg: BiasedLMConfig):
        self.lm = lm
        self.trie = trie
        self.cfg = cfg
        self._cache: Dict[Tuple[tuple, int], np.ndarray] = {}

    def log_vector(self, context: tuple, trie_cursor) -> np.ndarray:
        active = self.trie.active_set(trie_cursor)
        ctx = tuple(context[max(0, len(context) - (self.lm.order - 1)) :])
        key = (ctx, active)
        vec = self._cache.get(key)
        if vec is None:
            if len(self._cache) > 200_000:
                self._cache.clear()
            vec = biased_log_vector(self.lm.log_vector(context), active, self.cfg.beta)
            vec.setflags(write=False)
            self._cache[key] = vec
        return vec


# -- external scorer protocol ----------------------------------------------


class ScorerSessionError(RuntimeError):
    """Any failure of an external scorer session; fails the current utterance."""


class VersionMismatch(ScorerSessionError):
    pass


class ProtocolError(ScorerSessionError):
    pass


class ScorerTimeout(ScorerSessionError):
    pass


class NormalizationError(ScorerSessionError):
    pass


NORM_TOLERANCE = 1e-4


class ExternalScorerSession:
    """Client for the line protocol spoken on a child process's stdin/stdout.

    HELLO v1 D=<d>                 -> OK v1 D=<d>
    BIAS <id> <word,word,...>      -> OK <id>
    SCORE <req> <bias|-> <ctx...>  -> SCORES <req> <d+1 log-probs>
    BYE                            (child exits)

    Requests carry monotonically increasing ids; responses must echo them.
    """

    def __init__(self, command: str, d: int, timeout: float = 10.0):
        self.command = command
        self.d = d
        self.timeout = timeout
        self._proc: Optional[subprocess.Popen] = None
        self._lines: "queue.Queue[Optional[str]]" = queue.Queue()
        self._req_id = 0

    def start(self) -> None:
        self._proc = subprocess.Popen(
            shlex.split(self.command),
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            bufsize=1,
        )
        t = threading.Thread(target=self._reader, daemon=True)
        t.start()
        self._send(f"HELLO v1 D={self.d}")
        reply = self._recv()
        parts = reply.split()
        if len(parts) != 3 or parts[0] != "OK" or parts[1] != "v1" or not parts[2].startswith("D="):
            raise ProtocolError(f"bad handshake reply: {reply!r}")
        their_d = int(parts[2][2:])
        if their_d != self.d:
            raise VersionMismatch(f"scorer vocabulary size {their_d} != expected {self.d}")

    def _reader(self) -> None:
        assert self._proc is not None and self._proc.stdout is not None
        for line in self._proc.stdout:
            self._lines.put(line.rstrip("\n"))
        self._lines.put(None)

    def _send(self, line: str) -> None:
        if self._proc is None or self._proc.stdin is None:
            raise ProtocolError("session not started")
        try:
            self._proc.stdin.write(line + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as e:
            raise ProtocolError(f"scorer pipe closed: {e}") from e

    def _recv(self) -> str:
        try:
            line = self._lines.get(timeout=self.timeout)
        except queue.Empty:
            raise ScorerTimeout(f"no reply within {self.timeout}s") from None
        if line is None:
            raise ProtocolError("scorer closed its output stream")
        return line

    def register_bias(self, bias_id: str, words: Sequence[str]) -> None:
        self._send(f"BIAS {bias_id} {','.join(words)}")
        reply = self._recv()
        if reply.split() != ["OK", bias_id]:
            raise ProtocolError(f"bad BIAS reply: {reply!r}")

    def score(self, context: Sequence[int], bias_id: Optional[str]) -> np.ndarray:
        self._req_id += 1
        rid = self._req_id
        ctx = " ".join(str(t) for t in context)
        self._send(f"SCORE {rid} {bias_id or '-'} {ctx}".rstrip())
        reply = self._recv()
        parts = reply.split()
        if len(parts) < 2 or parts[0] != "SCORES":
            raise ProtocolError(f"bad SCORE reply: {reply!r}")
        if int(parts[1]) != rid:
            raise ProtocolError(f"response id {parts[1]} does not match request {rid}")
        vals = parts[2:]
        if len(vals) != self.d + 1:
            raise ProtocolError(f"expected {self.d + 1} log-probs, got {len(vals)}")
        vec = np.array([float(v) for v in vals])
        total = float(np.exp(vec).sum())
        if abs(total - 1.0) > NORM_TOLERANCE:
            raise NormalizationError(f"response probabilities sum to {total}")
        return vec

    def close(self) -> None:
        if self._proc is None:
            return
        try:
            if self._proc.stdin is not None:
                self._proc.stdin.write("BYE\n")
                self._proc.stdin.flush()
        except (BrokenPipeError, OSError):
            pass
        try:
            self._proc.wait(timeout=2.0)
        except subprocess.TimeoutExpired:
            self._proc.kill()
            self._proc.wait()
        self._proc = None

    @property
    def alive(self) -> bool:
        return self._proc is not None and self._proc.poll() is None


class ExternalScorer:
    """Decoder-facing adapter; caches one vector per context per bias list."""

    def __init__(self, session: ExternalScorerSession, bias_id: Optional[str]):
        self.session = session
        self.bias_id = bias_id
        self._cache: Dict[tuple, np.ndarray] = {}

    def log_vector(self, context: tuple, trie_cursor) -> np.ndarray:
        key = tuple(context)
        vec = self._cache.get(key)
        if vec is None:
            vec = self.session.score(context, self.bias_id)
            vec.setflags(write=False)
            self._cache[key] = vec
        return vec
