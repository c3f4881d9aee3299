"""Label-synchronous beam search with shallow fusion of biasing scores.

Each step extends every live hypothesis with every piece and the
end-of-sequence symbol, adds the acoustic log-posterior, the boosting
automaton's delta, and the LM score, and only then prunes to the beam, so a
boosted hypothesis can survive pruning it would otherwise lose. Score
components are kept unweighted on every hypothesis; the fused total is always
recombined from them, which makes weight sweeps and exact replay checks
possible after decoding.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from ._backend import fuse_scores
from .biasfst import BiasingFst
from .biastrie import DETACHED, BiasTrie
from .lm import (
    BiasedLMConfig,
    BiasedNGramScorer,
    ExternalScorer,
    ExternalScorerSession,
    NGramLM,
    NGramScorer,
    ScorerSessionError,
)
from .wordpiece import Vocab, detokenize, tokenize

logger = logging.getLogger(__name__)

ROW_NORM_TOLERANCE = 1e-4


class LatticeError(ValueError):
    pass


@dataclass
class PosteriorLattice:
    """Per-step token log-posteriors standing in for joiner outputs.

    logp has shape (T, D+1); the last column is the end-of-sequence symbol.
    """

    utt_id: str
    logp: np.ndarray

    def __post_init__(self):
        if self.logp.ndim != 2 or self.logp.shape[0] < 1:
            raise LatticeError(f"lattice {self.utt_id}: need at least one step")
        sums = np.exp(self.logp).sum(axis=1)
        bad = np.where(np.abs(sums - 1.0) > ROW_NORM_TOLERANCE)[0]
        if bad.size:
            raise LatticeError(
                f"lattice {self.utt_id}: step {bad[0]} sums to {sums[bad[0]]:.6f}"
            )

    @property
    def steps(self) -> int:
        return self.logp.shape[0]

    @property
    def dim(self) -> int:
        return self.logp.shape[1] - 1


def _parse_header(header: str) -> Tuple[str, int, int]:
    parts = header.split()
    if (
        len(parts) != 5
        or parts[0] != "LATTICE"
        or parts[1] != "v1"
        or not parts[3].startswith("T=")
        or not parts[4].startswith("D=")
    ):
        raise LatticeError(f"bad lattice header: {header!r}")
    try:
        return parts[2], int(parts[3][2:]), int(parts[4][2:])
    except ValueError:
        raise LatticeError(f"bad lattice header: {header!r}") from None


def load_lattices(lines: Iterable[str]) -> Iterator[PosteriorLattice]:
    """Parse concatenated `LATTICE v1 <utt> T=<int> D=<int>` blocks."""
    it = iter(lines)
    for raw in it:
        header = raw.strip()
        if not header:
            continue
        utt, t, d = _parse_header(header)
        rows = np.empty((t, d + 1))
        for i in range(t):
            try:
                row = next(it)
            except StopIteration:
                raise LatticeError(f"lattice {utt}: truncated after {i} of {t} rows") from None
            vals = row.split()
            if len(vals) != d + 1:
                raise LatticeError(f"lattice {utt}: row {i} has {len(vals)} values, want {d + 1}")
            rows[i] = [float(v) for v in vals]
        yield PosteriorLattice(utt, rows)


def dump_lattice(out, lattice: PosteriorLattice) -> None:
    out.write(f"LATTICE v1 {lattice.utt_id} T={lattice.steps} D={lattice.dim}\n")
    for row in lattice.logp:
        out.write(" ".join(repr(float(x)) for x in row) + "\n")


@dataclass(frozen=True)
class FusionWeights:
    lambda_fst: float = 1.0
    mu: float = 0.3
    beam: int = 8
    nbest: int = 4

    def __post_init__(self):
        if self.lambda_fst < 0 or self.mu < 0:
            raise ValueError("fusion weights must be non-negative")
        if self.beam < 1:
            raise ValueError("beam must be at least 1")
        if not 1 <= self.nbest <= self.beam:
            raise ValueError("nbest must be in [1, beam]")

    def total(self, hyp: "Hypothesis") -> float:
        return hyp.acoustic + self.lambda_fst * hyp.fst + self.mu * hyp.lm


@dataclass(frozen=True)
class Hypothesis:
    """One beam entry; score components are cumulative and unweighted.

    fst_count is the exact matched-piece count behind the fst component
    (fst == boost * fst_count), kept so refunds cancel without float drift.
    """

    tokens: tuple = ()
    acoustic: float = 0.0
    fst: float = 0.0
    lm: float = 0.0
    trie_cursor: int = DETACHED
    fst_cursor: int = 0
    fst_count: int = 0
    terminated: bool = False


def beam_search(
    lattice: PosteriorLattice,
    weights: FusionWeights,
    vocab: Vocab,
    trie: Optional[BiasTrie] = None,
    fst: Optional[BiasingFst] = None,
    scorer=None,
) -> List[Hypothesis]:
    """Decode one lattice; returns up to nbest terminated hypotheses ranked
    by fused total, ties broken lexicographically by token sequence. If no
    hypothesis terminates the single best live one is returned unterminated.
    """
    d = vocab.size
    if lattice.dim != d:
        raise LatticeError(
            f"lattice {lattice.utt_id} has D={lattice.dim}, vocabulary has {d}"
        )
    if fst is None:
        fst = BiasingFst([], 0.0, vocab)
    eos = d
    lam = weights.lambda_fst
    mu = weights.mu
    starts = vocab.word_start_flags()

    hyps: List[Hypothesis] = [Hypothesis(fst_cursor=fst.start_cursor())]
    finished: List[Hypothesis] = []

    for t in range(lattice.steps):
        row = lattice.logp[t]
        per_hyp = []
        flat = np.empty((len(hyps), d + 1))
        for hi, h in enumerate(hyps):
            cv = fst.count_vector(h.fst_cursor)
            fst_comp = fst.boost * (h.fst_count + cv)
            lv = scorer.log_vector(h.tokens, h.trie_cursor) if scorer is not None else None
            totals = fuse_scores(h.acoustic, row, fst_comp, h.lm, lv, lam, mu)
            per_hyp.append((cv, fst_comp, lv))
            flat[hi] = totals

        # end-of-sequence extensions retire into the finished pool; a zero
        # EOS posterior (-inf) cannot terminate a hypothesis
        for hi, h in enumerate(hyps):
            cv, fst_comp, lv = per_hyp[hi]
            done = Hypothesis(
                tokens=h.tokens,
                acoustic=h.acoustic + row[eos],
                fst=float(fst_comp[eos]),
                lm=h.lm + (lv[eos] if lv is not None else 0.0),
                trie_cursor=h.trie_cursor,
                fst_cursor=h.fst_cursor,
                fst_count=h.fst_count + int(cv[eos]),
                terminated=True,
            )
            if weights.total(done) > float("-inf"):
                finished.append(done)
        finished.sort(key=lambda h: (-weights.total(h), h.tokens))
        del finished[weights.nbest :]

        if t == lattice.steps - 1 and finished:
            # piece extensions at the final step only matter for the
            # no-termination fallback, which needs full-length hypotheses
            break

        # prune piece extensions to the beam: score first, lexicographic
        # token order among exact ties
        piece_scores = flat[:, :d]
        n_cand = piece_scores.size
        keep = min(weights.beam, n_cand)
        flat_scores = piece_scores.ravel()
        if keep == n_cand:
            chosen = list(range(n_cand))
            chosen.sort(key=lambda ix: (-flat_scores[ix], hyps[ix // d].tokens, ix % d))
        else:
            cutoff = np.partition(flat_scores, n_cand - keep)[n_cand - keep]
            better = np.where(flat_scores > cutoff)[0]
            ties = np.where(flat_scores == cutoff)[0]
            need = keep - better.size
            tie_list = sorted(ties, key=lambda ix: (hyps[ix // d].tokens, ix % d))[:need]
            chosen = sorted(
                list(better) + tie_list,
                key=lambda ix: (-flat_scores[ix], hyps[ix // d].tokens, ix % d),
            )

        new_hyps = []
        for ix in chosen:
            hi, k = divmod(int(ix), d)
            h = hyps[hi]
            cv, fst_comp, lv = per_hyp[hi]
            new_hyps.append(
                Hypothesis(
                    tokens=h.tokens + (k,),
                    acoustic=h.acoustic + row[k],
                    fst=float(fst_comp[k]),
                    lm=h.lm + (lv[k] if lv is not None else 0.0),
                    trie_cursor=trie.advance(h.trie_cursor, k) if trie is not None else DETACHED,
                    fst_cursor=fst.next_state(h.fst_cursor, k, starts[k]),
                    fst_count=h.fst_count + int(cv[k]),
                    terminated=False,
                )
            )
        hyps = new_hyps

    if finished:
        return finished[: weights.nbest]
    logger.warning("utterance %s: no hypothesis terminated", lattice.utt_id)
    best = min(hyps, key=lambda h: (-weights.total(h), h.tokens))
    return [best]


def replay_components(
    tokens: Sequence[int],
    terminated: bool,
    lattice: PosteriorLattice,
    vocab: Vocab,
    trie: Optional[BiasTrie] = None,
    fst: Optional[BiasingFst] = None,
    scorer=None,
) -> Tuple[float, float, float]:
    """Recompute (acoustic, fst, lm) by replaying a token sequence through
    the lattice, automaton, and LM. Matches the decoder bit for bit."""
    if fst is None:
        fst = BiasingFst([], 0.0, vocab)
    starts = vocab.word_start_flags()
    eos = vocab.size
    ac = 0.0
    count = 0
    lm_s = 0.0
    tc = DETACHED
    fc = fst.start_cursor()
    for t, tok in enumerate(tokens):
        ac = ac + lattice.logp[t][tok]
        if scorer is not None:
            lm_s = lm_s + scorer.log_vector(tuple(tokens[:t]), tc)[tok]
        fc, delta = fst.advance_count(fc, tok, starts[tok])
        count += delta
        if trie is not None:
            tc = trie.advance(tc, tok)
    if terminated:
        ac = ac + lattice.logp[len(tokens)][eos]
        if scorer is not None:
            lm_s = lm_s + scorer.log_vector(tuple(tokens), tc)[eos]
        count += fst.finalize_count(fc)
    return ac, fst.boost * count, lm_s


# -- corpus decoding --------------------------------------------------------


@dataclass
class DecodeConfig:
    """Everything beyond the lattice needed to decode one utterance."""

    weights: FusionWeights = field(default_factory=FusionWeights)
    boost: float = 1.0
    boost_policy: str = "immediate"
    beta: float = 0.0
    lm: Optional[NGramLM] = None
    external_command: Optional[str] = None
    external_timeout: float = 10.0


def _hyp_record(utt_id: str, hyps: List[Hypothesis], weights: FusionWeights, vocab: Vocab) -> dict:
    entries = []
    for h in hyps:
        entries.append(
            {
                "tokens": list(h.tokens),
                "words": detokenize_lenient(h.tokens, vocab),
                "acoustic": h.acoustic,
                "fst": h.fst,
                "lm": h.lm,
                "total": weights.total(h),
                "terminated": h.terminated,
            }
        )
    rec = {"utt": utt_id, "nbest": entries}
    if entries and not entries[0]["terminated"]:
        rec["warning"] = "no terminated hypothesis"
    return rec


def detokenize_lenient(tokens: Sequence[int], vocab: Vocab) -> List[str]:
    """Like wordpiece.detokenize but a leading word-internal run becomes a
    bare fragment word instead of an error; decode paths are unconstrained."""
    words: List[str] = []
    current: List[str] = []
    for tok in tokens:
        if vocab.is_word_start(tok):
            if current:
                words.append("".join(current))
            current = [vocab._content[tok]]
        else:
            current.append(vocab._content[tok])
    if current:
        words.append("".join(current))
    return words


def decode_utterance(
    lattice: PosteriorLattice,
    words: Sequence[str],
    vocab: Vocab,
    config: DecodeConfig,
    session: Optional[ExternalScorerSession] = None,
) -> dict:
    token_words = [tokenize(w, vocab) for w in words]
    trie = BiasTrie(token_words, vocab)
    fst = BiasingFst(token_words, config.boost, vocab, config.boost_policy)
    scorer = None
    if session is not None:
        if words:
            session.register_bias(lattice.utt_id, list(words))
            scorer = ExternalScorer(session, lattice.utt_id)
        else:
            scorer = ExternalScorer(session, None)
    elif config.lm is not None:
        if config.beta > 0.0:
            scorer = BiasedNGramScorer(config.lm, trie, BiasedLMConfig(config.beta))
        else:
            scorer = NGramScorer(config.lm)
    hyps = beam_search(lattice, config.weights, vocab, trie=trie, fst=fst, scorer=scorer)
    return _hyp_record(lattice.utt_id, hyps, config.weights, vocab)


def decode_corpus(
    lattices: Iterable[PosteriorLattice],
    lists: Dict[str, List[str]],
    vocab: Vocab,
    config: DecodeConfig,
    workers: int = 1,
) -> Iterator[dict]:
    """Decode a lattice stream; output records preserve input order.

    A scorer-session failure poisons only the current utterance: the record
    carries an error field and decoding continues with a fresh session.
    """
    if workers > 1 and config.external_command:
        logger.warning("external scorer forces workers=1 session-per-process semantics")
    items = list(lattices)
    lists = dict(lists)

    def run_one(lat: PosteriorLattice, session) -> dict:
        if lat.utt_id not in lists:
            logger.info("utterance %s has no biasing list; using empty list", lat.utt_id)
        words = lists.get(lat.utt_id, [])
        try:
            return decode_utterance(lat, words, vocab, config, session)
        except ScorerSessionError as e:
            logger.error("utterance %s failed on scorer session: %s", lat.utt_id, e)
            return {"utt": lat.utt_id, "error": str(e), "nbest": []}

    if workers <= 1:
        session = None
        try:
            for lat in items:
                if config.external_command and (session is None or not session.alive):
                    if session is not None:
                        session.close()
                    session = ExternalScorerSession(
                        config.external_command, vocab.size, config.external_timeout
                    )
                    session.start()
                yield run_one(lat, session)
        finally:
            if session is not None:
                session.close()
        return

    import concurrent.futures as futures

    with futures.ProcessPoolExecutor(
        max_workers=workers,
        initializer=_worker_init,
        initargs=(vocab, config, lists),
    ) as pool:
        yield from pool.map(_worker_decode, items)


_WORKER_CTX: dict = {}


def _worker_init(vocab: Vocab, config: DecodeConfig, lists: Dict[str, List[str]]) -> None:
    _WORKER_CTX["vocab"] = vocab
    _WORKER_CTX["config"] = config
    _WORKER_CTX["lists"] = lists
    _WORKER_CTX["session"] = None


def _worker_decode(lat: PosteriorLattice) -> dict:
    vocab = _WORKER_CTX["vocab"]
    config = _WORKER_CTX["config"]
    lists = _WORKER_CTX["lists"]
    session = _WORKER_CTX["session"]
    if config.external_command and (session is None or not session.alive):
        if session is not None:
            session.close()
        session = ExternalScorerSession(config.external_command, vocab.size, config.external_timeout)
        session.start()
        _WORKER_CTX["session"] = session
    words = lists.get(lat.utt_id, [])
    try:
        return decode_utterance(lat, words, vocab, config, session)
    except ScorerSessionError as e:
        return {"utt": lat.utt_id, "error": str(e), "nbest": []}


def record_to_json(record: dict) -> str:
    return json.dumps(record, sort_keys=True)
