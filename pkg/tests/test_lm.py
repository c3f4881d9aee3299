import math
import random
import sys
from pathlib import Path

import numpy as np
import pytest

from ctxbias.biastrie import BiasTrie, DETACHED
from ctxbias.lm import (
    BiasedLMConfig,
    ExternalScorerSession,
    NGramLM,
    NormalizationError,
    ProtocolError,
    ScorerTimeout,
    VersionMismatch,
    biased_lm_score,
    biased_log_vector,
)
from ctxbias.wordpiece import Vocab, tokenize

STUB = f"{sys.executable} {Path(__file__).parent / 'stub_scorer.py'}"


def small_vocab():
    return Vocab(("▁a", "▁b", "▁c", "x", "y"))


def repeated_corpus():
    # one sentence (0, 1, 0) repeated four times
    return [(0, 1, 0)] * 4


def test_train_rejects_bad_order_and_empty_corpus():
    with pytest.raises(ValueError):
        NGramLM.train([(0,)], 0, 3)
    with pytest.raises(ValueError):
        NGramLM.train([(0,)], 6, 3)
    with pytest.raises(ValueError):
        NGramLM.train([], 2, 3)


def test_bigram_hand_computed_values():
    lm = NGramLM.train(repeated_corpus(), 2, 3)
    # unigram counts with EOS=3 appended: 0 -> 8, 1 -> 4, 3 -> 4, total 16
    p1_0 = (8 + 1e-6) / (16 + 4e-6)
    p1_1 = (4 + 1e-6) / (16 + 4e-6)
    # context (1,): count(0)=4, N=4, T=1, discount 0.75
    gamma = 0.75 * 1 / 4
    expect = (4 - 0.75) / 4 + gamma * p1_0
    assert lm.score((1,), 0) == pytest.approx(math.log(expect), abs=1e-12)
    # context (0,): tokens 1 and EOS seen twice each per sentence pair
    gamma0 = 0.75 * 2 / 8
    expect01 = (4 - 0.75) / 8 + gamma0 * p1_1
    assert lm.score((0,), 1) == pytest.approx(math.log(expect01), abs=1e-12)


def test_bigram_continuation_beats_unigram_backoff():
    lm = NGramLM.train(repeated_corpus(), 2, 3)
    uni = NGramLM.train(repeated_corpus(), 1, 3)
    assert lm.score((1,), 0) > uni.score((1,), 0)


def test_order1_context_independent():
    lm = NGramLM.train(repeated_corpus(), 1, 3)
    for t in range(4):
        assert lm.score((0, 1), t) == lm.score((2,), t) == lm.score((), t)


def test_unseen_context_backs_off_to_lower_order():
    lm = NGramLM.train(repeated_corpus(), 2, 3)
    for t in range(4):
        assert lm.score((2,), t) == lm.score((), t)


def test_count_dominance_bigram():
    # "▁a ▁b ▁a ▁b": after ▁a the corpus always continues with ▁b
    lm = NGramLM.train([(0, 1, 0, 1)], 2, 3)
    assert lm.score((0,), 1) > lm.score((0,), 0)


@pytest.mark.parametrize("order", [1, 2, 3, 4])
def test_normalization_random_contexts(order):
    rng = random.Random(order)
    corpus = [tuple(rng.randrange(5) for _ in range(rng.randrange(1, 9))) for _ in range(30)]
    lm = NGramLM.train(corpus, order, 5)
    for _ in range(40):
        ctx = tuple(rng.randrange(5) for _ in range(rng.randrange(0, 5)))
        total = float(np.exp(lm.log_vector(ctx)).sum())
        assert abs(total - 1.0) < 1e-6


def test_higher_order_chain():
    rng = random.Random(99)
    corpus = [tuple(rng.randrange(4) for _ in range(6)) for _ in range(20)]
    lm = NGramLM.train(corpus, 3, 4)
    # trigram context present in training
    ctx = corpus[0][:2]
    total = float(np.exp(lm.log_vector(ctx)).sum())
    assert abs(total - 1.0) < 1e-6


def test_json_round_trip():
    lm = NGramLM.train(repeated_corpus(), 3, 3)
    clone = NGramLM.from_json(lm.to_json())
    for ctx in [(), (0,), (1, 0), (2, 2)]:
        assert np.array_equal(clone.log_vector(ctx), lm.log_vector(ctx))


# -- biased scoring ---------------------------------------------------------


def biased_setup(beta=0.5):
    v = small_vocab()
    words = [tokenize("ax", v), tokenize("by", v)]
    trie = BiasTrie(words, v)
    corpus = [(0, 3), (1, 4), (2,), (0, 3)]
    lm = NGramLM.train(corpus, 2, v.size)
    return v, trie, lm, BiasedLMConfig(beta)


def test_beta_zero_is_identity():
    v, trie, lm, _ = biased_setup()
    cfg = BiasedLMConfig(0.0)
    for tok in range(v.size + 1):
        assert biased_lm_score(lm, cfg, trie, DETACHED, (0,), tok) == lm.score((0,), tok)


def test_singleton_active_set():
    v, trie, lm, cfg = biased_setup(0.5)
    cursor = trie.advance(trie.fresh_cursor(), 0)  # after ▁a, continue = {x}
    x = v.index("x")
    p = math.exp(lm.score((0,), x))
    expect = math.log(0.5 * p + 0.5)
    assert biased_lm_score(lm, cfg, trie, cursor, (0,), x) == pytest.approx(expect, rel=1e-12)
    assert biased_lm_score(lm, cfg, trie, cursor, (0,), x) > lm.score((0,), x)


def test_out_of_set_token_penalized():
    v, trie, lm, cfg = biased_setup(0.5)
    cursor = trie.advance(trie.fresh_cursor(), 0)
    y = v.index("y")
    p = math.exp(lm.score((0,), y))
    expect = math.log(0.5 * p)
    assert biased_lm_score(lm, cfg, trie, cursor, (0,), y) == pytest.approx(expect, rel=1e-12)
    assert biased_lm_score(lm, cfg, trie, cursor, (0,), y) < lm.score((0,), y)


def test_empty_active_set_plain_score():
    v, trie, lm, cfg = biased_setup(0.5)
    # complete "ax": live cursor with no continuations -> plain LM
    cursor = trie.fresh_cursor()
    for tok in tokenize("ax", v):
        cursor = trie.advance(cursor, tok)
    assert cursor != DETACHED
    for tok in range(v.size + 1):
        assert biased_lm_score(lm, cfg, trie, cursor, (0, 3), tok) == lm.score((0, 3), tok)


def test_empty_list_neutrality():
    v = small_vocab()
    trie = BiasTrie([], v)
    lm = NGramLM.train([(0, 3), (1, 4)], 2, v.size)
    cfg = BiasedLMConfig(0.7)
    for ctx in [(), (0,), (1, 4)]:
        for tok in range(v.size + 1):
            assert biased_lm_score(lm, cfg, trie, DETACHED, ctx, tok) == lm.score(ctx, tok)


def test_detached_cursor_uses_start_set():
    v, trie, lm, cfg = biased_setup(0.5)
    vec = biased_log_vector(lm.log_vector(()), trie.start_set, 0.5)
    for tok in range(v.size + 1):
        assert biased_lm_score(lm, cfg, trie, DETACHED, (), tok) == vec[tok]


def test_biased_vector_still_normalized():
    v, trie, lm, cfg = biased_setup(0.5)
    for cursor in [DETACHED, trie.advance(trie.fresh_cursor(), 0)]:
        active = trie.active_set(cursor)
        vec = biased_log_vector(lm.log_vector((0,)), active, 0.5)
        assert abs(float(np.exp(vec).sum()) - 1.0) < 1e-6


def test_monotonicity_random():
    rng = random.Random(42)
    v, trie, lm, cfg = biased_setup(0.3)
    for _ in range(50):
        ctx = tuple(rng.randrange(v.size) for _ in range(rng.randrange(0, 3)))
        cursor = trie.fresh_cursor()
        for tok in ctx:
            cursor = trie.advance(cursor, tok)
        active = trie.active_set(cursor)
        if active == 0:
            continue
        for tok in range(v.size + 1):
            b = biased_lm_score(lm, cfg, trie, cursor, ctx, tok)
            plain = lm.score(ctx, tok)
            if (active >> tok) & 1:
                assert b >= plain
            else:
                assert b <= plain


def test_beta_validation():
    with pytest.raises(ValueError):
        BiasedLMConfig(1.0)
    with pytest.raises(ValueError):
        BiasedLMConfig(-0.1)


# -- external scorer protocol -------------------------------------------------


def test_session_handshake_and_score():
    s = ExternalScorerSession(STUB, d=4, timeout=5.0)
    s.start()
    try:
        s.register_bias("u1", ["joe", "karl"])
        vec = s.score((0, 1, 2), "u1")
        assert vec.shape == (5,)
        assert abs(float(np.exp(vec).sum()) - 1.0) < 1e-4
        # empty context is a valid request
        vec0 = s.score((), None)
        assert vec0.shape == (5,)
    finally:
        s.close()


def test_session_version_mismatch():
    s = ExternalScorerSession(STUB + " --wrong-d", d=4, timeout=5.0)
    with pytest.raises(VersionMismatch):
        s.start()
    s.close()


def test_session_bad_normalization():
    s = ExternalScorerSession(STUB + " --bad-norm", d=4, timeout=5.0)
    s.start()
    try:
        with pytest.raises(NormalizationError):
            s.score((0,), None)
    finally:
        s.close()


def test_session_timeout():
    s = ExternalScorerSession(STUB + " --hang", d=4, timeout=0.5)
    s.start()
    try:
        with pytest.raises(ScorerTimeout):
            s.score((0,), None)
    finally:
        s.close()


def test_session_protocol_garbage():
    s = ExternalScorerSession(STUB + " --garbage", d=4, timeout=5.0)
    s.start()
    try:
        with pytest.raises(ProtocolError):
            s.score((0,), None)
    finally:
        s.close()
