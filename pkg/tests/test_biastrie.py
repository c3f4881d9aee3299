import random

import pytest

from ctxbias.biastrie import DETACHED, BiasTrie
from ctxbias.wordpiece import tokenize

from conftest import make_vocab, random_word_tokens


def fig2_words(v):
    return [tokenize(w, v) for w in ["joe", "joey", "kaity", "karl"]]


def brute_force_query(words, prefix, vocab):
    """Independent definition of the bias vector for an emitted prefix.

    The in-progress word is the suffix from the last word-start token; bit p
    of h_continue is set iff some biasing word's tokenization extends that
    suffix with p. h_start holds the first token of every biasing word.
    """
    h_start = 0
    for w in words:
        h_start |= 1 << w[0]
    last_start = None
    for i, tok in enumerate(prefix):
        if vocab.is_word_start(tok):
            last_start = i
    h_continue = 0
    if last_start is not None:
        suffix = tuple(prefix[last_start:])
        for w in words:
            if len(w) > len(suffix) and tuple(w[: len(suffix)]) == suffix:
                h_continue |= 1 << w[len(suffix)]
    return h_start, h_continue


def brute_force_at_end(words, prefix, vocab):
    last_start = None
    for i, tok in enumerate(prefix):
        if vocab.is_word_start(tok):
            last_start = i
    if last_start is None:
        return False
    suffix = tuple(prefix[last_start:])
    return any(tuple(w) == suffix for w in words)


def fold(trie, prefix):
    c = trie.fresh_cursor()
    for tok in prefix:
        c = trie.advance(c, tok)
    return c


def test_fig2_structure(fig2_vocab):
    v = fig2_vocab
    words = fig2_words(v)
    trie = BiasTrie(words, v)
    q = trie.query(trie.fresh_cursor())
    assert set(q.start_pieces()) == {v.index("▁jo"), v.index("▁ka")}
    assert q.continue_pieces() == []

    c = trie.advance(trie.fresh_cursor(), v.index("▁jo"))
    assert trie.query(c).continue_pieces() == [v.index("e")]
    assert not trie.at_word_end(c)

    c = trie.advance(c, v.index("e"))
    assert trie.at_word_end(c)  # joe complete, joey continuable
    assert trie.query(c).continue_pieces() == [v.index("y")]


def test_joe_ancestor_of_joey(fig2_vocab):
    v = fig2_vocab
    trie = BiasTrie(fig2_words(v), v)
    joe = fold(trie, tokenize("joe", v))
    joey = fold(trie, tokenize("joey", v))
    assert trie.at_word_end(joe) and trie.at_word_end(joey)
    assert trie.children[joe][v.index("y")] == joey


def test_divergence_detaches(fig2_vocab):
    v = fig2_vocab
    trie = BiasTrie(fig2_words(v), v)
    c = trie.advance(trie.fresh_cursor(), v.index("▁ka"))
    assert c != DETACHED
    c = trie.advance(c, v.index("e"))  # not in {it, rl}
    assert c == DETACHED
    assert trie.query(c).h_continue == 0
    assert not trie.at_word_end(c)


def test_detached_stays_detached_on_internal(fig2_vocab):
    v = fig2_vocab
    trie = BiasTrie(fig2_words(v), v)
    assert trie.advance(DETACHED, v.index("e")) == DETACHED


def test_word_start_resets_mid_word(fig2_vocab):
    v = fig2_vocab
    trie = BiasTrie(fig2_words(v), v)
    c = fold(trie, (v.index("▁jo"), v.index("▁ka")))
    assert trie.query(c).continue_pieces() == sorted(
        [v.index("it"), v.index("rl")]
    )


def test_empty_trie_all_zero(fig2_vocab):
    trie = BiasTrie([], fig2_vocab)
    q = trie.query(trie.fresh_cursor())
    assert q.h_start == 0 and q.h_continue == 0
    c = trie.advance(trie.fresh_cursor(), 0)
    assert c == DETACHED


def test_duplicates_idempotent(fig2_vocab):
    v = fig2_vocab
    w = tokenize("joe", v)
    t1 = BiasTrie([w], v)
    t2 = BiasTrie([w, w], v)
    assert t1.node_count == t2.node_count
    assert t1.lookup == t2.lookup
    assert t1.end_flags == t2.end_flags


def test_empty_word_rejected(fig2_vocab):
    with pytest.raises(ValueError):
        BiasTrie([()], fig2_vocab)


def test_malformed_word_rejected(fig2_vocab):
    v = fig2_vocab
    with pytest.raises(ValueError):
        BiasTrie([(v.index("e"),)], v)
    with pytest.raises(ValueError):
        BiasTrie([(v.index("▁jo"), v.index("▁ka"))], v)


def test_node_count_bound(fig2_vocab):
    v = fig2_vocab
    words = fig2_words(v)
    trie = BiasTrie(words, v)
    assert trie.node_count <= 1 + sum(len(w) for w in words)


def test_h_start_stable_across_cursors(fig2_vocab):
    v = fig2_vocab
    trie = BiasTrie(fig2_words(v), v)
    cursors = [trie.fresh_cursor(), fold(trie, tokenize("jo", v)), fold(trie, tokenize("karl", v))]
    starts = {trie.query(c).h_start for c in cursors}
    assert len(starts) == 1


def test_query_is_table_reads_only(fig2_vocab):
    v = fig2_vocab
    trie = BiasTrie(fig2_words(v), v)
    c = fold(trie, tokenize("jo", v))
    assert trie.query(c).h_continue == trie.lookup[c]
    assert trie.query(c).h_start == trie.start_set


def test_random_oracle_equivalence():
    rng = random.Random(11)
    v = make_vocab(8, 8)
    for _ in range(200):
        words = [random_word_tokens(rng, v) for _ in range(rng.randrange(0, 12))]
        trie = BiasTrie(words, v)
        prefix = [rng.randrange(v.size) for _ in range(rng.randrange(0, 12))]
        c = fold(trie, prefix)
        q = trie.query(c)
        h_start, h_continue = brute_force_query(words, prefix, v)
        assert q.h_start == h_start
        assert q.h_continue == h_continue
        assert trie.at_word_end(c) == brute_force_at_end(words, prefix, v)
        assert bin(q.h_start).count("1") <= len({w[0] for w in words} or set())
