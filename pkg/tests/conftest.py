import random

import pytest

from ctxbias.wordpiece import Vocab


def make_vocab(n_start: int, n_cont: int, marker: str = "▁") -> Vocab:
    """Synthetic vocabulary with n_start word-start and n_cont continuation
    pieces; piece strings are short unique letter runs."""
    pieces = []
    for i in range(n_start):
        pieces.append(marker + _name(i))
    for i in range(n_cont):
        pieces.append(_name(i) + "x")
    return Vocab(tuple(pieces), marker)


def _name(i: int) -> str:
    letters = "abcdefghijklmnopqrstuvwxyz"
    out = letters[i % 26]
    i //= 26
    while i:
        out += letters[i % 26]
        i //= 26
    return out


def random_word_tokens(rng: random.Random, vocab: Vocab, max_len: int = 4) -> tuple:
    """A well-formed tokenized word: one start piece then internal pieces."""
    starts = [i for i in range(vocab.size) if vocab.is_word_start(i)]
    conts = [i for i in range(vocab.size) if not vocab.is_word_start(i)]
    word = [rng.choice(starts)]
    for _ in range(rng.randrange(max_len)):
        word.append(rng.choice(conts))
    return tuple(word)


@pytest.fixture
def fig2_vocab():
    return Vocab(("▁jo", "e", "y", "▁ka", "it", "rl", "▁x", "zz"))
