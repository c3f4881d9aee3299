import random

import pytest

from ctxbias.metrics import (
    AlignmentOp,
    ClassCounts,
    WerReport,
    align,
    biased_wer,
    edit_distance,
    report_format,
    score_pair,
)


def oracle_distance(ref, hyp):
    """Independent two-row unit-cost edit distance."""
    prev = list(range(len(hyp) + 1))
    for i, r in enumerate(ref, 1):
        cur = [i]
        for j, h in enumerate(hyp, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (r != h)))
        prev = cur
    return prev[-1]


def test_align_identity():
    ops = align(["call", "joe"], ["call", "joe"])
    assert [o.kind for o in ops] == ["match", "match"]


def test_align_forced_deletion():
    assert align(["a"], []) == [AlignmentOp("deletion", "a", None)]


def test_align_substitution_middle():
    ops = align(["call", "joe", "now"], ["call", "joey", "now"])
    assert [o.kind for o in ops] == ["match", "substitution", "match"]
    assert ops[1].ref == "joe" and ops[1].hyp == "joey"


def test_align_preference_order():
    # both "del a, match b" and other length-1 paths exist; preference picks
    # match over deletion at the backtrace step
    ops = align(["a", "b"], ["b"])
    assert [o.kind for o in ops] == ["deletion", "match"]
    ops = align(["b"], ["a", "b"])
    assert [o.kind for o in ops] == ["insertion", "match"]


def test_align_cost_matches_oracle_random():
    rng = random.Random(4)
    pool = ["a", "b", "c", "d"]
    for _ in range(400):
        ref = [rng.choice(pool) for _ in range(rng.randrange(0, 13))]
        hyp = [rng.choice(pool) for _ in range(rng.randrange(0, 13))]
        ops = align(ref, hyp)
        cost = sum(1 for o in ops if o.kind != "match")
        assert cost == oracle_distance(ref, hyp)
        assert cost == edit_distance(ref, hyp)
        # ops faithfully reconstruct both sides
        assert [o.ref for o in ops if o.ref is not None] == ref
        assert [o.hyp for o in ops if o.hyp is not None] == hyp


def test_symmetry_swaps_del_ins():
    rng = random.Random(5)
    pool = ["a", "b", "c"]
    for _ in range(100):
        ref = [rng.choice(pool) for _ in range(rng.randrange(0, 9))]
        hyp = [rng.choice(pool) for _ in range(rng.randrange(0, 9))]
        fwd = score_pair(ref, hyp, set())
        bwd = score_pair(hyp, ref, set())
        assert fwd.overall.deletions == bwd.overall.insertions
        assert fwd.overall.insertions == bwd.overall.deletions


def test_pesci_example():
    report = score_pair(["call", "joe", "pesci"], ["call", "joe", "pearcy"], {"joe", "pesci"})
    assert report.overall.rate == pytest.approx(1 / 3)
    assert report.biased.errors == 1 and report.biased.ref_words == 2
    assert report.unbiased.errors == 0 and report.unbiased.ref_words == 1


def test_insertion_attribution_example():
    report = score_pair(["call", "joe"], ["call", "joe", "joe"], {"joe"})
    assert report.biased.insertions == 1
    assert report.biased.rate == pytest.approx(1.0)
    assert report.unbiased.errors == 0 and report.unbiased.ref_words == 1


def test_empty_list_degenerate_biased_class():
    report = score_pair(["call", "joe"], ["call", "moe"], set())
    assert report.biased.ref_words == 0
    assert report.biased.rate == 0.0
    assert report.biased.degenerate
    assert report.unbiased.rate == report.overall.rate


def test_out_of_list_reference_substitution_counts_unbiased():
    # hypothesis word in list, reference word not: reference-side rule
    report = score_pair(["call"], ["joe"], {"joe"})
    assert report.unbiased.substitutions == 1
    assert report.biased.errors == 0


def test_partition_identity_random():
    rng = random.Random(6)
    pool = [f"w{i}" for i in range(12)]
    for _ in range(300):
        n = rng.randrange(1, 6)
        pairs = []
        for _ in range(n):
            ref = [rng.choice(pool) for _ in range(rng.randrange(0, 9))]
            hyp = [rng.choice(pool) for _ in range(rng.randrange(0, 9))]
            biasing = set(rng.sample(pool, rng.randrange(0, 6)))
            pairs.append((ref, hyp, biasing))
        report = biased_wer(pairs)
        assert report.overall.errors == report.biased.errors + report.unbiased.errors
        assert report.overall.substitutions == report.biased.substitutions + report.unbiased.substitutions
        assert report.overall.deletions == report.biased.deletions + report.unbiased.deletions
        assert report.overall.insertions == report.biased.insertions + report.unbiased.insertions
        assert report.overall.ref_words == report.biased.ref_words + report.unbiased.ref_words
        # class reference counts equal a direct membership recount
        recount = sum(1 for ref, _, b in pairs for w in ref if w in b)
        assert report.biased.ref_words == recount
        assert report.utterances == n


def test_biasing_never_changes_overall_wer():
    rng = random.Random(7)
    pool = [f"w{i}" for i in range(8)]
    for _ in range(100):
        ref = [rng.choice(pool) for _ in range(rng.randrange(0, 9))]
        hyp = [rng.choice(pool) for _ in range(rng.randrange(0, 9))]
        biasing = set(rng.sample(pool, 3))
        with_list = score_pair(ref, hyp, biasing)
        without = score_pair(ref, hyp, set())
        assert with_list.overall.errors == without.overall.errors
        assert with_list.overall.ref_words == without.overall.ref_words


def test_report_format_table_style():
    report = WerReport(
        overall=ClassCounts(357, 0, 0, 10000),
        biased=ClassCounts(141, 0, 0, 1000),
        unbiased=ClassCounts(216, 0, 0, 9000),
    )
    assert report_format(report) == "3.57 (2.4/14.1)"


def test_report_format_zero_errors():
    report = WerReport(ClassCounts(0, 0, 0, 10), ClassCounts(0, 0, 0, 4), ClassCounts(0, 0, 0, 6))
    assert report_format(report) == "0.00 (0.0/0.0)"


def test_report_format_degenerate_footnote():
    report = WerReport(ClassCounts(1, 0, 0, 10), ClassCounts(), ClassCounts(1, 0, 0, 10))
    line = report_format(report)
    assert line.startswith("10.00 (10.0/0.0)")
    assert "[*]" in line and "biased class" in line


def test_records_shape():
    report = score_pair(["a"], ["b"], {"a"})
    recs = report.to_records()
    assert [r["class"] for r in recs] == ["overall", "biased", "unbiased"]
    assert recs[1]["errors"] == 1
