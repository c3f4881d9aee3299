"""Command-line entry point wiring the modules into reproducible pipelines.

Every run that writes an output also writes `<output>.manifest.json` holding
the resolved arguments, the seed, and digests of the input files; passing
--from-manifest reruns the same configuration (optionally to a new output
path) byte-identically.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path
from typing import List, Optional

from . import __version__
from .biasfst import BiasingFst
from .biaslists import (
    extract_rare_vocab,
    list_coverage,
    make_eval_list,
    make_training_sample,
    read_biasing_lists,
    read_reference_corpus,
    write_biasing_lists,
)
from .biastrie import BiasTrie
from .decoder import (
    DecodeConfig,
    FusionWeights,
    LatticeError,
    decode_corpus,
    load_lattices,
    record_to_json,
)
from .lm import NGramLM, ScorerSessionError
from .metrics import biased_wer, report_format
from .wordpiece import (
    MalformedSequence,
    UnsegmentableWord,
    VocabError,
    load_vocab,
    tokenize,
)

DEFAULT_SEED = 271828

USAGE_ERROR = 1
DATA_ERROR = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 1 on usage problems, not argparse's 2
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        sys.exit(USAGE_ERROR)


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


_PATH_ARGS = ("vocab", "corpus", "refs", "hyps", "lists", "lattices", "lm", "list_file")


def _check_paths(args: argparse.Namespace) -> None:
    for name in _PATH_ARGS:
        value = getattr(args, name, None)
        if value is not None and not Path(value).exists():
            raise FileNotFoundError(value)


def _write_manifest(args: argparse.Namespace, output: str) -> None:
    payload = {
        "tool": "ctxbias",
        "version": __version__,
        "subcommand": args.subcommand,
        "args": {
            k: v
            for k, v in sorted(vars(args).items())
            if k not in ("func", "from_manifest") and not k.startswith("_")
        },
        "inputs": {
            getattr(args, name): _sha256(getattr(args, name))
            for name in _PATH_ARGS
            if getattr(args, name, None) is not None
        },
    }
    with open(output + ".manifest.json", "w") as f:
        json.dump(payload, f, sort_keys=True, indent=2)
        f.write("\n")


def _apply_manifest(args: argparse.Namespace) -> argparse.Namespace:
    with open(args.from_manifest) as f:
        payload = json.load(f)
    if payload.get("subcommand") != args.subcommand:
        raise ValueError(
            f"manifest was written by subcommand {payload.get('subcommand')!r}, "
            f"not {args.subcommand!r}"
        )
    override_output = args.output
    for key, value in payload["args"].items():
        setattr(args, key, value)
    if override_output is not None:
        args.output = override_output
    return args


# -- subcommands -------------------------------------------------------------


def cmd_tokenize(args) -> int:
    with open(args.vocab) as f:
        vocab = load_vocab(f, args.marker)
    words = args.words or [w.strip() for w in sys.stdin if w.strip()]
    for word in words:
        seq = tokenize(word, vocab)
        print(word, " ".join(vocab.piece(t) for t in seq))
    return 0


def _load_list_words(path: str, vocab) -> List[tuple]:
    with open(path) as f:
        words = [line.strip().lower() for line in f if line.strip()]
    return [tokenize(w, vocab) for w in words]


def cmd_build_trie(args) -> int:
    with open(args.vocab) as f:
        vocab = load_vocab(f, args.marker)
    trie = BiasTrie(_load_list_words(args.list_file, vocab), vocab)
    out = open(args.output, "w") if args.output else sys.stdout
    try:
        trie.dump(out)
    finally:
        if args.output:
            out.close()
            _write_manifest(args, args.output)
    return 0


def cmd_build_fst(args) -> int:
    with open(args.vocab) as f:
        vocab = load_vocab(f, args.marker)
    fst = BiasingFst(_load_list_words(args.list_file, vocab), args.boost, vocab, args.boost_policy)
    out = open(args.output, "w") if args.output else sys.stdout
    try:
        fst.dump(out)
    finally:
        if args.output:
            out.close()
            _write_manifest(args, args.output)
    return 0


def cmd_train_lm(args) -> int:
    with open(args.vocab) as f:
        vocab = load_vocab(f, args.marker)
    with open(args.corpus) as f:
        utts = read_reference_corpus(f)
    corpus = []
    for _, words in utts:
        seq = []
        for w in words:
            seq.extend(tokenize(w, vocab))
        corpus.append(tuple(seq))
    lm = NGramLM.train(corpus, args.order, vocab.size)
    with open(args.output, "w") as f:
        f.write(lm.to_json())
        f.write("\n")
    _write_manifest(args, args.output)
    return 0


def cmd_make_lists(args) -> int:
    with open(args.corpus) as f:
        corpus_words = [w for _, words in read_reference_corpus(f) for w in words]
    rv = extract_rare_vocab(corpus_words, args.common_k)
    with open(args.refs) as f:
        refs = read_reference_corpus(f)
    lists = []
    zero_flags = {}
    for utt, words in refs:
        if args.mode == "eval":
            lists.append(make_eval_list(words, rv, args.distractors, args.seed, utt))
        else:
            sample = make_training_sample(words, rv, args.seed, utt)
            lists.append(sample.biasing)
            zero_flags[utt] = sample.zero_bias
    with open(args.output, "w") as f:
        if args.mode == "eval":
            write_biasing_lists(f, lists)
        else:
            for bl in lists:
                zero = 1 if zero_flags[bl.utt_id] else 0
                f.write(f"{bl.utt_id}\t{','.join(bl.sorted_words())}\tzero={zero}\n")
    covered, total = list_coverage(refs, {bl.utt_id: bl.words for bl in lists})
    print(
        f"common={len(rv.common)} rare={len(rv.rare)} coverage={rv.coverage:.4f} "
        f"list-word-coverage={covered}/{total}"
    )
    _write_manifest(args, args.output)
    return 0


def cmd_decode(args) -> int:
    with open(args.vocab) as f:
        vocab = load_vocab(f, args.marker)
    lists = {}
    if args.lists:
        with open(args.lists) as f:
            lists = read_biasing_lists(f)
    lm = None
    if args.lm:
        with open(args.lm) as f:
            lm = NGramLM.from_json(f.read())
    config = DecodeConfig(
        weights=FusionWeights(args.lambda_fst, args.mu, args.beam, args.nbest),
        boost=args.boost,
        boost_policy=args.boost_policy,
        beta=args.beta,
        lm=lm,
        external_command=args.external_scorer,
        external_timeout=args.scorer_timeout,
    )
    with open(args.lattices) as f:
        lattices = list(load_lattices(f))
    with open(args.output, "w") as f:
        for record in decode_corpus(lattices, lists, vocab, config, workers=args.workers):
            f.write(record_to_json(record) + "\n")
    _write_manifest(args, args.output)
    return 0


def _hyp_top_words(path: str) -> dict:
    out = {}
    with open(path) as f:
        for line in f:
            if not line.strip():
                continue
            rec = json.loads(line)
            nbest = rec.get("nbest", [])
            out[rec["utt"]] = nbest[0]["words"] if nbest else []
    return out


def cmd_score(args) -> int:
    with open(args.refs) as f:
        refs = read_reference_corpus(f)
    hyps = _hyp_top_words(args.hyps)
    lists = {}
    if args.lists:
        with open(args.lists) as f:
            lists = read_biasing_lists(f)
    pairs = []
    for utt, ref_words in refs:
        pairs.append((ref_words, hyps.get(utt, []), set(lists.get(utt, []))))
    report = biased_wer(pairs)
    print(report_format(report))
    if args.output:
        with open(args.output, "w") as f:
            for rec in report.to_records():
                f.write(json.dumps(rec, sort_keys=True) + "\n")
        _write_manifest(args, args.output)
    return 0


def _parse_grid(text: str) -> List[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def cmd_sweep(args) -> int:
    records = []
    with open(args.hyps) as f:
        for line in f:
            if line.strip():
                records.append(json.loads(line))
    refs = None
    lists = {}
    if args.refs:
        with open(args.refs) as f:
            refs = dict(read_reference_corpus(f))
    if args.lists:
        with open(args.lists) as f:
            lists = read_biasing_lists(f)
    out = open(args.output, "w") if args.output else sys.stdout
    try:
        for lam in _parse_grid(args.lambda_fst_grid):
            for mu in _parse_grid(args.mu_grid):
                point = {"lambda_fst": lam, "mu": mu, "utts": []}
                pairs = []
                for rec in records:
                    best = None
                    best_key = None
                    for hyp in rec.get("nbest", []):
                        total = hyp["acoustic"] + lam * hyp["fst"] + mu * hyp["lm"]
                        key = (-total, tuple(hyp["tokens"]))
                        if best_key is None or key < best_key:
                            best, best_key = hyp, key
                    words = best["words"] if best else []
                    point["utts"].append({"utt": rec["utt"], "words": words})
                    if refs is not None and rec["utt"] in refs:
                        pairs.append((refs[rec["utt"]], words, set(lists.get(rec["utt"], []))))
                if refs is not None:
                    report = biased_wer(pairs)
                    point["wer"] = report.overall.rate
                    point["b_wer"] = report.biased.rate
                    point["u_wer"] = report.unbiased.rate
                out.write(json.dumps(point, sort_keys=True) + "\n")
    finally:
        if args.output:
            out.close()
    if args.output:
        _write_manifest(args, args.output)
    return 0


# -- parser ------------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="ctxbias", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    subs = parser.add_subparsers(dest="subcommand", required=True)

    def common(p, output_required=True):
        p.add_argument("--marker", default="▁", help="word-start marker prefix")
        p.add_argument("--from-manifest", default=None, help="rerun a recorded configuration")
        if output_required:
            p.add_argument("--output", default=None, help="output path")

    p = subs.add_parser("tokenize", help="segment words into pieces")
    p.add_argument("--vocab", required=True)
    p.add_argument("words", nargs="*")
    common(p, output_required=False)
    p.set_defaults(func=cmd_tokenize)

    p = subs.add_parser("build-trie", help="dump the biasing trie for a word list")
    p.add_argument("--vocab", required=True)
    p.add_argument("--list", dest="list_file", required=True)
    common(p)
    p.set_defaults(func=cmd_build_trie)

    p = subs.add_parser("build-fst", help="dump the boosting automaton for a word list")
    p.add_argument("--vocab", required=True)
    p.add_argument("--list", dest="list_file", required=True)
    p.add_argument("--boost", type=float, default=1.0)
    p.add_argument("--boost-policy", choices=["immediate", "on_completion"], default="immediate")
    common(p)
    p.set_defaults(func=cmd_build_fst)

    p = subs.add_parser("train-lm", help="train the backoff n-gram LM")
    p.add_argument("--vocab", required=True)
    p.add_argument("--corpus", required=True, help="reference-format text corpus")
    p.add_argument("--order", type=int, default=3)
    common(p)
    p.set_defaults(func=cmd_train_lm)

    p = subs.add_parser("make-lists", help="build per-utterance biasing lists")
    p.add_argument("--corpus", required=True, help="training corpus for the frequency split")
    p.add_argument("--refs", required=True, help="utterances to build lists for")
    p.add_argument("--common-k", type=int, default=5000)
    p.add_argument("--mode", choices=["eval", "train"], default="eval")
    p.add_argument("-N", "--distractors", type=int, default=100)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    common(p)
    p.set_defaults(func=cmd_make_lists)

    p = subs.add_parser("decode", help="beam-search decode a lattice file")
    p.add_argument("--vocab", required=True)
    p.add_argument("--lattices", required=True)
    p.add_argument("--lists", default=None)
    p.add_argument("--lm", default=None, help="LM file from train-lm")
    p.add_argument("--lambda-fst", type=float, default=1.0)
    p.add_argument("--mu", type=float, default=0.3)
    p.add_argument("--beam", type=int, default=8)
    p.add_argument("--nbest", type=int, default=4)
    p.add_argument("--boost", type=float, default=1.0)
    p.add_argument("--boost-policy", choices=["immediate", "on_completion"], default="immediate")
    p.add_argument("--beta", type=float, default=0.0, help="biased-LM interpolation mass")
    p.add_argument("--external-scorer", default=None, help="command line of an external scorer")
    p.add_argument("--scorer-timeout", type=float, default=10.0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    common(p)
    p.set_defaults(func=cmd_decode)

    p = subs.add_parser("score", help="biased/unbiased WER report")
    p.add_argument("--refs", required=True)
    p.add_argument("--hyps", required=True)
    p.add_argument("--lists", default=None)
    common(p)
    p.set_defaults(func=cmd_score)

    p = subs.add_parser("sweep", help="re-rank stored n-best over a weight grid")
    p.add_argument("--hyps", required=True)
    p.add_argument("--lambda-fst-grid", default="0,0.5,1,2")
    p.add_argument("--mu-grid", default="0,0.3")
    p.add_argument("--refs", default=None)
    p.add_argument("--lists", default=None)
    common(p)
    p.set_defaults(func=cmd_sweep)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if getattr(args, "from_manifest", None):
            args = _apply_manifest(args)
        if getattr(args, "output", None) is None and args.subcommand in (
            "train-lm",
            "make-lists",
            "decode",
        ):
            parser.error(f"{args.subcommand} requires --output")
        _check_paths(args)
        return args.func(args)
    except FileNotFoundError as e:
        print(f"error: missing file: {e.args[0] if e.args else e}", file=sys.stderr)
        return USAGE_ERROR
    except (
        VocabError,
        LatticeError,
        UnsegmentableWord,
        MalformedSequence,
        ScorerSessionError,
        json.JSONDecodeError,
        ValueError,
    ) as e:
        print(f"error: {e}", file=sys.stderr)
        return DATA_ERROR


if __name__ == "__main__":
    sys.exit(main())
