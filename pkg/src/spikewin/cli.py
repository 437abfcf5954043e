"""``spikewin`` command line: build graphs, make synthetic data, decode, score, bench.

Exit codes: 0 ok, 1 usage, 2 bad data or format, 3 decoding failed.
"""

from __future__ import annotations

import argparse
import glob
import json
import os
import sys
import warnings
from typing import List, Optional

from . import arpa as arpa_mod
from .decoder import Beam, decode_batch, default_jobs
from .evaluation import bench_compare, read_jsonl, score_corpus, texts_by_id
from .frame_select import parse_strategy
from .fst import FstError, FstFormatError
from .graph_build import (BLANK, GraphBuildError, GraphBundle, Recipe, build_graph,
                          parse_lexicon)
from .posterior import PosteriorFormatError, load
from .synth import SynthConfig, generate, write_corpus

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_DECODE = 0, 1, 2, 3


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _need_file(path, flag):
    if not os.path.isfile(path):
        raise UsageError(f"{flag}: no such file: {path}")


def _read(path):
    with open(path, encoding="utf-8") as f:
        return f.read()


def _strategy(spec):
    try:
        return parse_strategy(spec)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e)) from None


def _positive(kind):
    def conv(s):
        v = kind(s)
        if not v > 0:
            raise argparse.ArgumentTypeError(f"must be > 0, got {s}")
        return v
    return conv


def _read_vocab(path) -> List[str]:
    vocab = [line.strip() for line in _read(path).splitlines() if line.strip()]
    if len(set(vocab)) != len(vocab):
        raise DataError(f"{path}: duplicate token symbols")
    return vocab


def _default_vocab(lex) -> List[str]:
    return [BLANK] + [t for t in lex.tokens() if t != BLANK]


def cmd_build_graph(args) -> int:
    _need_file(args.lexicon, "--lexicon")
    _need_file(args.arpa, "--arpa")
    if args.tokens:
        _need_file(args.tokens, "--tokens")
    try:
        lex = parse_lexicon(_read(args.lexicon))
    except GraphBuildError as e:
        raise DataError(f"{args.lexicon}: {e}") from None
    try:
        lm = arpa_mod.parse_arpa(_read(args.arpa))
    except arpa_mod.ArpaParseError as e:
        raise DataError(f"{args.arpa}:{e.lineno}: {e}") from None
    vocab = _read_vocab(args.tokens) if args.tokens else _default_vocab(lex)
    try:
        bundle = build_graph(lex, lm, vocab, Recipe(args.recipe), args.lm_scale)
    except (GraphBuildError, FstError) as e:
        raise DataError(str(e)) from None
    bundle.save(args.out_dir)
    for name, (ns, na) in bundle.stats.items():
        print(f"{name:<15} states={ns:<8d} arcs={na}")
    print(f"wrote {args.out_dir} (recipe={bundle.recipe.value})")
    return EXIT_OK


def cmd_gen_synth(args) -> int:
    _need_file(args.corpus, "--corpus")
    _need_file(args.lexicon, "--lexicon")
    if args.config:
        _need_file(args.config, "--config")
    try:
        cfg = SynthConfig.from_json(_read(args.config)) if args.config else SynthConfig()
        lex = parse_lexicon(_read(args.lexicon))
    except (ValueError, TypeError) as e:
        raise DataError(str(e)) from None
    if args.seed is not None:
        cfg.seed = args.seed
    corpus = [line.split() for line in _read(args.corpus).splitlines() if line.strip()]
    vocab = _default_vocab(lex)
    if len(vocab) > cfg.vocab_size:
        raise DataError(f"lexicon uses {len(vocab) - 1} tokens; vocab_size {cfg.vocab_size} "
                        f"leaves room for only {cfg.vocab_size - 1}")
    # pad with unused filler tokens up to the configured vocabulary size
    filler = (f"<unk{i}>" for i in range(cfg.vocab_size))
    while len(vocab) < cfg.vocab_size:
        vocab.append(next(filler))
    try:
        utts = generate(cfg, corpus, lex, vocab)
    except ValueError as e:
        raise DataError(str(e)) from None
    manifest = write_corpus(utts, args.out_dir, cfg)
    with open(os.path.join(args.out_dir, "tokens.txt"), "w") as f:
        f.write("".join(t + "\n" for t in vocab))
    with open(os.path.join(args.out_dir, "refs.jsonl"), "w") as f:
        for u in utts:
            f.write(json.dumps({"utt_id": u.utt_id, "text": " ".join(u.reference_words)}) + "\n")
    print(f"wrote {len(utts)} utterances, {manifest}")
    return EXIT_OK


def _load_posteriors(path):
    if os.path.isdir(path):
        mpath = os.path.join(path, "manifest.json")
        if os.path.isfile(mpath):
            path = mpath
        else:
            files = sorted(glob.glob(os.path.join(path, "*.ctcp")))
            if not files:
                raise UsageError(f"--posteriors: {path} has no manifest.json or .ctcp files")
            return [(os.path.splitext(os.path.basename(p))[0], load(p)) for p in files]
    _need_file(path, "--posteriors")
    try:
        with open(path) as f:
            manifest = json.load(f)
        base = os.path.dirname(os.path.abspath(path))
        return [(e["utt_id"], load(os.path.join(base, e["path"])))
                for e in manifest["utterances"]]
    except (KeyError, TypeError, json.JSONDecodeError) as e:
        raise DataError(f"{path}: malformed manifest ({e})") from None


def cmd_decode(args) -> int:
    for name in ("tlg.fst.txt", "tokens.syms", "words.syms", "recipe.json"):
        _need_file(os.path.join(args.graph, name), "--graph")
    if not os.path.exists(args.posteriors):
        raise UsageError(f"--posteriors: no such file or directory: {args.posteriors}")
    try:
        bundle = GraphBundle.load(args.graph)
    except (FstFormatError, ValueError, KeyError) as e:
        raise DataError(f"{args.graph}: {e}") from None
    utts = _load_posteriors(args.posteriors)
    jobs = args.jobs if args.jobs is not None else default_jobs()
    batch = decode_batch(bundle, utts, args.strategy, Beam(args.beam, args.max_active),
                         args.ac_scale, jobs)
    text = batch.to_jsonl([u for u, _ in utts], include_time=not args.no_time)
    if args.out == "-":
        sys.stdout.write(text)
    else:
        with open(args.out, "w") as f:
            f.write(text)
    print(f"{batch.strategy}: {len(utts)} utterances, {batch.frames_decoded}/"
          f"{batch.total_frames} frames, {batch.decode_time:.3f}s decode", file=sys.stderr)
    for uid, err in batch.errors.items():
        print(f"{uid}: {err}", file=sys.stderr)
    return EXIT_DECODE if batch.errors else EXIT_OK


def cmd_score(args) -> int:
    _need_file(args.refs, "--refs")
    _need_file(args.hyps, "--hyps")
    try:
        refs = texts_by_id(read_jsonl(args.refs))
        hyps = texts_by_id(read_jsonl(args.hyps))
    except (KeyError, json.JSONDecodeError) as e:
        raise DataError(f"bad JSON-lines input: {e}") from None
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        rep = score_corpus(refs, hyps, args.unit)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    print(rep.table())
    if args.report:
        with open(args.report, "w") as f:
            json.dump(rep.to_json(), f, indent=1)
            f.write("\n")
    return EXIT_OK


def cmd_bench(args) -> int:
    runs = {}
    for item in args.results:
        name, sep, path = item.partition("=")
        if not sep:
            path, name = item, os.path.splitext(os.path.basename(item))[0]
        _need_file(path, "--results")
        if name in runs:
            raise UsageError(f"--results: duplicate name {name!r}")
        try:
            runs[name] = [r for r in read_jsonl(path) if "error" not in r]
        except json.JSONDecodeError as e:
            raise DataError(f"{path}: {e}") from None
    if args.baseline not in runs:
        raise UsageError(f"--baseline {args.baseline!r} is not one of {sorted(runs)}")
    try:
        rep = bench_compare(runs, args.baseline)
    except KeyError as e:
        raise DataError(f"result records lack field {e}; decode without --no-time") from None
    except ValueError as e:
        raise DataError(str(e)) from None
    print(rep.table())
    if args.report:
        with open(args.report, "w") as f:
            json.dump(rep.to_json(), f, indent=1)
            f.write("\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="spikewin", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    b = sub.add_parser("build-graph", help="compile lexicon + ARPA LM into a TLG bundle")
    b.add_argument("--lexicon", required=True)
    b.add_argument("--arpa", required=True)
    b.add_argument("--tokens", help="posterior column symbols, one per line "
                                    "(default: <blk> then lexicon tokens)")
    b.add_argument("--recipe", choices=[r.value for r in Recipe], default="det-push-min")
    b.add_argument("--lm-scale", type=_positive(float), default=1.0)
    b.add_argument("--out-dir", required=True)
    b.set_defaults(func=cmd_build_graph)

    g = sub.add_parser("gen-synth", help="synthetic spiky posteriors for a text corpus")
    g.add_argument("--corpus", required=True)
    g.add_argument("--lexicon", required=True)
    g.add_argument("--config", help="JSON with SynthConfig fields")
    g.add_argument("--seed", type=int, help="overrides the config seed")
    g.add_argument("--out-dir", required=True)
    g.set_defaults(func=cmd_gen_synth)

    d = sub.add_parser("decode", help="decode posteriors with a graph bundle")
    d.add_argument("--graph", required=True, help="bundle directory from build-graph")
    d.add_argument("--posteriors", required=True, help="manifest.json or a directory")
    d.add_argument("--strategy", type=_strategy, default="dense")
    d.add_argument("--beam", type=_positive(float), default=16.0)
    d.add_argument("--max-active", type=_positive(int), default=2000)
    d.add_argument("--ac-scale", type=_positive(float), default=1.0)
    d.add_argument("--jobs", type=_positive(int), help="default: $SPIKEWIN_JOBS or 1")
    d.add_argument("--out", required=True, help="JSON-lines output, '-' for stdout")
    d.add_argument("--no-time", action="store_true", help="omit wall_ms fields")
    d.set_defaults(func=cmd_decode)

    s = sub.add_parser("score", help="error rate of hypotheses against references")
    s.add_argument("--refs", required=True)
    s.add_argument("--hyps", required=True)
    s.add_argument("--unit", choices=["char", "token"], default="char")
    s.add_argument("--report", help="also write the JSON report here")
    s.set_defaults(func=cmd_score)

    n = sub.add_parser("bench", help="speedup and frame reduction between decode runs")
    n.add_argument("--results", nargs="+", required=True, metavar="[NAME=]PATH")
    n.add_argument("--baseline", required=True)
    n.add_argument("--report", help="also write the JSON report here")
    n.set_defaults(func=cmd_bench)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as e:
        print(f"spikewin: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, PosteriorFormatError, FstFormatError, OSError) as e:
        print(f"spikewin: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
