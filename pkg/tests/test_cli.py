import json
import subprocess
import sys

import pytest

from spikewin.arpa import emit_arpa
from spikewin.cli import main
from spikewin.graph_build import format_lexicon
from spikewin.synth import SynthConfig, make_toy_task


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    task = make_toy_task(SynthConfig(seed=2), n_utts=10, n_words=12)
    (d / "lex.txt").write_text(format_lexicon(task.lexicon))
    (d / "lm.arpa").write_text(emit_arpa(task.lm))
    (d / "corpus.txt").write_text("".join(" ".join(s) + "\n" for s in task.corpus))
    (d / "cfg.json").write_text(json.dumps({"vocab_size": 50, "seed": 2}))
    assert main(["gen-synth", "--corpus", str(d / "corpus.txt"), "--lexicon",
                 str(d / "lex.txt"), "--config", str(d / "cfg.json"),
                 "--out-dir", str(d / "data")]) == 0
    assert main(["build-graph", "--lexicon", str(d / "lex.txt"), "--arpa", str(d / "lm.arpa"),
                 "--tokens", str(d / "data" / "tokens.txt"), "--out-dir", str(d / "g")]) == 0
    return d, task


def decode(d, strategy, out, *extra):
    return main(["decode", "--graph", str(d / "g"), "--posteriors", str(d / "data"),
                 "--strategy", strategy, "--ac-scale", "3", "--out", str(out), *extra])


def test_gen_synth_outputs(workdir):
    d, task = workdir
    data = d / "data"
    assert len(list(data.glob("*.ctcp"))) == 10
    manifest = json.loads((data / "manifest.json").read_text())
    assert manifest["seed"] == 2
    pron = {e.word: e.tokens for e in task.lexicon.entries}
    for e, words in zip(manifest["utterances"], task.corpus):
        assert len(e["planted_frames"]) == sum(len(pron[w]) for w in words)
    refs = [json.loads(line) for line in (data / "refs.jsonl").read_text().splitlines()]
    assert [r["text"] for r in refs] == [" ".join(s) for s in task.corpus]


def test_gen_synth_rerun_bit_identical(workdir, tmp_path):
    d, _ = workdir
    assert main(["gen-synth", "--corpus", str(d / "corpus.txt"), "--lexicon", str(d / "lex.txt"),
                 "--config", str(d / "cfg.json"), "--out-dir", str(tmp_path)]) == 0
    for f in (d / "data").glob("*.ctcp"):
        assert (tmp_path / f.name).read_bytes() == f.read_bytes()


def test_build_graph_writes_four_files(workdir, capsys):
    d, _ = workdir
    assert sorted(p.name for p in (d / "g").iterdir()) == [
        "recipe.json", "tlg.fst.txt", "tokens.syms", "words.syms"]
    assert main(["build-graph", "--lexicon", str(d / "lex.txt"), "--arpa", str(d / "lm.arpa"),
                 "--tokens", str(d / "data" / "tokens.txt"), "--recipe", "det-min",
                 "--out-dir", str(d / "g2")]) == 0
    out = capsys.readouterr().out
    assert "det(LG)" in out and "TLG" in out and "states=" in out


def test_decode_score_bench(workdir, capsys):
    d, _ = workdir
    assert decode(d, "dense", d / "dense.jsonl") == 0
    assert decode(d, "swd:both:1", d / "swd.jsonl") == 0
    capsys.readouterr()
    assert main(["score", "--refs", str(d / "data" / "refs.jsonl"), "--hyps",
                 str(d / "dense.jsonl"), "--unit", "token", "--report",
                 str(d / "score.json")]) == 0
    assert "CER=0.00%" in capsys.readouterr().out
    rep = json.loads((d / "score.json").read_text())
    assert rep["reference_length"] == sum(u["reference_length"] for u in rep["utterances"])
    assert main(["bench", "--results", f"dense={d / 'dense.jsonl'}", f"swd={d / 'swd.jsonl'}",
                 "--baseline", "dense", "--report", str(d / "bench.json")]) == 0
    bench = json.loads((d / "bench.json").read_text())
    dense = next(s for s in bench["strategies"] if s["name"] == "dense")
    assert dense["speedup"] == 1.0
    swd = next(s for s in bench["strategies"] if s["name"] == "swd")
    rows = [json.loads(x) for x in (d / "swd.jsonl").read_text().splitlines()]
    assert swd["frames_decoded"] == sum(r["frames_decoded"] for r in rows)


def test_swd_w0_equals_discard(workdir):
    d, _ = workdir
    assert decode(d, "swd:both:0", d / "w0.jsonl", "--no-time") == 0
    assert decode(d, "discard", d / "disc.jsonl", "--no-time") == 0
    assert (d / "w0.jsonl").read_text() == (d / "disc.jsonl").read_text()


def test_invalid_strategy_is_usage_error(workdir, capsys):
    d, _ = workdir
    with pytest.raises(SystemExit) as e:
        decode(d, "swd:up:1", d / "x.jsonl")
    assert e.value.code == 1
    assert "swd:<left|right|both>" in capsys.readouterr().err


def test_missing_lexicon_is_usage_error(workdir, capsys):
    d, _ = workdir
    assert main(["build-graph", "--lexicon", str(d / "nope"), "--arpa", str(d / "lm.arpa"),
                 "--out-dir", str(d / "g3")]) == 1


def test_bad_arpa_is_data_error(workdir, tmp_path, capsys):
    d, _ = workdir
    bad = tmp_path / "bad.arpa"
    bad.write_text("\\data\\\nngram 1=2\n\n\\1-grams:\n-1\ta\n\n\\end\\\n")
    assert main(["build-graph", "--lexicon", str(d / "lex.txt"), "--arpa", str(bad),
                 "--out-dir", str(tmp_path / "g")]) == 2
    assert "bad.arpa:" in capsys.readouterr().err


def test_corrupt_posterior_is_data_error(workdir, tmp_path):
    d, _ = workdir
    (tmp_path / "x.ctcp").write_bytes(b"CTCP\x01")
    assert main(["decode", "--graph", str(d / "g"), "--posteriors", str(tmp_path),
                 "--out", str(tmp_path / "o.jsonl")]) == 2


def test_decode_failure_exit_code(workdir, tmp_path):
    import numpy as np

    from spikewin.posterior import PosteriorMatrix, save

    d, _ = workdir
    save(PosteriorMatrix(np.log(np.full((3, 4), 0.25)).astype(np.float32)), tmp_path / "u.ctcp")
    assert main(["decode", "--graph", str(d / "g"), "--posteriors", str(tmp_path),
                 "--out", str(tmp_path / "o.jsonl")]) == 3
    assert "error" in (tmp_path / "o.jsonl").read_text()


def test_console_entry_point_exit_codes(workdir, tmp_path):
    d, _ = workdir
    ok = subprocess.run([sys.executable, "-m", "spikewin.cli", "decode", "--graph", str(d / "g"),
                         "--posteriors", str(d / "data" / "manifest.json"), "--jobs", "2",
                         "--ac-scale", "3", "--out", "-"], capture_output=True, text=True)
    assert ok.returncode == 0
    assert len(ok.stdout.splitlines()) == 10
    bad = subprocess.run([sys.executable, "-m", "spikewin.cli", "decode"], capture_output=True,
                         text=True)
    assert bad.returncode == 1
