import math
import random

import numpy as np
import pytest

from oracles import best_frame_path, collapse, random_wfst
from spikewin.arpa import parse_arpa
from spikewin.decoder import (UNBOUNDED, Beam, NoSurvivorsError, VocabularyMismatch, decode,
                              decode_batch, greedy_ctc)
from spikewin.fst import Wfst, compose, linear_fst, shortest_path
from spikewin.frame_select import SwdConfig, apply_strategy, select_swd, swd_bound
from spikewin.graph_build import (BLANK, GraphBundle, build_ctc_topology, build_graph,
                                  make_token_table, parse_lexicon)
from spikewin.posterior import PosteriorMatrix
from spikewin.synth import SynthConfig, make_toy_task

ONE_WORD_LM = """\\data\\
ngram 1=1

\\1-grams:
0\thello

\\end\\
"""


def spike_matrix(T, spikes, V, peak=0.9):
    p = np.full((T, V), 0.01)
    p[:, 0] = 1 - 0.01 * (V - 1)
    for t, k in spikes:
        p[t] = (1 - peak) / (V - 1)
        p[t, k] = peak
    return PosteriorMatrix.from_probs(p)


def one_word_bundle():
    lex = parse_lexicon("hello\th i\n")
    return build_graph(lex, parse_arpa(ONE_WORD_LM), [BLANK, "h", "i"])


def test_one_word_dense():
    g = one_word_bundle()
    m = spike_matrix(12, [(3, 1), (8, 2)], 3)
    r = decode(g, m, apply_strategy(m, "dense"))
    assert r.words == ["hello"]
    assert r.frames_decoded == r.total_frames == 12
    assert r.collapsed_tokens(0) == [1, 2]
    assert not r.flagged_nonfinal


def test_one_word_swd():
    g = one_word_bundle()
    m = spike_matrix(12, [(3, 1), (8, 2)], 3)
    sel = select_swd(m, SwdConfig(1))
    r = decode(g, m, sel)
    assert r.words == ["hello"]
    assert r.frames_decoded <= swd_bound(2, 2, 1)
    assert r.total_frames == 12


def test_average_strategy_decodes():
    g = one_word_bundle()
    m = spike_matrix(12, [(3, 1), (8, 2)], 3)
    r = decode(g, m, apply_strategy(m, "average"))
    assert r.words == ["hello"]
    assert r.frames_decoded == 5


def test_vocabulary_checks():
    g = one_word_bundle()
    with pytest.raises(VocabularyMismatch):
        decode(g, spike_matrix(4, [], 4))
    m = spike_matrix(4, [(1, 1)], 3)
    with pytest.raises(VocabularyMismatch):
        decode(g, PosteriorMatrix(m.values, blank_id=2))


def test_no_survivors():
    f = linear_fst([2])
    f_bundle = GraphBundle(f, None, None)
    with pytest.raises(NoSurvivorsError):
        decode(f_bundle, spike_matrix(3, [], 3))


def test_nonfinal_fallback_is_flagged():
    f = linear_fst([1, 1, 1])
    f.finals.clear()
    r = decode(GraphBundle(f, None, None), spike_matrix(3, [], 2))
    assert r.flagged_nonfinal
    assert r.frames_decoded == 3


def random_instance(seed):
    rng = random.Random(seed)
    V = rng.randint(2, 4)
    g = random_wfst(rng, n_states=rng.randint(1, 8), n_symbols=V, eps_prob=0.2)
    T = rng.randint(0, 6)
    nprng = np.random.default_rng(seed)
    m = PosteriorMatrix.from_logits(nprng.normal(size=(T, V)) * 2)
    return g, m, rng.choice([0.5, 1.0, 2.0])


def test_unbounded_beam_matches_exhaustive_search():
    checked = 0
    for seed in range(150):
        g, m, ac = random_instance(seed)
        costs = (-ac * m.values).tolist()
        want, outs = best_frame_path(g, costs)
        try:
            r = decode(GraphBundle(g, None, None), m, None, UNBOUNDED, ac)
        except NoSurvivorsError:
            assert want == math.inf
            continue
        if want == math.inf:
            assert r.flagged_nonfinal
            continue
        assert not r.flagged_nonfinal
        assert abs(r.total_cost - want) <= 1e-9, seed
        checked += 1
    assert checked >= 40


def test_tight_beam_never_beats_optimum():
    for seed in range(60):
        g, m, ac = random_instance(seed)
        want, _ = best_frame_path(g, (-ac * m.values).tolist())
        try:
            r = decode(GraphBundle(g, None, None), m, None, Beam(1.0, 2), ac)
        except NoSurvivorsError:
            continue
        if not r.flagged_nonfinal:
            assert r.total_cost >= want - 1e-9


def test_greedy_examples():
    m = spike_matrix(5, [(1, 1), (2, 1), (4, 2)], 3)
    assert greedy_ctc(m) == [1, 2]
    assert greedy_ctc(spike_matrix(4, [], 3)) == []


def test_greedy_matches_topology():
    toks = make_token_table([BLANK, "a", "b", "c"])
    T = build_ctc_topology(toks)
    rng = np.random.default_rng(1)
    for _ in range(50):
        m = PosteriorMatrix.from_logits(rng.normal(size=(rng.integers(1, 9), 4)) * 3)
        arg = m.argmax().tolist()
        _, arcs = shortest_path(compose(linear_fst([c + 1 for c in arg]), T))
        via_t = [a.olabel - 1 for a in arcs if a.olabel]
        assert greedy_ctc(m) == via_t == collapse(arg, 0)


@pytest.fixture(scope="module")
def toy():
    task = make_toy_task(SynthConfig(seed=9), n_utts=12, n_words=15)
    bundle = build_graph(task.lexicon, task.lm, task.vocab)
    return task, bundle


def test_batch_frames_sum(toy):
    task, bundle = toy
    items = [(u.utt_id, u.matrix) for u in task.utterances[:2]]
    b = decode_batch(bundle, items, "dense", ac_scale=3.0)
    assert len(b.results) == 2 and not b.errors
    assert b.frames_decoded == sum(m.num_frames for _, m in items)


def test_batch_parallel_is_deterministic(toy):
    task, bundle = toy
    items = [(u.utt_id, u.matrix) for u in task.utterances]
    ids = [u for u, _ in items]
    for strategy in ("dense", "swd:both:1"):
        a = decode_batch(bundle, items, strategy, ac_scale=3.0, jobs=1)
        b = decode_batch(bundle, items, strategy, ac_scale=3.0, jobs=4)
        assert a.to_jsonl(ids, include_time=False) == b.to_jsonl(ids, include_time=False)


def test_batch_records_errors(toy):
    task, bundle = toy
    bad = PosteriorMatrix(np.log(np.full((3, 5), 0.2)))
    b = decode_batch(bundle, [("ok", task.utterances[0].matrix), ("bad", bad)], "dense",
                     ac_scale=3.0)
    assert b.results[1] is None and "VocabularyMismatch" in b.errors["bad"]
    lines = b.to_jsonl(["ok", "bad"]).splitlines()
    assert '"error"' in lines[1] and '"wall_ms"' in lines[0]


def test_toy_corpus_recovers_references(toy):
    task, bundle = toy
    b = decode_batch(bundle, [(u.utt_id, u.matrix) for u in task.utterances], "swd:both:1",
                     ac_scale=5.0)
    exact = sum(r.words == u.reference_words for r, u in zip(b.results, task.utterances))
    assert exact >= len(task.utterances) - 1
