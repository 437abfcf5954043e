"""Synthetic spiky CTC posteriors with known references.

Each reference token is planted as a single spike frame. Frames right
next to a spike carry a little of that token's probability
(``neighbor_leak``) on top of a blank-dominant row, which is the structure
window-based frame selection relies on.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from .arpa import estimate_arpa
from .graph_build import BLANK, Lexicon, LexiconEntry
from .posterior import PosteriorMatrix, load, save

# keeps log() finite in degenerate configs
_FLOOR = 1e-10


@dataclass
class SynthConfig:
    vocab_size: int = 50
    blank_run_mean: float = 6.0
    spike_prob: float = 0.7
    neighbor_leak: float = 0.1
    noise_floor: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.vocab_size < 2:
            raise ValueError("vocab_size must be >= 2 (blank plus one token)")
        if self.blank_run_mean < 0:
            raise ValueError("blank_run_mean must be >= 0")
        for name in ("spike_prob", "neighbor_leak", "noise_floor"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must be a probability")
        if self.spike_prob + 2 * self.neighbor_leak + self.noise_floor > 1.0 + 1e-12:
            raise ValueError("spike_prob + 2*neighbor_leak + noise_floor must be <= 1")

    @classmethod
    def from_json(cls, text: str) -> "SynthConfig":
        return cls(**json.loads(text))


@dataclass
class SynthUtterance:
    utt_id: str
    matrix: PosteriorMatrix
    reference_words: List[str]
    reference_tokens: List[int]
    planted_spike_frames: List[int]
    seed: int = 0


def synthetic_vocab(vocab_size: int) -> List[str]:
    """``<blk>`` at column 0 followed by tokens ``t1 .. t{V-1}``."""
    return [BLANK] + [f"t{i}" for i in range(1, vocab_size)]


def random_lexicon(rng: np.random.Generator, vocab: Sequence[str], n_words: int,
                   min_len: int = 1, max_len: int = 4) -> Lexicon:
    tokens = [t for t in vocab if t != BLANK]
    lex = Lexicon()
    for i in range(n_words):
        n = int(rng.integers(min_len, max_len + 1))
        toks = tuple(tokens[j] for j in rng.integers(0, len(tokens), size=n))
        lex.entries.append(LexiconEntry(f"w{i}", toks))
    return lex


def random_corpus(rng: np.random.Generator, words: Sequence[str], n_utts: int,
                  min_words: int = 2, max_words: int = 6) -> List[List[str]]:
    return [[words[j] for j in rng.integers(0, len(words), size=int(rng.integers(min_words,
                                                                                 max_words + 1)))]
            for _ in range(n_utts)]


def _utterance(cfg: SynthConfig, tokens: List[int], rng: np.random.Generator, blank: int):
    n = len(tokens)
    runs = rng.poisson(cfg.blank_run_mean, size=n + 1)
    # CTC needs a blank between two identical consecutive tokens
    for i in range(1, n):
        if tokens[i] == tokens[i - 1] and runs[i] == 0:
            runs[i] = 1
    total = int(runs.sum()) + n
    V = cfg.vocab_size
    probs = np.zeros((total, V))
    spikes = []
    t = int(runs[0])
    for i, tok in enumerate(tokens):
        spikes.append(t)
        t += 1 + int(runs[i + 1])
    is_spike = np.zeros(total, dtype=bool)
    is_spike[spikes] = True
    for s, tok in zip(spikes, tokens):
        probs[s, tok] += cfg.spike_prob
        for nb in (s - 1, s + 1):
            if 0 <= nb < total and not is_spike[nb]:
                probs[nb, tok] += cfg.neighbor_leak
    probs += cfg.noise_floor / V
    probs[:, blank] += 1.0 - probs.sum(axis=1)
    probs += _FLOOR
    probs /= probs.sum(axis=1, keepdims=True)
    return np.log(probs).astype(np.float32), spikes


def generate(cfg: SynthConfig, corpus: Sequence[Sequence[str]], lexicon: Lexicon,
             vocab: Optional[Sequence[str]] = None, blank_id: int = 0,
             id_prefix: str = "utt") -> List[SynthUtterance]:
    """One utterance per corpus line; reproducible from ``cfg.seed``.

    Utterance ``i`` draws from its own generator seeded with ``(seed, i)``,
    so results do not depend on generation order.
    """
    vocab = list(vocab) if vocab is not None else synthetic_vocab(cfg.vocab_size)
    if len(vocab) != cfg.vocab_size:
        raise ValueError(f"vocab has {len(vocab)} symbols, config says {cfg.vocab_size}")
    col = {sym: i for i, sym in enumerate(vocab)}
    pron: Dict[str, tuple] = {}
    for e in lexicon.entries:
        pron.setdefault(e.word, e.tokens)
    out = []
    width = max(4, len(str(len(corpus))))
    for i, words in enumerate(corpus):
        tokens = []
        for w in words:
            if w not in pron:
                raise ValueError(f"word {w!r} (utterance {i}) is not in the lexicon")
            try:
                tokens.extend(col[t] for t in pron[w])
            except KeyError as e:
                raise ValueError(f"token {e.args[0]!r} of word {w!r} is not in the vocabulary")
        rng = np.random.default_rng([cfg.seed, i])
        values, spikes = _utterance(cfg, tokens, rng, blank_id)
        out.append(SynthUtterance(f"{id_prefix}{i:0{width}d}", PosteriorMatrix(values, blank_id),
                                  list(words), tokens, spikes, cfg.seed))
    return out


@dataclass
class ToyTask:
    """Everything needed to build a graph and decode a synthetic corpus."""

    vocab: List[str]
    lexicon: Lexicon
    corpus: List[List[str]]
    lm: object
    config: SynthConfig
    utterances: List[SynthUtterance] = field(default_factory=list)


def make_toy_task(cfg: SynthConfig, n_utts: int = 200, n_words: int = 40,
                  lm_order: int = 2, task_seed: Optional[int] = None) -> ToyTask:
    """Random lexicon + corpus + bigram LM + generated posteriors."""
    rng = np.random.default_rng(cfg.seed if task_seed is None else task_seed)
    vocab = synthetic_vocab(cfg.vocab_size)
    lex = random_lexicon(rng, vocab, n_words)
    corpus = random_corpus(rng, lex.words(), n_utts)
    lm = estimate_arpa(corpus, order=lm_order)
    return ToyTask(vocab, lex, corpus, lm, cfg, generate(cfg, corpus, lex, vocab))


def write_corpus(utts: Sequence[SynthUtterance], out_dir, cfg: SynthConfig) -> str:
    """Write one ``.ctcp`` file per utterance plus ``manifest.json``; returns the manifest path."""
    os.makedirs(out_dir, exist_ok=True)
    entries = []
    for u in utts:
        name = f"{u.utt_id}.ctcp"
        save(u.matrix, os.path.join(out_dir, name))
        entries.append({"utt_id": u.utt_id, "path": name, "reference": " ".join(u.reference_words),
                        "reference_tokens": u.reference_tokens,
                        "planted_frames": u.planted_spike_frames})
    manifest = {"seed": cfg.seed, "config": asdict(cfg), "utterances": entries}
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w") as f:
        json.dump(manifest, f, indent=1)
        f.write("\n")
    return path


def read_manifest(path):
    """Returns ``(manifest dict, [(utt_id, PosteriorMatrix), ...])``."""
    with open(path) as f:
        manifest = json.load(f)
    base = os.path.dirname(os.path.abspath(path))
    utts = [(e["utt_id"], load(os.path.join(base, e["path"]))) for e in manifest["utterances"]]
    return manifest, utts
