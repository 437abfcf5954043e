"""Frame-synchronous Viterbi beam search over a TLG graph.

Only the frames picked by a frame-selection strategy are scored; skipped
frames are simply absent from the search, so the graph sees the selected
subsequence as if it were the whole utterance.
"""

from __future__ import annotations

import heapq
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .frame_select import FrameSelection, ReducedPosterior, Strategy, apply_strategy, parse_strategy
from .graph_build import GraphBundle
from .posterior import PosteriorMatrix


class DecodeError(Exception):
    pass


class NoSurvivorsError(DecodeError):
    """Every hypothesis was pruned; distinct from a legitimately empty transcript."""


class VocabularyMismatch(DecodeError, ValueError):
    pass


@dataclass(frozen=True)
class Beam:
    beam_width: float = 16.0
    max_active: int = 2000

    def __post_init__(self):
        if not self.beam_width > 0:
            raise ValueError("beam_width must be > 0")
        if self.max_active < 1:
            raise ValueError("max_active must be >= 1")


UNBOUNDED = Beam(math.inf, 10 ** 9)


@dataclass
class DecodeResult:
    words: List[str]
    word_ids: List[int]
    tokens: List[int]
    total_cost: float
    frames_decoded: int
    total_frames: int
    wall_time: float
    flagged_nonfinal: bool = False
    utt_id: Optional[str] = None

    def collapsed_tokens(self, blank_id: int) -> List[int]:
        out, prev = [], None
        for t in self.tokens:
            if t != prev and t != blank_id:
                out.append(t)
            prev = t
        return out

    def to_json(self, include_time: bool = True) -> dict:
        d = {"utt_id": self.utt_id, "text": " ".join(self.words), "words": self.words,
             "total_cost": self.total_cost,
             "frames_decoded": self.frames_decoded, "total_frames": self.total_frames,
             "wall_ms": round(self.wall_time * 1000.0, 3),
             "flagged_nonfinal": self.flagged_nonfinal}
        if not include_time:
            del d["wall_ms"]
        return d


class _CompiledGraph:
    """Arc tables laid out for the inner loop."""

    def __init__(self, fst):
        self.start = fst.start
        self.finals = dict(fst.finals)
        self.emitting = []
        self.eps = []
        for s in fst.states():
            em, ep = [], []
            for a in fst.arcs(s):
                if a.ilabel == 0:
                    ep.append((a.weight, a.nextstate, a.olabel))
                else:
                    em.append((a.ilabel - 1, a.weight, a.nextstate, a.olabel))
            self.emitting.append(em)
            self.eps.append(ep)
        self.max_col = max((c for em in self.emitting for c, *_ in em), default=-1)


def _compiled(bundle: GraphBundle) -> _CompiledGraph:
    g = getattr(bundle, "_compiled", None)
    if g is None or g[0] is not bundle.tlg:
        graph = _CompiledGraph(bundle.tlg)
        if bundle.token_syms is not None:
            graph.vocab_size = bundle.vocab_size
            graph.blank_col = bundle.blank_label - 1
        else:
            graph.vocab_size = graph.blank_col = None
        g = (bundle.tlg, graph)
        bundle._compiled = g
    return g[1]


def _close(graph: _CompiledGraph, tokens: Dict[int, tuple]) -> Dict[int, tuple]:
    """Relax epsilon arcs from every token (label-correcting, so negative costs are fine)."""
    eps = graph.eps
    heap = [(c, s) for s, (c, _) in tokens.items() if eps[s]]
    if not heap:
        return tokens
    heapq.heapify(heap)
    while heap:
        c, s = heapq.heappop(heap)
        cur = tokens[s]
        if c > cur[0]:
            continue
        bp = cur[1]
        for w, nxt, ol in eps[s]:
            nc = c + w
            old = tokens.get(nxt)
            if old is None or nc < old[0]:
                tokens[nxt] = (nc, (bp, -1, ol))
                if eps[nxt]:
                    heapq.heappush(heap, (nc, nxt))
    return tokens


def _prune(tokens: Dict[int, tuple], beam: Beam) -> Dict[int, tuple]:
    if not tokens:
        return tokens
    best = min(c for c, _ in tokens.values())
    cutoff = best + beam.beam_width
    kept = {s: t for s, t in tokens.items() if t[0] <= cutoff}
    if len(kept) > beam.max_active:
        order = sorted(kept, key=lambda s: (kept[s][0], s))[:beam.max_active]
        kept = {s: kept[s] for s in order}
    return kept


def _rows_for(m: PosteriorMatrix, sel):
    if sel is None:
        return m.values, m.num_frames
    if isinstance(sel, ReducedPosterior):
        return sel.matrix.values, sel.total_frames
    idx = np.asarray(sel.indices, dtype=np.int64)
    if idx.size and (idx[0] < 0 or idx[-1] >= m.num_frames):
        raise ValueError("selection indices fall outside the posterior matrix")
    return m.values[idx], m.num_frames


def decode(bundle: GraphBundle, m: PosteriorMatrix,
           sel: Union[FrameSelection, ReducedPosterior, None] = None,
           beam: Beam = Beam(), ac_scale: float = 1.0) -> DecodeResult:
    """Viterbi beam search over the selected frames of ``m``.

    Each frame expands emitting arcs at cost ``arc + (-ac_scale * logprob)``,
    then closes over epsilon arcs, then prunes to ``best + beam_width`` and
    at most ``max_active`` tokens (ties broken by state id). The winner is
    the cheapest final-state token after the last frame; if none is final
    the cheapest token is returned with ``flagged_nonfinal`` set.
    """
    t0 = time.perf_counter()
    graph = _compiled(bundle)
    if graph.vocab_size is not None and m.vocab_size != graph.vocab_size:
        raise VocabularyMismatch(
            f"posterior has {m.vocab_size} columns, graph has {graph.vocab_size} tokens")
    if graph.max_col >= m.vocab_size:
        raise VocabularyMismatch(f"graph uses column {graph.max_col}, posterior has "
                                 f"{m.vocab_size}")
    if graph.blank_col is not None and graph.blank_col != m.blank_id:
        raise VocabularyMismatch(f"graph blank is column {graph.blank_col}, posterior "
                                 f"blank_id is {m.blank_id}")
    rows, total_frames = _rows_for(m, sel)
    if graph.start is None:
        raise NoSurvivorsError("decoding graph is empty")

    acoustic = (-ac_scale * np.asarray(rows, dtype=np.float64)).tolist()
    emitting = graph.emitting
    width = beam.beam_width
    active = _close(graph, {graph.start: (0.0, None)})
    active = _prune(active, beam)
    for row in acoustic:
        new: Dict[int, tuple] = {}
        best = math.inf
        for s, (c, bp) in active.items():
            for col, w, nxt, ol in emitting[s]:
                nc = c + w + row[col]
                if nc > best + width:
                    continue
                old = new.get(nxt)
                if old is None or nc < old[0]:
                    new[nxt] = (nc, (bp, col, ol))
                    if nc < best:
                        best = nc
        active = _prune(_close(graph, new), beam)
        if not active:
            raise NoSurvivorsError("no hypothesis survived pruning")

    finals = graph.finals
    best_state, best_cost = None, math.inf
    for s in sorted(active):
        if s in finals:
            c = active[s][0] + finals[s]
            if c < best_cost:
                best_state, best_cost = s, c
    flagged = best_state is None
    if flagged:
        best_state = min(active, key=lambda s: (active[s][0], s))
        best_cost = active[best_state][0]

    word_ids, tokens = [], []
    bp = active[best_state][1]
    while bp is not None:
        bp, col, ol = bp
        if ol:
            word_ids.append(ol)
        if col >= 0:
            tokens.append(col)
    word_ids.reverse()
    tokens.reverse()
    if bundle.word_syms is not None:
        words = [bundle.word_syms.find(w) for w in word_ids]
    else:
        words = [str(w) for w in word_ids]
    return DecodeResult(words, word_ids, tokens, best_cost, len(acoustic), total_frames,
                        time.perf_counter() - t0, flagged)


def greedy_ctc(m: PosteriorMatrix) -> List[int]:
    """Best-path CTC decoding without a graph: argmax, merge repeats, drop blanks."""
    out, prev = [], None
    for k in m.argmax().tolist():
        if k != prev and k != m.blank_id:
            out.append(k)
        prev = k
    return out


@dataclass
class BatchResult:
    results: List[Optional[DecodeResult]]
    errors: Dict[str, str] = field(default_factory=dict)
    total_wall: float = 0.0
    strategy: str = ""

    @property
    def frames_decoded(self) -> int:
        return sum(r.frames_decoded for r in self.results if r is not None)

    @property
    def total_frames(self) -> int:
        return sum(r.total_frames for r in self.results if r is not None)

    @property
    def decode_time(self) -> float:
        """Summed per-utterance selection + search time."""
        return sum(r.wall_time for r in self.results if r is not None)

    def to_jsonl(self, utt_ids: Sequence[str], include_time: bool = True) -> str:
        lines = []
        for uid, r in zip(utt_ids, self.results):
            if r is None:
                lines.append(json.dumps({"utt_id": uid, "error": self.errors.get(uid, "")}))
            else:
                lines.append(json.dumps(r.to_json(include_time)))
        return "".join(line + "\n" for line in lines)


def decode_one(bundle, utt_id, m, strategy, beam, ac_scale) -> DecodeResult:
    t0 = time.perf_counter()
    sel = apply_strategy(m, strategy)
    r = decode(bundle, m, sel, beam, ac_scale)
    r.wall_time = time.perf_counter() - t0
    r.utt_id = utt_id
    return r


_WORKER = {}


def _init_worker(bundle, strategy, beam, ac_scale):
    _WORKER.update(bundle=bundle, strategy=strategy, beam=beam, ac_scale=ac_scale)


def _work(item):
    utt_id, m = item
    try:
        return decode_one(_WORKER["bundle"], utt_id, m, _WORKER["strategy"], _WORKER["beam"],
                          _WORKER["ac_scale"]), None
    except (DecodeError, ValueError) as e:
        return None, f"{type(e).__name__}: {e}"


def decode_batch(bundle: GraphBundle, utterances, strategy: Union[str, Strategy] = "dense",
                 beam: Beam = Beam(), ac_scale: float = 1.0, jobs: int = 1) -> BatchResult:
    """Decode ``(utt_id, PosteriorMatrix)`` pairs; output order follows input order.

    Failures are recorded per utterance rather than raised.
    """
    if isinstance(strategy, str):
        strategy = parse_strategy(strategy)
    items = list(utterances)
    t0 = time.perf_counter()
    if jobs <= 1 or len(items) <= 1:
        _init_worker(bundle, strategy, beam, ac_scale)
        outs = [_work(it) for it in items]
    else:
        chunk = max(1, len(items) // (jobs * 4))
        with ProcessPoolExecutor(max_workers=jobs, initializer=_init_worker,
                                 initargs=(bundle, strategy, beam, ac_scale)) as ex:
            outs = list(ex.map(_work, items, chunksize=chunk))
    batch = BatchResult([r for r, _ in outs], strategy=str(strategy))
    for (uid, _), (_, err) in zip(items, outs):
        if err is not None:
            batch.errors[uid] = err
    batch.total_wall = time.perf_counter() - t0
    return batch


def default_jobs() -> int:
    try:
        return max(1, int(os.environ.get("SPIKEWIN_JOBS", "1")))
    except ValueError:
        return 1
