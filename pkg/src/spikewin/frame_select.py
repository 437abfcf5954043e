"""Choosing which CTC frames reach the WFST search.

Spike window decoding keeps every non-blank spike frame together with up
to ``w`` neighbours on the left, right or both sides. The baselines kept
for comparison are dense decoding (all frames), blank-probability
thresholding, discarding every blank frame, and averaging each run of
blank frames into a single frame.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .posterior import PosteriorMatrix


class Side(enum.Enum):
    LEFT = "left"
    RIGHT = "right"
    BOTH = "both"

    @property
    def k(self) -> int:
        """Window coefficient: sides contributing neighbours."""
        return 2 if self is Side.BOTH else 1


@dataclass(frozen=True)
class SwdConfig:
    window_w: int = 1
    side: Side = Side.BOTH

    def __post_init__(self):
        if self.window_w < 0:
            raise ValueError("window_w must be >= 0")
        object.__setattr__(self, "side", Side(self.side))

    @property
    def k(self) -> int:
        return self.side.k


@dataclass(frozen=True)
class Strategy:
    """A parsed strategy spec such as ``swd:both:1`` or ``lsd:0.95``."""

    name: str
    swd: Optional[SwdConfig] = None
    threshold: Optional[float] = None

    def __str__(self):
        if self.name == "swd":
            return f"swd:{self.swd.side.value}:{self.swd.window_w}"
        if self.name == "lsd":
            return f"lsd:{self.threshold:g}"
        return self.name


STRATEGY_GRAMMAR = ("dense | discard | average | lsd:<threshold in (0,1]> | "
                    "swd:<left|right|both>:<w >= 0>")


def parse_strategy(spec: str) -> Strategy:
    parts = spec.strip().lower().split(":")
    name, args = parts[0], parts[1:]
    try:
        if name in ("dense", "discard", "average") and not args:
            return Strategy(name)
        if name == "lsd" and len(args) == 1:
            thr = float(args[0])
            if not 0.0 < thr <= 1.0:
                raise ValueError
            return Strategy("lsd", threshold=thr)
        if name == "swd" and len(args) == 2:
            w = int(args[1])
            return Strategy("swd", swd=SwdConfig(w, Side(args[0])))
    except ValueError:
        pass
    raise ValueError(f"invalid strategy {spec!r}; expected {STRATEGY_GRAMMAR}")


@dataclass
class SelectionStats:
    total_frames: int
    spike_count: int
    selected_count: int
    # N*(K*W+1); only meaningful for SWD
    bound_l_swd: Optional[int] = None


@dataclass
class FrameSelection:
    indices: np.ndarray
    strategy: Strategy
    stats: SelectionStats = field(repr=False, default=None)

    def __len__(self):
        return len(self.indices)


@dataclass
class ReducedPosterior:
    """A shorter posterior built by the averaging strategy.

    ``source_frames[i]`` is the ``(start, stop)`` range of original frames
    that reduced frame ``i`` stands for.
    """

    matrix: PosteriorMatrix
    source_frames: List[Tuple[int, int]]
    total_frames: int

    def __len__(self):
        return self.matrix.num_frames


def swd_bound(n: int, k: int, w: int) -> int:
    """Frames kept by SWD when no windows overlap or get clipped."""
    if min(n, k, w) < 0 or k not in (1, 2):
        raise ValueError("need n, w >= 0 and k in {1, 2}")
    return n * (k * w + 1)


def detect_spikes(m: PosteriorMatrix) -> np.ndarray:
    return np.flatnonzero(m.argmax() != m.blank_id)


def spike_window(spikes: Sequence[int], cfg: SwdConfig) -> np.ndarray:
    """Candidate frames around each spike, unclipped and with duplicates."""
    w = cfg.window_w
    if cfg.side is Side.LEFT:
        offsets = np.arange(-w, 1)
    elif cfg.side is Side.RIGHT:
        offsets = np.arange(0, w + 1)
    else:
        offsets = np.arange(-w, w + 1)
    spikes = np.asarray(spikes, dtype=np.int64)
    return (spikes[:, None] + offsets[None, :]).ravel()


def post_process(candidates, total_frames: int, spikes=None, cfg: Optional[SwdConfig] = None,
                 strategy: Optional[Strategy] = None) -> FrameSelection:
    """Clip candidates to ``[0, total_frames)``, deduplicate and sort."""
    if total_frames < 1:
        raise ValueError("total_frames must be >= 1")
    c = np.asarray(candidates, dtype=np.int64)
    idx = np.unique(c[(c >= 0) & (c < total_frames)])
    n = len(spikes) if spikes is not None else 0
    bound = swd_bound(n, cfg.k, cfg.window_w) if cfg is not None else None
    if strategy is None:
        strategy = Strategy("swd", swd=cfg) if cfg is not None else Strategy("dense")
    return FrameSelection(idx, strategy, SelectionStats(total_frames, n, len(idx), bound))


def select_swd(m: PosteriorMatrix, cfg: SwdConfig) -> FrameSelection:
    spikes = detect_spikes(m)
    if m.num_frames == 0:
        return FrameSelection(np.zeros(0, dtype=np.int64), Strategy("swd", swd=cfg),
                              SelectionStats(0, 0, 0, 0))
    return post_process(spike_window(spikes, cfg), m.num_frames, spikes, cfg)


def _selection(idx, strategy, m, spikes=None) -> FrameSelection:
    idx = np.asarray(idx, dtype=np.int64)
    n = len(spikes) if spikes is not None else int((m.argmax() != m.blank_id).sum())
    return FrameSelection(idx, strategy, SelectionStats(m.num_frames, n, len(idx)))


def select_dense(m: PosteriorMatrix) -> FrameSelection:
    return _selection(np.arange(m.num_frames), Strategy("dense"), m)


def select_lsd(m: PosteriorMatrix, blank_threshold: float) -> FrameSelection:
    """Drop frames whose blank probability exceeds ``blank_threshold``."""
    if not 0.0 < blank_threshold <= 1.0:
        raise ValueError("blank_threshold must be in (0, 1]")
    keep = np.flatnonzero(m.blank_probs() <= blank_threshold)
    return _selection(keep, Strategy("lsd", threshold=blank_threshold), m)


def select_discard(m: PosteriorMatrix) -> FrameSelection:
    spikes = detect_spikes(m)
    return _selection(spikes, Strategy("discard"), m, spikes)


def reduce_average(m: PosteriorMatrix) -> ReducedPosterior:
    """Replace each maximal run of blank-argmax frames by its mean row.

    Rows are averaged as probabilities and converted back to log space.
    """
    is_blank = m.argmax() == m.blank_id
    rows = []
    sources = []
    t = 0
    T = m.num_frames
    while t < T:
        if is_blank[t]:
            end = t
            while end < T and is_blank[end]:
                end += 1
            row = np.log(np.exp(m.values[t:end].astype(np.float64)).mean(axis=0))
            rows.append(row - np.logaddexp.reduce(row))
            sources.append((t, end))
            t = end
        else:
            rows.append(m.values[t])
            sources.append((t, t + 1))
            t += 1
    values = np.array(rows, dtype=m.values.dtype) if rows else np.zeros((0, m.vocab_size))
    return ReducedPosterior(PosteriorMatrix(values, m.blank_id),
                            sources, T)


def apply_strategy(m: PosteriorMatrix, strategy: Union[Strategy, str]):
    """Run a strategy; returns a FrameSelection, or a ReducedPosterior for ``average``."""
    if isinstance(strategy, str):
        strategy = parse_strategy(strategy)
    if strategy.name == "dense":
        return select_dense(m)
    if strategy.name == "swd":
        return select_swd(m, strategy.swd)
    if strategy.name == "lsd":
        return select_lsd(m, strategy.threshold)
    if strategy.name == "discard":
        return select_discard(m)
    if strategy.name == "average":
        return reduce_average(m)
    raise ValueError(f"unknown strategy {strategy.name!r}")
