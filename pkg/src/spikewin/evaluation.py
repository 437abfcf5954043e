"""Error-rate scoring and speed comparison between decoding strategies."""

from __future__ import annotations

import json
import warnings
from dataclasses import asdict, dataclass, field
from typing import Dict, Iterable, List, Mapping, Sequence, Tuple


class ContractError(ValueError):
    pass


def levenshtein(ref: Sequence, hyp: Sequence) -> Tuple[int, int, int, int]:
    """Unit-cost edit distance with one optimal alignment's ``(dist, S, I, D)``.

    When several alignments are optimal the backtrace prefers a
    substitution (or match), then a deletion, then an insertion.
    """
    n, m = len(ref), len(hyp)
    prev = list(range(m + 1))
    table = [prev]
    for i in range(1, n + 1):
        row = [i] + [0] * m
        r = ref[i - 1]
        for j in range(1, m + 1):
            row[j] = min(prev[j - 1] + (r != hyp[j - 1]), prev[j] + 1, row[j - 1] + 1)
        table.append(row)
        prev = row

    s = ins = dels = 0
    i, j = n, m
    while i > 0 or j > 0:
        d = table[i][j]
        if i > 0 and j > 0 and table[i - 1][j - 1] + (ref[i - 1] != hyp[j - 1]) == d:
            s += ref[i - 1] != hyp[j - 1]
            i, j = i - 1, j - 1
        elif i > 0 and table[i - 1][j] + 1 == d:
            dels += 1
            i -= 1
        else:
            ins += 1
            j -= 1
    return table[n][m], s, ins, dels


def split_units(text: str, unit: str) -> List[str]:
    """``char``: every non-whitespace character; ``token``: whitespace-separated symbols."""
    if unit == "char":
        return [c for c in text if not c.isspace()]
    if unit == "token":
        return text.split()
    raise ValueError(f"unit must be 'char' or 'token', got {unit!r}")


@dataclass
class UttScore:
    utt_id: str
    distance: int
    substitutions: int
    insertions: int
    deletions: int
    reference_length: int
    missing: bool = False


@dataclass
class ScoreReport:
    substitutions: int = 0
    insertions: int = 0
    deletions: int = 0
    reference_length: int = 0
    unit: str = "token"
    utterances: List[UttScore] = field(default_factory=list)

    @property
    def errors(self) -> int:
        return self.substitutions + self.insertions + self.deletions

    @property
    def cer(self) -> float:
        if self.reference_length == 0:
            return 0.0 if self.errors == 0 else float("inf")
        return 100.0 * self.errors / self.reference_length

    def to_json(self) -> dict:
        return {"unit": self.unit, "cer": self.cer, "substitutions": self.substitutions,
                "insertions": self.insertions, "deletions": self.deletions,
                "reference_length": self.reference_length,
                "utterances": [asdict(u) for u in self.utterances]}

    def table(self) -> str:
        return (f"unit={self.unit}  N={self.reference_length}  S={self.substitutions}  "
                f"I={self.insertions}  D={self.deletions}  CER={self.cer:.2f}%")


def score_sequences(pairs: Iterable[Tuple[str, Sequence, Sequence]],
                    unit: str = "token") -> ScoreReport:
    """Micro-averaged error rate over ``(utt_id, ref_units, hyp_units)`` triples."""
    rep = ScoreReport(unit=unit)
    for uid, ref, hyp in pairs:
        d, s, i, dl = levenshtein(ref, hyp)
        rep.utterances.append(UttScore(uid, d, s, i, dl, len(ref)))
        rep.substitutions += s
        rep.insertions += i
        rep.deletions += dl
        rep.reference_length += len(ref)
    return rep


def score_corpus(refs: Mapping[str, str], hyps: Mapping[str, str],
                 unit: str = "char") -> ScoreReport:
    """Score hypothesis texts against references keyed by utterance id.

    A reference with no hypothesis counts as fully deleted (with a
    warning); hypotheses without a reference are ignored (with a warning).
    """
    missing = [u for u in refs if u not in hyps]
    extra = [u for u in hyps if u not in refs]
    if missing:
        warnings.warn(f"{len(missing)} utterance(s) have no hypothesis, scored as deletions: "
                      f"{', '.join(missing[:5])}", stacklevel=2)
    if extra:
        warnings.warn(f"{len(extra)} hypothesis id(s) have no reference and were ignored",
                      stacklevel=2)
    rep = score_sequences(((u, split_units(refs[u], unit), split_units(hyps.get(u, ""), unit))
                           for u in refs), unit)
    for u in rep.utterances:
        u.missing = u.utt_id in missing
    return rep


@dataclass
class StrategyTiming:
    name: str
    wall_time: float
    frames_decoded: int
    total_frames: int
    speedup: float
    frame_reduction: float


@dataclass
class BenchReport:
    baseline: str
    strategies: List[StrategyTiming]

    def get(self, name: str) -> StrategyTiming:
        for s in self.strategies:
            if s.name == name:
                return s
        raise KeyError(name)

    def to_json(self) -> dict:
        return {"baseline": self.baseline, "strategies": [asdict(s) for s in self.strategies]}

    def table(self) -> str:
        rows = [f"{'strategy':<16}{'wall_s':>10}{'frames':>10}{'reduction':>11}{'speedup':>9}"]
        for s in self.strategies:
            rows.append(f"{s.name:<16}{s.wall_time:>10.3f}{s.frames_decoded:>10d}"
                        f"{s.frame_reduction:>10.2f}x{s.speedup:>8.2f}x")
        return "\n".join(rows)


def _record(r) -> dict:
    if isinstance(r, Mapping):
        return r
    return {"utt_id": r.utt_id, "wall_ms": r.wall_time * 1000.0,
            "frames_decoded": r.frames_decoded, "total_frames": r.total_frames}


def bench_compare(results_by_strategy: Mapping[str, Iterable], baseline: str) -> BenchReport:
    """Speedup ``t_baseline / t_s`` and frame reduction ``sum T / sum frames`` per strategy.

    Each value is an iterable of decode records: JSON dicts with ``utt_id``,
    ``wall_ms``, ``frames_decoded`` and ``total_frames``, or DecodeResults.
    """
    if baseline not in results_by_strategy:
        raise ContractError(f"baseline {baseline!r} not among {sorted(results_by_strategy)}")
    recs: Dict[str, List[dict]] = {k: [_record(r) for r in v]
                                   for k, v in results_by_strategy.items()}
    ids = {k: sorted(r["utt_id"] for r in v) for k, v in recs.items()}
    for k, v in ids.items():
        if v != ids[baseline]:
            raise ContractError(f"strategy {k!r} decoded a different utterance set "
                                f"than baseline {baseline!r}")
    times = {k: sum(r["wall_ms"] for r in v) / 1000.0 for k, v in recs.items()}
    out = []
    for k, v in recs.items():
        frames = sum(r["frames_decoded"] for r in v)
        total = sum(r["total_frames"] for r in v)
        out.append(StrategyTiming(
            k, times[k], frames, total,
            times[baseline] / times[k] if times[k] > 0 else float("inf"),
            total / frames if frames else float("inf")))
    return BenchReport(baseline, out)


def read_jsonl(path) -> List[dict]:
    with open(path) as f:
        return [json.loads(line) for line in f if line.strip()]


def texts_by_id(records: Iterable[dict]) -> Dict[str, str]:
    """``{utt_id: text}``, accepting either a ``text`` field or a ``words`` list."""
    out = {}
    for r in records:
        if "error" in r:
            continue
        text = r["text"] if "text" in r else " ".join(r.get("words", []))
        out[r["utt_id"]] = text
    return out
