"""ARPA backoff n-gram language models: parsing, writing and a small estimator."""

from __future__ import annotations

import math
import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Dict, Iterable, Optional, Tuple

BOS = "<s>"
EOS = "</s>"


class ArpaParseError(ValueError):
    def __init__(self, message, lineno):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


@dataclass
class ArpaModel:
    """``ngrams[n][words] = (log10 prob, log10 backoff or None)``."""

    ngrams: Dict[int, Dict[Tuple[str, ...], Tuple[float, Optional[float]]]] = field(
        default_factory=dict)

    @property
    def order(self) -> int:
        return max(self.ngrams, default=0)

    def vocabulary(self):
        return [w for (w,) in self.ngrams.get(1, {})]

    def counts(self):
        return {n: len(self.ngrams[n]) for n in sorted(self.ngrams)}

    def log10_prob(self, word: str, history: Tuple[str, ...]) -> float:
        """Backoff probability of ``word`` after ``history``."""
        history = tuple(history)[-(self.order - 1):] if self.order > 1 else ()
        penalty = 0.0
        while True:
            g = history + (word,)
            entry = self.ngrams.get(len(g), {}).get(g)
            if entry is not None:
                return penalty + entry[0]
            if not history:
                raise KeyError(f"word {word!r} not in the model")
            ctx = self.ngrams.get(len(history), {}).get(history)
            if ctx is not None and ctx[1] is not None:
                penalty += ctx[1]
            history = history[1:]

    def sentence_log10_prob(self, words) -> float:
        hist = (BOS,)
        total = 0.0
        for w in list(words) + [EOS]:
            total += self.log10_prob(w, hist)
            hist = hist + (w,)
        return total


_NGRAM_COUNT = re.compile(r"^ngram\s+(\d+)\s*=\s*(\d+)$")
_SECTION = re.compile(r"^\\(\d+)-grams:$")


def parse_arpa(text: str) -> ArpaModel:
    lines = text.splitlines()
    i = 0
    while i < len(lines) and lines[i].strip() != "\\data\\":
        i += 1
    if i == len(lines):
        raise ArpaParseError("missing \\data\\ header", 1)
    i += 1
    declared = {}
    while i < len(lines):
        line = lines[i].strip()
        m = _NGRAM_COUNT.match(line)
        if m:
            declared[int(m.group(1))] = int(m.group(2))
        elif line:
            break
        i += 1
    if not declared:
        raise ArpaParseError("no 'ngram N=count' lines in header", i + 1)
    if sorted(declared) != list(range(1, max(declared) + 1)):
        raise ArpaParseError(f"header orders {sorted(declared)} are not 1..n", i)

    model = ArpaModel()
    order = None
    section_line = None
    ended = False

    def close_section(at):
        if order is not None and len(model.ngrams[order]) != declared[order]:
            raise ArpaParseError(
                f"header declares {declared[order]} {order}-grams but "
                f"{len(model.ngrams[order])} are present (section at line {section_line})", at)

    for lineno in range(i + 1, len(lines) + 1):
        line = lines[lineno - 1].strip()
        if not line:
            continue
        if line == "\\end\\":
            close_section(lineno)
            ended = True
            break
        m = _SECTION.match(line)
        if m:
            close_section(lineno)
            order = int(m.group(1))
            if order not in declared:
                raise ArpaParseError(f"section for undeclared order {order}", lineno)
            if order in model.ngrams:
                raise ArpaParseError(f"duplicate {order}-grams section", lineno)
            model.ngrams[order] = {}
            section_line = lineno
            continue
        if order is None:
            raise ArpaParseError(f"entry outside any n-gram section: {line!r}", lineno)
        fields = line.split()
        if len(fields) not in (order + 1, order + 2):
            raise ArpaParseError(f"expected {order + 1} or {order + 2} fields", lineno)
        try:
            prob = float(fields[0])
            backoff = float(fields[order + 1]) if len(fields) == order + 2 else None
        except ValueError:
            raise ArpaParseError(f"bad number in {line!r}", lineno) from None
        if prob > 0:
            raise ArpaParseError(f"log10 probability {prob} > 0", lineno)
        words = tuple(fields[1:order + 1])
        if order > 1 and words[:-1] not in model.ngrams.get(order - 1, {}):
            raise ArpaParseError(f"context {' '.join(words[:-1])!r} has no {order - 1}-gram",
                                 lineno)
        model.ngrams[order][words] = (prob, backoff)
    if not ended:
        raise ArpaParseError("missing \\end\\ marker", len(lines))
    missing = sorted(set(declared) - set(model.ngrams))
    if missing:
        raise ArpaParseError(f"missing section for {missing[0]}-grams", len(lines))
    return model


def emit_arpa(model: ArpaModel) -> str:
    out = ["", "\\data\\"]
    for n, c in model.counts().items():
        out.append(f"ngram {n}={c}")
    for n in sorted(model.ngrams):
        out.append("")
        out.append(f"\\{n}-grams:")
        for words, (prob, backoff) in model.ngrams[n].items():
            line = f"{prob!r}\t{' '.join(words)}"
            if backoff is not None:
                line += f"\t{backoff!r}"
            out.append(line)
    out += ["", "\\end\\", ""]
    return "\n".join(out)


def estimate_arpa(sentences: Iterable[Iterable[str]], order: int = 2,
                  discount: float = 0.5) -> ArpaModel:
    """Maximum-likelihood unigrams with absolute-discounted bigrams on top.

    Good enough to give synthetic corpora a grammar with real backoff arcs;
    not a replacement for a proper LM toolkit.
    """
    if order not in (1, 2):
        raise ValueError("only unigram and bigram estimation is supported")
    sents = [list(s) for s in sentences]
    uni = Counter()
    bi = defaultdict(Counter)
    for s in sents:
        uni.update(s)
        uni[EOS] += 1
        for h, w in zip([BOS] + s, s + [EOS]):
            bi[h][w] += 1
    total = sum(uni.values())
    p1 = {w: c / total for w, c in uni.items()}
    model = ArpaModel()
    model.ngrams[1] = {}
    if order == 1:
        for w in sorted(p1):
            model.ngrams[1][(w,)] = (math.log10(p1[w]), None)
        return model

    backoffs = {}
    model.ngrams[2] = {}
    for h in sorted(bi):
        ch = sum(bi[h].values())
        seen = sorted(bi[h])
        denom = 1.0 - sum(p1[w] for w in seen)
        # nothing left to back off to: keep the ML estimate so the row still sums to 1
        d = discount if denom > 1e-12 else 0.0
        for w in seen:
            model.ngrams[2][(h, w)] = (math.log10((bi[h][w] - d) / ch), None)
        left = d * len(seen) / ch
        backoffs[h] = math.log10(left / denom) if left > 0 else None
    for w in sorted(p1):
        model.ngrams[1][(w,)] = (math.log10(p1[w]), backoffs.get(w))
    model.ngrams[1][(BOS,)] = (-99.0, backoffs.get(BOS))
    return model
