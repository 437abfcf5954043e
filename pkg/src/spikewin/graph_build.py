"""Building the T, L and G machines and assembling the TLG decoding graph.

Two recipes are supported::

    det-min       TLG = T o min(det(L o G))
    det-push-min  TLG = T o min(push(det(L o G)))

Token labels in every machine are posterior column + 1, so label 0 stays
free for epsilon and the blank column ``b`` is label ``b + 1``.
"""

from __future__ import annotations

import enum
import json
import math
import os
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from . import fst as F
from .arpa import BOS, EOS, ArpaModel
from .fst import SymbolTable, Wfst

BLANK = "<blk>"
LN10 = math.log(10.0)


class GraphBuildError(ValueError):
    pass


class Recipe(enum.Enum):
    DET_MIN = "det-min"
    DET_PUSH_MIN = "det-push-min"


@dataclass
class LexiconEntry:
    word: str
    tokens: Tuple[str, ...]
    cost: float = 0.0


@dataclass
class Lexicon:
    entries: List[LexiconEntry] = field(default_factory=list)

    def words(self) -> List[str]:
        seen = {}
        for e in self.entries:
            seen.setdefault(e.word, None)
        return list(seen)

    def tokens(self) -> List[str]:
        seen = {}
        for e in self.entries:
            for t in e.tokens:
                seen.setdefault(t, None)
        return list(seen)

    def pronunciations(self, word: str) -> List[Tuple[str, ...]]:
        return [e.tokens for e in self.entries if e.word == word]


def parse_lexicon(text: str) -> Lexicon:
    """Read ``word<TAB>tok tok ...`` lines (``word<TAB>cost<TAB>toks`` also accepted)."""
    lex = Lexicon()
    for lineno, raw in enumerate(text.splitlines(), 1):
        if not raw.strip():
            continue
        parts = raw.rstrip("\n").split("\t")
        if len(parts) == 2:
            word, toks, cost = parts[0], parts[1], 0.0
        elif len(parts) == 3:
            word, toks = parts[0], parts[2]
            try:
                cost = float(parts[1])
            except ValueError:
                raise GraphBuildError(f"lexicon line {lineno}: bad cost {parts[1]!r}") from None
        else:
            raise GraphBuildError(f"lexicon line {lineno}: expected 'word<TAB>tokens'")
        tokens = tuple(toks.split())
        if not word.strip():
            raise GraphBuildError(f"lexicon line {lineno}: empty word")
        if not tokens:
            raise GraphBuildError(f"lexicon line {lineno}: word {word!r} has no tokens")
        lex.entries.append(LexiconEntry(word.strip(), tokens, cost))
    return lex


def format_lexicon(lex: Lexicon) -> str:
    return "".join(f"{e.word}\t{' '.join(e.tokens)}\n" if e.cost == 0.0
                   else f"{e.word}\t{e.cost!r}\t{' '.join(e.tokens)}\n" for e in lex.entries)


def make_token_table(vocab: Sequence[str]) -> SymbolTable:
    """``vocab[c]`` is posterior column ``c``; it gets label ``c + 1``."""
    table = SymbolTable()
    for c, sym in enumerate(vocab):
        table.add(sym, c + 1)
    return table


def make_word_table(words: Sequence[str]) -> SymbolTable:
    table = SymbolTable()
    for w in words:
        if w in (BOS, EOS):
            continue
        table.add(w)
    return table


def is_disambig(symbol: str) -> bool:
    return symbol.startswith("#") and symbol[1:].isdigit()


def token_ids(token_syms: SymbolTable) -> List[int]:
    """Labels of real tokens: not epsilon, not blank, not auxiliary."""
    return [i for s, i in token_syms.items() if i != 0 and s != BLANK and not is_disambig(s)]


def vocab_size(token_syms: SymbolTable) -> int:
    return len([1 for s, i in token_syms.items() if i != 0 and not is_disambig(s)])


# --- G -----------------------------------------------------------------------

def build_grammar_fst(lm: ArpaModel, word_syms: SymbolTable, lm_scale: float = 1.0) -> Wfst:
    """Backoff n-gram acceptor over word labels.

    One state per history; word arcs cost ``-ln P * lm_scale``; each
    non-empty history has an epsilon backoff arc to its longest proper
    suffix history. ``</s>`` becomes a final weight. ``<s>`` only picks the
    start state.
    """
    g = Wfst()
    if not lm.ngrams or not lm.ngrams.get(1):
        return g
    n = lm.order
    for (w,) in lm.ngrams[1]:
        if w not in (BOS, EOS) and w not in word_syms:
            raise GraphBuildError(f"LM word {w!r} is not in the word table")

    # histories: all n-grams of order < n not ending in </s>
    hist_ids: Dict[Tuple[str, ...], int] = {(): g.add_state()}
    for k in range(1, n):
        for words in lm.ngrams.get(k, {}):
            if words[-1] != EOS:
                hist_ids[words] = g.add_state()

    def state_for(words: Tuple[str, ...]) -> int:
        words = words[len(words) - (n - 1):] if n > 1 else ()
        while words not in hist_ids:
            words = words[1:]
        return hist_ids[words]

    def cost(log10p: float) -> float:
        return -log10p * LN10 * lm_scale

    has_eos = (EOS,) in lm.ngrams[1]
    for k in range(1, n + 1):
        for words, (prob, _) in lm.ngrams.get(k, {}).items():
            hist, w = words[:-1], words[-1]
            if hist not in hist_ids:
                continue
            src = hist_ids[hist]
            if w == EOS:
                g.set_final(src, cost(prob))
            elif w == BOS:
                continue
            else:
                g.add_arc(src, word_syms.find(w), word_syms.find(w), cost(prob),
                          state_for(words))
    for hist, s in hist_ids.items():
        if not hist:
            continue
        _, backoff = lm.ngrams[len(hist)][hist]
        g.add_arc(s, 0, 0, cost(backoff) if backoff is not None else 0.0, state_for(hist[1:]))
        if not has_eos:
            g.set_final(s, 0.0)
    if not has_eos:
        g.set_final(hist_ids[()], 0.0)
    g.set_start(hist_ids[(BOS,)] if (BOS,) in hist_ids else hist_ids[()])
    return g


# --- L -----------------------------------------------------------------------

def add_disambiguation(lex: Lexicon) -> List[Optional[int]]:
    """Auxiliary-symbol index per entry (``None`` when no symbol is needed).

    Token sequences shared by several entries, or that are a proper prefix
    of another entry's sequence, get ``#1``, ``#2``, ... appended so that
    L o G stays determinizable.
    """
    counts = Counter(e.tokens for e in lex.entries)
    prefixes = set()
    for e in lex.entries:
        for k in range(1, len(e.tokens)):
            prefixes.add(e.tokens[:k])
    used = Counter()
    out = []
    for e in lex.entries:
        if counts[e.tokens] > 1 or e.tokens in prefixes:
            used[e.tokens] += 1
            out.append(used[e.tokens])
        else:
            out.append(None)
    return out


def build_lexicon_fst(lex: Lexicon, token_syms: SymbolTable, word_syms: SymbolTable) -> Wfst:
    """Token-to-word transducer closed over word sequences.

    Each pronunciation is a loop from state 0 back to state 0 that emits the
    word on its first arc. Auxiliary symbols ``#k`` are added to
    ``token_syms`` as needed.
    """
    if not lex.entries:
        raise GraphBuildError("lexicon is empty")
    aux = add_disambiguation(lex)
    for k in sorted({a for a in aux if a is not None}):
        if f"#{k}" not in token_syms:
            token_syms.add(f"#{k}")
    L = Wfst()
    L.add_state()
    L.set_start(0)
    L.set_final(0)
    for e, a in zip(lex.entries, aux):
        if not e.tokens:
            raise GraphBuildError(f"word {e.word!r} has an empty token sequence")
        try:
            labels = [token_syms.find(t) for t in e.tokens]
        except KeyError as err:
            raise GraphBuildError(f"word {e.word!r}: unknown token {err.args[0]!r}") from None
        if a is not None:
            labels.append(token_syms.find(f"#{a}"))
        try:
            wid = word_syms.find(e.word)
        except KeyError:
            raise GraphBuildError(f"word {e.word!r} is not in the word table") from None
        src = 0
        for i, lab in enumerate(labels):
            dst = 0 if i == len(labels) - 1 else L.add_state()
            L.add_arc(src, lab, wid if i == 0 else 0, e.cost if i == 0 else 0.0, dst)
            src = dst
    return L


# --- T -----------------------------------------------------------------------

def build_ctc_topology(token_syms: SymbolTable, blank: str = BLANK) -> Wfst:
    """CTC collapse transducer: frame-level tokens in, collapsed tokens out.

    State 0 means "last frame was blank (or nothing yet)"; state ``s_k`` means
    "last frame was token k". Blank loops on state 0, repeats of ``k`` loop
    on ``s_k`` silently, and a token is output only when it differs from the
    previous frame or follows a blank.
    """
    if blank not in token_syms:
        raise GraphBuildError(f"token table has no blank symbol {blank!r}")
    b = token_syms.find(blank)
    toks = token_ids(token_syms)
    T = Wfst()
    T.add_state()
    T.set_start(0)
    T.set_final(0)
    state = {k: T.add_state() for k in toks}
    T.add_arc(0, b, 0, 0.0, 0)
    for k in toks:
        T.add_arc(0, k, k, 0.0, state[k])
    for k in toks:
        s = state[k]
        T.set_final(s)
        T.add_arc(s, b, 0, 0.0, 0)
        T.add_arc(s, k, 0, 0.0, s)
        for j in toks:
            if j != k:
                T.add_arc(s, j, j, 0.0, state[j])
    return T


# --- TLG ---------------------------------------------------------------------

@dataclass
class GraphBundle:
    tlg: Wfst
    token_syms: SymbolTable
    word_syms: SymbolTable
    recipe: Recipe = Recipe.DET_PUSH_MIN
    lm_scale: float = 1.0
    blank: str = BLANK
    stats: Dict[str, Tuple[int, int]] = field(default_factory=dict)
    lg: Optional[Wfst] = field(default=None, repr=False)

    @property
    def blank_label(self) -> int:
        return self.token_syms.find(self.blank)

    @property
    def vocab_size(self) -> int:
        return vocab_size(self.token_syms)

    def save(self, out_dir) -> None:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "tlg.fst.txt"), "w") as f:
            f.write(F.write_text(self.tlg))
        with open(os.path.join(out_dir, "tokens.syms"), "w") as f:
            f.write(F.write_symbols(self.token_syms))
        with open(os.path.join(out_dir, "words.syms"), "w") as f:
            f.write(F.write_symbols(self.word_syms))
        meta = {"recipe": self.recipe.value, "lm_scale": self.lm_scale, "blank": self.blank,
                "stats": {k: list(v) for k, v in self.stats.items()}}
        with open(os.path.join(out_dir, "recipe.json"), "w") as f:
            json.dump(meta, f, indent=2)
            f.write("\n")

    @classmethod
    def load(cls, in_dir) -> "GraphBundle":
        def read(name):
            with open(os.path.join(in_dir, name)) as f:
                return f.read()

        meta = json.loads(read("recipe.json"))
        return cls(F.read_text(read("tlg.fst.txt")), F.read_symbols(read("tokens.syms")),
                   F.read_symbols(read("words.syms")), Recipe(meta["recipe"]),
                   float(meta.get("lm_scale", 1.0)), meta.get("blank", BLANK),
                   {k: tuple(v) for k, v in meta.get("stats", {}).items()})


def _size(fst: Wfst) -> Tuple[int, int]:
    return fst.num_states, fst.num_arcs()


def build_tlg(t: Wfst, l: Wfst, g: Wfst, recipe=Recipe.DET_PUSH_MIN,
              token_syms: Optional[SymbolTable] = None, word_syms: Optional[SymbolTable] = None,
              lm_scale: float = 1.0, det_max_states: Optional[int] = None) -> GraphBundle:
    """Assemble TLG; auxiliary symbols are mapped to epsilon after minimization."""
    recipe = Recipe(recipe)
    stats = {"T": _size(t), "L": _size(l), "G": _size(g)}
    lg = F.compose(l, g)
    stats["LG"] = _size(lg)
    lg = F.determinize(lg, max_states=det_max_states)
    stats["det(LG)"] = _size(lg)
    if recipe is Recipe.DET_PUSH_MIN:
        lg = F.weight_push(lg)
        stats["push(det(LG))"] = _size(lg)
    lg = F.minimize(lg)
    stats["min(LG)"] = _size(lg)
    if token_syms is not None:
        aux = {i: 0 for s, i in token_syms.items() if is_disambig(s)}
        lg_noaux = F.relabel(lg, imap=aux)
    else:
        lg_noaux = lg
    tlg = F.compose(t, lg_noaux)
    stats["TLG"] = _size(tlg)
    return GraphBundle(tlg, token_syms, word_syms, recipe, lm_scale, stats=stats, lg=lg)


def build_graph(lex: Lexicon, lm: ArpaModel, vocab: Sequence[str],
                recipe=Recipe.DET_PUSH_MIN, lm_scale: float = 1.0) -> GraphBundle:
    """Convenience wrapper: tables, T, L, G and TLG from a lexicon and an LM.

    ``vocab`` lists the posterior columns in order and must contain ``<blk>``.
    """
    token_syms = make_token_table(vocab)
    missing = [t for t in lex.tokens() if t not in token_syms]
    if missing:
        raise GraphBuildError(f"lexicon token {missing[0]!r} is not in the vocabulary")
    word_syms = make_word_table(lex.words())
    for (w,) in lm.ngrams.get(1, {}):
        if w not in (BOS, EOS) and w not in word_syms:
            raise GraphBuildError(f"LM word {w!r} has no lexicon entry")
    L = build_lexicon_fst(lex, token_syms, word_syms)
    G = build_grammar_fst(lm, word_syms, lm_scale)
    T = build_ctc_topology(token_syms)
    return build_tlg(T, L, G, recipe, token_syms, word_syms, lm_scale)


def frames_to_labels(frames: Sequence[int]) -> List[int]:
    """Posterior columns to token labels."""
    return [int(c) + 1 for c in frames]


def best_path_cost(graph: Wfst, ilabels: Sequence[int]) -> float:
    """Cost of the cheapest path in ``graph`` reading exactly ``ilabels``."""
    res = F.shortest_path(F.compose(F.linear_fst(list(ilabels)), graph))
    return math.inf if res is None else res[0]
