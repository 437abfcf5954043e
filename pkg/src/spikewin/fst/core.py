from __future__ import annotations

from typing import Dict, Iterator, List, NamedTuple, Optional

from . import semiring

EPSILON = 0


class Arc(NamedTuple):
    ilabel: int
    olabel: int
    weight: float
    nextstate: int


class Wfst:
    """A weighted transducer over the tropical semiring.

    States are the contiguous ids ``0 .. num_states - 1``. A machine with no
    states has ``start = None`` and accepts nothing. Algorithms in
    :mod:`spikewin.fst.ops` never modify their inputs; the mutating methods
    here are only for building a machine before handing it out.
    """

    def __init__(self):
        self.start: Optional[int] = None
        self._arcs: List[List[Arc]] = []
        self.finals: Dict[int, float] = {}

    # construction
    def add_state(self) -> int:
        self._arcs.append([])
        return len(self._arcs) - 1

    def add_states(self, n: int) -> None:
        for _ in range(n):
            self._arcs.append([])

    def set_start(self, state: int) -> None:
        self._check_state(state)
        self.start = state

    def set_final(self, state: int, weight: float = semiring.ONE) -> None:
        self._check_state(state)
        weight = semiring.check(weight)
        if semiring.is_zero(weight):
            self.finals.pop(state, None)
        else:
            self.finals[state] = weight

    def add_arc(self, state: int, ilabel: int, olabel: int, weight: float, nextstate: int) -> None:
        self._check_state(state)
        self._check_state(nextstate)
        if ilabel < 0 or olabel < 0:
            raise ValueError("labels must be non-negative")
        self._arcs[state].append(Arc(int(ilabel), int(olabel), semiring.check(weight), int(nextstate)))

    def set_arcs(self, state: int, arcs: List[Arc]) -> None:
        self._arcs[state] = list(arcs)

    def _check_state(self, state: int) -> None:
        if not 0 <= state < len(self._arcs):
            raise IndexError(f"state {state} out of range (num_states={len(self._arcs)})")

    # access
    @property
    def num_states(self) -> int:
        return len(self._arcs)

    def states(self) -> range:
        return range(len(self._arcs))

    def arcs(self, state: int) -> List[Arc]:
        return self._arcs[state]

    def final(self, state: int) -> float:
        return self.finals.get(state, semiring.ZERO)

    def is_final(self, state: int) -> bool:
        return state in self.finals

    def num_arcs(self, state: Optional[int] = None) -> int:
        if state is not None:
            return len(self._arcs[state])
        return sum(len(a) for a in self._arcs)

    def iter_arcs(self) -> Iterator[tuple]:
        for s, arcs in enumerate(self._arcs):
            for arc in arcs:
                yield s, arc

    def input_labels(self) -> set:
        return {a.ilabel for _, a in self.iter_arcs()}

    def output_labels(self) -> set:
        return {a.olabel for _, a in self.iter_arcs()}

    def is_empty(self) -> bool:
        return self.start is None or self.num_states == 0

    def copy(self) -> "Wfst":
        out = Wfst()
        out._arcs = [list(a) for a in self._arcs]
        out.finals = dict(self.finals)
        out.start = self.start
        return out

    def __repr__(self) -> str:
        return f"Wfst(states={self.num_states}, arcs={self.num_arcs()}, start={self.start})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, Wfst):
            return NotImplemented
        return (self.start == other.start and self._arcs == other._arcs
                and self.finals == other.finals)


def linear_fst(ilabels, olabels=None, weights=None) -> Wfst:
    """Chain machine reading ``ilabels`` and writing ``olabels`` (acceptor if omitted)."""
    olabels = ilabels if olabels is None else olabels
    if len(olabels) != len(ilabels):
        raise ValueError("ilabels and olabels differ in length")
    weights = [0.0] * len(ilabels) if weights is None else weights
    fst = Wfst()
    fst.add_states(len(ilabels) + 1)
    fst.set_start(0)
    for i, (il, ol, w) in enumerate(zip(ilabels, olabels, weights)):
        fst.add_arc(i, il, ol, w, i + 1)
    fst.set_final(len(ilabels))
    return fst


class SymbolTable:
    """Bidirectional symbol <-> id map with ``<eps>`` at 0 by convention."""

    def __init__(self, eps: Optional[str] = "<eps>"):
        self._sym2id: Dict[str, int] = {}
        self._id2sym: Dict[int, str] = {}
        if eps is not None:
            self.add(eps, 0)

    def add(self, symbol: str, key: Optional[int] = None) -> int:
        if symbol in self._sym2id:
            if key is not None and self._sym2id[symbol] != key:
                raise ValueError(f"symbol {symbol!r} already has id {self._sym2id[symbol]}")
            return self._sym2id[symbol]
        if key is None:
            key = max(self._id2sym, default=-1) + 1
        if key in self._id2sym:
            raise ValueError(f"id {key} already bound to {self._id2sym[key]!r}")
        self._sym2id[symbol] = key
        self._id2sym[key] = symbol
        return key

    def find(self, key):
        """Look up an id (given a str) or a symbol (given an int)."""
        if isinstance(key, str):
            return self._sym2id[key]
        return self._id2sym[key]

    def get(self, symbol: str, default=None):
        return self._sym2id.get(symbol, default)

    def __contains__(self, symbol) -> bool:
        if isinstance(symbol, str):
            return symbol in self._sym2id
        return symbol in self._id2sym

    def __len__(self) -> int:
        return len(self._sym2id)

    def items(self):
        return sorted(self._sym2id.items(), key=lambda kv: kv[1])

    def symbols(self) -> List[str]:
        return [s for s, _ in self.items()]

    def __eq__(self, other) -> bool:
        return isinstance(other, SymbolTable) and self._sym2id == other._sym2id

