"""Tropical-semiring algorithms on :class:`~spikewin.fst.core.Wfst`.

Every function returns a new machine and leaves its arguments untouched.
"""

from __future__ import annotations

import heapq
import math
from collections import defaultdict, deque
from typing import Dict, List, Optional, Tuple

from . import semiring
from .core import EPSILON, Arc, Wfst


class FstError(Exception):
    pass


class ContractError(FstError, ValueError):
    """An input violated an operation's precondition."""


class DeterminizationOverflow(FstError):
    def __init__(self, budget):
        super().__init__(f"determinization exceeded its state budget of {budget}")
        self.budget = budget


FROM_START = "from_start"
TO_FINAL = "to_final"


def _dijkstra(adj, init: Dict[int, float], n: int) -> List[float]:
    dist = [math.inf] * n
    heap = []
    for s, w in init.items():
        if w < dist[s]:
            dist[s] = w
            heap.append((w, s))
    heapq.heapify(heap)
    while heap:
        d, s = heapq.heappop(heap)
        if d > dist[s]:
            continue
        for w, t in adj[s]:
            nd = d + w
            if nd < dist[t]:
                dist[t] = nd
                heapq.heappush(heap, (nd, t))
    return dist


def shortest_distance(fst: Wfst, direction: str = FROM_START) -> List[float]:
    """Per-state shortest distance from the start state or to a final state.

    Weights are non-negative, so Dijkstra is exact even on cyclic machines.
    """
    n = fst.num_states
    if fst.is_empty():
        return [math.inf] * n
    if direction == FROM_START:
        adj = [[(a.weight, a.nextstate) for a in fst.arcs(s)] for s in fst.states()]
        return _dijkstra(adj, {fst.start: semiring.ONE}, n)
    if direction == TO_FINAL:
        radj = [[] for _ in range(n)]
        for s, a in fst.iter_arcs():
            radj[a.nextstate].append((a.weight, s))
        return _dijkstra(radj, dict(fst.finals), n)
    raise ValueError(f"unknown direction {direction!r}")


def _reachable(n, start_set, adj) -> set:
    seen = set(start_set)
    queue = deque(start_set)
    while queue:
        s = queue.popleft()
        for t in adj[s]:
            if t not in seen:
                seen.add(t)
                queue.append(t)
    return seen


def _renumber(fst: Wfst, keep, order=None) -> Wfst:
    """Copy the states in ``keep`` (in ``order`` if given), dropping arcs to discarded states."""
    order = sorted(keep) if order is None else order
    new_id = {s: i for i, s in enumerate(order)}
    out = Wfst()
    out.add_states(len(order))
    for s in order:
        out.set_arcs(new_id[s], [a._replace(nextstate=new_id[a.nextstate])
                                 for a in fst.arcs(s) if a.nextstate in new_id])
        if s in fst.finals:
            out.finals[new_id[s]] = fst.finals[s]
    if fst.start in new_id:
        out.start = new_id[fst.start]
    return out


def connect(fst: Wfst) -> Wfst:
    """Trim states that are not on some start-to-final path."""
    if fst.is_empty():
        return Wfst()
    n = fst.num_states
    fwd = [[a.nextstate for a in fst.arcs(s)] for s in fst.states()]
    rev = [[] for _ in range(n)]
    for s, a in fst.iter_arcs():
        rev[a.nextstate].append(s)
    keep = _reachable(n, [fst.start], fwd) & _reachable(n, list(fst.finals), rev)
    if fst.start not in keep:
        return Wfst()
    return _renumber(fst, keep)


def arc_sort(fst: Wfst, by: str = "ilabel") -> Wfst:
    if by == "ilabel":
        key = lambda a: (a.ilabel, a.olabel)
    elif by == "olabel":
        key = lambda a: (a.olabel, a.ilabel)
    else:
        raise ValueError(f"cannot sort arcs by {by!r}")
    out = fst.copy()
    for s in out.states():
        out.set_arcs(s, sorted(out.arcs(s), key=key))
    return out


def _clean(w: float) -> float:
    # reweighting leaves residue like -1e-16 where the exact answer is 0
    return 0.0 if -1e-12 < w < 1e-12 else w


def _has_incoming(fst: Wfst, state: int) -> bool:
    return any(a.nextstate == state for _, a in fst.iter_arcs())


def _make_initial_acyclic(fst: Wfst) -> Wfst:
    """Give the machine a fresh start state with no incoming arcs."""
    out = fst.copy()
    s = out.add_state()
    out.set_arcs(s, fst.arcs(fst.start))
    if fst.start in fst.finals:
        out.finals[s] = fst.finals[fst.start]
    out.start = s
    return out


def weight_push(fst: Wfst, remove_total_weight: bool = False) -> Wfst:
    """Push weights toward the start state.

    Every arc is reweighted by the potential ``d`` = shortest distance to a
    final state: ``w' = w + d[next] - d[src]`` and ``final' = final - d[s]``.
    Afterwards each non-start state has a minimum outgoing cost
    (arcs and final weight together) of exactly 0. The total ``d[start]``
    stays on the start state's arcs and final weight unless
    ``remove_total_weight`` is set. When the start state has incoming arcs a
    fresh start state is added first, otherwise loops back through the start
    would pay the total again.
    """
    if fst.is_empty():
        return Wfst()
    dist = shortest_distance(fst, TO_FINAL)
    bad = [s for s in fst.states() if math.isinf(dist[s])]
    if bad:
        raise ContractError(f"state {bad[0]} cannot reach a final state; connect() first")
    total = dist[fst.start]
    if not remove_total_weight and total != 0.0 and _has_incoming(fst, fst.start):
        fst = _make_initial_acyclic(fst)
        dist.append(total)
    out = Wfst()
    out.add_states(fst.num_states)
    out.start = fst.start
    for s in fst.states():
        out.set_arcs(s, [a._replace(weight=_clean(a.weight + dist[a.nextstate] - dist[s]))
                         for a in fst.arcs(s)])
    for s, f in fst.finals.items():
        out.finals[s] = _clean(f - dist[s])
    if not remove_total_weight and total != 0.0:
        _add_initial_weight(out, total)
    return out


def _add_initial_weight(fst: Wfst, w: float) -> None:
    s = fst.start
    fst.set_arcs(s, [a._replace(weight=a.weight + w) for a in fst.arcs(s)])
    if s in fst.finals:
        fst.finals[s] += w


def compose(a: Wfst, b: Wfst) -> Wfst:
    """Compose ``a`` (outputs) with ``b`` (inputs) using a 3-state epsilon filter.

    Filter state 0 allows anything; after ``a`` moves alone on an output
    epsilon (state 1) ``b`` may not move alone, and after ``b`` moves alone
    on an input epsilon (state 2) ``a`` may not, until the next matching
    move. Simultaneous epsilon moves are allowed only from state 0, so each
    alignment of the two machines is built exactly once.
    """
    if a.is_empty() or b.is_empty():
        return Wfst()
    b_by_ilabel = defaultdict(list)
    for s in b.states():
        for arc in b.arcs(s):
            b_by_ilabel[(s, arc.ilabel)].append(arc)

    out = Wfst()
    ids = {}
    queue = deque()

    def state_id(triple):
        if triple not in ids:
            ids[triple] = out.add_state()
            queue.append(triple)
        return ids[triple]

    out.set_start(state_id((a.start, b.start, 0)))
    while queue:
        triple = queue.popleft()
        q1, q2, f = triple
        src = ids[triple]
        arcs = []
        for a1 in a.arcs(q1):
            if a1.olabel != EPSILON:
                for b1 in b_by_ilabel.get((q2, a1.olabel), ()):
                    arcs.append((a1.ilabel, b1.olabel, a1.weight + b1.weight,
                                 (a1.nextstate, b1.nextstate, 0)))
            else:
                if f != 2:
                    arcs.append((a1.ilabel, EPSILON, a1.weight, (a1.nextstate, q2, 1)))
                if f == 0:
                    for b1 in b_by_ilabel.get((q2, EPSILON), ()):
                        arcs.append((a1.ilabel, b1.olabel, a1.weight + b1.weight,
                                     (a1.nextstate, b1.nextstate, 0)))
        if f != 1:
            for b1 in b_by_ilabel.get((q2, EPSILON), ()):
                arcs.append((EPSILON, b1.olabel, b1.weight, (q1, b1.nextstate, 2)))
        for il, ol, w, dst in arcs:
            out.add_arc(src, il, ol, w, state_id(dst))
        if q1 in a.finals and q2 in b.finals:
            out.set_final(src, a.finals[q1] + b.finals[q2])
    return connect(out)


def encode_labels(fst: Wfst) -> Tuple[Wfst, Dict[int, Tuple[int, int]]]:
    """Fold each (ilabel, olabel) pair into one label, yielding an acceptor.

    The pair ``(0, 0)`` maps to epsilon. Returns the acceptor and the table
    needed by :func:`decode_labels`.
    """
    codes = {(EPSILON, EPSILON): EPSILON}
    pairs = sorted({(a.ilabel, a.olabel) for _, a in fst.iter_arcs()} - {(EPSILON, EPSILON)})
    for p in pairs:
        codes[p] = len(codes)
    out = fst.copy()
    for s in out.states():
        out.set_arcs(s, [Arc(codes[(a.ilabel, a.olabel)], codes[(a.ilabel, a.olabel)],
                             a.weight, a.nextstate) for a in out.arcs(s)])
    return out, {c: p for p, c in codes.items()}


def decode_labels(fst: Wfst, table: Dict[int, Tuple[int, int]]) -> Wfst:
    out = fst.copy()
    for s in out.states():
        out.set_arcs(s, [Arc(*table[a.ilabel], a.weight, a.nextstate) for a in out.arcs(s)])
    return out


def _eps_closure(fst: Wfst, subset: Dict[int, float]) -> Dict[int, float]:
    dist = dict(subset)
    heap = [(w, s) for s, w in subset.items()]
    heapq.heapify(heap)
    while heap:
        d, s = heapq.heappop(heap)
        if d > dist[s]:
            continue
        for a in fst.arcs(s):
            if a.ilabel == EPSILON:
                nd = d + a.weight
                if nd < dist.get(a.nextstate, math.inf):
                    dist[a.nextstate] = nd
                    heapq.heappush(heap, (nd, a.nextstate))
    return dist


def _subset_key(subset: Dict[int, float]):
    return tuple(sorted((s, semiring.quantize(r)) for s, r in subset.items()))


def _determinize_acceptor(fst: Wfst, budget: int) -> Wfst:
    out = Wfst()
    ids = {}
    subsets = []

    def state_id(subset):
        key = _subset_key(subset)
        if key not in ids:
            if len(subsets) >= budget:
                raise DeterminizationOverflow(budget)
            ids[key] = out.add_state()
            subsets.append(subset)
        return ids[key]

    out.set_start(state_id(_eps_closure(fst, {fst.start: 0.0})))
    i = 0
    while i < len(subsets):
        subset = subsets[i]
        final = min((r + fst.finals[s] for s, r in subset.items() if s in fst.finals),
                    default=math.inf)
        if not math.isinf(final):
            out.set_final(i, final)
        moves = defaultdict(dict)
        for s, r in subset.items():
            for a in fst.arcs(s):
                if a.ilabel == EPSILON:
                    continue
                dests = moves[a.ilabel]
                c = r + a.weight
                if c < dests.get(a.nextstate, math.inf):
                    dests[a.nextstate] = c
        for label in sorted(moves):
            dests = moves[label]
            w = min(dests.values())
            nxt = _eps_closure(fst, {s: _clean(c - w) for s, c in dests.items()})
            out.add_arc(i, label, label, w, state_id(nxt))
        i += 1
    return out


def determinize(fst: Wfst, max_states: Optional[int] = None) -> Wfst:
    """Weighted subset construction over encoded (ilabel, olabel) pairs.

    Epsilon:epsilon arcs are removed on the fly. The result has at most one
    arc per (state, label pair) and the same weighted relation as ``fst``.
    ``max_states`` defaults to ten times the input size; exceeding it raises
    :class:`DeterminizationOverflow` instead of looping on machines without
    the twins property.
    """
    if fst.is_empty():
        return Wfst()
    budget = max_states if max_states is not None else 10 * max(fst.num_states, 1)
    enc, table = encode_labels(fst)
    return connect(decode_labels(_determinize_acceptor(enc, budget), table))


def is_deterministic(fst: Wfst) -> bool:
    for s in fst.states():
        seen = set()
        for a in fst.arcs(s):
            pair = (a.ilabel, a.olabel)
            if pair == (EPSILON, EPSILON) or pair in seen:
                return False
            seen.add(pair)
    return True


def minimize(fst: Wfst) -> Wfst:
    """Minimize a deterministic machine.

    Weights are first pushed into canonical form (total removed), then
    states are merged by partition refinement on (final residual, arc label
    pair, arc residual, target block). The removed total is restored on the
    start state, or on the final weights when the start state lies on a
    cycle.
    """
    if not is_deterministic(fst):
        raise ContractError("minimize requires a deterministic machine")
    fst = connect(fst)
    if fst.is_empty():
        return Wfst()
    total = shortest_distance(fst, TO_FINAL)[fst.start]
    canon = weight_push(fst, remove_total_weight=True)

    q = semiring.quantize
    block = [q(canon.final(s)) for s in canon.states()]
    block = _relabel_blocks(block)
    while True:
        sigs = [(block[s], tuple(sorted((a.ilabel, a.olabel, q(a.weight), block[a.nextstate])
                                        for a in canon.arcs(s))))
                for s in canon.states()]
        new_block = _relabel_blocks(sigs)
        if max(new_block) == max(block):
            block = new_block
            break
        block = new_block

    # one representative per block, numbered in BFS order from the start
    rep = {}
    for s in canon.states():
        rep.setdefault(block[s], s)
    order = []
    seen = {block[canon.start]}
    queue = deque([block[canon.start]])
    while queue:
        b = queue.popleft()
        order.append(b)
        for a in canon.arcs(rep[b]):
            nb = block[a.nextstate]
            if nb not in seen:
                seen.add(nb)
                queue.append(nb)
    new_id = {b: i for i, b in enumerate(order)}
    out = Wfst()
    out.add_states(len(order))
    out.start = 0
    for b in order:
        s = rep[b]
        out.set_arcs(new_id[b], [a._replace(nextstate=new_id[block[a.nextstate]])
                                 for a in canon.arcs(s)])
        if s in canon.finals:
            out.finals[new_id[b]] = canon.finals[s]
    if total != 0.0:
        if _has_incoming(out, out.start):
            for s in out.finals:
                out.finals[s] += total
        else:
            _add_initial_weight(out, total)
    return out


def _relabel_blocks(keys) -> List[int]:
    ids = {}
    return [ids.setdefault(k, len(ids)) for k in keys]


def shortest_path(fst: Wfst) -> Optional[Tuple[float, List[Arc]]]:
    """Cheapest complete path as ``(cost, arcs)``, or ``None`` if nothing is accepted."""
    if fst.is_empty():
        return None
    n = fst.num_states
    dist = [math.inf] * n
    back: List[Optional[Tuple[int, Arc]]] = [None] * n
    dist[fst.start] = 0.0
    heap = [(0.0, fst.start)]
    while heap:
        d, s = heapq.heappop(heap)
        if d > dist[s]:
            continue
        for a in fst.arcs(s):
            nd = d + a.weight
            if nd < dist[a.nextstate]:
                dist[a.nextstate] = nd
                back[a.nextstate] = (s, a)
                heapq.heappush(heap, (nd, a.nextstate))
    best, best_state = math.inf, None
    for s, f in sorted(fst.finals.items()):
        if dist[s] + f < best:
            best, best_state = dist[s] + f, s
    if best_state is None:
        return None
    path = []
    s = best_state
    while back[s] is not None:
        s, arc = back[s]
        path.append(arc)
    path.reverse()
    return best, path


def relabel(fst: Wfst, imap: Optional[Dict[int, int]] = None,
            omap: Optional[Dict[int, int]] = None) -> Wfst:
    """Rewrite labels through ``imap``/``omap``; unmapped labels pass through."""
    imap = imap or {}
    omap = omap or {}
    out = fst.copy()
    for s in out.states():
        out.set_arcs(s, [a._replace(ilabel=imap.get(a.ilabel, a.ilabel),
                                    olabel=omap.get(a.olabel, a.olabel))
                         for a in out.arcs(s)])
    return out


def project(fst: Wfst, side: str = "input") -> Wfst:
    out = fst.copy()
    for s in out.states():
        if side == "input":
            out.set_arcs(s, [a._replace(olabel=a.ilabel) for a in out.arcs(s)])
        elif side == "output":
            out.set_arcs(s, [a._replace(ilabel=a.olabel) for a in out.arcs(s)])
        else:
            raise ValueError(f"unknown side {side!r}")
    return out


def invert(fst: Wfst) -> Wfst:
    out = fst.copy()
    for s in out.states():
        out.set_arcs(s, [a._replace(ilabel=a.olabel, olabel=a.ilabel) for a in out.arcs(s)])
    return out
