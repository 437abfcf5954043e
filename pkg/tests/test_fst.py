import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import (acceptor_language, all_path_totals, compose_relations, random_wfst,
                     relations_equal, weighted_relation)
from spikewin.fst import (FROM_START, TO_FINAL, DeterminizationOverflow, FstFormatError,
                          SymbolTable, Wfst, arc_sort, compose, connect, determinize,
                          is_deterministic, linear_fst, minimize, read_symbols, read_text,
                          relabel, semiring, shortest_distance, shortest_path, weight_push,
                          write_symbols, write_text)

weights = st.one_of(st.floats(-1e3, 1e3, allow_nan=False), st.just(math.inf))
finite = st.floats(-1e3, 1e3, allow_nan=False)


def isomorphic(a: Wfst, b: Wfst, tol=1e-9) -> bool:
    """Same machine up to state renumbering (both deterministic on arc labels)."""
    if a.num_states != b.num_states or a.start is None or b.start is None:
        return a.is_empty() and b.is_empty()
    m = {a.start: b.start}
    todo = [a.start]
    while todo:
        s = todo.pop()
        t = m[s]
        if (s in a.finals) != (t in b.finals):
            return False
        if s in a.finals and abs(a.finals[s] - b.finals[t]) > tol:
            return False
        aa = sorted(a.arcs(s), key=lambda x: (x.ilabel, x.olabel))
        bb = sorted(b.arcs(t), key=lambda x: (x.ilabel, x.olabel))
        if len(aa) != len(bb):
            return False
        for x, y in zip(aa, bb):
            if (x.ilabel, x.olabel) != (y.ilabel, y.olabel) or abs(x.weight - y.weight) > tol:
                return False
            if x.nextstate in m:
                if m[x.nextstate] != y.nextstate:
                    return False
            else:
                m[x.nextstate] = y.nextstate
                todo.append(x.nextstate)
    return True


# --- semiring -----------------------------------------------------------------

@given(weights, weights, weights)
def test_semiring_laws(a, b, c):
    plus, times = semiring.plus, semiring.times
    assert plus(a, b) == plus(b, a)
    assert plus(plus(a, b), c) == plus(a, plus(b, c))
    assert plus(a, a) == a
    assert plus(a, semiring.ZERO) == a
    assert times(a, semiring.ONE) == a
    assert times(a, semiring.ZERO) == semiring.ZERO


@given(finite, finite, finite)
def test_semiring_times_laws(a, b, c):
    plus, times = semiring.plus, semiring.times
    assert math.isclose(times(times(a, b), c), times(a, times(b, c)), abs_tol=1e-9)
    assert math.isclose(times(a, plus(b, c)), plus(times(a, b), times(a, c)), abs_tol=1e-9)


def test_semiring_rejects_nan():
    with pytest.raises(ValueError):
        semiring.check(float("nan"))


# --- compose ------------------------------------------------------------------

def test_compose_single_path():
    a = linear_fst([1, 2], [5, 6], [1.0, 0.0])
    b = Wfst()
    b.add_states(3)
    b.set_start(0)
    b.add_arc(0, 5, 9, 2.0, 1)
    b.add_arc(1, 6, 0, 0.0, 2)
    b.set_final(2)
    rel = weighted_relation(compose(a, b))
    assert rel == {((1, 2), (9,)): 3.0}


def test_compose_with_identity_acceptor():
    rng = random.Random(11)
    a = random_wfst(rng, n_states=5, acyclic=True)
    ident = Wfst()
    ident.set_start(ident.add_state())
    ident.set_final(0)
    for k in (1, 2, 3):
        ident.add_arc(0, k, k, 0.0, 0)
    assert relations_equal(weighted_relation(compose(a, ident)), weighted_relation(a))


def test_compose_epsilon_paths_not_duplicated():
    # a: x:eps then eps:y ; b: eps:z then y:w -- several interleavings, one relation
    a = Wfst()
    a.add_states(3)
    a.set_start(0)
    a.add_arc(0, 1, 0, 1.0, 1)
    a.add_arc(1, 0, 2, 1.0, 2)
    a.set_final(2)
    b = Wfst()
    b.add_states(3)
    b.set_start(0)
    b.add_arc(0, 0, 3, 0.5, 1)
    b.add_arc(1, 2, 4, 0.5, 2)
    b.set_final(2)
    c = compose(a, b)
    assert weighted_relation(c) == {((1,), (3, 4)): 3.0}
    paths = all_path_totals(connect(c))
    assert len(paths) == 1


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_compose_matches_oracle(seed):
    rng = random.Random(seed)
    a = random_wfst(rng, n_states=rng.randint(1, 5), acyclic=True)
    b = random_wfst(rng, n_states=rng.randint(1, 5), acyclic=True)
    want = compose_relations(weighted_relation(a), weighted_relation(b))
    assert relations_equal(weighted_relation(compose(a, b)), want)


# --- determinize / minimize ----------------------------------------------------

def test_determinize_chain_is_fixpoint():
    chain = linear_fst([1, 2, 3], weights=[1.0, 2.0, 0.5])
    d = determinize(chain)
    assert is_deterministic(d)
    assert relations_equal(weighted_relation(d), weighted_relation(chain))
    assert d.num_states == chain.num_states


def test_determinize_parallel_arcs_take_min():
    f = Wfst()
    f.add_states(2)
    f.set_start(0)
    f.add_arc(0, 1, 1, 3.0, 1)
    f.add_arc(0, 1, 1, 5.0, 1)
    f.set_final(1)
    d = determinize(f)
    assert d.num_arcs() == 1
    assert next(d.iter_arcs())[1].weight == 3.0
    assert weighted_relation(d) == {((1,), (1,)): 3.0}


def test_determinize_budget():
    # classic non-determinizable pattern: two cycles with different weights
    f = Wfst()
    f.add_states(4)
    f.set_start(0)
    f.add_arc(0, 1, 1, 0.0, 1)
    f.add_arc(0, 1, 1, 0.0, 2)
    f.add_arc(1, 2, 2, 1.0, 1)
    f.add_arc(2, 2, 2, 2.0, 2)
    f.add_arc(1, 3, 3, 0.0, 3)
    f.add_arc(2, 4, 4, 0.0, 3)
    f.set_final(3)
    with pytest.raises(DeterminizationOverflow):
        determinize(f, max_states=50)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_determinize_minimize_match_oracle(seed):
    rng = random.Random(seed)
    x = random_wfst(rng, n_states=rng.randint(1, 6), acyclic=True, acceptor=True)
    d = determinize(x)
    assert is_deterministic(d)
    lang = weighted_relation(x)
    assert relations_equal(weighted_relation(d), lang)
    m = minimize(d)
    assert relations_equal(weighted_relation(m), lang)
    assert m.num_states <= d.num_states
    assert isomorphic(determinize(d), d) or relations_equal(weighted_relation(determinize(d)),
                                                            lang)
    assert len(acceptor_language(m)) == len(acceptor_language(x))


def test_determinize_idempotent_up_to_isomorphism():
    for seed in range(40):
        rng = random.Random(seed)
        x = random_wfst(rng, acyclic=True, acceptor=True)
        d = determinize(x)
        assert isomorphic(determinize(d), d), seed


def test_minimize_merges_equivalent_finals():
    f = Wfst()
    f.add_states(3)
    f.set_start(0)
    f.add_arc(0, 1, 1, 1.0, 1)
    f.add_arc(0, 2, 2, 1.0, 2)
    f.set_final(1, 0.5)
    f.set_final(2, 0.5)
    m = minimize(f)
    assert m.num_states == 2
    assert relations_equal(weighted_relation(m), weighted_relation(f))


def test_minimize_minimal_chain_unchanged():
    chain = linear_fst([1, 2, 3])
    assert minimize(chain).num_states == 4


# --- push / distances / connect -------------------------------------------------

def test_push_chain():
    p = weight_push(linear_fst([1, 2], weights=[2.0, 3.0]))
    arcs = [a.weight for _, a in p.iter_arcs()]
    assert arcs == [5.0, 0.0]
    assert weighted_relation(p) == {((1, 2), (1, 2)): 5.0}


def test_push_remove_total():
    p = weight_push(linear_fst([1, 2], weights=[2.0, 3.0]), remove_total_weight=True)
    assert weighted_relation(p) == {((1, 2), (1, 2)): 0.0}


def _push_residuals(p):
    out = {}
    for s in p.states():
        cands = [a.weight for a in p.arcs(s)]
        if s in p.finals:
            cands.append(p.finals[s])
        out[s] = min(cands)
    return out


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 10 ** 6), st.booleans())
def test_push_local_property(seed, acyclic):
    rng = random.Random(seed)
    f = connect(random_wfst(rng, acyclic=acyclic))
    if f.is_empty():
        return
    total = shortest_distance(f, TO_FINAL)[f.start]
    p = weight_push(f)
    res = _push_residuals(p)
    for s, r in res.items():
        want = total if s == p.start else 0.0
        assert abs(r - want) <= 1e-9, (s, r, want)
    assert relations_equal(weighted_relation(p), weighted_relation(f))
    q = weight_push(f, remove_total_weight=True)
    assert all(abs(r) <= 1e-9 for r in _push_residuals(q).values())
    shifted = {k: v - total for k, v in weighted_relation(f).items()}
    assert relations_equal(weighted_relation(q), shifted)
    # idempotent
    assert relations_equal(weighted_relation(weight_push(p)), weighted_relation(p))
    assert isomorphic(weight_push(p), p)


def test_push_start_with_incoming_arcs():
    f = Wfst()
    f.add_states(2)
    f.set_start(0)
    f.add_arc(0, 1, 1, 2.0, 1)
    f.add_arc(1, 2, 2, 1.0, 0)
    f.set_final(1, 3.0)
    p = weight_push(f)
    assert relations_equal(weighted_relation(p), weighted_relation(f))


def test_shortest_distance_chain():
    chain = linear_fst([1, 2], weights=[2.0, 3.0])
    assert shortest_distance(chain, TO_FINAL) == [5.0, 3.0, 0.0]
    assert shortest_distance(chain, FROM_START) == [0.0, 2.0, 5.0]


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_shortest_distance_matches_enumeration(seed):
    rng = random.Random(seed)
    f = random_wfst(rng, acyclic=True)
    d = shortest_distance(f, TO_FINAL)
    best = min(weighted_relation(f).values(), default=math.inf)
    assert abs(d[f.start] - best) <= 1e-9 or d[f.start] == best == math.inf
    sp = shortest_path(f)
    if sp is None:
        assert best == math.inf
    else:
        cost, arcs = sp
        assert abs(cost - best) <= 1e-9
        assert abs(sum(a.weight for a in arcs) + f.finals[arcs[-1].nextstate if arcs else
                                                       f.start] - cost) <= 1e-9


def test_connect_removes_unreachable():
    f = linear_fst([1])
    f.add_state()
    assert connect(f).num_states == 2


def test_connect_empty_language():
    f = Wfst()
    f.add_states(2)
    f.set_start(0)
    f.add_arc(0, 1, 1, 0.0, 1)
    assert connect(f).is_empty()


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_connect_and_arc_sort_preserve_language(seed):
    rng = random.Random(seed)
    f = random_wfst(rng)
    rel = weighted_relation(f)
    assert relations_equal(weighted_relation(connect(f)), rel)
    s = arc_sort(f)
    assert relations_equal(weighted_relation(s), rel)
    for q in s.states():
        labels = [a.ilabel for a in s.arcs(q)]
        assert labels == sorted(labels)
    assert arc_sort(s) == s


def test_arc_sort_by_olabel():
    f = Wfst()
    f.add_states(2)
    f.set_start(0)
    for il, ol in ((1, 3), (2, 1), (3, 2)):
        f.add_arc(0, il, ol, 0.0, 1)
    assert [a.olabel for a in arc_sort(f, by="olabel").arcs(0)] == [1, 2, 3]


def test_relabel():
    f = relabel(linear_fst([1, 2], [1, 2]), imap={1: 0})
    assert weighted_relation(f) == {((2,), (1, 2)): 0.0}


# --- text format -----------------------------------------------------------------

@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_text_round_trip(seed):
    f = random_wfst(random.Random(seed))
    g = read_text(write_text(f))
    assert relations_equal(weighted_relation(g), weighted_relation(f), tol=0.0)


def test_text_format_details():
    f = linear_fst([1], weights=[0.25])
    f.set_final(1, 1.5)
    assert write_text(f) == "0\t1\t1\t1\t0.25\n1\t1.5\n"
    assert write_text(Wfst()) == ""
    with pytest.raises(FstFormatError):
        read_text("0 1 2\n")


def test_symbol_table_round_trip():
    t = SymbolTable()
    t.add("a")
    t.add("b")
    u = read_symbols(write_symbols(t))
    assert u == t and u.find("b") == 2 and u.find(0) == "<eps>"
