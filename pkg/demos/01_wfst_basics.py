"""Tropical WFST basics: compose, determinize, minimize, push, text format."""

from spikewin.fst import (Wfst, compose, determinize, linear_fst, minimize, shortest_distance,
                          shortest_path, weight_push, write_text, TO_FINAL)

# a two-arc chain with costs 2 and 3
chain = linear_fst([1, 2], weights=[2.0, 3.0])
print("chain:")
print(write_text(chain))
print("distance to final per state:", shortest_distance(chain, TO_FINAL))

# pushing moves the whole cost onto the first arc; the path total stays 5
pushed = weight_push(chain)
print("pushed:")
print(write_text(pushed))

# two parallel arcs with the same label collapse to the cheaper one
par = Wfst()
par.add_states(2)
par.set_start(0)
par.add_arc(0, 1, 1, 3.0, 1)
par.add_arc(0, 1, 1, 5.0, 1)
par.set_final(1)
print("determinized parallel arcs:")
print(write_text(determinize(par)))

# a nondeterministic acceptor for {ab, ac} with a shared prefix
nd = Wfst()
nd.add_states(5)
nd.set_start(0)
nd.add_arc(0, 1, 1, 1.0, 1)
nd.add_arc(0, 1, 1, 1.5, 2)
nd.add_arc(1, 2, 2, 0.0, 3)
nd.add_arc(2, 3, 3, 0.0, 4)
nd.set_final(3)
nd.set_final(4)
d = determinize(nd)
m = minimize(d)
print(f"states: input {nd.num_states}, det {d.num_states}, min {m.num_states}")

# composition: a maps 1 2 -> 5 6, b maps 5 6 -> 9
a = linear_fst([1, 2], [5, 6], [1.0, 0.0])
b = Wfst()
b.add_states(3)
b.set_start(0)
b.add_arc(0, 5, 9, 2.0, 1)
b.add_arc(1, 6, 0, 0.0, 2)
b.set_final(2)
cost, arcs = shortest_path(compose(a, b))
print("a o b best path:", [(x.ilabel, x.olabel) for x in arcs], "cost", cost)
