"""Build a small TLG graph with both recipes and compare them on probe inputs."""

import random

from spikewin.arpa import emit_arpa, estimate_arpa
from spikewin.graph_build import (BLANK, Recipe, best_path_cost, build_graph, frames_to_labels,
                                  parse_lexicon)

lexicon = parse_lexicon(
    "cat\tk a t\n"
    "cap\tk a p\n"
    "a\ta\n"
    "at\ta t\n"
)
corpus = [["a", "cat"], ["a", "cap"], ["cat", "at"], ["a", "cat", "at"]]
lm = estimate_arpa(corpus, order=2)
print(emit_arpa(lm))

vocab = [BLANK, "k", "a", "t", "p"]
graphs = {r: build_graph(lexicon, lm, vocab, r) for r in Recipe}
for r, g in graphs.items():
    print(r.value)
    for name, (ns, na) in g.stats.items():
        print(f"  {name:<15} {ns:>4} states {na:>5} arcs")

# the two recipes only move weight around, so best-path costs agree
rng = random.Random(0)
for _ in range(5):
    cols = [0]
    for w in rng.choice(corpus):
        for tok in lexicon.pronunciations(w)[0]:
            cols += [vocab.index(tok), 0]
    labels = frames_to_labels(cols)
    costs = [best_path_cost(g.tlg, labels) for g in graphs.values()]
    print(cols, [f"{c:.6f}" for c in costs])
