"""Token error rate and speed of every strategy on a 200-utterance synthetic corpus.

Also sweeps the acoustic scale: at 1.0 the word LM costs outweigh the
acoustic evidence and most hypotheses come out empty.
"""

from spikewin.decoder import Beam, decode_batch
from spikewin.evaluation import bench_compare, score_sequences
from spikewin.graph_build import build_graph
from spikewin.synth import SynthConfig, make_toy_task

cfg = SynthConfig(vocab_size=50, blank_run_mean=6.0, spike_prob=0.7, neighbor_leak=0.1,
                  noise_floor=0.05, seed=0)
task = make_toy_task(cfg, n_utts=200)
bundle = build_graph(task.lexicon, task.lm, task.vocab)
items = [(u.utt_id, u.matrix) for u in task.utterances]
print("graph sizes:", bundle.stats)


def ter(batch):
    return score_sequences((u.utt_id, u.reference_tokens, r.collapsed_tokens(0))
                           for u, r in zip(task.utterances, batch.results)).cer


for ac in (1.0, 2.0, 3.0, 5.0):
    dense = decode_batch(bundle, items, "dense", Beam(), ac)
    swd = decode_batch(bundle, items, "swd:both:1", Beam(), ac)
    print(f"ac_scale {ac}: TER dense {ter(dense):.2f}%  swd:both:1 {ter(swd):.2f}%")

strategies = ["dense", "swd:both:1", "swd:left:1", "swd:right:1", "swd:both:2",
              "lsd:0.90", "lsd:0.95", "lsd:0.99", "average", "discard"]
runs = {s: decode_batch(bundle, items, s, Beam(), 3.0) for s in strategies}
report = bench_compare({s: b.results for s, b in runs.items()}, "dense")
print()
print(f"{'strategy':<13}{'TER%':>7}{'frames':>8}{'reduction':>11}{'speedup':>9}")
for s in strategies:
    t = report.get(s)
    print(f"{s:<13}{ter(runs[s]):>7.2f}{t.frames_decoded:>8d}{t.frame_reduction:>10.2f}x"
          f"{t.speedup:>8.2f}x")
