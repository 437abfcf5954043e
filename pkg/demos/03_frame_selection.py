"""Which frames each strategy keeps on one synthetic utterance."""

import numpy as np

from spikewin.frame_select import (Side, SwdConfig, apply_strategy, detect_spikes, select_swd,
                                   swd_bound)
from spikewin.synth import SynthConfig, make_toy_task

task = make_toy_task(SynthConfig(seed=1), n_utts=1, n_words=10)
u = task.utterances[0]
m = u.matrix
print(f"{u.utt_id}: {m.num_frames} frames, reference {u.reference_words}")
print("planted spikes:", u.planted_spike_frames)
print("detected spikes:", detect_spikes(m).tolist())

# argmax strip: '.' for blank, '|' for a spike
print("".join("." if k == m.blank_id else "|" for k in m.argmax()))

for side in Side:
    for w in (0, 1, 2):
        sel = select_swd(m, SwdConfig(w, side))
        print(f"swd {side.value:<5} w={w}: {len(sel):>3} frames "
              f"(bound {swd_bound(sel.stats.spike_count, side.k, w)})")

for spec in ("dense", "lsd:0.99", "lsd:0.95", "lsd:0.90", "discard", "average"):
    sel = apply_strategy(m, spec)
    print(f"{spec:<9} {len(sel):>3} frames")

# blank probability around the first spike: the neighbours carry leaked mass
s = u.planted_spike_frames[0]
lo, hi = max(0, s - 2), min(m.num_frames, s + 3)
print("blank prob near first spike:", np.round(m.blank_probs()[lo:hi], 3))
