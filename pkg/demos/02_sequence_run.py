"""Run the three engine modes over a generated sequence and compare per-frame EPE.

full: warp the previous disparity with the pose change, then refine.
fast: reuse the previous disparity as is.
cold: start every frame from scratch.
"""
import sys

import numpy as np

from vidstereo.config import EngineConfig
from vidstereo.dataio import frame_skip, standard_sequence
from vidstereo.engine import run_sequence
from vidstereo.harness import evaluate_frames

skip = int(sys.argv[1]) if len(sys.argv) > 1 else 4
seq = frame_skip(standard_sequence(42, 60), skip)
print(f"{len(seq)} frames at {seq.rig.width}x{seq.rig.height}, every {skip}th frame of the trajectory")

modes = {
    "full-1": EngineConfig(mode="full", iters=1),
    "fast-1": EngineConfig(mode="fast", iters=1),
    "cold-1": EngineConfig(mode="cold", iters=1),
    "cold-10": EngineConfig(mode="cold", iters=10),
}
reports, ms = {}, {}
for label, cfg in modes.items():
    outs = run_sequence(seq, cfg)
    reports[label] = evaluate_frames([o.disparity.values for o in outs], seq)
    ms[label] = 1e3 * np.median([o.timing["total"] for o in outs])

print("\nframe " + " ".join(f"{k:>8}" for k in modes))
for i in range(len(seq)):
    print(f"{i:>5} " + " ".join(f"{reports[k].frame_epe()[i]:8.3f}" for k in modes))

print("\nsequence EPE / D1 / median ms per frame")
for k, rep in reports.items():
    print(f"  {k:<8} {rep.epe:6.3f} px  {rep.d1:5.1f} %  {ms[k]:6.1f} ms")
