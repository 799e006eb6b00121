"""Latency against iteration count.

Cold mode pays for every iteration on every frame; full mode does one
iteration from the warped previous answer. Timings are host dependent, the
shape of the curve is what matters.
"""
import sys

from vidstereo.config import EngineConfig
from vidstereo.dataio import standard_sequence
from vidstereo.harness import bench, fit_affine

w, h = (int(v) for v in sys.argv[1:3]) if len(sys.argv) > 2 else (320, 240)
seq = standard_sequence(42, 8, w, h)
ns = [1, 2, 5, 10]
configs = {f"cold-{n}": EngineConfig(mode="cold", iters=n) for n in ns}
configs["full-1"] = EngineConfig(mode="full", iters=1)
configs["fast-1"] = EngineConfig(mode="fast", iters=1)

rows = bench(seq, configs, warmup=2, repeats=3)
for r in rows:
    print(f"{r.label:<8} {r.latency_ms:7.1f} ms  {r.fps:6.1f} fps  EPE {r.epe:.3f}")

lat = {r.label: r.latency_ms for r in rows}
slope, icpt, r2 = fit_affine(ns, [lat[f"cold-{n}"] for n in ns])
print(f"\ncold latency ~ {slope:.1f} ms * n + {icpt:.1f} ms  (R^2 = {r2:.4f})")
print(f"full-1 takes {lat['full-1'] / lat['cold-5']:.2f}x the time of cold-5")
