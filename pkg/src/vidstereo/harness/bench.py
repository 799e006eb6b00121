"""Latency benchmarking.

Every configuration runs the whole sequence ``repeats`` times on one
pipeline. Repeats are interleaved across configurations, so a slow spell on
the host hits all of them alike. The reported latency is the median of the
per-frame engine times (``timing["total"]``, a monotonic clock) after the
warmup frames, pooled over the repeats.
"""
from __future__ import annotations

import configparser
import statistics
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..config import EngineConfig, parse_config
from ..engine import StereoEngine
from .report import evaluate_frames, write_csv

BENCH_COLUMNS = ("label", "mode", "iters", "latency_ms", "fps", "epe")


@dataclass(frozen=True)
class BenchRow:
    label: str
    mode: str
    iters: int
    latency_ms: float
    fps: float
    epe: float

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in BENCH_COLUMNS}


def run_once(manifest, cfg: EngineConfig):
    """One pass over the sequence; returns ``(per-frame seconds, predictions)``."""
    engine = StereoEngine(manifest.rig, cfg)
    times, preds = [], []
    for out in engine.run(manifest):
        times.append(out.timing["total"])
        preds.append(out.disparity.values)
    return times, preds


def bench(manifest, configs, warmup: int = 2, repeats: int = 3) -> list[BenchRow]:
    """One ``BenchRow`` per configuration.

    ``configs`` is a list of ``EngineConfig`` or a ``{label: EngineConfig}``
    mapping. The EPE column comes from the first run; later runs must
    reproduce it exactly.
    """
    if repeats < 3:
        raise ValueError("bench needs at least 3 repeats")
    if warmup < 0 or warmup >= len(manifest):
        raise ValueError(f"warmup must lie in [0, {len(manifest) - 1}]")
    if not isinstance(configs, dict):
        configs = {cfg.label: cfg for cfg in configs}
    has_gt = any(fr.gt is not None for fr in manifest.frames)

    samples = {label: [] for label in configs}
    epes = {}
    for _ in range(repeats):
        for label, cfg in configs.items():
            times, preds = run_once(manifest, cfg)
            samples[label].extend(times[warmup:])
            run_epe = evaluate_frames(preds, manifest).epe if has_gt else float("nan")
            epe = epes.setdefault(label, run_epe)
            if not (run_epe == epe or (np.isnan(run_epe) and np.isnan(epe))):
                raise RuntimeError(f"{label}: EPE changed between repeats ({epe} vs {run_epe})")

    rows = []
    for label, cfg in configs.items():
        latency = 1000.0 * statistics.median(samples[label])
        rows.append(BenchRow(label, cfg.mode, cfg.iters, latency, 1000.0 / latency, epes[label]))
    return rows


def write_bench(path, rows) -> Path:
    return write_csv(path, BENCH_COLUMNS, [r.as_dict() for r in rows])


def fit_affine(x, y):
    """Least-squares ``y = a*x + b``; returns ``(a, b, r_squared)``."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    A = np.stack([x, np.ones_like(x)], axis=1)
    (a, b), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (a * x + b)
    total = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / total if total > 0 else 1.0
    return float(a), float(b), float(r2)


def load_config_set(path, base: EngineConfig | None = None) -> dict:
    """Configurations from a file.

    A plain ``key=value`` file gives one configuration. A file with
    ``[label]`` sections gives one per section; keys before the first
    section apply to all of them.
    """
    text = Path(path).read_text()
    if not any(line.strip().startswith("[") for line in text.splitlines()):
        cfg = parse_config(text, base, str(path))
        return {cfg.label: cfg}
    parser = configparser.ConfigParser(default_section="__shared__", interpolation=None,
                                       inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        parser.read_string("[__shared__]\n" + text, source=str(path))
    except configparser.Error as exc:
        raise ValueError(f"{path}: {exc}") from exc
    configs = {}
    for label in parser.sections():
        body = "\n".join(f"{k}={v}" for k, v in parser[label].items())
        configs[label] = parse_config(body, base, f"{path} [{label}]")
    if not configs:
        raise ValueError(f"{path}: no configurations")
    return configs
