"""Ablation drivers: pose noise, movement speed, initialisation, warping.

Each returns ``(columns, rows)`` ready for :func:`write_csv`. Disabling the
warp means running the engine in fast mode.
"""
from __future__ import annotations

from ..config import EngineConfig
from ..dataio import frame_skip, pose_noise
from ..engine import run_sequence
from .report import evaluate_frames

KINDS = ("noise", "speed", "init", "warp")
DEFAULT_SWEEPS = {
    "noise": tuple(range(11)),
    "speed": (1, 2, 4, 6, 10, 20),
    "init": (),
    "warp": (1, 6),
}


def sequence_report(manifest, cfg: EngineConfig):
    outputs = run_sequence(manifest, cfg)
    return evaluate_frames([o.disparity.values for o in outputs], manifest)


def ablate_noise(manifest, cfg: EngineConfig, levels, seed: int = 0):
    rows = []
    for level in levels:
        rep = sequence_report(pose_noise(manifest, int(level), seed), cfg.replace(mode="full"))
        rows.append({"level": int(level), "epe": rep.epe, "d1": rep.d1})
    return ("level", "epe", "d1"), rows


def ablate_speed(manifest, cfg: EngineConfig, skips):
    rows = []
    for k in skips:
        seq = frame_skip(manifest, int(k))
        full = sequence_report(seq, cfg.replace(mode="full"))
        fast = sequence_report(seq, cfg.replace(mode="fast"))
        rows.append({"skip": int(k), "frames": len(seq), "epe_full": full.epe, "epe_fast": fast.epe})
    return ("skip", "frames", "epe_full", "epe_fast"), rows


def ablate_init(manifest, cfg: EngineConfig):
    rep = sequence_report(manifest, cfg)
    rows = [{"frame": r["frame"] + 1, "epe": r["epe"], "d1": r["d1"]} for r in rep.frame_rows()]
    return ("frame", "epe", "d1"), rows


def ablate_warp(manifest, cfg: EngineConfig, skips=(1, 6)):
    rows = []
    for warp in (False, True):
        for k in skips:
            rep = sequence_report(frame_skip(manifest, int(k)), cfg.replace(mode="full" if warp else "fast"))
            rows.append({"warp": int(warp), "skip": int(k), "epe": rep.epe, "d1": rep.d1})
    return ("warp", "skip", "epe", "d1"), rows


def ablate(kind: str, manifest, cfg: EngineConfig | None = None, sweep=None, seed: int = 0):
    """Run one ablation. ``sweep`` overrides the kind's default values."""
    if kind not in KINDS:
        raise ValueError(f"unknown ablation {kind!r}; expected one of {KINDS}")
    cfg = cfg or EngineConfig()
    values = DEFAULT_SWEEPS[kind] if sweep is None else tuple(sweep)
    if kind == "noise":
        if any(int(v) < 0 for v in values):
            raise ValueError("noise levels must be >= 0")
        return ablate_noise(manifest, cfg, values, seed)
    if kind == "speed":
        if any(int(v) < 1 for v in values):
            raise ValueError("skip factors must be >= 1")
        return ablate_speed(manifest, cfg, values)
    if kind == "init":
        return ablate_init(manifest, cfg)
    if len(values) != 2:
        raise ValueError("warp ablation takes exactly two skip factors")
    return ablate_warp(manifest, cfg, values)
