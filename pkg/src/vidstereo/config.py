"""Engine configuration and its ``key=value`` text form."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path

MODES = ("full", "fast", "cold")
BACKENDS = ("reference", "gru")
INITS = ("constant", "blockmatch")


@dataclass(frozen=True)
class EngineConfig:
    """All engine knobs. Disparities and radii are in feature pixels (1/4 res)."""

    mode: str = "full"
    iters: int = 1
    radius: float = 4.0
    step: float = 1.0
    beta: float = 10.0
    smoothing: float = 0.9
    max_step: float = 2.0
    init_disparity: float = 8.0
    init: str = "constant"
    blockmatch_max_disparity: int = 32
    backend: str = "reference"
    gru_weights: str = ""
    # reference update
    confidence_scale: float = 0.05
    hidden_decay: float = 0.7
    quality_low: float = 0.6
    quality_high: float = 0.9
    support_floor: float = 0.05
    fill_threshold: float = 0.45
    carry_threshold: float = 0.5
    sliver_coverage: float = 0.5
    prior_anchor: float = 1.0
    min_disparity: float = 0.05
    # features
    census_window: int = 5
    census_tau: float = 0.02
    gradient_gain: float = 8.0
    sigma_edge: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.backend not in BACKENDS:
            raise ValueError(f"backend must be one of {BACKENDS}, got {self.backend!r}")
        if self.init not in INITS:
            raise ValueError(f"init must be one of {INITS}, got {self.init!r}")
        if self.iters < 1:
            raise ValueError("iters must be >= 1")
        for name in ("radius", "step", "max_step", "init_disparity", "confidence_scale",
                     "min_disparity", "census_tau", "sigma_edge"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.beta < 0:
            raise ValueError("beta must be >= 0")
        if not 0 <= self.smoothing <= 1:
            raise ValueError("smoothing must lie in [0, 1]")
        if not self.quality_high > self.quality_low:
            raise ValueError("quality_high must exceed quality_low")
        if not 0 <= self.sliver_coverage <= 1:
            raise ValueError("sliver_coverage must lie in [0, 1]")
        if not 0 <= self.prior_anchor <= 1:
            raise ValueError("prior_anchor must lie in [0, 1]")
        if not 0 <= self.hidden_decay < 1:
            raise ValueError("hidden_decay must lie in [0, 1)")
        if self.backend == "gru" and not self.gru_weights:
            raise ValueError("gru backend needs gru_weights")

    def replace(self, **changes) -> "EngineConfig":
        return dataclasses.replace(self, **changes)

    @property
    def label(self) -> str:
        return f"{self.mode}-{self.iters}"


def parse_config(text: str, base: EngineConfig | None = None, source: str = "<config>") -> EngineConfig:
    """Parse ``key=value`` lines (``#`` starts a comment) into an ``EngineConfig``."""
    types = {f.name: f.type for f in fields(EngineConfig)}
    changes = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{source}: line {lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in types:
            raise ValueError(f"{source}: line {lineno}: unknown key {key!r}")
        kind = types[key]
        try:
            if kind in ("int", int):
                changes[key] = int(value)
            elif kind in ("float", float):
                changes[key] = float(value)
            else:
                changes[key] = value
        except ValueError as exc:
            raise ValueError(f"{source}: line {lineno}: bad value for {key}: {value!r}") from exc
    return dataclasses.replace(base or EngineConfig(), **changes)


def load_config(path, base: EngineConfig | None = None) -> EngineConfig:
    return parse_config(Path(path).read_text(), base, str(path))


def format_config(cfg: EngineConfig) -> str:
    return "\n".join(f"{f.name}={getattr(cfg, f.name)}" for f in fields(cfg)) + "\n"
