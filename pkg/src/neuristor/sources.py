"""Declarative input-voltage waveforms: DC level, single pulse, pulse train.

Edges are ideal (zero rise/fall time); sampling is piecewise-exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

__all__ = ["DC", "Pulse", "PulseTrain", "Waveform", "sample", "encode"]

# Numeric kind codes shared with the integration kernel.
KIND_DC = 0.0
KIND_PULSE = 1.0
KIND_TRAIN = 2.0


@dataclass(frozen=True)
class DC:
    """Constant level (volt)."""

    level: float


@dataclass(frozen=True)
class Pulse:
    """Single rectangular pulse: ``level`` on [start, start + width), else baseline."""

    level: float
    start: float
    width: float
    baseline: float = 0.0

    def __post_init__(self) -> None:
        if self.width <= 0.0:
            raise ValueError("width must be positive")
        if self.start < 0.0:
            raise ValueError("start must be >= 0")


@dataclass(frozen=True)
class PulseTrain:
    """Rectangular pulse train.

    High on [start + n*period, start + n*period + duty*period) for pulse index
    n = 0, 1, ... (< count when count is given), low elsewhere.
    """

    high: float
    low: float
    period: float
    duty: float
    start: float = 0.0
    count: int | None = None

    def __post_init__(self) -> None:
        if self.period <= 0.0:
            raise ValueError("period must be positive")
        if not 0.0 < self.duty < 1.0:
            raise ValueError("duty must be in (0, 1)")
        if self.start < 0.0:
            raise ValueError("start must be >= 0")
        if self.count is not None and self.count < 1:
            raise ValueError("count must be >= 1 when given")


Waveform = Union[DC, Pulse, PulseTrain]


def sample(w: Waveform, t: float) -> float:
    """Evaluate waveform ``w`` at time ``t >= 0`` (volt)."""
    if t < 0.0:
        raise ValueError("t must be >= 0")
    if isinstance(w, DC):
        return w.level
    if isinstance(w, Pulse):
        return w.level if w.start <= t < w.start + w.width else w.baseline
    if isinstance(w, PulseTrain):
        if t < w.start:
            return w.low
        n = math.floor((t - w.start) / w.period)
        if w.count is not None and n >= w.count:
            return w.low
        phase = t - w.start - n * w.period
        return w.high if phase < w.duty * w.period else w.low
    raise TypeError(f"not a waveform: {w!r}")


def encode(w: Waveform) -> np.ndarray:
    """Pack a waveform into the fixed-width float row consumed by the kernel."""
    if isinstance(w, DC):
        return np.array([KIND_DC, w.level, 0.0, 0.0, 0.0, 0.0, 0.0])
    if isinstance(w, Pulse):
        return np.array([KIND_PULSE, w.level, w.start, w.width, w.baseline, 0.0, 0.0])
    if isinstance(w, PulseTrain):
        count = -1.0 if w.count is None else float(w.count)
        return np.array([KIND_TRAIN, w.high, w.low, w.period, w.duty, w.start, count])
    raise TypeError(f"not a waveform: {w!r}")
