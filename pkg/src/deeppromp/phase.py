"""Wall-clock time to phase input: linear modulation or rhythmic encoding."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LINEAR = "linear"
RHYTHMIC = "rhythmic"
MODES = (LINEAR, RHYTHMIC)


@dataclass(frozen=True)
class PhaseSpec:
    mode: str = LINEAR
    duration: float = 1.0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown phase mode {self.mode!r}; expected one of {MODES}")
        if not self.duration > 0:
            raise ValueError("duration must be positive")

    @property
    def width(self):
        return phase_width(self.mode)

    def __call__(self, t):
        return phase(t, self.duration, self.mode)


def phase_width(mode):
    return 1 if mode == LINEAR else 2


def linear_phase(t, T):
    """``t / T``; vectorised over ``t``."""
    if not T > 0:
        raise ValueError("duration T must be positive")
    t = np.asarray(t, dtype=np.float64)
    if np.any(t < 0) or np.any(t > T):
        raise ValueError(f"time outside [0, {T}]")
    return t / T


def rhythmic_phase(t, T):
    """``[sin(2 pi t/T), cos(2 pi t/T)]``; returns shape (..., 2).

    The cycle fraction is reduced modulo 1 and rounded to 1e-12 so that
    ``t`` and ``t + T`` map to bit-identical inputs.
    """
    if not T > 0:
        raise ValueError("duration T must be positive")
    t = np.asarray(t, dtype=np.float64)
    if np.any(t < 0):
        raise ValueError("rhythmic phase needs t >= 0")
    frac = np.mod(np.round(np.mod(t / T, 1.0), 12), 1.0)
    angle = 2.0 * np.pi * frac
    return np.stack([np.sin(angle), np.cos(angle)], axis=-1)


def phase(t, T, mode=LINEAR):
    """Phase input of shape (..., width) for the decoder and via-point encoder."""
    if mode == LINEAR:
        return linear_phase(t, T)[..., None]
    if mode == RHYTHMIC:
        return rhythmic_phase(t, T)
    raise ValueError(f"unknown phase mode {mode!r}")
