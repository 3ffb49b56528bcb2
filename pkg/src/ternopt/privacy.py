"""Exact (0, delta) differential-privacy checks for the ternary quantizer.

Each coordinate is quantized independently with a three-point output law, so
the bound ``|P(q in S | x) - P(q in S | y)| <= delta`` can be certified by
enumerating the output events of one coordinate for every adjacent input
pair on a grid. Nothing here samples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .quantizer import element_distribution


def per_step_delta(r: float) -> float:
    """delta = 1/r for one quantization of one message."""
    if not r > 0:
        raise ValueError(f"threshold r must be positive, got {r}")
    return 1.0 / r


def _probs(x: np.ndarray, r: float) -> np.ndarray:
    """Vectorized element_distribution: columns are P(-r), P(0), P(+r)."""
    p = np.abs(x) / r
    pos = x >= 0
    return np.stack([np.where(pos, 0.0, p), 1.0 - p, np.where(pos, p, 0.0)], axis=-1)


def event_gaps(x_i: float, y_i: float, r: float) -> dict[str, float]:
    """|P(q = e | x_i) - P(q = e | y_i)| for each single-point event e."""
    px = element_distribution(x_i, r)
    py = element_distribution(y_i, r)
    return {e: abs(a - b) for e, a, b in zip(("-r", "0", "+r"), px, py)}


@dataclass(frozen=True)
class DPSweep:
    r: float
    grid_step: float
    max_gap: float
    max_violation: float
    argmax: tuple[float, float, str]
    pairs: int


def sweep_dp(r: float, grid_step: float = 1e-3, *, chunk: int = 256) -> DPSweep:
    """Enumerate pairs on a grid and return the worst event-probability gap.

    Inputs ``x`` range over ``{j * grid_step} ∩ [-r, r]`` and partners
    ``y = x + l * grid_step`` with ``|l * grid_step| <= 1`` and ``|y| <= r``.
    Both same-sign and opposite-sign pairs occur on this grid. Only the
    single-point events are enumerated: the output law has three atoms, so
    every other event is empty, certain, or the complement of an atom, and a
    complement has the same probability gap as the atom.
    """
    per = per_step_delta(r)
    if not 0 < grid_step <= 0.01:
        raise ValueError(f"grid_step must lie in (0, 0.01], got {grid_step}")
    nx = int(math.floor(r / grid_step + 1e-9))
    xs = np.arange(-nx, nx + 1) * grid_step
    nl = int(math.floor(1.0 / grid_step + 1e-9))
    offsets = np.arange(-nl, nl + 1) * grid_step

    best = -np.inf
    where = (0.0, 0.0, "0")
    pairs = 0
    events = ("-r", "0", "+r")
    for start in range(0, xs.size, chunk):
        x = xs[start : start + chunk, None]
        y = x + offsets[None, :]
        valid = np.abs(y) <= r + 1e-12
        y = np.clip(y, -r, r)
        gaps = np.abs(_probs(x, r) - _probs(y, r))  # (bx, by, 3)
        gaps[~valid] = -np.inf
        pairs += int(valid.sum())
        idx = np.unravel_index(np.argmax(gaps), gaps.shape)
        if gaps[idx] > best:
            best = float(gaps[idx])
            where = (float(x[idx[0], 0]), float(y[idx[0], idx[1]]), events[idx[2]])
    return DPSweep(r, grid_step, best, best - per, where, pairs)


def verify_dp_exact(r: float, grid_step: float = 1e-3) -> float:
    """Maximum of ``gap - 1/r`` over the grid sweep; nonpositive when the bound holds."""
    return sweep_dp(r, grid_step).max_violation


@dataclass(frozen=True)
class PrivacyLedger:
    r: float
    per_step_delta: float
    steps: int
    basic_composition_delta: float
    sqrt_note: str

    def as_dict(self) -> dict:
        return {
            "r": self.r,
            "per_step_delta": self.per_step_delta,
            "steps": self.steps,
            "basic_composition_delta": self.basic_composition_delta,
            "sqrt_note": self.sqrt_note,
        }


def compose(T: int, r: float) -> PrivacyLedger:
    """Basic composition over ``T`` quantized rounds: delta_total = T / r.

    The note records the advisory sqrt(T) growth expected from advanced
    composition; it is not a certified bound.
    """
    if T < 0:
        raise ValueError(f"iteration count must be nonnegative, got {T}")
    per = per_step_delta(r)
    note = (
        f"advisory: cumulative loss grows roughly like sqrt(T) under advanced composition "
        f"(sqrt(T)/r = {math.sqrt(T) * per:.6g}); only the basic bound T/r is certified"
    )
    return PrivacyLedger(float(r), per, int(T), T * per, note)
