"""Unbiased stochastic quantizers: identity and the three-level (ternary) scheme.

The ternary quantizer maps each coordinate ``x_i`` with ``|x_i| <= r`` to
``r * sign(x_i)`` with probability ``|x_i| / r`` and to ``0`` otherwise, so
the output is unbiased with per-element variance ``r|x_i| - x_i**2``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

KINDS = ("identity", "ternary")
CLAMP_POLICIES = ("error", "saturate")


class ThresholdViolation(ValueError):
    """Input exceeded the ternary threshold under the ``error`` clamp policy."""

    def __init__(self, index: int, value: float, r: float, agent: int | None = None):
        self.index = index
        self.value = value
        self.r = r
        self.agent = agent
        where = f"agent {agent}, x[{index}]" if agent is not None else f"x[{index}]"
        super().__init__(f"|{where}| = {abs(value):.6g} exceeds threshold r = {r:.6g}")


@dataclass(frozen=True)
class QuantizerSpec:
    kind: str = "ternary"
    r: float = 1.0
    clamp_policy: str = "error"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"quantizer kind must be one of {KINDS}, got {self.kind!r}")
        if self.clamp_policy not in CLAMP_POLICIES:
            raise ValueError(
                f"clamp_policy must be one of {CLAMP_POLICIES}, got {self.clamp_policy!r}"
            )
        if self.kind == "ternary" and not (np.isfinite(self.r) and self.r > 0):
            raise ValueError(f"ternary threshold r must be positive, got {self.r}")

    @property
    def is_identity(self) -> bool:
        return self.kind == "identity"


@dataclass(frozen=True)
class TernaryOutput:
    """Trits in {-1, 0, +1} and the common scale ``r``."""

    levels: np.ndarray
    r: float

    def values(self) -> np.ndarray:
        return self.levels.astype(float) * self.r


def ternary_from_uniforms(x, r: float, u, clamp_policy: str = "error") -> np.ndarray:
    """Trits for ``x`` given one uniform draw per element (same shape as ``x``)."""
    x = np.asarray(x, dtype=float)
    mag = np.abs(x)
    if clamp_policy == "error":
        bad = np.flatnonzero(~(mag <= r))
        if bad.size:
            i = int(bad[0])
            raise ThresholdViolation(i, float(x.flat[i]), r)
    p = np.minimum(mag / r, 1.0)
    return np.where(u < p, np.sign(x), 0.0).astype(np.int8)


def ternary_levels(x, r: float, rng: np.random.Generator, clamp_policy: str = "error") -> TernaryOutput:
    """Draw trits for ``x``; one uniform per element, in index order."""
    x = np.asarray(x, dtype=float)
    u = rng.random(x.size).reshape(x.shape)
    return TernaryOutput(ternary_from_uniforms(x, r, u, clamp_policy), float(r))


def quantize(spec: QuantizerSpec, x, rng: np.random.Generator | None = None) -> np.ndarray:
    """Quantize ``x`` according to ``spec``.

    Identity quantization returns a copy of ``x`` and draws nothing from
    ``rng``; ternary quantization consumes exactly ``x.size`` uniforms.
    """
    x = np.asarray(x, dtype=float)
    if spec.is_identity:
        return x.copy()
    if rng is None:
        raise ValueError("ternary quantization needs a random generator")
    return ternary_levels(x, spec.r, rng, spec.clamp_policy).values()


def _check_domain(x_i: float, r: float) -> float:
    if not r > 0:
        raise ValueError(f"threshold r must be positive, got {r}")
    a = abs(float(x_i))
    if a > r:
        raise ValueError(f"|x_i| = {a:.6g} outside the quantizer domain [-{r:.6g}, {r:.6g}]")
    return a


def element_distribution(x_i: float, r: float) -> tuple[float, float, float]:
    """Exact output law ``(P(q=-r), P(q=0), P(q=+r))`` for one coordinate."""
    a = _check_domain(x_i, r)
    p = a / r
    if x_i >= 0:
        return (0.0, 1.0 - p, p)
    return (p, 1.0 - p, 0.0)


def element_variance(x_i: float, r: float) -> float:
    """Exact variance of the quantized coordinate, ``r|x_i| - x_i**2``."""
    a = _check_domain(x_i, r)
    return r * a - a * a


def variance_ratio(x, r: float) -> float:
    """Exact ``E||Q(x) - x||^2 / ||x||^2``, the input-dependent variance factor.

    Unbounded as ``x -> 0`` for a fixed threshold; returned as ``inf`` at zero.
    """
    x = np.asarray(x, dtype=float).ravel()
    norm2 = float(x @ x)
    var = float(np.sum(r * np.abs(x) - x * x))
    if norm2 == 0.0:
        return 0.0 if var == 0.0 else np.inf
    return var / norm2
