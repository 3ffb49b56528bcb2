"""Decaying step-size sequences and their convergence-condition checks."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .topology import Topology

NONCONVEX_CONDITIONS = ("δ1 + δ2 ≤ 1", "δ2 > 0.5", "2δ1 + δ2 > 1")
CONVEX_VALUE_CONDITION = "δ1 + 1.5δ2 ≥ 1"
MIXING_CONDITION = "ε⁰·max d_ii ≤ 1"


@dataclass(frozen=True)
class Schedule:
    """lambda^k = a1 / (a3 k + 1)^delta1 and epsilon^k = a2 / (a3 k + 1)^delta2."""

    a1: float = 1.0
    a2: float = 1.0
    a3: float = 0.3
    delta1: float = 0.3
    delta2: float = 0.6

    def __post_init__(self):
        for name in ("a1", "a2", "a3"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive, got {v}")
        for name in ("delta1", "delta2"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise ValueError(f"{name} must lie in (0, 1), got {v}")


def lambda_at(s: Schedule, k):
    """Gradient weight lambda^k (accepts scalars or integer arrays)."""
    return s.a1 / (s.a3 * np.asarray(k, dtype=float) + 1.0) ** s.delta1


def epsilon_at(s: Schedule, k):
    """Coupling weight epsilon^k (accepts scalars or integer arrays)."""
    return s.a2 / (s.a3 * np.asarray(k, dtype=float) + 1.0) ** s.delta2


@dataclass
class ConditionReport:
    nonconvex_ok: bool
    convex_value_ok: bool
    rate_gradient: float
    rate_value: float
    violations: list[str] = field(default_factory=list)
    checks: dict[str, bool] = field(default_factory=dict)
    mixing_ok: bool | None = None

    def as_dict(self) -> dict:
        return {
            "nonconvex_ok": self.nonconvex_ok,
            "convex_value_ok": self.convex_value_ok,
            "rate_gradient": self.rate_gradient,
            "rate_value": self.rate_value,
            "violations": list(self.violations),
            "checks": dict(self.checks),
            "mixing_ok": self.mixing_ok,
        }

    def lines(self) -> list[str]:
        out = [f"{'PASS' if ok else 'FAIL'}  {name}" for name, ok in self.checks.items()]
        out.append(f"gradient rate exponent min(2δ1, δ2) = {self.rate_gradient:g}")
        out.append(f"function-value rate exponent min(δ1, δ2/2) = {self.rate_value:g}")
        return out


def validate(s: Schedule, t: Topology | None = None) -> ConditionReport:
    """Check the exponent conditions analytically.

    For the parametric form, sum eps^k lambda^k diverges iff d1 + d2 <= 1,
    sum (eps^k)^2 converges iff 2 d2 > 1, sum eps^k (lambda^k)^2 converges iff
    2 d1 + d2 > 1, and sum (eps^k)^1.5 lambda^k converges iff d1 + 1.5 d2 > 1;
    the boundary d1 + 1.5 d2 = 1 is accepted as in the convex rate statement.
    No partial sums are evaluated.
    """
    d1, d2 = s.delta1, s.delta2
    checks = {
        NONCONVEX_CONDITIONS[0]: d1 + d2 <= 1,
        NONCONVEX_CONDITIONS[1]: d2 > 0.5,
        NONCONVEX_CONDITIONS[2]: 2 * d1 + d2 > 1,
    }
    nonconvex_ok = all(checks.values())
    checks[CONVEX_VALUE_CONDITION] = d1 + 1.5 * d2 >= 1
    convex_value_ok = nonconvex_ok and checks[CONVEX_VALUE_CONDITION]
    mixing_ok = None
    if t is not None:
        mixing_ok = bool(float(epsilon_at(s, 0)) * float(t.degrees.max()) <= 1.0)
        checks[MIXING_CONDITION] = mixing_ok
    return ConditionReport(
        nonconvex_ok=bool(nonconvex_ok),
        convex_value_ok=bool(convex_value_ok),
        rate_gradient=min(2 * d1, d2),
        rate_value=min(d1, d2 / 2),
        violations=[name for name, ok in checks.items() if not ok],
        checks={k: bool(v) for k, v in checks.items()},
        mixing_ok=mixing_ok,
    )
