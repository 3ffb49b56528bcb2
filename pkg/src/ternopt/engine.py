"""Synchronous quantized consensus-gradient iteration over a network.

Every round each agent ``i`` draws a stochastic gradient ``g_i`` at its
current state, broadcasts ``Q(x_i)`` and then updates

    x_i <- x_i + eps * sum_j w_ij (Q(x_j) - Q(x_i)) - eps * lam * g_i

using the round-``k`` broadcasts of all agents, its own included.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .problems import Problem
from .quantizer import QuantizerSpec, ThresholdViolation, ternary_from_uniforms
from .schedule import Schedule, epsilon_at, lambda_at, validate
from .topology import StabilityError, Topology, laplacian

logger = logging.getLogger(__name__)

DIVERGENCE_LIMIT = 1e12


class DivergenceError(RuntimeError):
    """State left the finite region; ``partial`` holds the trajectory so far."""

    def __init__(self, k: int, max_abs: float, partial: "Trajectory | None" = None):
        self.k = k
        self.max_abs = max_abs
        self.partial = partial
        super().__init__(f"state diverged at iteration {k}: max |x| = {max_abs:.3g}")


@dataclass
class Streams:
    """Disjoint per-agent generators for gradient sampling and quantization."""

    gradient: list
    quantization: list

    @classmethod
    def from_seed(cls, seed: int, m: int) -> "Streams":
        grad_ss, quant_ss = np.random.SeedSequence(seed).spawn(2)
        return cls(
            [np.random.default_rng(s) for s in grad_ss.spawn(m)],
            [np.random.default_rng(s) for s in quant_ss.spawn(m)],
        )


@dataclass(frozen=True)
class NetworkState:
    k: int
    x: np.ndarray  # (m, d), row i is agent i

    def __post_init__(self):
        if not np.all(np.isfinite(self.x)):
            raise ValueError(f"non-finite entries in network state at iteration {self.k}")


@dataclass
class RoundLog:
    k: int
    broadcast: np.ndarray  # Q(x_i^k), (m, d)
    gradients: np.ndarray  # g_i^k, private; kept for evaluation only
    epsilon: float
    lam: float


@dataclass
class Trajectory:
    states: np.ndarray  # (T + 1, m, d)
    epsilon: np.ndarray  # (T + 1,)
    lam: np.ndarray
    consensus_error: np.ndarray
    optimality_gap: np.ndarray
    avg_grad_norm: np.ndarray
    grad_norm_at_average: np.ndarray
    W: np.ndarray
    quantizer: QuantizerSpec
    rounds: list | None = None
    metadata: dict = field(default_factory=dict)

    @property
    def iterations(self) -> int:
        return self.states.shape[0] - 1

    def __len__(self) -> int:
        return self.states.shape[0]

    def average_states(self) -> np.ndarray:
        return self.states.mean(axis=1)


def average_state(state) -> np.ndarray:
    """Column mean of the agent states."""
    x = state.x if isinstance(state, NetworkState) else np.asarray(state, dtype=float)
    return x.mean(axis=0)


def _broadcasts(x: np.ndarray, quantizer: QuantizerSpec, streams: Streams) -> np.ndarray:
    if quantizer.is_identity:
        return x.copy()
    m, d = x.shape
    # each agent consumes d uniforms from its own stream, index-ascending
    u = np.stack([streams.quantization[i].random(d) for i in range(m)])
    try:
        levels = ternary_from_uniforms(x, quantizer.r, u, quantizer.clamp_policy)
    except ThresholdViolation as exc:
        agent, index = divmod(exc.index, d)
        raise ThresholdViolation(index, exc.value, exc.r, agent=agent) from None
    return levels * quantizer.r


def _advance(x, k, L, dmax, schedule, quantizer, problem, streams, batch, gradients):
    eps = float(epsilon_at(schedule, k))
    lam = float(lambda_at(schedule, k))
    if eps * dmax > 1.0 + 1e-12:
        raise StabilityError(f"eps^{k} * max_i d_ii = {eps * dmax:.6g} exceeds 1")
    if gradients is None:
        g = problem.stochastic_gradients(x, streams.gradient, batch)
    else:
        g = np.asarray(gradients, dtype=float)
    q = _broadcasts(x, quantizer, streams)
    # (L q)_i = -sum_j w_ij (q_j - q_i)
    x_next = x - eps * (L @ q) - eps * lam * g
    return x_next, q, g, eps, lam


def step(
    state: NetworkState,
    topology: Topology,
    schedule: Schedule,
    quantizer: QuantizerSpec,
    problem: Problem | None,
    streams: Streams,
    *,
    batch: int = 1,
    gradients=None,
) -> NetworkState:
    """Advance one synchronous round.

    ``gradients`` (shape ``(m, d)``) replaces the oracle call when given, which
    is how paired runs share an identical gradient sequence.
    """
    x = np.asarray(state.x, dtype=float)
    x_next, *_ = _advance(
        x, state.k, laplacian(topology), float(topology.degrees.max()),
        schedule, quantizer, problem, streams, batch, gradients,
    )
    _guard(x_next, state.k + 1)
    return NetworkState(state.k + 1, x_next)


def _guard(x: np.ndarray, k: int, partial_fn=None) -> None:
    max_abs = float(np.max(np.abs(x))) if x.size else 0.0
    if not np.isfinite(max_abs) or max_abs > DIVERGENCE_LIMIT:
        raise DivergenceError(k, max_abs, partial_fn() if partial_fn else None)


def run(
    topology: Topology,
    schedule: Schedule,
    quantizer: QuantizerSpec,
    problem: Problem,
    iterations: int,
    seed: int,
    *,
    batch: int = 1,
    record: str = "metrics",
    gradients=None,
    metadata: dict | None = None,
) -> Trajectory:
    """Run the iteration from ``x_i^0 = 0`` for ``iterations`` rounds.

    Parameters
    ----------
    record : {"metrics", "full"}
        ``"full"`` keeps a :class:`RoundLog` per round (needed by the
        adversary); ``"metrics"`` keeps states and metrics only.
    gradients : array_like, shape (iterations, m, d), optional
        Gradient sequence to use instead of the problem oracle.

    Returns
    -------
    Trajectory
        Metrics are indexed by ``k = 0..iterations``.
    """
    if record not in ("metrics", "full"):
        raise ValueError(f"record must be 'metrics' or 'full', got {record!r}")
    if iterations < 0:
        raise ValueError("iterations must be nonnegative")
    m, d = topology.m, problem.d
    if problem.m != m:
        raise ValueError(f"problem has {problem.m} agents but topology has {m}")
    if gradients is not None:
        gradients = np.asarray(gradients, dtype=float)
        if gradients.shape[0] < iterations or gradients.shape[1:] != (m, d):
            raise ValueError(f"gradient override must have shape ({iterations}, {m}, {d})")

    report = validate(schedule, topology)
    if not report.nonconvex_ok:
        logger.warning("schedule fails step-size conditions: %s", ", ".join(report.violations))

    L = laplacian(topology)
    dmax = float(topology.degrees.max())
    streams = Streams.from_seed(seed, m)
    x_opt = problem.optimum

    states = np.zeros((iterations + 1, m, d))
    ks = np.arange(iterations + 1)
    eps_seq = np.asarray(epsilon_at(schedule, ks), dtype=float)
    lam_seq = np.asarray(lambda_at(schedule, ks), dtype=float)
    rounds = [] if record == "full" else None
    quant_err = 0.0
    quant_norm = 0.0
    saturated = 0

    meta = {
        "seed": seed,
        "iterations": iterations,
        "batch": batch,
        "record": record,
        "quantizer": {"kind": quantizer.kind, "r": quantizer.r, "clamp_policy": quantizer.clamp_policy},
        "condition_report": report.as_dict(),
        "problem": problem.digest() if hasattr(problem, "digest") else {},
        "gradient_override": gradients is not None,
    }
    meta.update(metadata or {})

    def snapshot(upto):
        return _trajectory(
            states[: upto + 1], eps_seq[: upto + 1], lam_seq[: upto + 1], problem, topology,
            quantizer, rounds, {**meta, "aborted_at": upto + 1},
        )

    x = np.zeros((m, d))
    for k in range(iterations):
        if not quantizer.is_identity:
            saturated += int(np.count_nonzero(np.abs(x) > quantizer.r))
        g_k = None if gradients is None else gradients[k]
        x_next, q, g, eps, lam = _advance(x, k, L, dmax, schedule, quantizer, problem, streams, batch, g_k)
        quant_err += float(np.sum((q - x) ** 2))
        quant_norm += float(np.sum(x**2))
        if rounds is not None:
            rounds.append(RoundLog(k, q, g, eps, lam))
        _guard(x_next, k + 1, lambda: snapshot(k))
        x = x_next
        states[k + 1] = x

    meta["quantization_variance_ratio"] = quant_err / quant_norm if quant_norm > 0 else 0.0
    meta["saturation_events"] = saturated
    if quantizer.clamp_policy == "saturate" and not quantizer.is_identity:
        meta["saturate_mode"] = True
    return _trajectory(states, eps_seq, lam_seq, problem, topology, quantizer, rounds, meta)


def _norms(a: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(a * a, axis=-1))


def _trajectory(states, eps, lam, problem, topology, quantizer, rounds, meta):
    xbar = states.mean(axis=1)
    cons = np.sqrt(np.sum((states - xbar[:, None, :]) ** 2, axis=(1, 2)))
    if problem.optimum is not None:
        gap = _norms(xbar - problem.optimum)
    else:
        gap = np.full(states.shape[0], np.nan)
    agn = _norms(problem.exact_gradients_batch(states).mean(axis=1))
    gna = _norms(problem.objective_gradients(xbar))
    return Trajectory(
        states=states.copy(), epsilon=eps.copy(), lam=lam.copy(), consensus_error=cons,
        optimality_gap=gap, avg_grad_norm=agn, grad_norm_at_average=gna,
        W=np.array(topology.W), quantizer=quantizer,
        rounds=list(rounds) if rounds is not None else None, metadata=dict(meta),
    )


def weighted_average(states, weights) -> np.ndarray:
    """sum_k w_k x^k / sum_k w_k along the first axis."""
    states = np.asarray(states, dtype=float)
    w = np.asarray(weights, dtype=float)
    return np.tensordot(w, states, axes=(0, 0)) / w.sum()


def weighted_average_iterate(traj: Trajectory, p: int) -> np.ndarray:
    """eps^k lam^k weighted running average of agent ``p``'s iterates."""
    if len(traj) == 0:
        raise ValueError("empty trajectory")
    return weighted_average(traj.states[:, p, :], traj.epsilon * traj.lam)


def weighted_gradient_statistic(traj: Trajectory, t: int) -> float:
    """Weighted average of ||grad f(xbar^k)||^2 + ||mean_i grad f_i(x_i^k)||^2, k <= t.

    Weights are eps^k lam^k; this is the stationarity measure whose decay
    rate is governed by min(2*delta1, delta2).
    """
    w = (traj.epsilon * traj.lam)[: t + 1]
    val = traj.grad_norm_at_average[: t + 1] ** 2 + traj.avg_grad_norm[: t + 1] ** 2
    return float(np.sum(w * val) / np.sum(w))
