"""Gradient inference by inverting the update from observed messages.

With unquantized exchange the broadcasts are the states themselves, and

    g_i^k = [x_i^k + eps sum_j w_ij (x_j^k - x_i^k) - x_i^{k+1}] / (eps lam)

recovers the private gradient exactly. Under ternary quantization the same
inversion can only be fed quantized messages, and the quantization residual
divided by ``eps * lam`` swamps the estimate.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .engine import Trajectory
from .quantizer import QuantizerSpec, quantize
from .schedule import Schedule, epsilon_at, lambda_at
from .topology import Topology, laplacian

MODES = ("eavesdropper", "honest_but_curious")
ETA_MIN = 1e-12


class MissingRoundLogError(ValueError):
    pass


class IllConditionedError(ValueError):
    pass


@dataclass(frozen=True)
class AttackObservation:
    """Everything the adversary sees for one round; no private gradients.

    ``visible`` marks agents whose round-``k`` messages reach the adversary.
    Unseen neighbour messages are replaced by ``observer_state``, the
    curious agent's own internal state.
    """

    k: int
    target: int
    W: np.ndarray
    epsilon: float
    lam: float
    broadcast: np.ndarray  # round k messages, (m, d)
    broadcast_next: np.ndarray  # round k + 1 messages, (m, d)
    quantized: bool
    mode: str = "eavesdropper"
    visible: np.ndarray | None = None
    observer: int | None = None
    observer_state: np.ndarray | None = None


@dataclass(frozen=True)
class AttackResult:
    inferred: np.ndarray
    true: np.ndarray | None
    relative_error: float
    mode: str = "eavesdropper"


def _relative_error(g_hat, g_true) -> float:
    if g_true is None:
        return float("nan")
    g_true = np.asarray(g_true, dtype=float)
    return float(np.linalg.norm(g_hat - g_true) / max(np.linalg.norm(g_true), 1e-12))


def _invert(obs: AttackObservation) -> np.ndarray:
    eta = obs.epsilon * obs.lam
    if eta < ETA_MIN:
        raise IllConditionedError(f"eps * lam = {eta:.3g} at round {obs.k} is too small to invert")
    i = obs.target
    msgs = np.array(obs.broadcast, dtype=float)
    if obs.visible is not None:
        hidden = ~np.asarray(obs.visible, dtype=bool)
        hidden[i] = False
        msgs[hidden] = obs.observer_state
    w = obs.W[i]
    coupling = w @ (msgs - msgs[i])
    return (msgs[i] + obs.epsilon * coupling - obs.broadcast_next[i]) / eta


def infer_gradient_baseline(obs: AttackObservation, true_gradient=None) -> AttackResult:
    """Exact inversion against an unquantized run; ``true_gradient`` only scores it."""
    if obs.quantized:
        raise ValueError("baseline inference needs an unquantized (identity) observation")
    g_hat = _invert(obs)
    return AttackResult(g_hat, true_gradient, _relative_error(g_hat, true_gradient), obs.mode)


def infer_gradient_quantized(obs: AttackObservation, true_gradient=None) -> AttackResult:
    """Same inversion fed with quantized messages in place of the true states."""
    g_hat = _invert(obs)
    return AttackResult(g_hat, true_gradient, _relative_error(g_hat, true_gradient), obs.mode)


def _visibility(W: np.ndarray, mode: str, observer: int | None, target: int):
    if mode == "eavesdropper":
        return None
    if mode != "honest_but_curious":
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    if observer is None:
        nbrs = np.flatnonzero(W[target] > 0)
        observer = int(nbrs[0])
    if W[observer, target] <= 0:
        raise ValueError(f"observer {observer} is not a neighbour of target {target}")
    visible = W[observer] > 0
    visible[observer] = True
    return visible, observer


def observe(
    traj: Trajectory,
    k: int,
    target: int,
    mode: str = "eavesdropper",
    observer: int | None = None,
) -> AttackObservation:
    """Collect the adversary's view of round ``k`` (needs rounds ``k`` and ``k + 1``)."""
    if traj.rounds is None:
        raise MissingRoundLogError("trajectory was recorded without round logs (metrics-only mode)")
    if not 0 <= k < len(traj.rounds) - 1:
        raise IndexError(f"round {k} has no logged successor")
    rk, rnext = traj.rounds[k], traj.rounds[k + 1]
    vis = _visibility(traj.W, mode, observer, target)
    visible, obs_agent, obs_state = None, None, None
    if vis is not None:
        visible, obs_agent = vis
        obs_state = traj.states[k, obs_agent].copy()
    return AttackObservation(
        k=k, target=target, W=traj.W, epsilon=rk.epsilon, lam=rk.lam,
        broadcast=rk.broadcast, broadcast_next=rnext.broadcast,
        quantized=not traj.quantizer.is_identity, mode=mode,
        visible=visible, observer=obs_agent, observer_state=obs_state,
    )


@dataclass
class AttackReport:
    k: np.ndarray
    agent: np.ndarray
    relative_error: np.ndarray
    mode: str

    def __len__(self) -> int:
        return self.k.size

    def per_iteration(self) -> np.ndarray:
        """Mean relative error over targeted agents for each attacked round."""
        if not len(self):
            return np.zeros(0)
        ks = np.unique(self.k)
        return np.array([self.relative_error[self.k == k].mean() for k in ks])

    def write_csv(self, path, comment: str | None = None) -> None:
        with open(path, "w", newline="") as fh:
            if comment:
                fh.write(f"# {comment}\n")
            w = csv.writer(fh)
            w.writerow(["k", "agent", "relative_error", "mode"])
            for k, a, e in zip(self.k, self.agent, self.relative_error):
                w.writerow([int(k), int(a), repr(float(e)), self.mode])


def attack_report(
    traj: Trajectory,
    targets=None,
    mode: str = "eavesdropper",
    observer: int | None = None,
) -> AttackReport:
    """Attack every round that has a logged successor, for each target agent."""
    if traj.rounds is None:
        raise MissingRoundLogError("trajectory was recorded without round logs (metrics-only mode)")
    m = traj.W.shape[0]
    targets = range(m) if targets is None else [int(t) for t in np.atleast_1d(targets)]
    infer = infer_gradient_quantized if not traj.quantizer.is_identity else infer_gradient_baseline
    ks, agents, errs = [], [], []
    for k in range(max(len(traj.rounds) - 1, 0)):
        for t in targets:
            res = infer(observe(traj, k, t, mode, observer), traj.rounds[k].gradients[t])
            ks.append(k)
            agents.append(t)
            errs.append(res.relative_error)
    return AttackReport(np.array(ks, dtype=int), np.array(agents, dtype=int), np.array(errs, dtype=float), mode)


def quantized_error_samples(
    x,
    gradients,
    topology: Topology,
    schedule: Schedule,
    k: int,
    quantizer: QuantizerSpec,
    target: int,
    draws: int = 100,
    seed: int = 0,
    mode: str = "eavesdropper",
) -> np.ndarray:
    """Relative inference errors over fresh quantization draws of one round.

    Starting from states ``x`` (round ``k``) and fixed gradients, each draw
    re-quantizes round ``k``, applies the update, quantizes round ``k + 1``
    and runs the inversion.
    """
    x = np.asarray(x, dtype=float)
    g = np.asarray(gradients, dtype=float)
    eps = float(epsilon_at(schedule, k))
    lam = float(lambda_at(schedule, k))
    L = laplacian(topology)
    rng = np.random.default_rng(seed)
    vis = _visibility(topology.W, mode, None, target)
    errs = np.empty(draws)
    for n in range(draws):
        q = np.stack([quantize(quantizer, row, rng) for row in x])
        x_next = x - eps * (L @ q) - eps * lam * g
        q_next = np.stack([quantize(quantizer, row, rng) for row in x_next])
        obs = AttackObservation(
            k=k, target=target, W=topology.W, epsilon=eps, lam=lam, broadcast=q,
            broadcast_next=q_next, quantized=not quantizer.is_identity, mode=mode,
            visible=None if vis is None else vis[0],
            observer=None if vis is None else vis[1],
            observer_state=None if vis is None else x[vis[1]],
        )
        errs[n] = infer_gradient_quantized(obs, g[target]).relative_error
    return errs
