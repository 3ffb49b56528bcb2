"""Problem instances exposing per-agent exact and stochastic gradient oracles."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

logger = logging.getLogger(__name__)


class SingularSystemError(np.linalg.LinAlgError):
    def __init__(self, rank: int, d: int):
        self.rank = rank
        self.d = d
        super().__init__(f"aggregate normal equations are singular: rank {rank} < dimension {d}")


class BatchSizeError(ValueError):
    pass


class Problem:
    """Shared oracle interface.

    Subclasses provide ``m``, ``d``, :meth:`exact_gradient`,
    :meth:`stochastic_gradient` and :meth:`local_loss`; ``optimum`` is the
    global minimizer when it is known in closed form.
    """

    m: int
    d: int
    optimum: np.ndarray | None = None

    def exact_gradients(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return np.stack([self.exact_gradient(i, X[i]) for i in range(self.m)])

    def stochastic_gradients(self, X, rngs, batch: int = 1) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return np.stack(
            [self.stochastic_gradient(i, X[i], rngs[i], batch) for i in range(self.m)]
        )

    def exact_gradients_batch(self, states) -> np.ndarray:
        """exact_gradients applied to a stack of network states, (T, m, d)."""
        return np.stack([self.exact_gradients(x) for x in np.asarray(states, dtype=float)])

    def objective_gradients(self, xs) -> np.ndarray:
        """objective_gradient for each row of ``xs``, (T, d)."""
        xs = np.asarray(xs, dtype=float).reshape(-1, self.d)
        return np.stack([self.objective_gradient(x) for x in xs]) if xs.size else xs.copy()

    def objective(self, x) -> float:
        """Network objective (1/m) sum_i f_i(x)."""
        return float(np.mean([self.local_loss(i, x) for i in range(self.m)]))

    def objective_gradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.exact_gradients(np.broadcast_to(x, (self.m, self.d))).mean(axis=0)


@dataclass(eq=False)
class SensorEstimationProblem(Problem):
    """Least-squares estimation of a common parameter from noisy linear sensors.

    Agent ``i`` holds ``z_ij = M_i theta_true + w_ij`` for ``j < n_i`` and
    minimizes ``(1/n_i) sum_j ||z_ij - M_i theta||^2 + r_i ||theta||^2``.
    """

    M: np.ndarray  # (m, s, d)
    Z: list  # per agent, (n_i, s)
    regularization: np.ndarray  # (m,)
    theta_true: np.ndarray
    seed: int | None = None
    attempts: int = 1
    _H: np.ndarray = field(init=False, repr=False)
    _b: np.ndarray = field(init=False, repr=False)
    _b_samples: list = field(init=False, repr=False)

    def __post_init__(self):
        self.M = np.asarray(self.M, dtype=float)
        self.regularization = np.asarray(self.regularization, dtype=float)
        self.Z = [np.asarray(z, dtype=float) for z in self.Z]
        self.m, self.s, self.d = self.M.shape
        eye = np.eye(self.d)
        self._H = np.stack(
            [2.0 * (Mi.T @ Mi + ri * eye) for Mi, ri in zip(self.M, self.regularization)]
        )
        # per-sample linear terms 2 M_i^T z_ij; gradient = H_i x - mean_j(b_ij)
        self._b_samples = [2.0 * z @ Mi for Mi, z in zip(self.M, self.Z)]
        self._b = np.stack([bs.mean(axis=0) for bs in self._b_samples])
        self.optimum = closed_form_optimum(self)

    @property
    def n(self) -> list[int]:
        return [z.shape[0] for z in self.Z]

    def local_loss(self, i: int, x) -> float:
        x = np.asarray(x, dtype=float)
        resid = self.Z[i] - self.M[i] @ x
        return float(np.mean(np.sum(resid**2, axis=1)) + self.regularization[i] * (x @ x))

    def exact_gradient(self, i: int, x) -> np.ndarray:
        return self._H[i] @ np.asarray(x, dtype=float) - self._b[i]

    def exact_gradients(self, X) -> np.ndarray:
        return np.einsum("ijk,ik->ij", self._H, np.asarray(X, dtype=float)) - self._b

    def stochastic_gradient(self, i: int, x, rng: np.random.Generator, batch: int = 1) -> np.ndarray:
        """Mini-batch gradient over ``batch`` samples drawn without replacement."""
        n_i = self.Z[i].shape[0]
        if not 1 <= batch <= n_i:
            raise BatchSizeError(f"batch must lie in [1, {n_i}] for agent {i}, got {batch}")
        if batch == n_i:
            return self.exact_gradient(i, x)
        if batch == 1:
            b = self._b_samples[i][rng.integers(n_i)]
        else:
            b = self._b_samples[i][rng.choice(n_i, size=batch, replace=False)].mean(axis=0)
        return self._H[i] @ np.asarray(x, dtype=float) - b

    def stochastic_gradients(self, X, rngs, batch: int = 1) -> np.ndarray:
        if batch != 1:
            return super().stochastic_gradients(X, rngs, batch)
        b = np.stack([bs[rng.integers(bs.shape[0])] for bs, rng in zip(self._b_samples, rngs)])
        return np.einsum("ijk,ik->ij", self._H, np.asarray(X, dtype=float)) - b

    def exact_gradients_batch(self, states) -> np.ndarray:
        return np.einsum("ijk,tik->tij", self._H, np.asarray(states, dtype=float)) - self._b

    def objective_gradient(self, x) -> np.ndarray:
        return self._H.mean(axis=0) @ np.asarray(x, dtype=float) - self._b.mean(axis=0)

    def objective_gradients(self, xs) -> np.ndarray:
        xs = np.asarray(xs, dtype=float).reshape(-1, self.d)
        return xs @ self._H.mean(axis=0).T - self._b.mean(axis=0)

    def lipschitz(self, i: int) -> float:
        """Gradient Lipschitz constant of f_i (largest eigenvalue of its Hessian)."""
        return float(np.linalg.eigvalsh(self._H[i])[-1])

    @property
    def sigma(self) -> float:
        """Bound on the single-sample gradient noise standard deviation."""
        return float(
            np.sqrt(max(np.mean(np.sum((bs - bs.mean(0)) ** 2, axis=1)) for bs in self._b_samples))
        )

    def digest(self) -> dict:
        return {
            "kind": "sensor",
            "seed": self.seed,
            "attempts": self.attempts,
            "theta_true": self.theta_true.tolist(),
            "optimum": self.optimum.tolist(),
        }


def closed_form_optimum(p: SensorEstimationProblem) -> np.ndarray:
    """Solve sum_i grad f_i(x) = 0 from the realized data.

    Raises
    ------
    SingularSystemError
        If the aggregate normal-equation matrix is rank deficient.
    """
    A = p._H.sum(axis=0)
    rhs = p._b.sum(axis=0)
    rank = int(np.linalg.matrix_rank(A))
    if rank < p.d:
        raise SingularSystemError(rank, p.d)
    return np.linalg.solve(A, rhs)


def make_sensor_problem(
    m: int = 5,
    s: int = 3,
    d: int = 2,
    n_i: int | Sequence[int] = 100,
    regularization: float | Sequence[float] = 0.01,
    seed: int = 0,
    *,
    measurement_scale: float = 0.3,
    noise_scale: float = 1.0,
    max_attempts: int = 100,
) -> SensorEstimationProblem:
    """Draw a sensor-network estimation instance.

    Measurement matrices have i.i.d. ``N(0, measurement_scale**2)`` entries,
    ``theta_true`` is uniform on ``[-1, 1]^d`` and measurement noise is uniform
    on ``[0, noise_scale]`` per component. If the aggregate normal equations
    come out singular the draw is repeated with a derived seed.
    """
    if min(m, s, d) < 1:
        raise ValueError("m, s and d must be positive")
    ns = [int(n_i)] * m if np.isscalar(n_i) else [int(v) for v in n_i]
    regs = np.full(m, float(regularization)) if np.isscalar(regularization) else np.asarray(regularization, float)
    if len(ns) != m or regs.shape != (m,):
        raise ValueError("per-agent n_i and regularization must have length m")
    if min(ns) < 1 or np.any(regs < 0):
        raise ValueError("n_i must be positive and regularization nonnegative")

    for attempt in range(max_attempts):
        rng = np.random.default_rng(seed if attempt == 0 else [seed, attempt])
        theta = rng.uniform(-1.0, 1.0, d)
        M = measurement_scale * rng.standard_normal((m, s, d))
        Z = [M[i] @ theta + noise_scale * rng.uniform(0.0, 1.0, (ns[i], s)) for i in range(m)]
        try:
            return SensorEstimationProblem(M, Z, regs, theta, seed=seed, attempts=attempt + 1)
        except SingularSystemError as exc:
            logger.warning("sensor instance seed=%s attempt %d rejected: %s", seed, attempt, exc)
    raise SingularSystemError(0, d)


@dataclass(eq=False)
class NonconvexToyProblem(Problem):
    """f_i(x) = 0.5 x^T Q_i x + c_i sum_j sin(x_j) with Gaussian gradient noise.

    ``Q_i`` is symmetric PSD; the sinusoidal term makes the network objective
    non-convex while keeping its gradient globally Lipschitz with constant
    ``lambda_max(Q_i) + |c_i|``. The noise has ``E||noise||^2 = sigma**2``.
    """

    Q: np.ndarray  # (m, d, d)
    c: np.ndarray  # (m,)
    sigma: float = 0.1
    seed: int | None = None

    def __post_init__(self):
        self.Q = np.asarray(self.Q, dtype=float)
        self.c = np.asarray(self.c, dtype=float)
        self.m, self.d, _ = self.Q.shape
        if not np.allclose(self.Q, np.transpose(self.Q, (0, 2, 1))):
            raise ValueError("Q_i must be symmetric")
        self.optimum = None

    def local_loss(self, i: int, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(0.5 * x @ self.Q[i] @ x + self.c[i] * np.sum(np.sin(x)))

    def exact_gradient(self, i: int, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.Q[i] @ x + self.c[i] * np.cos(x)

    def exact_gradients(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return np.einsum("ijk,ik->ij", self.Q, X) + self.c[:, None] * np.cos(X)

    def exact_gradients_batch(self, states) -> np.ndarray:
        states = np.asarray(states, dtype=float)
        return np.einsum("ijk,tik->tij", self.Q, states) + self.c[None, :, None] * np.cos(states)

    def stochastic_gradient(self, i: int, x, rng: np.random.Generator, batch: int = 1) -> np.ndarray:
        if batch < 1:
            raise BatchSizeError(f"batch must be positive, got {batch}")
        noise = rng.standard_normal(self.d) * (self.sigma / np.sqrt(self.d * batch))
        return self.exact_gradient(i, x) + noise

    def stochastic_gradients(self, X, rngs, batch: int = 1) -> np.ndarray:
        if batch < 1:
            raise BatchSizeError(f"batch must be positive, got {batch}")
        noise = np.stack([rng.standard_normal(self.d) for rng in rngs])
        return self.exact_gradients(X) + noise * (self.sigma / np.sqrt(self.d * batch))

    def lipschitz(self, i: int) -> float:
        return float(np.linalg.eigvalsh(self.Q[i])[-1] + abs(self.c[i]))

    def digest(self) -> dict:
        return {"kind": "nonconvex", "seed": self.seed, "sigma": self.sigma}


def make_nonconvex_problem(
    m: int = 5,
    d: int = 2,
    seed: int = 0,
    *,
    q_scale: float = 0.5,
    c_scale: float = 0.5,
    sigma: float = 0.1,
) -> NonconvexToyProblem:
    rng = np.random.default_rng(seed)
    B = np.sqrt(q_scale) * rng.standard_normal((m, d, d))
    Q = B @ np.transpose(B, (0, 2, 1)) / d
    c = c_scale * rng.uniform(0.5, 1.0, m)
    return NonconvexToyProblem(Q, c, sigma=sigma, seed=seed)
