"""Decentralized stochastic optimization with ternary-quantized, differentially private messages."""

from .adversary import (
    AttackObservation,
    AttackResult,
    attack_report,
    infer_gradient_baseline,
    infer_gradient_quantized,
    observe,
)
from .engine import (
    DivergenceError,
    NetworkState,
    Streams,
    Trajectory,
    average_state,
    run,
    step,
    weighted_average_iterate,
    weighted_gradient_statistic,
)
from .privacy import PrivacyLedger, compose, event_gaps, per_step_delta, sweep_dp, verify_dp_exact
from .problems import (
    NonconvexToyProblem,
    SensorEstimationProblem,
    closed_form_optimum,
    make_nonconvex_problem,
    make_sensor_problem,
)
from .quantizer import QuantizerSpec, ThresholdViolation, element_distribution, element_variance, quantize
from .schedule import ConditionReport, Schedule, epsilon_at, lambda_at, validate
from .topology import (
    DisconnectedGraphError,
    Topology,
    algebraic_connectivity,
    build_metropolis,
    from_edges,
    laplacian,
    mixing_matrix,
    preset,
    ring,
)
from .wire import TernaryCodeword, compression_ratio, decode, encode

__version__ = "0.1.0"
