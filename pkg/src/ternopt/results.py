"""CSV metrics, trajectory archives and seed averaging."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .engine import RoundLog, Trajectory
from .quantizer import QuantizerSpec
from .wire import encode, write_tern

CSV_COLUMNS = ("k", "epsilon", "lambda", "consensus_error", "optimality_gap", "avg_grad_norm")


def metrics_table(traj: Trajectory) -> np.ndarray:
    k = np.arange(len(traj), dtype=float)
    return np.column_stack(
        [k, traj.epsilon, traj.lam, traj.consensus_error, traj.optimality_gap, traj.avg_grad_norm]
    )


def write_metrics_csv(path, table: np.ndarray, digest: str) -> None:
    """Write a metrics table with a digest comment line and a header row."""
    with open(path, "w", newline="") as fh:
        fh.write(f"# config_digest: {digest}\n")
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for row in table:
            w.writerow([int(row[0])] + [repr(float(v)) for v in row[1:]])


def read_metrics_csv(path) -> tuple[np.ndarray, str | None]:
    digest = None
    rows = []
    with open(path, newline="") as fh:
        for line in fh:
            if line.startswith("#"):
                if "config_digest:" in line:
                    digest = line.split("config_digest:", 1)[1].strip()
                continue
            rows.append(line)
    reader = csv.reader(rows)
    header = next(reader)
    if tuple(header) != CSV_COLUMNS:
        raise ValueError(f"unexpected CSV header {header}")
    return np.array([[float(v) for v in r] for r in reader], dtype=float).reshape(-1, len(CSV_COLUMNS)), digest


def average_tables(tables: list[np.ndarray]) -> np.ndarray:
    """Elementwise mean over seeds, truncated to the shortest table."""
    n = min(t.shape[0] for t in tables)
    return np.mean(np.stack([t[:n] for t in tables]), axis=0)


def save_trajectory(path, traj: Trajectory) -> None:
    arrays = {
        "states": traj.states,
        "epsilon": traj.epsilon,
        "lam": traj.lam,
        "consensus_error": traj.consensus_error,
        "optimality_gap": traj.optimality_gap,
        "avg_grad_norm": traj.avg_grad_norm,
        "grad_norm_at_average": traj.grad_norm_at_average,
        "W": traj.W,
        "quantizer": np.array(json.dumps(
            {"kind": traj.quantizer.kind, "r": traj.quantizer.r, "clamp_policy": traj.quantizer.clamp_policy}
        )),
        "metadata": np.array(json.dumps(traj.metadata, default=str)),
    }
    if traj.rounds is not None:
        arrays["round_broadcast"] = np.array([r.broadcast for r in traj.rounds]).reshape(-1, *traj.states.shape[1:])
        arrays["round_gradients"] = np.array([r.gradients for r in traj.rounds]).reshape(-1, *traj.states.shape[1:])
        arrays["round_epsilon"] = np.array([r.epsilon for r in traj.rounds], dtype=float)
        arrays["round_lam"] = np.array([r.lam for r in traj.rounds], dtype=float)
    with open(path, "wb") as fh:
        np.savez_compressed(fh, **arrays)


def load_trajectory(path) -> Trajectory:
    with np.load(path, allow_pickle=False) as z:
        q = json.loads(str(z["quantizer"]))
        rounds = None
        if "round_broadcast" in z.files:
            rounds = [
                RoundLog(k, b, g, float(e), float(lam))
                for k, (b, g, e, lam) in enumerate(
                    zip(z["round_broadcast"], z["round_gradients"], z["round_epsilon"], z["round_lam"])
                )
            ]
        return Trajectory(
            states=z["states"], epsilon=z["epsilon"], lam=z["lam"],
            consensus_error=z["consensus_error"], optimality_gap=z["optimality_gap"],
            avg_grad_norm=z["avg_grad_norm"], grad_norm_at_average=z["grad_norm_at_average"],
            W=z["W"], quantizer=QuantizerSpec(**q), rounds=rounds,
            metadata=json.loads(str(z["metadata"])),
        )


def archive_broadcasts(path, traj: Trajectory) -> int:
    """Write every logged ternary broadcast as one codeword per (round, agent)."""
    if traj.rounds is None or traj.quantizer.is_identity:
        raise ValueError("only logged ternary runs have trit broadcasts")
    r = traj.quantizer.r
    words = (encode(np.rint(row / r).astype(np.int8), r) for rl in traj.rounds for row in rl.broadcast)
    return write_tern(path, words)


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, default=str) + "\n")
