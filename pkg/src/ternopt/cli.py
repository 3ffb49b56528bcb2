"""Command-line front end: validate, run, attack, dp-check, codec-bench.

Exit status is 0 on success, 1 when validation fails and 2 on runtime errors.
The default output directory comes from ``$TERNOPT_OUTPUT_DIR``.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import adversary, config, engine, privacy, results, schedule, topology, wire
from .quantizer import ThresholdViolation

OK, INVALID, FAILED = 0, 1, 2
OUTPUT_ENV = "TERNOPT_OUTPUT_DIR"

log = logging.getLogger("ternopt")


def _load(path):
    try:
        return config.load_config(path)
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return None
    except config.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return None


def _validate(cfg) -> tuple[bool, list[str]]:
    lines = []
    try:
        topo = cfg.topology.build()
    except topology.TopologyError as exc:
        return False, [f"FAIL  topology: {exc}"]
    rho = topology.algebraic_connectivity(topo)
    lines.append(f"topology: m = {topo.m}, edges = {len(topo.edges())}, algebraic connectivity = {rho:.10g}")
    report = schedule.validate(cfg.schedule, topo)
    lines.extend(report.lines())
    ok = report.nonconvex_ok and bool(report.mixing_ok)
    lines.append(f"convex function-value conditions: {'PASS' if report.convex_value_ok else 'FAIL'}")
    return ok, lines


def cmd_validate(args) -> int:
    cfg = _load(args.config)
    if cfg is None:
        return INVALID
    ok, lines = _validate(cfg)
    print("\n".join(lines))
    return OK if ok else INVALID


def _output_dir(args, cfg) -> Path:
    out = args.out or cfg.output_dir or os.environ.get(OUTPUT_ENV) or "ternopt-out"
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def cmd_run(args) -> int:
    cfg = _load(args.config)
    if cfg is None:
        return INVALID
    ok, lines = _validate(cfg)
    if not ok and not args.force:
        print("\n".join(lines))
        print("validation failed; rerun with --force to run anyway", file=sys.stderr)
        return INVALID
    topo = cfg.topology.build()
    out = _output_dir(args, cfg)
    digest = config.config_digest(cfg)
    tables, metas = [], {}
    for seed in cfg.seeds:
        problem = cfg.problem.build(topo.m, seed)
        csv_path = out / f"run_seed{seed}.csv"
        try:
            traj = engine.run(
                topo, cfg.schedule, cfg.quantizer, problem, cfg.iterations, seed,
                batch=cfg.batch, record=cfg.log, metadata={"config_digest": digest},
            )
        except engine.DivergenceError as exc:
            if exc.partial is not None:
                results.write_metrics_csv(csv_path, results.metrics_table(exc.partial), digest)
            print(f"error: seed {seed}: {exc} (partial metrics in {csv_path})", file=sys.stderr)
            return FAILED
        except ThresholdViolation as exc:
            print(f"error: seed {seed}: {exc}; use clamp_policy: saturate for exploratory runs", file=sys.stderr)
            return FAILED
        table = results.metrics_table(traj)
        results.write_metrics_csv(csv_path, table, digest)
        tables.append(table)
        metas[str(seed)] = traj.metadata
        if cfg.log == "full":
            results.save_trajectory(out / f"traj_seed{seed}.npz", traj)
            if not cfg.quantizer.is_identity:
                results.archive_broadcasts(out / f"broadcasts_seed{seed}.tern", traj)
        print(f"seed {seed}: final optimality gap {table[-1, 4]:.6g}, consensus error {table[-1, 3]:.6g}")
    results.write_metrics_csv(out / "run_mean.csv", results.average_tables(tables), digest)
    results.write_json(out / "run_meta.json", {"config_digest": digest, "config": cfg.to_dict(), "runs": metas})
    print(f"wrote {len(tables) + 1} CSV files to {out}")
    return OK


def cmd_attack(args) -> int:
    try:
        traj = results.load_trajectory(args.trajectory)
        report = adversary.attack_report(traj, args.target, args.mode, args.observer)
    except adversary.MissingRoundLogError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return FAILED
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return FAILED
    out = Path(args.out) if args.out else Path(args.trajectory).with_suffix(".attack.csv")
    report.write_csv(out, comment=f"mode: {report.mode}; quantizer: {traj.quantizer.kind}")
    errs = report.relative_error
    if errs.size:
        print(f"{errs.size} inferences ({report.mode}): relative error mean {errs.mean():.6g}, "
              f"min {errs.min():.6g}, max {errs.max():.6g}")
    else:
        print("no attackable rounds")
    print(f"wrote {out}")
    return OK


def cmd_dp_check(args) -> int:
    try:
        sweep = privacy.sweep_dp(args.r, args.grid_step)
        ledger = privacy.compose(args.T, args.r)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return INVALID
    print(f"per-step delta = {ledger.per_step_delta:.12g}")
    print(f"max violation = {sweep.max_violation:.3e} over {sweep.pairs} pairs")
    x, y, ev = sweep.argmax
    print(f"largest event gap = {sweep.max_gap:.12g} at x = {x:g}, y = {y:g}, event q = {ev}")
    print(f"steps T = {ledger.steps}, basic composition delta = {ledger.basic_composition_delta:.12g}")
    print(ledger.sqrt_note)
    return OK if sweep.max_violation <= 1e-12 else INVALID


def cmd_codec_bench(args) -> int:
    rng = np.random.default_rng(args.seed)
    t0 = time.perf_counter()
    failures = 0
    for _ in range(args.vectors):
        d = int(rng.integers(1, 258))
        v = rng.integers(-1, 2, d).astype(np.int8)
        r = float(rng.uniform(0.1, 100.0))
        levels, r2 = wire.decode(wire.TernaryCodeword.from_bytes(wire.encode(v, r).to_bytes()))
        failures += int(not (np.array_equal(levels, v) and r2 == r))
    t1 = time.perf_counter()
    big = rng.integers(-1, 2, args.d).astype(np.int8)
    blob = wire.encode(big, 1.0).to_bytes()
    measured = 32.0 * args.d / (8 * len(blob))
    print(f"roundtrip: {args.vectors - failures}/{args.vectors} ok in {t1 - t0:.3f} s")
    print(f"d = {args.d}: {len(blob)} bytes, compression ratio {measured:.4f} "
          f"(formula {wire.compression_ratio(args.d):.4f}, entropy limit {32 / np.log2(3):.2f})")
    return OK if failures == 0 else FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ternopt", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check step-size and topology conditions")
    p.add_argument("config")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("run", help="simulate every seed and write CSV metrics")
    p.add_argument("config")
    p.add_argument("--out", help=f"output directory (default: config, ${OUTPUT_ENV}, ./ternopt-out)")
    p.add_argument("--force", action="store_true", help="run even if validation fails")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("attack", help="gradient inference on a saved trajectory")
    p.add_argument("trajectory")
    p.add_argument("--mode", choices=adversary.MODES, default="eavesdropper")
    p.add_argument("--target", type=int, default=None, help="target agent (default: all)")
    p.add_argument("--observer", type=int, default=None, help="curious agent for honest_but_curious")
    p.add_argument("--out")
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("dp-check", help="exact (0, 1/r) privacy sweep and composition ledger")
    p.add_argument("--r", type=float, required=True)
    p.add_argument("--T", type=int, default=1)
    p.add_argument("--grid-step", type=float, default=1e-3)
    p.set_defaults(func=cmd_dp_check)

    p = sub.add_parser("codec-bench", help="ternary codec roundtrip and compression ratio")
    p.add_argument("--d", type=int, default=100_000)
    p.add_argument("--vectors", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_codec_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001
        log.debug("unhandled error", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return FAILED


if __name__ == "__main__":
    sys.exit(main())
