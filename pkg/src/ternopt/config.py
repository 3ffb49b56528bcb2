"""YAML run configuration: parsing, validation, serialization and digests.

Example::

    topology:
      preset: five-agent          # or: m: 5, edges: [[0, 1], [1, 2], ...]
    schedule: {a1: 1.0, a2: 1.0, a3: 0.3, delta1: 0.3, delta2: 0.6}
    quantizer: {kind: ternary, r: 5.0, clamp_policy: saturate}
    problem: {kind: sensor, s: 3, d: 2, n: 100, regularization: 0.01}
    iterations: 5000
    seeds: [1, 2]
    batch: 1
    output: {dir: out, log: metrics}
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, fields
from pathlib import Path

import yaml

from .problems import Problem, make_nonconvex_problem, make_sensor_problem
from .quantizer import QuantizerSpec
from .schedule import Schedule
from .topology import Topology, from_edges, preset

PROBLEM_DEFAULTS = {
    "sensor": {
        "s": 3, "d": 2, "n": 100, "regularization": 0.01,
        "measurement_scale": 0.3, "noise_scale": 1.0, "seed": None,
    },
    "nonconvex": {"d": 2, "q_scale": 0.5, "c_scale": 0.5, "sigma": 0.1, "seed": None},
}


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


@dataclass
class TopologyConfig:
    preset: str | None = "five-agent"
    m: int | None = None
    edges: list | None = None

    def build(self) -> Topology:
        if self.preset is not None:
            return preset(self.preset)
        return from_edges(self.m, self.edges)

    def to_dict(self) -> dict:
        if self.preset is not None:
            return {"preset": self.preset}
        return {"m": self.m, "edges": [list(e) for e in self.edges]}


@dataclass
class ProblemConfig:
    kind: str = "sensor"
    params: dict = field(default_factory=lambda: dict(PROBLEM_DEFAULTS["sensor"]))

    def build(self, m: int, run_seed: int) -> Problem:
        """Instantiate; a missing instance seed falls back to the run seed."""
        p = dict(self.params)
        seed = p.pop("seed")
        seed = run_seed if seed is None else seed
        if self.kind == "sensor":
            return make_sensor_problem(
                m, p["s"], p["d"], p["n"], p["regularization"], seed,
                measurement_scale=p["measurement_scale"], noise_scale=p["noise_scale"],
            )
        return make_nonconvex_problem(
            m, p["d"], seed, q_scale=p["q_scale"], c_scale=p["c_scale"], sigma=p["sigma"]
        )

    def to_dict(self) -> dict:
        return {"kind": self.kind, **self.params}


@dataclass
class RunConfig:
    topology: TopologyConfig = field(default_factory=TopologyConfig)
    schedule: Schedule = field(default_factory=Schedule)
    quantizer: QuantizerSpec = field(default_factory=QuantizerSpec)
    problem: ProblemConfig = field(default_factory=ProblemConfig)
    iterations: int = 1000
    seeds: list = field(default_factory=lambda: [0])
    batch: int = 1
    output_dir: str | None = None
    log: str = "metrics"

    def to_dict(self) -> dict:
        out = {
            "topology": self.topology.to_dict(),
            "schedule": {f.name: getattr(self.schedule, f.name) for f in fields(Schedule)},
            "quantizer": {
                "kind": self.quantizer.kind,
                "r": self.quantizer.r,
                "clamp_policy": self.quantizer.clamp_policy,
            },
            "problem": self.problem.to_dict(),
            "iterations": self.iterations,
            "seeds": list(self.seeds),
            "batch": self.batch,
            "output": {"log": self.log},
        }
        if self.output_dir is not None:
            out["output"]["dir"] = self.output_dir
        return out


def _section(raw: dict, name: str) -> dict:
    sec = raw.get(name, {})
    if sec is None:
        return {}
    if not isinstance(sec, dict):
        raise ConfigError(name, f"expected a mapping, got {type(sec).__name__}")
    return sec


def _reject_unknown(sec: dict, allowed, path: str) -> None:
    extra = sorted(set(sec) - set(allowed))
    if extra:
        raise ConfigError(f"{path}.{extra[0]}", f"unknown key (allowed: {sorted(allowed)})")


def _number(sec: dict, key: str, path: str, default, kind=float):
    v = sec.get(key, default)
    if kind is int:
        if isinstance(v, bool) or not isinstance(v, int):
            raise ConfigError(f"{path}.{key}", f"expected an integer, got {v!r}")
        return v
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{path}.{key}", f"expected a number, got {v!r}")
    return float(v)


def from_dict(raw: dict) -> RunConfig:
    """Validate a parsed mapping into a :class:`RunConfig`."""
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "config must be a mapping")
    _reject_unknown(raw, ("topology", "schedule", "quantizer", "problem", "iterations", "seeds", "batch", "output"), "<root>")

    topo = _section(raw, "topology")
    _reject_unknown(topo, ("preset", "m", "edges"), "topology")
    if "edges" in topo:
        if "m" not in topo:
            raise ConfigError("topology.m", "required with an edge list")
        edges = topo["edges"]
        if not isinstance(edges, list) or not all(isinstance(e, (list, tuple)) and len(e) == 2 for e in edges):
            raise ConfigError("topology.edges", "expected a list of [i, j] pairs")
        tcfg = TopologyConfig(None, _number(topo, "m", "topology", None, int), [list(map(int, e)) for e in edges])
    else:
        tcfg = TopologyConfig(str(topo.get("preset", "five-agent")))

    sch = _section(raw, "schedule")
    names = [f.name for f in fields(Schedule)]
    _reject_unknown(sch, names, "schedule")
    defaults = Schedule()
    try:
        schedule = Schedule(**{n: _number(sch, n, "schedule", getattr(defaults, n)) for n in names})
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("schedule", str(exc)) from None

    q = _section(raw, "quantizer")
    _reject_unknown(q, ("kind", "r", "clamp_policy"), "quantizer")
    try:
        quant = QuantizerSpec(
            str(q.get("kind", "ternary")), _number(q, "r", "quantizer", 1.0), str(q.get("clamp_policy", "error"))
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("quantizer", str(exc)) from None

    p = dict(_section(raw, "problem"))
    kind = p.pop("kind", "sensor")
    if kind not in PROBLEM_DEFAULTS:
        raise ConfigError("problem.kind", f"expected one of {sorted(PROBLEM_DEFAULTS)}, got {kind!r}")
    _reject_unknown(p, PROBLEM_DEFAULTS[kind], "problem")
    params = dict(PROBLEM_DEFAULTS[kind])
    for key, default in PROBLEM_DEFAULTS[kind].items():
        if key == "seed":
            if p.get("seed") is not None:
                params["seed"] = _number(p, "seed", "problem", None, int)
        elif isinstance(default, int) and not isinstance(default, bool):
            params[key] = _number(p, key, "problem", default, int)
        else:
            params[key] = _number(p, key, "problem", default)

    iterations = _number(raw, "iterations", "<root>", 1000, int)
    if iterations < 0:
        raise ConfigError("iterations", "must be nonnegative")
    seeds = raw.get("seeds", [0])
    if isinstance(seeds, int) and not isinstance(seeds, bool):
        seeds = [seeds]
    if not isinstance(seeds, list) or not seeds or not all(isinstance(s, int) and not isinstance(s, bool) for s in seeds):
        raise ConfigError("seeds", "expected a nonempty list of integers")
    batch = _number(raw, "batch", "<root>", 1, int)
    if batch < 1:
        raise ConfigError("batch", "must be positive")

    out = _section(raw, "output")
    _reject_unknown(out, ("dir", "log"), "output")
    log = out.get("log", "metrics")
    if log not in ("metrics", "full"):
        raise ConfigError("output.log", f"expected 'metrics' or 'full', got {log!r}")
    out_dir = out.get("dir")

    return RunConfig(tcfg, schedule, quant, ProblemConfig(kind, params), iterations, seeds, batch,
                     None if out_dir is None else str(out_dir), log)


def parse_config(text: str) -> RunConfig:
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("<yaml>", str(exc)) from None
    return from_dict(raw or {})


def load_config(path) -> RunConfig:
    return parse_config(Path(path).read_text())


def dump_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False, default_flow_style=None)


def config_digest(cfg: RunConfig) -> str:
    canon = json.dumps(cfg.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()

