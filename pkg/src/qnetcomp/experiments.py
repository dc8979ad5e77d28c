"""Scenario definitions, parameter sweeps and metric aggregation.

A :class:`ScenarioSpec` names a scenario kind, the compilation pipeline for
each program role, one swept parameter and the seeds. :func:`run_sweep`
executes ``runs_per_seed`` simulations per (sweep value, seed), averages
per seed, and reports the mean and standard error across seeds.

Run ``r`` under master seed ``s`` draws every random choice (angles,
schedule permutation, link and measurement outcomes) from
``SeedSequence([s, r])``; runs with equal ``(s, r)`` but different
strategies therefore share their random inputs.
"""

from __future__ import annotations

import configparser
import csv
import io
import math
from dataclasses import dataclass, fields, replace
from enum import Enum
from functools import lru_cache
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .apps import (
    build_bqc_client,
    build_bqc_server,
    build_rotation_app,
    build_scenario1_local,
    build_scenario2_local,
    pad_quantum_blocks,
)
from .compiler import PassConfig, Strategy, compile_program
from .errors import GridMismatchError, ParameterError, SimulationError
from .ir import Program, TimingParams
from .network import (
    LAB_P_SUCC,
    SURF_TOPOLOGY,
    LinkParams,
    TopologyEntry,
    build_schedule,
    calibrated_link,
    classical_latency,
    expected_epr_time,
    topology_lookup,
)
from .quantum import NoiseModel
from .runtime import NodeConfig, ProgramInstance, Trace, run_simulation

SIX_STATES = ("+Z", "-Z", "+X", "-X", "+Y", "-Y")


class ScenarioKind(str, Enum):
    ROTATION = "rotation"
    BQC = "bqc"
    BLOCK1 = "block1"
    BLOCK2 = "block2"
    BLOCK3 = "block3"
    DEADLINE = "deadline"
    CRITICAL = "critical"
    CRITICAL_LARGE = "critical-large"


class SweepParam(str, Enum):
    GATE_FIDELITY = "gate_fidelity"
    CC_LATENCY = "cc_latency_t2"
    BIN_MULTIPLE = "bin_multiple"
    TOPOLOGY = "topology"


# Program roles compiled per scenario, with their default pipelines.
DEFAULT_STRATEGIES: dict[ScenarioKind, dict[str, str]] = {
    ScenarioKind.ROTATION: {"server": "hybrid"},
    ScenarioKind.BQC: {"server": "hybrid"},
    ScenarioKind.BLOCK1: {"local": "block-selfish", "server": "hybrid"},
    ScenarioKind.BLOCK2: {"local": "block-selfish", "server": "hybrid"},
    ScenarioKind.BLOCK3: {"server": "hybrid"},
    ScenarioKind.DEADLINE: {"c1": "hybrid+deadline-selfish", "others": "hybrid+deadline-cooperative:100"},
    ScenarioKind.CRITICAL: {"c1": "hybrid+critical-section", "others": "hybrid"},
    ScenarioKind.CRITICAL_LARGE: {"c1": "hybrid+critical-section", "others": "hybrid"},
}

# Roles whose metrics are reported.
METRIC_ROLES: dict[ScenarioKind, tuple[str, ...]] = {
    ScenarioKind.ROTATION: ("rotation",),
    ScenarioKind.BQC: ("bqc",),
    ScenarioKind.BLOCK1: ("bqc", "local"),
    ScenarioKind.BLOCK2: ("bqc", "local"),
    ScenarioKind.BLOCK3: ("bqc",),
    ScenarioKind.DEADLINE: ("c1", "others"),
    ScenarioKind.CRITICAL: ("c1", "others"),
    ScenarioKind.CRITICAL_LARGE: ("c1", "others"),
}


def parse_pipeline(text: str, timing: TimingParams = TimingParams()) -> tuple[PassConfig, ...]:
    """``"hybrid+block-cooperative:8"`` -> pass configs applied left to right."""
    out = []
    for part in text.split("+"):
        part = part.strip()
        if not part:
            raise ParameterError(f"empty pass in pipeline {text!r}")
        name, _, arg = part.partition(":")
        try:
            strategy = Strategy(name)
        except ValueError:
            raise ParameterError(f"unknown strategy {name!r}") from None
        val = int(arg) if arg else None
        if strategy is Strategy.BLOCK_COOPERATIVE:
            out.append(PassConfig(strategy, n=val, timing=timing))
        elif strategy is Strategy.DEADLINE_COOPERATIVE:
            out.append(PassConfig(strategy, m=val, timing=timing))
        else:
            if arg:
                raise ParameterError(f"strategy {name!r} takes no parameter")
            out.append(PassConfig(strategy, timing=timing))
    return tuple(out)


def apply_pipeline(program: Program, text: str, timing: TimingParams = TimingParams()) -> Program:
    for cfg in parse_pipeline(text, timing):
        program = compile_program(program, cfg)
    return program


def parse_strategies(text: str) -> dict[str, str]:
    """``"local=block-cooperative:8,server=hybrid"`` -> role mapping."""
    out = {}
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        role, sep, pipe = item.partition("=")
        if not sep or not role.strip() or not pipe.strip():
            raise ParameterError(f"bad strategy item {item!r}; expected role=pipeline")
        out[role.strip()] = pipe.strip()
    return out


@dataclass(frozen=True)
class ScenarioSpec:
    kind: ScenarioKind
    n: int = 3
    c: int = 2
    strategies: tuple[tuple[str, str], ...] = ()
    sweep_param: SweepParam = SweepParam.BIN_MULTIPLE
    sweep_values: tuple = tuple(range(1, 11))
    runs_per_seed: int = 100
    seeds: tuple[int, ...] = tuple(range(10))
    timing: TimingParams = TimingParams()
    noise: NoiseModel = NoiseModel()
    link: LinkParams = LinkParams()
    target_p0: float = LAB_P_SUCC
    bin_multiple: float = 1.0
    latency_ns: int | None = None
    local_iterations: int = 75
    local_gates: tuple[str, ...] = ("H",) * 8
    large_block_fraction: float = 0.15
    num_qubits: int = 64
    server_site: str = "Delft 1"
    client_site: str = "Delft 1"
    quantum: bool = True
    topology: tuple[TopologyEntry, ...] = SURF_TOPOLOGY

    def __post_init__(self):
        object.__setattr__(self, "kind", ScenarioKind(self.kind))
        object.__setattr__(self, "sweep_param", SweepParam(self.sweep_param))
        if self.n < 1 or self.c < 1:
            raise ParameterError("n and c must be >= 1")
        if not self.sweep_values:
            raise ParameterError("sweep values must be non-empty")
        if self.runs_per_seed < 1 or not self.seeds:
            raise ParameterError("need at least one run and one seed")
        if self.kind in (ScenarioKind.ROTATION,) and self.c != 1:
            object.__setattr__(self, "c", 1)
        merged = dict(DEFAULT_STRATEGIES[self.kind])
        for role, pipe in self.strategies:
            if role not in merged:
                raise ParameterError(f"scenario {self.kind.value} has no program role {role!r}")
            merged[role] = pipe
        for pipe in merged.values():
            parse_pipeline(pipe, self.timing)
        object.__setattr__(self, "strategies", tuple(sorted(merged.items())))
        object.__setattr__(self, "sweep_values", tuple(self.sweep_values))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))

    def strategy(self, role: str) -> str:
        return dict(self.strategies)[role]

    def with_strategy(self, **roles: str) -> "ScenarioSpec":
        merged = dict(self.strategies)
        merged.update(roles)
        return replace(self, strategies=tuple(merged.items()))


# Presets for the reference simulation configurations.


def preset(name: str, n: int = 3, c: int = 2, **overrides) -> ScenarioSpec:
    """Named scenario configurations; keyword overrides replace spec fields."""
    ideal_but_f1 = NoiseModel(f1=0.99, f2=1.0, t2=math.inf, pair_fidelity=1.0)
    fid = (0.95, 0.96, 0.97, 0.98, 0.99, 0.995, 0.999)
    bins = tuple(range(1, 11))
    table = {
        "rotation-fidelity": dict(
            kind=ScenarioKind.ROTATION, sweep_param=SweepParam.GATE_FIDELITY, sweep_values=fid,
            runs_per_seed=1000, noise=ideal_but_f1,
        ),
        "rotation-latency": dict(
            kind=ScenarioKind.ROTATION, sweep_param=SweepParam.CC_LATENCY,
            sweep_values=tuple(round(0.1 * k, 1) for k in range(1, 11)),
            runs_per_seed=1000, noise=NoiseModel(f1=1.0),
        ),
        "bqc-fidelity": dict(
            kind=ScenarioKind.BQC, c=1, sweep_param=SweepParam.GATE_FIDELITY, sweep_values=fid,
            runs_per_seed=1000, noise=ideal_but_f1,
        ),
        "bqc-distance": dict(
            kind=ScenarioKind.BQC, c=1, sweep_param=SweepParam.TOPOLOGY,
            sweep_values=tuple(e.client for e in SURF_TOPOLOGY), runs_per_seed=1000,
        ),
        "block1": dict(kind=ScenarioKind.BLOCK1, sweep_values=bins),
        "block2": dict(kind=ScenarioKind.BLOCK2, sweep_values=bins, noise=NoiseModel(f1=1.0)),
        "block3": dict(kind=ScenarioKind.BLOCK3, sweep_values=bins),
        "deadline": dict(kind=ScenarioKind.DEADLINE, sweep_values=bins),
        "critical": dict(kind=ScenarioKind.CRITICAL, sweep_values=bins),
        "critical-large": dict(kind=ScenarioKind.CRITICAL_LARGE, sweep_values=bins),
    }
    if name not in table:
        raise ParameterError(f"unknown scenario {name!r}; choose from {sorted(table)}")
    args = dict(table[name])
    args.setdefault("n", n)
    args.setdefault("c", c)
    args.update(overrides)
    return ScenarioSpec(**args)


PRESETS = (
    "rotation-fidelity", "rotation-latency", "bqc-fidelity", "bqc-distance",
    "block1", "block2", "block3", "deadline", "critical", "critical-large",
)


# Single run -----------------------------------------------------------------


@dataclass(frozen=True)
class RunSetup:
    """Everything needed to simulate one run; exposed for tests and the CLI."""

    nodes: tuple[NodeConfig, ...]
    instances: tuple[ProgramInstance, ...]
    schedule: object
    link: object
    latency_ns: int | dict | None
    roles: dict[str, tuple[str, ...]]  # metric role -> application ids
    success_iid: dict[str, int]  # application id -> instance carrying the expected outcome


def _effective(spec: ScenarioSpec, value):
    """(noise, link, latency, bin multiple) for one sweep value."""
    noise, latency, mult = spec.noise, spec.latency_ns, spec.bin_multiple
    site = spec.client_site
    p = spec.sweep_param
    if p is SweepParam.GATE_FIDELITY:
        noise = replace(noise, f1=float(value))
    elif p is SweepParam.CC_LATENCY:
        if math.isinf(noise.t2):
            raise ParameterError("latency as a fraction of T2 needs a finite T2")
        latency = int(round(float(value) * noise.t2 * 1e9))
    elif p is SweepParam.BIN_MULTIPLE:
        mult = float(value)
    elif p is SweepParam.TOPOLOGY:
        site = str(value)
    entry = topology_lookup(spec.server_site, site, spec.topology)
    link = calibrated_link(entry.distance_km, entry.hops, spec.target_p0, spec.link)
    if latency is None:
        latency = classical_latency(entry.distance_km, entry.hops)
    return noise, link, latency, mult


@lru_cache(maxsize=32)
def _local_program(kind, iterations, gates, pipeline, timing) -> Program:
    # Deterministic, so shared across runs (and by the runtime's per-program cache).
    builder = build_scenario1_local if kind is ScenarioKind.BLOCK1 else build_scenario2_local
    return apply_pipeline(builder(True, iterations=iterations, gates=gates), pipeline, timing)


@lru_cache(maxsize=256)
def _server_program(n, client, tag, pipeline, timing, pad_ns) -> Program:
    # The server program holds no per-run secrets, so its compiled form is shared.
    server = apply_pipeline(build_bqc_server(n, False, "server", client, tag), pipeline, timing)
    return pad_quantum_blocks(server, pad_ns, timing) if pad_ns else server


def build_run(spec: ScenarioSpec, value, seed: int, run_index: int) -> tuple[RunSetup, np.random.SeedSequence]:
    ss = np.random.SeedSequence([int(seed), int(run_index)])
    build_ss, sched_ss, sim_ss = ss.spawn(3)
    build_rng = np.random.default_rng(build_ss)
    noise, link, latency, mult = _effective(spec, value)
    timing = spec.timing
    kind = spec.kind
    instances: list[ProgramInstance] = []
    roles: dict[str, list[str]] = {r: [] for r in METRIC_ROLES[kind]}
    success_iid: dict[str, int] = {}

    def add(program: Program, app: str) -> int:
        iid = len(instances)
        instances.append(ProgramInstance(iid, program, app))
        return iid

    if kind is ScenarioKind.ROTATION:
        initial = SIX_STATES[int(build_rng.integers(6))]
        client, server = build_rotation_app(spec.n, False, initial=initial, rng=build_rng)
        server = apply_pipeline(server, spec.strategy("server"), timing)
        success_iid["rotation"] = add(server, "rotation")
        add(client, "rotation")
        roles["rotation"].append("rotation")
        node_names = ["server", "client"]
        apps = ["rotation"]
    else:
        node_names = ["server"] + [f"client{k}" for k in range(1, spec.c + 1)]
        if kind in (ScenarioKind.BLOCK1, ScenarioKind.BLOCK2):
            local = _local_program(kind, spec.local_iterations, spec.local_gates, spec.strategy("local"), timing)
            success_iid["local"] = add(local, "local")
            roles["local"].append("local")
        apps = []
        for k in range(1, spec.c + 1):
            app = f"bqc{k}"
            apps.append(app)
            client = build_bqc_client(spec.n, build_rng, "server", f"client{k}", str(k))
            if kind in (ScenarioKind.DEADLINE, ScenarioKind.CRITICAL, ScenarioKind.CRITICAL_LARGE):
                role = "c1" if k == 1 else "others"
                pipe = spec.strategy(role)
            else:
                role = "bqc"
                pipe = spec.strategy("server")
            pad = 0
            if kind is ScenarioKind.CRITICAL_LARGE:
                pad = int(round(spec.large_block_fraction * expected_epr_time(link)))
            add(_server_program(spec.n, f"client{k}", str(k), pipe, timing, pad), app)
            success_iid[app] = add(client, app)
            roles[role].append(app)
    nodes = tuple(NodeConfig(nm, spec.num_qubits, timing, noise) for nm in node_names)
    schedule = build_schedule(apps, mult, expected_epr_time(link), np.random.default_rng(sched_ss))
    setup = RunSetup(
        nodes, tuple(instances), schedule, link, latency,
        {r: tuple(a) for r, a in roles.items()}, success_iid,
    )
    return setup, sim_ss


def app_exec_time(trace: Trace, app: str) -> int:
    """Span from the first block start to the last block end over the app's instances."""
    res = [r for r in trace.instances.values() if r.app == app]
    return max(r.end for r in res) - min(r.start for r in res)


def simulate_run(spec: ScenarioSpec, value, seed: int, run_index: int, record_events: bool = False):
    """One simulation; returns ``(trace, setup)``."""
    setup, sim_ss = build_run(spec, value, seed, run_index)
    trace = run_simulation(
        setup.nodes, setup.instances, setup.schedule, setup.link, sim_ss,
        latency_ns=setup.latency_ns, quantum=spec.quantum, record_events=record_events,
    )
    return trace, setup


def run_metrics(spec: ScenarioSpec, value, seed: int, run_index: int) -> dict[str, tuple[float, float]]:
    """Per metric role: (mean execution time in ns, mean success) over the role's apps."""
    try:
        trace, setup = simulate_run(spec, value, seed, run_index)
    except Exception as exc:  # annotate and re-raise
        raise SimulationError(str(exc), value, seed, run_index) from exc
    out = {}
    for role, apps in setup.roles.items():
        if not apps:
            continue
        times = [app_exec_time(trace, a) for a in apps]
        succ = [trace.instances[setup.success_iid[a]].success for a in apps]
        s = float("nan") if any(x is None for x in succ) else float(np.mean(succ))
        out[role] = (float(np.mean(times)), s)
    return out


# Aggregation ----------------------------------------------------------------


def _mean_se(xs: Sequence[float]) -> tuple[float, float]:
    a = np.asarray(xs, dtype=float)
    if len(a) < 2:
        return float(a.mean()), 0.0
    return float(a.mean()), float(a.std(ddof=1) / math.sqrt(len(a)))


@dataclass(frozen=True)
class PointMetrics:
    role: str
    sweep_value: object
    strategy: str
    mean_exec_time_ns: float
    stderr_exec_time_ns: float
    mean_success_prob: float
    stderr_success_prob: float
    per_seed_exec: tuple[float, ...]
    per_seed_success: tuple[float, ...]


@dataclass(frozen=True)
class SweepResult:
    spec: ScenarioSpec
    points: tuple[PointMetrics, ...]

    def __post_init__(self):
        for p in self.points:
            if not math.isnan(p.mean_success_prob) and not 0.0 <= p.mean_success_prob <= 1.0:
                raise ParameterError("success probability outside [0, 1]")
            if p.stderr_exec_time_ns < 0 or (p.stderr_success_prob < 0):
                raise ParameterError("negative standard error")

    def roles(self) -> tuple[str, ...]:
        return tuple(dict.fromkeys(p.role for p in self.points))

    def values(self) -> tuple:
        return tuple(dict.fromkeys(p.sweep_value for p in self.points))

    def point(self, role: str, value) -> PointMetrics:
        for p in self.points:
            if p.role == role and p.sweep_value == value:
                return p
        raise KeyError((role, value))

    def series(self, role: str, attr: str = "mean_exec_time_ns") -> list[float]:
        return [getattr(self.point(role, v), attr) for v in self.values()]

    def rows(self) -> list[dict]:
        s = self.spec
        return [
            {
                "scenario": s.kind.value,
                "sweep_param": s.sweep_param.value,
                "sweep_value": p.sweep_value,
                "n": s.n,
                "c": s.c,
                "program_role": p.role,
                "strategy": p.strategy,
                "mean_exec_time_ns": p.mean_exec_time_ns,
                "stderr_exec_time_ns": p.stderr_exec_time_ns,
                "mean_success_prob": p.mean_success_prob,
                "stderr_success_prob": p.stderr_success_prob,
                "seeds": len(s.seeds),
                "runs_per_seed": s.runs_per_seed,
            }
            for p in self.points
        ]


CSV_COLUMNS = (
    "scenario", "sweep_param", "sweep_value", "n", "c", "program_role", "strategy",
    "mean_exec_time_ns", "stderr_exec_time_ns", "mean_success_prob", "stderr_success_prob",
    "seeds", "runs_per_seed",
)


def write_csv(results: Iterable[SweepResult], path: str | Path | io.TextIOBase) -> None:
    rows = [r for res in results for r in res.rows()]
    if isinstance(path, (str, Path)):
        with open(path, "w", newline="") as fh:
            _write_rows(fh, rows)
    else:
        _write_rows(path, rows)


def _write_rows(fh, rows):
    w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
    w.writeheader()
    w.writerows(rows)


def _role_strategy(spec: ScenarioSpec, role: str) -> str:
    strategies = dict(spec.strategies)
    if role in strategies:
        return strategies[role]
    if role in ("bqc", "rotation"):
        return strategies.get("server", "")
    return ""


def run_sweep(
    spec: ScenarioSpec,
    progress: Callable[[object, int], None] | None = None,
) -> SweepResult:
    """Simulate every (value, seed, run) and aggregate across seeds."""
    points = []
    for value in spec.sweep_values:
        per_role: dict[str, tuple[list[float], list[float]]] = {}
        for seed in spec.seeds:
            acc: dict[str, tuple[list[float], list[float]]] = {}
            for r in range(spec.runs_per_seed):
                for role, (t, s) in run_metrics(spec, value, seed, r).items():
                    ts, ss = acc.setdefault(role, ([], []))
                    ts.append(t)
                    ss.append(s)
            for role, (ts, ss) in acc.items():
                ex, su = per_role.setdefault(role, ([], []))
                ex.append(float(np.mean(ts)))
                su.append(float(np.mean(ss)))
            if progress is not None:
                progress(value, seed)
        for role in METRIC_ROLES[spec.kind]:
            if role not in per_role:
                continue
            ex, su = per_role[role]
            me, se = _mean_se(ex)
            ms, ss_ = _mean_se(su) if not any(math.isnan(x) for x in su) else (float("nan"), 0.0)
            points.append(
                PointMetrics(role, value, _role_strategy(spec, role), me, se, ms, ss_, tuple(ex), tuple(su))
            )
    return SweepResult(spec, tuple(points))


# Comparison -----------------------------------------------------------------


@dataclass(frozen=True)
class PointDelta:
    role: str
    sweep_value: object
    success_delta: float  # opt - unopt, absolute probability
    exec_time_rel_delta: float  # (opt - unopt) / unopt
    exec_time_rel_delta_se: float  # standard error of the paired per-seed relative deltas


@dataclass(frozen=True)
class Comparison:
    points: tuple[PointDelta, ...]

    def for_role(self, role: str) -> list[PointDelta]:
        return [p for p in self.points if p.role == role]

    def aggregate(self, role: str) -> dict[str, float]:
        """Mean of per-point deltas and their spread across sweep points."""
        pts = self.for_role(role)
        ex = np.array([p.exec_time_rel_delta for p in pts])
        sd = np.array([p.success_delta for p in pts])
        sd = sd[~np.isnan(sd)]
        return {
            "exec_time_rel_delta": float(ex.mean()),
            "exec_time_rel_delta_sd": float(ex.std(ddof=1)) if len(ex) > 1 else 0.0,
            "success_delta": float(sd.mean()) if len(sd) else float("nan"),
            "success_delta_sd": float(sd.std(ddof=1)) if len(sd) > 1 else 0.0,
        }


def success_improvement(opt: SweepResult, unopt: SweepResult) -> Comparison:
    """Per-point deltas of ``opt`` relative to ``unopt`` on a common grid."""
    if opt.values() != unopt.values() or opt.roles() != unopt.roles():
        raise GridMismatchError("sweep grids or roles differ")
    if opt.spec.seeds != unopt.spec.seeds:
        raise GridMismatchError("seed lists differ")
    out = []
    for role in opt.roles():
        for v in opt.values():
            a, b = opt.point(role, v), unopt.point(role, v)
            rel = (a.mean_exec_time_ns - b.mean_exec_time_ns) / b.mean_exec_time_ns
            paired = [(x - y) / y for x, y in zip(a.per_seed_exec, b.per_seed_exec)]
            _, se = _mean_se(paired)
            out.append(PointDelta(role, v, a.mean_success_prob - b.mean_success_prob, rel, se))
    return Comparison(tuple(out))


# INI configuration ------------------------------------------------------------

_HW_TIMING = [f.name for f in fields(TimingParams)]
_HW_NOISE = [f.name for f in fields(NoiseModel)]
_LINK = ["alpha", "eta_ion", "eta_fc", "eta_det", "eta_penalty", "t_prep_ns"]


def _fmt(v) -> str:
    if isinstance(v, float) and math.isinf(v):
        return "inf"
    return str(v)


def spec_to_ini(spec: ScenarioSpec) -> str:
    cp = configparser.ConfigParser()
    cp["hardware"] = {
        **{k: _fmt(getattr(spec.timing, k)) for k in _HW_TIMING},
        **{k: _fmt(getattr(spec.noise, k)) for k in _HW_NOISE},
        "num_qubits": str(spec.num_qubits),
    }
    cp["link"] = {
        **{k: _fmt(getattr(spec.link, k)) for k in _LINK},
        "target_p0": _fmt(spec.target_p0),
        "latency_ns": "" if spec.latency_ns is None else str(spec.latency_ns),
        "server_site": spec.server_site,
        "client_site": spec.client_site,
    }
    cp["schedule"] = {"bin_multiple": _fmt(spec.bin_multiple)}
    cp["scenario"] = {
        "kind": spec.kind.value,
        "n": str(spec.n),
        "c": str(spec.c),
        "strategies": ",".join(f"{r}={p}" for r, p in spec.strategies),
        "sweep_param": spec.sweep_param.value,
        "sweep_values": ",".join(str(v) for v in spec.sweep_values),
        "runs_per_seed": str(spec.runs_per_seed),
        "seeds": ",".join(str(s) for s in spec.seeds),
        "local_iterations": str(spec.local_iterations),
        "local_gates": ",".join(spec.local_gates),
        "large_block_fraction": _fmt(spec.large_block_fraction),
        "quantum": str(spec.quantum).lower(),
    }
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def _num(text: str):
    text = text.strip()
    try:
        return int(text)
    except ValueError:
        return float(text)


def spec_from_ini(text: str) -> ScenarioSpec:
    """Parse a config; missing keys keep their defaults."""
    cp = configparser.ConfigParser()
    cp.read_string(text)
    hw = cp["hardware"] if cp.has_section("hardware") else {}
    timing = TimingParams(**{k: int(hw[k]) for k in _HW_TIMING if k in hw})
    noise_kw = {}
    for k in _HW_NOISE:
        if k in hw:
            noise_kw[k] = int(hw[k]) if k.endswith("_ns") else float(hw[k])
    noise = NoiseModel(**noise_kw)
    lk = cp["link"] if cp.has_section("link") else {}
    link = LinkParams(**{k: (int(lk[k]) if k.endswith("_ns") else float(lk[k])) for k in _LINK if k in lk})
    sc = cp["scenario"] if cp.has_section("scenario") else {}
    if "kind" not in sc:
        raise ParameterError("[scenario] kind is required")
    kw: dict = dict(kind=sc["kind"], timing=timing, noise=noise, link=link)
    if "num_qubits" in hw:
        kw["num_qubits"] = int(hw["num_qubits"])
    if "target_p0" in lk:
        kw["target_p0"] = float(lk["target_p0"])
    if lk.get("latency_ns", "").strip():
        kw["latency_ns"] = int(lk["latency_ns"])
    for k in ("server_site", "client_site"):
        if k in lk:
            kw[k] = lk[k].strip()
    if cp.has_section("schedule") and "bin_multiple" in cp["schedule"]:
        kw["bin_multiple"] = float(cp["schedule"]["bin_multiple"])
    for k in ("n", "c", "runs_per_seed", "local_iterations"):
        if k in sc:
            kw[k] = int(sc[k])
    if "strategies" in sc:
        kw["strategies"] = tuple(parse_strategies(sc["strategies"]).items())
    if "sweep_param" in sc:
        kw["sweep_param"] = sc["sweep_param"]
    if "sweep_values" in sc:
        param = SweepParam(sc.get("sweep_param", SweepParam.BIN_MULTIPLE.value))
        raw = [v.strip() for v in sc["sweep_values"].split(",") if v.strip()]
        kw["sweep_values"] = tuple(raw if param is SweepParam.TOPOLOGY else (_num(v) for v in raw))
    if "seeds" in sc:
        kw["seeds"] = tuple(int(s) for s in sc["seeds"].split(",") if s.strip())
    if "local_gates" in sc:
        kw["local_gates"] = tuple(g.strip() for g in sc["local_gates"].split(",") if g.strip())
    if "large_block_fraction" in sc:
        kw["large_block_fraction"] = float(sc["large_block_fraction"])
    if "quantum" in sc:
        kw["quantum"] = sc.getboolean("quantum") if hasattr(sc, "getboolean") else sc["quantum"] == "true"
    return ScenarioSpec(**kw)
