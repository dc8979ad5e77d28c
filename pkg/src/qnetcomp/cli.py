"""Command-line entry point: ``compile``, ``simulate`` and ``formulas``."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from . import textformat
from .errors import QnetError
from .experiments import (
    PRESETS,
    SweepParam,
    apply_pipeline,
    parse_strategies,
    preset,
    run_sweep,
    simulate_run,
    spec_from_ini,
    spec_to_ini,
    write_csv,
)
from .ir import Block, BlockType, QAlloc, QGate, QMeasure, TimingParams, estimate_block_duration, rx, validate
from .network import (
    LAB_ATTEMPT_NS,
    LAB_P_SUCC,
    TABLE_EXPECTED_EPR_NS,
    LinkParams,
    calibrated_link,
    classical_latency,
    expected_epr_time,
    p_succ,
    t_cycle,
)


def _cmd_compile(args) -> int:
    program = textformat.load(args.inp)
    pipe = args.strategy
    if args.n is not None:
        pipe = pipe.replace("block-cooperative", f"block-cooperative:{args.n}")
    if args.m is not None:
        pipe = pipe.replace("deadline-cooperative", f"deadline-cooperative:{args.m}")
    out = apply_pipeline(program, pipe)
    report = validate(out)
    if not report.ok:
        print(f"compiled program is invalid: {report.rules()}", file=sys.stderr)
        return 1
    textformat.dump(out, args.out)
    return 0


def _read_seeds(text: str) -> tuple[int, ...]:
    path = Path(text)
    if path.is_file():
        return tuple(int(tok) for tok in path.read_text().replace(",", " ").split())
    count = int(text)
    if count < 1:
        raise SystemExit("--seeds count must be >= 1")
    return tuple(range(count))


def _parse_sweep(text: str) -> dict:
    param, _, values = text.partition("=")
    sp = SweepParam(param.strip())
    out = {"sweep_param": sp}
    if values:
        raw = [v.strip() for v in values.split(",") if v.strip()]
        out["sweep_values"] = tuple(raw if sp is SweepParam.TOPOLOGY else (float(v) for v in raw))
    return out


def _cmd_simulate(args) -> int:
    if args.config:
        spec = spec_from_ini(Path(args.config).read_text())
    else:
        spec = preset(args.scenario, n=args.n or 3, c=args.c or 2)
    changes: dict = {}
    if args.config and args.n:
        changes["n"] = args.n
    if args.config and args.c:
        changes["c"] = args.c
    if args.strategy:
        changes["strategies"] = tuple(parse_strategies(args.strategy).items())
    if args.sweep:
        changes.update(_parse_sweep(args.sweep))
    if args.seeds:
        changes["seeds"] = _read_seeds(args.seeds)
    if args.runs:
        changes["runs_per_seed"] = args.runs
    if args.no_quantum:
        changes["quantum"] = False
    spec = replace(spec, **changes) if changes else spec
    if args.write_config:
        Path(args.write_config).write_text(spec_to_ini(spec))
    if args.trace:
        trace, _ = simulate_run(spec, spec.sweep_values[0], spec.seeds[0], 0, record_events=True)
        trace.write_jsonl(args.trace)
    progress = None
    if args.verbose:
        progress = lambda v, s: print(f"  value={v} seed={s} done", file=sys.stderr)  # noqa: E731
    result = run_sweep(spec, progress)
    if args.out == "-":
        write_csv([result], sys.stdout)
    else:
        write_csv([result], args.out)
    return 0


def formula_checks() -> list[tuple[str, float, float, float]]:
    """(label, computed, reference, relative tolerance) for each formula."""
    timing = TimingParams()
    lab = calibrated_link()
    ql = Block(0, BlockType.QL, (QAlloc("q"), rx("q", 0.5), QMeasure("q", "Z", "m")))
    cz = Block(0, BlockType.QL, (QGate("CZ", ("a", "b")),))
    return [
        ("p_succ bare, eta_ion=0.5, d=0", p_succ(LinkParams()), 0.0099225, 1e-12),
        ("p_succ bare, eta_ion=0.87, d=0", p_succ(LinkParams(eta_ion=0.87)), 0.030041361, 1e-9),
        ("p_succ calibrated lab link", p_succ(lab), LAB_P_SUCC, 1e-12),
        ("t_cycle lab link [ns]", t_cycle(lab), LAB_ATTEMPT_NS, 0.0),
        ("expected EPR time [ns] vs table", expected_epr_time(lab), TABLE_EXPECTED_EPR_NS, 0.01),
        ("CCL d=0 h=0 [ns]", classical_latency(0, 0), 155_000, 0.0),
        ("CCL d=0 h=1 [ns]", classical_latency(0, 1), 399_000, 0.0),
        ("CCL d=30.6 h=0 [ns]", classical_latency(30.6, 0), 308_000, 0.0),
        ("QL [alloc, 1q gate, measure] [ns]", estimate_block_duration(ql, timing), 176_600, 0.0),
        ("QL [CZ] [ns]", estimate_block_duration(cz, timing), 157_000, 0.0),
    ]


def _cmd_formulas(args) -> int:
    ok = True
    for label, got, ref, tol in formula_checks():
        rel = abs(got - ref) / abs(ref)
        passed = rel <= tol + 1e-15
        ok &= passed
        print(f"{'PASS' if passed else 'FAIL'}  {label}: {got:.10g} (reference {ref:.10g}, rel diff {rel:.3%})")
    if not args.check:
        return 0
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qnetcomp", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    c = sub.add_parser("compile", help="apply a compilation strategy to a program file")
    c.add_argument("--strategy", required=True, help="strategy name or '+'-joined pipeline")
    c.add_argument("--n", type=int, help="gate limit for block-cooperative")
    c.add_argument("--m", type=int, help="multiplier for deadline-cooperative")
    c.add_argument("--in", dest="inp", required=True)
    c.add_argument("--out", required=True)
    c.set_defaults(func=_cmd_compile)

    s = sub.add_parser("simulate", help="run a scenario sweep and write CSV")
    s.add_argument("--scenario", choices=PRESETS, default="block1")
    s.add_argument("--config", help="INI file; replaces the preset")
    s.add_argument("--n", type=int)
    s.add_argument("--c", type=int)
    s.add_argument("--strategy", help="role=pipeline[,role=pipeline]")
    s.add_argument("--sweep", help="param[=v1,v2,...]")
    s.add_argument("--seeds", help="seed count or file of seeds")
    s.add_argument("--runs", type=int, help="runs per seed")
    s.add_argument("--no-quantum", action="store_true", help="skip the density-matrix backend")
    s.add_argument("--trace", help="write the JSONL trace of the first run here")
    s.add_argument("--write-config", help="write the effective INI config here")
    s.add_argument("--out", default="-")
    s.add_argument("-v", "--verbose", action="store_true")
    s.set_defaults(func=_cmd_simulate)

    f = sub.add_parser("formulas", help="evaluate link and timing formulas")
    f.add_argument("--check", action="store_true", help="exit non-zero on any mismatch")
    f.set_defaults(func=_cmd_formulas)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (QnetError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
