"""Selfish vs cooperative compilation of a local program sharing a node with BQC servers.

A long local program compiled into one block keeps the quantum processor
busy; the cooperative 8-gate version yields it between iterations, letting
the BQC servers use their entanglement bins.
"""

from __future__ import annotations

from qnetcomp.experiments import preset, run_sweep, success_improvement

base = preset("block1", n=3, c=2, runs_per_seed=10, seeds=range(3), sweep_values=(1, 4, 8), quantum=False)
selfish = run_sweep(base)
coop = run_sweep(base.with_strategy(local="block-cooperative:8"))

print(f"{'bins':>4} {'role':<6} {'selfish ms':>11} {'coop ms':>9} {'change':>8}")
for d in success_improvement(coop, selfish).points:
    a, b = selfish.point(d.role, d.sweep_value), coop.point(d.role, d.sweep_value)
    print(
        f"{d.sweep_value:>4} {d.role:<6} {a.mean_exec_time_ns / 1e6:11.1f} "
        f"{b.mean_exec_time_ns / 1e6:9.1f} {d.exec_time_rel_delta:+8.1%}"
    )
