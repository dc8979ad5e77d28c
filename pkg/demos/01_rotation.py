"""Rotation application: what hybrid optimization does to the server program.

The client streams n angles that sum to 2*pi. Unoptimized, the server
allocates its qubit first and applies each rotation as it arrives, so the
qubit sits in memory across the network latency and every gate adds noise.
Hybrid optimization merges the rotations and moves the allocation after the
last receive.
"""

from __future__ import annotations

from qnetcomp import textformat
from qnetcomp.apps import build_rotation_app, rotation_success_oracle
from qnetcomp.experiments import preset, run_sweep

_, raw = build_rotation_app(4, optimized=False, initial="+X", rng=1)
_, opt = build_rotation_app(4, optimized=True, initial="+X", rng=1)

print("unoptimized server:")
print(textformat.dumps(raw))
print("after hybrid optimization:")
print(textformat.dumps(opt))

# Success at gate fidelity 0.95, a few hundred shots per point.
print(f"{'n':>3} {'unopt':>7} {'oracle':>7} {'opt':>7} {'oracle':>7}")
for n in (2, 4, 8):
    row = []
    for pipe, k in (("none", n), ("hybrid", 1)):
        spec = preset("rotation-fidelity", n=n, sweep_values=(0.95,), runs_per_seed=100, seeds=range(3))
        res = run_sweep(spec.with_strategy(server=pipe))
        row += [res.point("rotation", 0.95).mean_success_prob, rotation_success_oracle(k, 0.95)]
    print(f"{n:>3} " + " ".join(f"{x:7.3f}" for x in row))
