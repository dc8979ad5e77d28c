"""A blind computation between one client and a server, traced block by block."""

from __future__ import annotations

import numpy as np

from qnetcomp import NodeConfig, NoiseModel, ProgramInstance, build_schedule, calibrated_link, run_simulation
from qnetcomp.apps import bqc_secrets, build_bqc_app
from qnetcomp.network import expected_epr_time

client, server = build_bqc_app(3, optimized=True, rng=5)
secrets = bqc_secrets(client)
print("secret angles phi:", np.round(secrets.phis, 3), "expected outcome:", secrets.expected)
print("server blocks:", [b.btype.value for b in server.blocks])

link = calibrated_link()
nodes = (NodeConfig("server", 8, noise=NoiseModel.ideal()), NodeConfig("client", 8, noise=NoiseModel.ideal()))
instances = (ProgramInstance(0, server, "bqc"), ProgramInstance(1, client, "bqc"))
schedule = build_schedule(["bqc"], 1.0, expected_epr_time(link), np.random.default_rng(0))

wins = 0
for seed in range(20):
    trace = run_simulation(nodes, instances, schedule, link, np.random.SeedSequence(seed), record_events=seed == 0)
    wins += bool(trace.instances[1].success)
    if seed == 0:
        for e in trace.events[:12]:
            print(f"  {e.time / 1e6:9.3f} ms  {e.node:<6} {e.proc} iid={e.iid} block={e.block} {e.kind}")
        print(f"  ... {len(trace.events)} events in total")
print(f"noiseless success: {wins}/20")
