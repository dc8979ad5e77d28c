"""Trace invariant checker used by the runtime and acceptance tests."""

from __future__ import annotations

from collections import defaultdict

from qnetcomp.ir import BlockType, estimate_block_duration
from qnetcomp.network import t_cycle


def check_trace(trace, instances, nodes, schedule, link, latency_ns) -> list[str]:
    """All invariant violations found in ``trace`` (empty when clean)."""
    bad: list[str] = []
    timing = {cfg.node: cfg.timing for cfg in nodes}
    progs = {i.iid: i.program for i in instances}
    app_of = {i.iid: i.app for i in instances}
    cyc = t_cycle(link) if not isinstance(link, dict) else None

    per_block = defaultdict(list)  # (iid, bid) -> [(t, kind, info)]
    per_proc = defaultdict(list)  # (node, proc) -> [(t, kind, iid, bid)]
    starts_by_node = defaultdict(list)
    sends = defaultdict(list)  # (iid, peer) -> [t_end]
    recvs = defaultdict(list)  # (iid, peer) -> [t_start]
    for e in trace.events:
        info = dict(e.info)
        if e.kind in ("start", "end"):
            per_block[(e.iid, e.block)].append((e.time, e.kind, info))
            per_proc[(e.node, e.proc)].append((e.time, e.kind, e.iid, e.block))
            if e.kind == "start":
                starts_by_node[e.node].append((e.time, e.iid, e.block))
        elif e.kind == "msg_send":
            sends[(e.iid, info["peer"])].append(e.time)
        elif e.kind == "msg_recv":
            recvs[(e.iid, info["peer"])].append(e.time)
        elif e.kind == "epr_attempt":
            app = app_of[e.iid]
            if schedule.owner(e.time) != app:
                bad.append(f"bin: attempt of {app} at {e.time} in bin owned by {schedule.owner(e.time)}")
            if info["until"] > schedule.bin_end(e.time):
                bad.append(f"bin: attempt run of iid {e.iid} overruns its bin at {e.time}")
            if cyc is not None and info["until"] - e.time != info["attempts"] * cyc:
                bad.append(f"bin: attempt run of iid {e.iid} has inconsistent length")

    # Non-preemption and completion: start/end strictly alternate per block.
    first_start, final_end = {}, {}
    for iid, prog in progs.items():
        tm = timing[prog.node]
        for b in prog.blocks:
            evs = per_block.get((iid, b.id), [])
            kinds = [k for _, k, _ in evs]
            if kinds != ["start", "end"] * (len(kinds) // 2) or not kinds:
                bad.append(f"preempt: iid {iid} block {b.id} events {kinds}")
                continue
            first_start[(iid, b.id)] = evs[0][0]
            final_end[(iid, b.id)] = evs[-1][0]
            if b.btype is BlockType.QC:
                flags = [info.get("suspended", False) for _, k, info in evs if k == "end"]
                if flags[-1] or not all(flags[:-1]):
                    bad.append(f"preempt: QC iid {iid} block {b.id} suspension flags {flags}")
            else:
                if len(evs) != 2:
                    bad.append(f"preempt: iid {iid} block {b.id} ran {len(evs) // 2} times")
                want = tm.sched_msg_ns + estimate_block_duration(b, tm)
                if evs[1][0] - evs[0][0] != want:
                    bad.append(f"preempt: iid {iid} block {b.id} took {evs[1][0] - evs[0][0]} != {want}")

    # Processor exclusivity.
    for key, evs in per_proc.items():
        evs.sort(key=lambda x: (x[0], 0 if x[1] == "end" else 1))
        busy = None
        for t, kind, iid, bid in evs:
            if kind == "start":
                if busy is not None:
                    bad.append(f"exclusive: {key} starts {iid}/{bid} at {t} while {busy} runs")
                busy = (iid, bid)
            else:
                if busy != (iid, bid):
                    bad.append(f"exclusive: {key} ends {iid}/{bid} at {t} but {busy} was running")
                busy = None

    # Precedence.
    for iid, prog in progs.items():
        preds = prog.predecessors()
        for b in prog.blocks:
            if (iid, b.id) not in first_start:
                continue
            for p in preds[b.id]:
                if (iid, p) in final_end and first_start[(iid, b.id)] < final_end[(iid, p)]:
                    bad.append(f"precedence: iid {iid} block {b.id} starts before predecessor {p} ends")

    # Message causality: the k-th receive from a peer starts after the k-th send arrives.
    peer_iid = {(app_of[i], progs[i].node): i for i in progs}
    for (iid, peer), times in recvs.items():
        src = peer_iid[(app_of[iid], peer)]
        sent = sends.get((src, progs[iid].node), [])
        lat = latency_ns if isinstance(latency_ns, int) else None
        for k, t in enumerate(times):
            if k >= len(sent):
                bad.append(f"message: iid {iid} received message {k} from {peer} that was never sent")
            elif lat is not None and t < sent[k] + lat:
                bad.append(f"message: iid {iid} received message {k} at {t} before arrival {sent[k] + lat}")

    # Critical-section atomicity: no other instance starts a block on the node inside the section.
    for iid, prog in progs.items():
        for a, b in prog.critical_sections:
            if (iid, a) not in first_start or (iid, b) not in final_end:
                continue
            lo, hi = first_start[(iid, a)], final_end[(iid, b)]
            for t, other, bid in starts_by_node[prog.node]:
                if other != iid and lo <= t < hi:
                    bad.append(f"section: iid {other} block {bid} starts at {t} inside section of iid {iid}")
    for iid, res in trace.instances.items():
        if not res.completed:
            bad.append(f"completion: iid {iid} did not finish")
    return bad
