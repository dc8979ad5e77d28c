"""Discrete-event execution of program instances on network nodes.

Each node has a classical processor (CPS, runs CL/CC blocks) and a quantum
processor (QPS, runs QL/QC blocks). A node-level EDF scheduler picks among
precedence-ready blocks whenever a processor is idle. Blocks never preempt.

QC blocks arm a link session on the QPS. Attempts start once both sides of
the application are armed inside a bin the application owns, and run until
success or until no further attempt fits in the bin. On expiry the blocks
return to the ready pool. A side that is armed alone gives up when its bin
can no longer hold an attempt.

Critical sections lock the node for the owning instance from the start of
the section's first block until its last block completes, including while
a QC block inside the section waits for its next bin.

Trace JSON-lines schema (one object per line, keys sorted)::

    {"block": int, "iid": int, "info": {...}, "kind": str,
     "node": str, "proc": "CPS"|"QPS", "t": int}

``kind`` is one of ``start``, ``end``, ``epr_attempt``, ``msg_send`` and
``msg_recv``. ``end`` events of QC blocks whose bin expired carry
``{"suspended": true}``. ``epr_attempt`` summarises one attempt run with
``{"attempts", "until", "success"}``.
"""

from __future__ import annotations

import heapq
import json
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import AdmissionError, DeadlockError, ParameterError, PreconditionError
from .ir import (
    BlockType,
    ClassicalCompute,
    EprRequest,
    Program,
    QAlloc,
    QFree,
    QGate,
    QLoad,
    QMeasure,
    RecvMsg,
    SendMsg,
    TimingParams,
    estimate_block_duration,
    instr_qubits,
)
from .network import LinkParams, NetworkSchedule, classical_latency, p_succ, sample_epr_raw, t_cycle
from .quantum import NoiseModel, QubitRegister, werner

CPS = "CPS"
QPS = "QPS"


@dataclass(frozen=True)
class NodeConfig:
    node: str
    num_qubits: int = 64
    timing: TimingParams = TimingParams()
    noise: NoiseModel = NoiseModel()

    def __post_init__(self):
        if self.num_qubits < 1:
            raise ParameterError("num_qubits must be positive")


@dataclass(frozen=True)
class ProgramInstance:
    """One execution of ``program`` belonging to application ``app``."""

    iid: int
    program: Program
    app: str
    arrival: int = 0


@dataclass(frozen=True)
class SimEvent:
    time: int
    node: str
    proc: str
    iid: int
    block: int
    kind: str
    info: tuple = ()

    def to_dict(self) -> dict:
        return {
            "t": self.time,
            "node": self.node,
            "proc": self.proc,
            "iid": self.iid,
            "block": self.block,
            "kind": self.kind,
            "info": dict(self.info),
        }


@dataclass
class InstanceResult:
    iid: int
    app: str
    node: str
    program: str
    start: int | None
    end: int | None
    store: dict[str, float]
    block_end: dict[int, int]
    success: bool | None

    @property
    def completed(self) -> bool:
        return self.end is not None

    @property
    def exec_time(self) -> int:
        if self.start is None or self.end is None:
            raise PreconditionError(f"instance {self.iid} did not complete")
        return self.end - self.start


@dataclass
class Trace:
    events: list[SimEvent]
    instances: dict[int, InstanceResult]
    end_time: int
    schedule: NetworkSchedule | None = None
    apps: dict[int, str] = field(default_factory=dict)

    def exec_time(self, iid: int) -> int:
        return self.instances[iid].exec_time

    def success(self, iid: int) -> bool | None:
        return self.instances[iid].success

    def dumps_jsonl(self) -> str:
        return "".join(
            json.dumps(e.to_dict(), sort_keys=True, separators=(",", ":")) + "\n" for e in self.events
        )

    def write_jsonl(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps_jsonl())


def success_of(instance: ProgramInstance | int, trace: Trace) -> bool:
    """Whether the instance produced its expected classical outcome."""
    iid = instance if isinstance(instance, int) else instance.iid
    res = trace.instances[iid]
    if not res.completed:
        raise PreconditionError(f"instance {iid} did not complete")
    if res.success is None:
        raise PreconditionError(f"instance {iid} has no expected outcome or ran without quantum state")
    return res.success


# EDF ------------------------------------------------------------------------


@dataclass(frozen=True)
class Candidate:
    """A dispatchable block as seen by the scheduler."""

    iid: int
    block: int
    ready_time: int
    abs_deadline: int | None = None

    def key(self) -> tuple:
        if self.abs_deadline is None:
            return (1, 0, self.ready_time, self.iid, self.block)
        return (0, self.abs_deadline, self.ready_time, self.iid, self.block)


def edf_select(candidates: Iterable[Candidate], now: int | None = None) -> Candidate | None:
    """Earliest absolute deadline first; deadline-free blocks rank last; FIFO ties."""
    best = None
    for c in candidates:
        if best is None or c.key() < best.key():
            best = c
    return best


# Static per-program data ------------------------------------------------------


class _ProgInfo:
    __slots__ = (
        "ids", "btype", "proc", "dur", "preds", "succs", "npreds", "deadline",
        "recv_need", "section_start", "section_end", "section_of", "qubits", "epr",
        "instrs", "initial",
    )

    def __init__(self, program: Program, timing: TimingParams):
        blocks = program.blocks
        self.ids = [b.id for b in blocks]
        idx = {bid: i for i, bid in enumerate(self.ids)}
        self.btype = [b.btype for b in blocks]
        self.proc = [QPS if b.btype in (BlockType.QL, BlockType.QC) else CPS for b in blocks]
        self.dur = [estimate_block_duration(b, timing) for b in blocks]
        preds = program.predecessors()
        self.preds = [[idx[p] for p in preds[b.id]] for b in blocks]
        self.succs = [[] for _ in blocks]
        for i, ps in enumerate(self.preds):
            for p in ps:
                self.succs[p].append(i)
        self.npreds = [len(p) for p in self.preds]
        self.deadline = [b.deadline for b in blocks]
        self.recv_need = []
        for b in blocks:
            need: dict[str, int] = {}
            for ins in b.instrs:
                if isinstance(ins, RecvMsg):
                    need[ins.peer] = need.get(ins.peer, 0) + 1
            self.recv_need.append(tuple(need.items()))
        self.section_of = [None] * len(blocks)
        self.section_start = set()
        self.section_end = set()
        for s, (a, z) in enumerate(program.critical_sections):
            ia, iz = idx[a], idx[z]
            for k in range(ia, iz + 1):
                self.section_of[k] = s
            self.section_start.add(ia)
            self.section_end.add(iz)
        self.qubits = []
        for b in blocks:
            seen: dict[str, None] = {}
            for ins in b.instrs:
                if not isinstance(ins, (QAlloc, EprRequest)):
                    for q in instr_qubits(ins):
                        seen.setdefault(q)
            self.qubits.append(tuple(seen))
        self.epr = []
        for b in blocks:
            reqs = [i for i in b.instrs if isinstance(i, EprRequest)]
            if b.btype is BlockType.QC and len(reqs) != 1:
                raise ParameterError(f"QC block {b.id} must hold exactly one EPR request")
            self.epr.append(reqs[0] if reqs else None)
        self.instrs = [b.instrs for b in blocks]


_INFO_CACHE: dict[tuple[int, TimingParams], tuple[Program, _ProgInfo]] = {}


def _info(program: Program, timing: TimingParams) -> _ProgInfo:
    key = (id(program), timing)
    hit = _INFO_CACHE.get(key)
    if hit is not None and hit[0] is program:
        return hit[1]
    if len(_INFO_CACHE) > 512:
        _INFO_CACHE.clear()
    info = _ProgInfo(program, timing)
    _INFO_CACHE[key] = (program, info)
    return info


# Runtime state ----------------------------------------------------------------


class _Inst:
    __slots__ = (
        "spec", "iid", "app", "node", "info", "waiting", "ready", "store", "qmap",
        "done", "start", "end", "block_end", "inbox", "last_touch", "prog_node",
        "in_section", "section_progress",
    )

    def __init__(self, spec: ProgramInstance, node: "_Node", info: _ProgInfo):
        self.spec = spec
        self.iid = spec.iid
        self.app = spec.app
        self.node = node
        self.info = info
        self.waiting = list(info.npreds)
        self.ready: dict[int, tuple[int, int | None]] = {}
        self.store: dict[str, float] = {}
        self.qmap: dict[str, int] = {}
        self.done = 0
        self.start: int | None = None
        self.end: int | None = None
        self.block_end: dict[int, int] = {}
        self.inbox: dict[str, deque] = {}
        self.last_touch: dict[str, int] = {}
        self.in_section: int | None = None
        self.section_progress = False


class _Node:
    __slots__ = ("cfg", "name", "busy", "lock", "insts", "free", "timing", "noise")

    def __init__(self, cfg: NodeConfig):
        self.cfg = cfg
        self.name = cfg.node
        self.busy: dict[str, object] = {CPS: None, QPS: None}
        self.lock: _Inst | None = None
        self.insts: list[_Inst] = []
        self.free = list(range(cfg.num_qubits))
        self.timing = cfg.timing
        self.noise = cfg.noise


class _Session:
    __slots__ = ("inst", "idx", "arm", "peer", "partner", "alive", "pairs_left")

    def __init__(self, inst: _Inst, idx: int, arm: int, peer: str, pairs: int):
        self.inst = inst
        self.idx = idx
        self.arm = arm
        self.peer = peer
        self.partner: _Session | None = None
        self.alive = True
        self.pairs_left = pairs


# Event kinds, ordered so that completions are handled before wake-ups at equal times.
_END, _MSG, _QC_END, _ARRIVE, _LONE, _WAKE = range(6)
_LIVE = frozenset({_END, _MSG, _QC_END, _ARRIVE})


class Simulator:
    """Single-use engine; see :func:`run_simulation`."""

    def __init__(
        self,
        nodes: Sequence[NodeConfig],
        instances: Sequence[ProgramInstance],
        schedule: NetworkSchedule,
        link: LinkParams | Mapping[frozenset, LinkParams],
        seed: int | np.random.SeedSequence | Sequence[int] = 0,
        latency_ns: int | Mapping[frozenset, int] | None = None,
        quantum: bool = True,
        record_events: bool = True,
        release_section_on_suspend: bool = False,
    ):
        self.release_on_suspend = release_section_on_suspend
        self.nodes = {cfg.node: _Node(cfg) for cfg in nodes}
        if len(self.nodes) != len(nodes):
            raise ParameterError("duplicate node ids")
        self.schedule = schedule
        self._link = link
        self._latency = latency_ns
        self._link_cache: dict[frozenset, tuple[float, int]] = {}
        self._lat_cache: dict[frozenset, int] = {}
        if not isinstance(seed, np.random.SeedSequence):
            seed = np.random.SeedSequence(seed)
        link_ss, meas_ss = seed.spawn(2)
        self.rng_link = np.random.default_rng(link_ss)
        self.rng_meas = np.random.default_rng(meas_ss)
        self.quantum = quantum
        self.record = record_events
        self.reg = QubitRegister() if quantum else None
        self.events: list[SimEvent] = []
        self.heap: list = []
        self.seq = 0
        self.live_pending = 0
        self.last_progress = 0
        self.wakes: set[int] = set()
        self.waiting_sessions: dict[tuple[str, str, str], _Session] = {}
        self.insts: list[_Inst] = []
        self.by_app_node: dict[tuple[str, str], _Inst] = {}
        ids = set()
        for spec in instances:
            if spec.iid in ids:
                raise ParameterError(f"duplicate instance id {spec.iid}")
            ids.add(spec.iid)
            node = self.nodes.get(spec.program.node)
            if node is None:
                raise ParameterError(f"instance {spec.iid} runs on unknown node {spec.program.node!r}")
            inst = _Inst(spec, node, _info(spec.program, node.timing))
            key = (spec.app, node.name)
            if key in self.by_app_node:
                raise ParameterError(f"application {spec.app!r} has two instances on {node.name!r}")
            self.by_app_node[key] = inst
            node.insts.append(inst)
            self.insts.append(inst)
        for inst in self.insts:
            self._push(inst.spec.arrival, _ARRIVE, inst)

    # helpers ---------------------------------------------------------------

    def _push(self, t: int, kind: int, payload) -> None:
        self.seq += 1
        heapq.heappush(self.heap, (t, kind, self.seq, payload))
        if kind in _LIVE:
            self.live_pending += 1

    def _emit(self, t, node, proc, iid, block, kind, info=()):
        if self.record:
            self.events.append(SimEvent(t, node, proc, iid, block, kind, info))

    def _pair_link(self, a: str, b: str) -> tuple[float, int]:
        key = frozenset((a, b))
        hit = self._link_cache.get(key)
        if hit is None:
            link = self._link if isinstance(self._link, LinkParams) else self._link[key]
            hit = (p_succ(link), t_cycle(link))
            self._link_cache[key] = hit
        return hit

    def _lat(self, a: str, b: str) -> int:
        key = frozenset((a, b))
        hit = self._lat_cache.get(key)
        if hit is None:
            if self._latency is None:
                link = self._link if isinstance(self._link, LinkParams) else self._link[key]
                hit = classical_latency(link.distance_km, link.hops)
            elif isinstance(self._latency, int):
                hit = self._latency
            else:
                hit = self._latency[key]
            self._lat_cache[key] = hit
        return hit

    def _peer_inst(self, inst: _Inst, peer: str) -> _Inst:
        other = self.by_app_node.get((inst.app, peer))
        if other is None:
            raise ParameterError(
                f"instance {inst.iid} ({inst.app}) talks to {peer!r} where the application has no instance"
            )
        return other

    # main loop -------------------------------------------------------------

    def run(self) -> Trace:
        heap = self.heap
        now = 0
        while heap:
            now = heap[0][0]
            while heap and heap[0][0] == now:
                _, kind, _, payload = heapq.heappop(heap)
                if kind in _LIVE:
                    self.live_pending -= 1
                    self.last_progress = now
                self._handle(now, kind, payload)
            for node in self.nodes.values():
                self._dispatch(node, now)
            if self.live_pending == 0 and heap:
                self._check_livelock(now)
        unfinished = [i for i in self.insts if i.end is None]
        if unfinished:
            self._deadlock(now, unfinished)
        return self._trace(now)

    def _check_livelock(self, now: int) -> None:
        # Only bin wake-ups and lone sessions remain: if nobody paired for
        # two full schedule cycles, nothing will ever change.
        if now - self.last_progress > 2 * self.schedule.cycle_length + self.schedule.bin_length:
            self._deadlock(now, [i for i in self.insts if i.end is None])

    def _deadlock(self, now: int, unfinished: list[_Inst]) -> None:
        blocked = [
            (i.iid, i.app, sorted(i.info.ids[k] for k in i.ready)) for i in unfinished
        ]
        lines = ", ".join(f"instance {iid} ({app}) ready blocks {b}" for iid, app, b in blocked)
        raise DeadlockError(f"deadlock at t={now}: {lines}", blocked)

    def _handle(self, now: int, kind: int, payload) -> None:
        if kind == _END:
            inst, idx = payload
            self._finish_block(inst, idx, now)
        elif kind == _MSG:
            dst, src, value = payload
            dst.inbox.setdefault(src, deque()).append((now, value))
        elif kind == _QC_END:
            self._qc_end(payload, now)
        elif kind == _ARRIVE:
            inst = payload
            for k, n in enumerate(inst.waiting):
                if n == 0:
                    inst.ready[k] = (now, self._abs_deadline(inst, k, now))
        elif kind == _LONE:
            sess = payload
            if sess.alive and sess.partner is None:
                key = (sess.inst.app, sess.inst.node.name, sess.peer)
                if self.waiting_sessions.get(key) is sess:
                    del self.waiting_sessions[key]
                self._suspend(sess, now)
        elif kind == _WAKE:
            self.wakes.discard(now)

    def _abs_deadline(self, inst: _Inst, k: int, t: int) -> int | None:
        d = inst.info.deadline[k]
        return None if d is None else t + d

    # dispatch --------------------------------------------------------------

    def _dispatch(self, node: _Node, now: int) -> None:
        sched = self.schedule
        while True:
            if node.busy[CPS] is not None and node.busy[QPS] is not None:
                return
            best = None
            best_key = None
            lock = node.lock
            for inst in node.insts:
                if not inst.ready or (lock is not None and lock is not inst):
                    continue
                info = inst.info
                for k, (rt, dl) in inst.ready.items():
                    proc = info.proc[k]
                    if node.busy[proc] is not None:
                        continue
                    btype = info.btype[k]
                    eff = rt
                    if btype is BlockType.CC and info.recv_need[k]:
                        ok = True
                        for peer, cnt in info.recv_need[k]:
                            box = inst.inbox.get(peer)
                            if box is None or len(box) < cnt:
                                ok = False
                                break
                            eff = max(eff, box[cnt - 1][0])
                        if not ok:
                            continue
                    elif btype is BlockType.QC:
                        arm = now + node.timing.sched_msg_ns
                        _, cyc = self._pair_link(node.name, info.epr[k].peer)
                        if sched.owner(arm) != inst.app or sched.bin_end(arm) - arm < cyc:
                            self._wake_at(sched.bin_end(now))
                            continue
                    key = (1, 0, eff, inst.iid, k) if dl is None else (0, dl, eff, inst.iid, k)
                    if best_key is None or key < best_key:
                        best_key = key
                        best = (inst, k)
            if best is None:
                return
            self._start(node, best[0], best[1], now)

    def _wake_at(self, t: int) -> None:
        if t not in self.wakes:
            self.wakes.add(t)
            self._push(t, _WAKE, None)

    def _start(self, node: _Node, inst: _Inst, k: int, now: int) -> None:
        info = inst.info
        del inst.ready[k]
        proc = info.proc[k]
        bid = info.ids[k]
        if inst.start is None:
            inst.start = now
        sec = info.section_of[k]
        if sec is not None and inst.in_section != sec:
            inst.in_section = sec
            inst.section_progress = False
            node.lock = inst
        elif sec is not None:
            node.lock = inst
        self._emit(now, node.name, proc, inst.iid, bid, "start")
        sched_ns = node.timing.sched_msg_ns
        if info.btype[k] is BlockType.QC:
            node.busy[proc] = (inst, k)
            self._arm(inst, k, now + sched_ns)
            return
        node.busy[proc] = (inst, k)
        end = now + sched_ns + info.dur[k]
        self._execute(inst, k, now, end)
        self._push(end, _END, (inst, k))

    def _execute(self, inst: _Inst, k: int, t0: int, t1: int) -> None:
        """Apply the block's effects; quantum state is advanced to ``t0``."""
        node = inst.node
        noise = node.noise
        reg = self.reg
        store = inst.store
        if reg is not None:
            for q in inst.info.qubits[k]:
                phys = inst.qmap.get(q)
                if phys is not None:
                    key = (node.name, phys)
                    reg.dephase(key, t0 - inst.last_touch[q], noise)
                    inst.last_touch[q] = t1
        for ins in inst.info.instrs[k]:
            if isinstance(ins, QGate):
                if reg is not None:
                    angle = ins.angle.evaluate(store) if ins.angle is not None else 0.0
                    keys = [(node.name, inst.qmap[q]) for q in ins.qubits]
                    reg.gate(ins.gate, keys, noise, angle)
            elif isinstance(ins, RecvMsg):
                _, value = inst.inbox[ins.peer].popleft()
                store[ins.dest] = value
                self._emit(t0, node.name, CPS, inst.iid, inst.info.ids[k], "msg_recv", (("peer", ins.peer),))
            elif isinstance(ins, SendMsg):
                value = ins.payload.evaluate(store)
                dst = self._peer_inst(inst, ins.peer)
                arrive = t1 + self._lat(node.name, ins.peer)
                self._push(arrive, _MSG, (dst, node.name, value))
            elif isinstance(ins, QAlloc):
                phys = self._alloc_phys(node, inst)
                inst.qmap[ins.qubit] = phys
                inst.last_touch[ins.qubit] = t1
                if reg is not None:
                    reg.alloc((node.name, phys), ins.initial)
            elif isinstance(ins, QMeasure):
                phys = inst.qmap.pop(ins.qubit)
                inst.last_touch.pop(ins.qubit, None)
                if reg is not None:
                    store[ins.dest] = reg.measure((node.name, phys), ins.basis, self.rng_meas)
                else:
                    store[ins.dest] = 0
                node.free.append(phys)
            elif isinstance(ins, QFree):
                phys = inst.qmap.pop(ins.qubit)
                inst.last_touch.pop(ins.qubit, None)
                if reg is not None:
                    reg.free((node.name, phys))
                node.free.append(phys)
            elif isinstance(ins, ClassicalCompute):
                for name, expr in ins.assign:
                    store[name] = expr.evaluate(store)
            elif isinstance(ins, QLoad):
                pass

    def _alloc_phys(self, node: _Node, inst: _Inst) -> int:
        if not node.free:
            raise AdmissionError(f"node {node.name!r} has no free qubit for instance {inst.iid}")
        phys = min(node.free)
        node.free.remove(phys)
        return phys

    def _finish_block(self, inst: _Inst, k: int, now: int) -> None:
        node = inst.node
        info = inst.info
        proc = info.proc[k]
        node.busy[proc] = None
        bid = info.ids[k]
        self._emit(now, node.name, proc, inst.iid, bid, "end")
        if self.record:
            for ins in info.instrs[k]:
                if isinstance(ins, SendMsg):
                    self._emit(now, node.name, CPS, inst.iid, bid, "msg_send", (("peer", ins.peer),))
        inst.block_end[bid] = now
        inst.done += 1
        if info.section_of[k] is not None:
            inst.section_progress = True
            if k in info.section_end:
                inst.in_section = None
                if node.lock is inst:
                    node.lock = None
        for s in info.succs[k]:
            inst.waiting[s] -= 1
            if inst.waiting[s] == 0:
                inst.ready[s] = (now, self._abs_deadline(inst, s, now))
        if inst.done == len(info.ids):
            inst.end = now

    # entanglement ------------------------------------------------------------

    def _arm(self, inst: _Inst, k: int, t: int) -> None:
        req = inst.info.epr[k]
        me = inst.node.name
        sess = _Session(inst, k, t, req.peer, req.count)
        other = self.waiting_sessions.pop((inst.app, req.peer, me), None)
        if other is not None:
            sess.partner = other
            other.partner = sess
            self._attempt(sess, other, t)
            return
        self.waiting_sessions[(inst.app, me, req.peer)] = sess
        _, cyc = self._pair_link(me, req.peer)
        self._push(self.schedule.bin_end(t) - cyc + 1, _LONE, sess)

    def _attempt(self, a: _Session, b: _Session, t: int) -> None:
        p, cyc = self._pair_link(a.inst.node.name, b.inst.node.name)
        remaining = self.schedule.bin_end(t) - t
        s = sample_epr_raw(p, cyc, remaining, self.rng_link)
        until = t + s.elapsed_ns
        info = (("attempts", s.attempts), ("success", s.success), ("until", until))
        for sess in (a, b):
            i = sess.inst
            self._emit(t, i.node.name, QPS, i.iid, i.info.ids[sess.idx], "epr_attempt", info)
        self._push(until, _QC_END, (a, b, s.success))

    def _qc_end(self, payload, now: int) -> None:
        a, b, success = payload
        if not success:
            self._suspend(a, now)
            self._suspend(b, now)
            return
        self._deliver(a, b, now)
        a.pairs_left -= 1
        b.pairs_left -= 1
        if a.pairs_left > 0:
            self._attempt(a, b, now)
            return
        for sess in (a, b):
            sess.alive = False
            self._finish_block(sess.inst, sess.idx, now)

    def _deliver(self, a: _Session, b: _Session, now: int) -> None:
        ra = a.inst.info.epr[a.idx]
        rb = b.inst.info.epr[b.idx]
        j = ra.count - a.pairs_left
        keys = []
        for sess, req in ((a, ra), (b, rb)):
            inst = sess.inst
            phys = self._alloc_phys(inst.node, inst)
            q = req.dest_qubits[j]
            inst.qmap[q] = phys
            inst.last_touch[q] = now
            keys.append((inst.node.name, phys))
        if self.reg is not None:
            # Pair fidelity is a property of the link; take the lower of the two nodes.
            f = min(a.inst.node.noise.pair_fidelity, b.inst.node.noise.pair_fidelity)
            self.reg.add_state(keys, werner(f))

    def _suspend(self, sess: _Session, now: int) -> None:
        sess.alive = False
        inst = sess.inst
        node = inst.node
        k = sess.idx
        node.busy[QPS] = None
        self._emit(now, node.name, QPS, inst.iid, inst.info.ids[k], "end", (("suspended", True),))
        # Keep the original ready time so FIFO order is stable across bins.
        rt = self._ready_time(inst, k)
        inst.ready[k] = (rt, self._abs_deadline(inst, k, rt))
        if (
            self.release_on_suspend
            and inst.info.section_of[k] is not None
            and not inst.section_progress
            and node.lock is inst
        ):
            node.lock = None
            inst.in_section = None

    def _ready_time(self, inst: _Inst, k: int) -> int:
        preds = inst.info.preds[k]
        if not preds:
            return inst.spec.arrival
        return max(inst.block_end[inst.info.ids[p]] for p in preds)

    # result ------------------------------------------------------------------

    def _trace(self, now: int) -> Trace:
        results = {}
        for inst in self.insts:
            success = None
            expect = inst.spec.program.expect
            if self.quantum and expect and inst.end is not None:
                success = all(int(inst.store.get(v, -1)) == bit for v, bit in expect)
            results[inst.iid] = InstanceResult(
                iid=inst.iid,
                app=inst.app,
                node=inst.node.name,
                program=inst.spec.program.name,
                start=inst.start,
                end=inst.end,
                store=dict(inst.store),
                block_end=dict(inst.block_end),
                success=success,
            )
        return Trace(
            events=self.events,
            instances=results,
            end_time=now,
            schedule=self.schedule,
            apps={i.iid: i.app for i in self.insts},
        )


def run_simulation(
    nodes: Sequence[NodeConfig],
    instances: Sequence[ProgramInstance],
    schedule: NetworkSchedule,
    link: LinkParams | Mapping[frozenset, LinkParams],
    seed: int | np.random.SeedSequence | Sequence[int] = 0,
    *,
    latency_ns: int | Mapping[frozenset, int] | None = None,
    quantum: bool = True,
    record_events: bool = True,
    release_section_on_suspend: bool = False,
) -> Trace:
    """Run all instances to completion and return the trace.

    ``latency_ns`` overrides the one-way classical latency (default: from the
    link's distance and hop count). ``quantum=False`` skips the density-matrix
    backend; timing is unaffected because link, measurement and schedule
    draws use separate random streams. ``release_section_on_suspend`` lets a
    critical section whose opening QC block ran out of bin time give up the
    node until it is re-dispatched; by default the lock is held throughout.
    """
    sim = Simulator(
        nodes, instances, schedule, link, seed, latency_ns, quantum, record_events, release_section_on_suspend
    )
    return sim.run()
