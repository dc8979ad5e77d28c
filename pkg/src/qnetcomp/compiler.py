"""Program-to-program compilation passes.

Passes are pure functions. Structural passes (reordering, merging and
splitting of blocks) renumber block ids consecutively from 0 and remap
explicit precedence edges and critical sections.

Legality of moving a block past another is decided per instruction pair:
variable def-use (RAW, WAR, WAW), qubit conflicts (gates that do not commute,
or any allocation, load or measurement), and the per-peer order of classical
and entanglement requests.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import Sequence

from .errors import NotApplicableError, ParameterError
from .ir import (
    Block,
    BlockType,
    EprRequest,
    Instruction,
    Program,
    QAlloc,
    QFree,
    QGate,
    QLoad,
    QMeasure,
    RecvMsg,
    SendMsg,
    TimingParams,
    instr_qubits,
    instr_reads,
    instr_writes,
    renumber,
)

_DIAGONAL = frozenset({"Z", "RZ", "CZ"})
_AXIS = {"X": "X", "RX": "X", "RY": "Y", "Z": "Z", "RZ": "Z", "H": "H"}
_ROTATIONS = frozenset({"RX", "RY", "RZ"})


# Dependency relation --------------------------------------------------------


def _gates_commute(a: QGate, b: QGate) -> bool:
    if a.gate in _DIAGONAL and b.gate in _DIAGONAL:
        return True
    if len(a.qubits) == 1 and len(b.qubits) == 1:
        return _AXIS[a.gate] == _AXIS[b.gate]
    return False


def _instr_conflict(a: Instruction, b: Instruction) -> bool:
    wa, wb = instr_writes(a), instr_writes(b)
    if wa & instr_reads(b) or instr_reads(a) & wb or wa & wb:
        return True
    shared = set(instr_qubits(a)) & set(instr_qubits(b))
    if not shared:
        return False
    if isinstance(a, QGate) and isinstance(b, QGate):
        return not _gates_commute(a, b)
    if isinstance(a, QLoad) and isinstance(b, (QGate, QLoad)):
        return False
    if isinstance(b, QLoad) and isinstance(a, QGate):
        return False
    return True


def _peers(block: Block) -> frozenset[str]:
    out = set()
    for ins in block.instrs:
        if isinstance(ins, (SendMsg, RecvMsg, EprRequest)):
            out.add(ins.peer)
    return frozenset(out)


def blocks_conflict(a: Block, b: Block) -> bool:
    """True if ``a`` and ``b`` may not be swapped."""
    if _peers(a) & _peers(b):
        return True
    return any(_instr_conflict(x, y) for x in a.instrs for y in b.instrs)


def _single_qubit_ql(block: Block) -> bool:
    if block.btype is not BlockType.QL:
        return False
    return all(len(instr_qubits(i)) == 1 for i in block.instrs)


# Passes ---------------------------------------------------------------------


def reorder_blocks(program: Program) -> Program:
    """Sink single-qubit QL blocks as late as their dependencies allow.

    Blocks are visited from last to first; each movable block is placed
    directly before the first later block it conflicts with. Programs with
    explicit precedence or critical sections are returned unchanged.
    """
    if program.precedence is not None or program.critical_sections:
        return program
    order = list(program.blocks)
    moved = False
    for blk in reversed(program.blocks):
        if not _single_qubit_ql(blk):
            continue
        i = next(k for k, b in enumerate(order) if b is blk)
        j = i + 1
        while j < len(order) and not blocks_conflict(blk, order[j]):
            j += 1
        if j - 1 > i:
            order.insert(j - 1, order.pop(i))
            moved = True
    if not moved:
        return program
    return renumber(program.with_blocks(order))


def _merge_in_block(instrs: Sequence[Instruction]) -> tuple[list[Instruction], bool]:
    out: list[Instruction | None] = list(instrs)
    last_on: dict[str, int] = {}
    changed = False
    for k, ins in enumerate(instrs):
        qs = instr_qubits(ins)
        if isinstance(ins, QGate) and ins.gate in _ROTATIONS:
            q = qs[0]
            prev = last_on.get(q)
            if prev is not None:
                p = out[prev]
                if isinstance(p, QGate) and p.gate == ins.gate:
                    out[k] = QGate(ins.gate, ins.qubits, p.angle + ins.angle)
                    out[prev] = None
                    changed = True
        for q in qs:
            last_on[q] = k
    return [i for i in out if i is not None], changed


def merge_rotations(program: Program) -> Program:
    """Fuse same-axis rotations that are adjacent on their qubit within a block."""
    blocks = []
    changed = False
    for b in program.blocks:
        if b.btype is BlockType.QL:
            instrs, c = _merge_in_block(b.instrs)
            if c:
                changed = True
                while c:
                    instrs, c = _merge_in_block(instrs)
                b = replace(b, instrs=tuple(instrs))
        blocks.append(b)
    return program.with_blocks(blocks) if changed else program


def _remap_groups(program: Program, groups: list[list[int]], new_blocks: list[Block]) -> Program:
    """Rebuild ``program`` where ``groups[k]`` lists old indices fused into new block k."""
    old_ids = [b.id for b in program.blocks]
    new_of: dict[int, int] = {}
    for k, g in enumerate(groups):
        for i in g:
            new_of[old_ids[i]] = new_blocks[k].id
    prec = None
    if program.precedence is not None:
        prec = frozenset(
            (new_of[a], new_of[b]) for a, b in program.precedence if new_of[a] != new_of[b]
        )
    cs = tuple((new_of[a], new_of[b]) for a, b in program.critical_sections)
    return renumber(program.with_blocks(new_blocks, precedence=prec, critical_sections=cs))


def block_selfish(program: Program) -> Program:
    """Merge every run of adjacent QL blocks into one block."""
    groups: list[list[int]] = []
    for i, b in enumerate(program.blocks):
        if groups and b.btype is BlockType.QL and program.blocks[groups[-1][-1]].btype is BlockType.QL:
            groups[-1].append(i)
        else:
            groups.append([i])
    if all(len(g) == 1 for g in groups):
        return program
    next_id = max(b.id for b in program.blocks) + 1
    new_blocks = []
    for g in groups:
        if len(g) == 1:
            new_blocks.append(program.blocks[g[0]])
            continue
        first = program.blocks[g[0]]
        instrs = list(first.instrs)
        for i in g[1:]:
            instrs.extend(x for x in program.blocks[i].instrs if not isinstance(x, QLoad))
        new_blocks.append(Block(next_id, BlockType.QL, tuple(instrs), first.deadline))
        next_id += 1
    return _remap_groups(program, groups, new_blocks)


def _live_before(program: Program) -> list[set[str]]:
    """Qubits live on entry to each block, following block order."""
    live: set[str] = set()
    out = []
    for b in program.blocks:
        out.append(set(live))
        for ins in b.instrs:
            if isinstance(ins, QAlloc):
                live.add(ins.qubit)
            elif isinstance(ins, EprRequest):
                live.update(ins.dest_qubits)
            elif isinstance(ins, (QMeasure, QFree)):
                live.discard(ins.qubit)
    return out


def _split_block(block: Block, n: int, live_in: set[str]) -> list[list[Instruction]]:
    instrs = list(block.instrs)
    gate_pos = [k for k, ins in enumerate(instrs) if isinstance(ins, QGate)]
    if len(gate_pos) <= n:
        return [instrs]

    # live[c]: qubits live before instruction c; last[q]: last index touching q.
    live_at = []
    live = set(live_in)
    last: dict[str, int] = {}
    for k, ins in enumerate(instrs):
        live_at.append(frozenset(live))
        for q in instr_qubits(ins):
            last[q] = k
        if isinstance(ins, QAlloc):
            live.add(ins.qubit)
        elif isinstance(ins, (QMeasure, QFree)):
            live.discard(ins.qubit)
    live_at.append(frozenset(live))

    def live_used_at(c: int) -> set[str]:
        return {q for q in live_at[c] if last.get(q, -1) >= c}

    cuts = []
    for g in range(n, len(gate_pos), n):
        lo, hi = gate_pos[g - 1] + 1, gate_pos[g]
        best = min(range(lo, hi + 1), key=lambda c: (len(live_used_at(c)), c))
        cuts.append(best)
    pieces = []
    bounds = [0, *cuts, len(instrs)]
    for k in range(len(bounds) - 1):
        body = instrs[bounds[k]:bounds[k + 1]]
        if k > 0:
            carried = live_used_at(bounds[k])
            used_here = {q for ins in body for q in instr_qubits(ins)}
            loads = [QLoad(q) for q in sorted(carried & used_here)]
            body = loads + body
        pieces.append(body)
    return pieces


def block_cooperative(program: Program, n: int) -> Program:
    """Split QL blocks so none holds more than ``n`` gates.

    Cuts are placed where the fewest live qubits cross; each later piece
    starts with a :class:`QLoad` per live qubit it uses.
    """
    if not isinstance(n, int) or n < 1:
        raise ParameterError(f"cooperative gate cap must be >= 1, got {n!r}")
    live = _live_before(program)
    next_id = max(b.id for b in program.blocks) + 1
    groups: list[list[int]] = []
    new_blocks: list[Block] = []
    changed = False
    flat_index: list[int] = []
    for i, b in enumerate(program.blocks):
        if b.btype is BlockType.QL and b.gate_count() > n:
            pieces = _split_block(b, n, live[i])
            changed = True
            for k, body in enumerate(pieces):
                new_blocks.append(Block(next_id, BlockType.QL, tuple(body), b.deadline if k == 0 else None))
                next_id += 1
                flat_index.append(i)
        else:
            new_blocks.append(b)
            flat_index.append(i)
    if not changed:
        return program
    return _rebuild_split(program, new_blocks, flat_index)


def _rebuild_split(program: Program, new_blocks: list[Block], owner: list[int]) -> Program:
    old_ids = [b.id for b in program.blocks]
    first: dict[int, int] = {}
    last: dict[int, int] = {}
    for nb, i in zip(new_blocks, owner):
        first.setdefault(old_ids[i], nb.id)
        last[old_ids[i]] = nb.id
    prec = None
    if program.precedence is not None:
        edges = {(last[a], first[b]) for a, b in program.precedence}
        for k in range(len(new_blocks) - 1):
            if owner[k] == owner[k + 1]:
                edges.add((new_blocks[k].id, new_blocks[k + 1].id))
        prec = frozenset(edges)
    cs = tuple((first[a], last[b]) for a, b in program.critical_sections)
    return renumber(program.with_blocks(new_blocks, precedence=prec, critical_sections=cs))


def hybrid_optimize(program: Program) -> Program:
    """Reorder, fuse adjacent QL blocks and merge rotations until nothing changes."""
    cur = program
    while True:
        nxt = merge_rotations(block_selfish(merge_rotations(reorder_blocks(cur))))
        if nxt == cur:
            return cur
        cur = nxt


class DeadlinePolicy(str, Enum):
    FREE = "free"
    SELFISH = "selfish"
    COOPERATIVE = "cooperative"


def assign_deadlines(
    program: Program,
    policy: DeadlinePolicy | str,
    timing: TimingParams,
    m: int | None = None,
) -> Program:
    """Attach relative deadlines to every block except the first."""
    policy = DeadlinePolicy(policy)
    if policy is DeadlinePolicy.COOPERATIVE and (not isinstance(m, int) or m < 1):
        raise ParameterError(f"cooperative deadline multiplier must be >= 1, got {m!r}")
    blocks = []
    for k, b in enumerate(program.blocks):
        quantum = b.btype in (BlockType.QL, BlockType.QC)
        if policy is DeadlinePolicy.FREE or k == 0:
            d = None
        elif policy is DeadlinePolicy.SELFISH:
            d = timing.quantum_instr_ns if quantum else timing.classical_instr_ns
        elif quantum:
            d = m * (timing.quantum_instr_ns + timing.max_gate_ns)
        else:
            d = m * timing.classical_instr_ns
        blocks.append(b if b.deadline == d else replace(b, deadline=d))
    return program.with_blocks(blocks)


def add_critical_section(program: Program) -> Program:
    """One section from the last QC block through the block of the last measurement."""
    last_qc = last_meas = None
    for k, b in enumerate(program.blocks):
        if b.btype is BlockType.QC:
            last_qc = k
        if any(isinstance(i, QMeasure) for i in b.instrs):
            last_meas = k
    if last_qc is None or last_meas is None:
        raise NotApplicableError("critical section needs a QC block and a measurement")
    if last_meas < last_qc:
        raise NotApplicableError("no measurement follows the last QC block")
    section = (program.blocks[last_qc].id, program.blocks[last_meas].id)
    if program.critical_sections == (section,):
        return program
    return replace(program, critical_sections=(section,), _cache={})


# Strategy front end ---------------------------------------------------------


class Strategy(str, Enum):
    HYBRID = "hybrid"
    BLOCK_SELFISH = "block-selfish"
    BLOCK_COOPERATIVE = "block-cooperative"
    DEADLINE_FREE = "deadline-free"
    DEADLINE_SELFISH = "deadline-selfish"
    DEADLINE_COOPERATIVE = "deadline-cooperative"
    CRITICAL_SECTION = "critical-section"
    NONE = "none"


@dataclass(frozen=True)
class PassConfig:
    strategy: Strategy
    n: int | None = None
    m: int | None = None
    timing: TimingParams = TimingParams()

    def __post_init__(self):
        object.__setattr__(self, "strategy", Strategy(self.strategy))
        if self.strategy is Strategy.BLOCK_COOPERATIVE and (self.n is None or self.n < 1):
            raise ParameterError("block-cooperative needs n >= 1")
        if self.strategy is Strategy.DEADLINE_COOPERATIVE and (self.m is None or self.m < 1):
            raise ParameterError("deadline-cooperative needs m >= 1")


def compile_program(program: Program, config: PassConfig) -> Program:
    s = config.strategy
    if s is Strategy.NONE:
        return program
    if s is Strategy.HYBRID:
        return hybrid_optimize(program)
    if s is Strategy.BLOCK_SELFISH:
        return block_selfish(program)
    if s is Strategy.BLOCK_COOPERATIVE:
        return block_cooperative(program, config.n)
    if s is Strategy.DEADLINE_FREE:
        return assign_deadlines(program, DeadlinePolicy.FREE, config.timing)
    if s is Strategy.DEADLINE_SELFISH:
        return assign_deadlines(program, DeadlinePolicy.SELFISH, config.timing)
    if s is Strategy.DEADLINE_COOPERATIVE:
        return assign_deadlines(program, DeadlinePolicy.COOPERATIVE, config.timing, config.m)
    if s is Strategy.CRITICAL_SECTION:
        return add_critical_section(program)
    raise ParameterError(f"unknown strategy {s}")
