"""Hybrid quantum-classical program representation.

A :class:`Program` is an ordered list of :class:`Block` values. Each block has
one :class:`BlockType` and a non-empty list of instructions. Precedence
defaults to the linear chain in block order. Classical values live in named
variables; rotation angles and message payloads are :class:`AngleExpr`
values, i.e. a constant plus a linear combination of variables.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Mapping, Union

from .errors import ParameterError, PreconditionError, StochasticBlockError

_NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


class BlockType(str, Enum):
    CL = "CL"
    CC = "CC"
    QL = "QL"
    QC = "QC"


# Angle expressions ----------------------------------------------------------


@dataclass(frozen=True)
class AngleExpr:
    """``const + sum(coef * var)``; terms are sorted by variable name."""

    const: float = 0.0
    terms: tuple[tuple[str, float], ...] = ()

    def __post_init__(self):
        merged: dict[str, float] = {}
        for name, coef in self.terms:
            merged[name] = merged.get(name, 0.0) + float(coef)
        terms = tuple(sorted((k, v) for k, v in merged.items() if v != 0.0))
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "const", float(self.const))

    @classmethod
    def var(cls, name: str, coef: float = 1.0) -> "AngleExpr":
        return cls(0.0, ((name, coef),))

    @classmethod
    def coerce(cls, value: "AngleLike") -> "AngleExpr":
        if isinstance(value, AngleExpr):
            return value
        if isinstance(value, str):
            return cls.var(value)
        return cls(float(value))

    def __add__(self, other: "AngleLike") -> "AngleExpr":
        other = AngleExpr.coerce(other)
        return AngleExpr(self.const + other.const, self.terms + other.terms)

    __radd__ = __add__

    def __neg__(self) -> "AngleExpr":
        return self.scaled(-1.0)

    def __sub__(self, other: "AngleLike") -> "AngleExpr":
        return self + (-AngleExpr.coerce(other))

    def scaled(self, k: float) -> "AngleExpr":
        return AngleExpr(self.const * k, tuple((n, c * k) for n, c in self.terms))

    @property
    def is_constant(self) -> bool:
        return not self.terms

    def variables(self) -> frozenset[str]:
        return frozenset(n for n, _ in self.terms)

    def evaluate(self, store: Mapping[str, float]) -> float:
        total = self.const
        for name, coef in self.terms:
            total += coef * store[name]
        return total

    def to_text(self) -> str:
        parts = [repr(self.const)] + [f"{c!r}*{n}" for n, c in self.terms]
        return ";".join(parts)

    @classmethod
    def from_text(cls, text: str) -> "AngleExpr":
        const = 0.0
        terms = []
        for part in text.split(";"):
            if "*" in part:
                coef, name = part.split("*", 1)
                terms.append((name, float(coef)))
            else:
                const += float(part)
        return cls(const, tuple(terms))


AngleLike = Union[AngleExpr, float, int, str]


# Instructions ---------------------------------------------------------------

GATE_ARITY = {"X": 1, "Z": 1, "H": 1, "RX": 1, "RY": 1, "RZ": 1, "CZ": 2}
PARAMETRIC_GATES = frozenset({"RX", "RY", "RZ"})
INITIAL_STATES = ("+Z", "-Z", "+X", "-X", "+Y", "-Y")
BASES = ("X", "Y", "Z")


@dataclass(frozen=True)
class ClassicalCompute:
    """Abstract classical work; ``assign`` optionally defines variables."""

    op_count: int = 1
    assign: tuple[tuple[str, AngleExpr], ...] = ()


@dataclass(frozen=True)
class SendMsg:
    peer: str
    payload: AngleExpr


@dataclass(frozen=True)
class RecvMsg:
    peer: str
    dest: str


@dataclass(frozen=True)
class QAlloc:
    qubit: str
    initial: str = "+Z"


@dataclass(frozen=True)
class QGate:
    gate: str
    qubits: tuple[str, ...]
    angle: AngleExpr | None = None


@dataclass(frozen=True)
class QMeasure:
    qubit: str
    basis: str
    dest: str


@dataclass(frozen=True)
class QFree:
    qubit: str


@dataclass(frozen=True)
class QLoad:
    """Bring an already-live qubit into a block; costs one instruction time."""

    qubit: str


@dataclass(frozen=True)
class EprRequest:
    peer: str
    count: int
    dest_qubits: tuple[str, ...]


Instruction = Union[
    ClassicalCompute, SendMsg, RecvMsg, QAlloc, QGate, QMeasure, QFree, QLoad, EprRequest
]

_CL_OK = (ClassicalCompute,)
_CC_OK = (SendMsg, RecvMsg, ClassicalCompute)
_QL_OK = (QAlloc, QGate, QMeasure, QFree, QLoad)
_QC_OK = (EprRequest,)
ALLOWED = {BlockType.CL: _CL_OK, BlockType.CC: _CC_OK, BlockType.QL: _QL_OK, BlockType.QC: _QC_OK}


def rx(q: str, angle: AngleLike) -> QGate:
    return QGate("RX", (q,), AngleExpr.coerce(angle))


def ry(q: str, angle: AngleLike) -> QGate:
    return QGate("RY", (q,), AngleExpr.coerce(angle))


def rz(q: str, angle: AngleLike) -> QGate:
    return QGate("RZ", (q,), AngleExpr.coerce(angle))


def gate(name: str, *qubits: str) -> QGate:
    return QGate(name, tuple(qubits))


def instr_reads(ins: Instruction) -> frozenset[str]:
    if isinstance(ins, QGate):
        return ins.angle.variables() if ins.angle is not None else frozenset()
    if isinstance(ins, SendMsg):
        return ins.payload.variables()
    if isinstance(ins, ClassicalCompute):
        out: set[str] = set()
        for _, expr in ins.assign:
            out |= expr.variables()
        return frozenset(out)
    return frozenset()


def instr_writes(ins: Instruction) -> frozenset[str]:
    if isinstance(ins, (RecvMsg, QMeasure)):
        return frozenset((ins.dest,))
    if isinstance(ins, ClassicalCompute):
        return frozenset(n for n, _ in ins.assign)
    return frozenset()


def instr_qubits(ins: Instruction) -> tuple[str, ...]:
    if isinstance(ins, QGate):
        return ins.qubits
    if isinstance(ins, (QAlloc, QMeasure, QFree, QLoad)):
        return (ins.qubit,)
    if isinstance(ins, EprRequest):
        return ins.dest_qubits
    return ()


# Blocks and programs --------------------------------------------------------


@dataclass(frozen=True)
class Block:
    id: int
    btype: BlockType
    instrs: tuple[Instruction, ...]
    deadline: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "btype", BlockType(self.btype))
        object.__setattr__(self, "instrs", tuple(self.instrs))

    def gate_count(self) -> int:
        return sum(1 for i in self.instrs if isinstance(i, QGate))


@dataclass(frozen=True)
class Program:
    """A program for one node.

    ``precedence`` is ``None`` for the linear chain, otherwise a set of
    ``(before, after)`` block-id edges. ``critical_sections`` holds inclusive
    ``(first_id, last_id)`` ranges in block order. ``expect`` maps result
    variables to the bit value a successful run produces.
    """

    name: str
    node: str
    blocks: tuple[Block, ...]
    precedence: frozenset[tuple[int, int]] | None = None
    critical_sections: tuple[tuple[int, int], ...] = ()
    variables: frozenset[str] | None = None
    expect: tuple[tuple[str, int], ...] = ()
    _cache: dict = field(default_factory=dict, compare=False, hash=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(self.blocks))
        if self.precedence is not None:
            object.__setattr__(self, "precedence", frozenset(tuple(e) for e in self.precedence))
        object.__setattr__(
            self, "critical_sections", tuple(tuple(cs) for cs in self.critical_sections)
        )
        if self.variables is None:
            written: set[str] = set()
            for b in self.blocks:
                for ins in b.instrs:
                    written |= instr_writes(ins)
            object.__setattr__(self, "variables", frozenset(written))
        else:
            object.__setattr__(self, "variables", frozenset(self.variables))
        object.__setattr__(self, "expect", tuple((k, int(v)) for k, v in self.expect))

    def edges(self) -> frozenset[tuple[int, int]]:
        if self.precedence is not None:
            return self.precedence
        ids = [b.id for b in self.blocks]
        return frozenset(zip(ids, ids[1:]))

    def predecessors(self) -> dict[int, frozenset[int]]:
        cached = self._cache.get("preds")
        if cached is None:
            preds: dict[int, set[int]] = {b.id: set() for b in self.blocks}
            for a, b in self.edges():
                if b in preds:
                    preds[b].add(a)
            cached = {k: frozenset(v) for k, v in preds.items()}
            self._cache["preds"] = cached
        return cached

    def block(self, bid: int) -> Block:
        for b in self.blocks:
            if b.id == bid:
                return b
        raise KeyError(bid)

    def with_blocks(self, blocks: Iterable[Block], **changes) -> "Program":
        return replace(self, blocks=tuple(blocks), _cache={}, **changes)

    def count(self, kind: type, name: str | None = None) -> int:
        n = 0
        for b in self.blocks:
            for ins in b.instrs:
                if isinstance(ins, kind) and (name is None or getattr(ins, "gate", None) == name):
                    n += 1
        return n


def renumber(program: Program, start: int = 0) -> Program:
    """Give blocks consecutive ids in order, remapping edges and sections."""
    mapping = {b.id: start + i for i, b in enumerate(program.blocks)}
    blocks = [replace(b, id=mapping[b.id]) for b in program.blocks]
    prec = None
    if program.precedence is not None:
        prec = frozenset((mapping[a], mapping[b]) for a, b in program.precedence)
    cs = tuple((mapping[a], mapping[b]) for a, b in program.critical_sections)
    return program.with_blocks(blocks, precedence=prec, critical_sections=cs)


# Timing ---------------------------------------------------------------------


@dataclass(frozen=True)
class TimingParams:
    """Processor timing constants, integer nanoseconds."""

    classical_instr_ns: int = 15
    quantum_instr_ns: int = 50_000
    gate_1q_ns: int = 26_600
    gate_2q_ns: int = 107_000
    sched_msg_ns: int = 60
    recv_proc_ns: int = 150

    def __post_init__(self):
        for name in self.__dataclass_fields__:
            v = getattr(self, name)
            if not isinstance(v, int) or v <= 0:
                raise ParameterError(f"{name} must be a positive integer, got {v!r}")

    @property
    def max_gate_ns(self) -> int:
        return max(self.gate_1q_ns, self.gate_2q_ns)


def instruction_duration(ins: Instruction, timing: TimingParams) -> int:
    if isinstance(ins, ClassicalCompute):
        return ins.op_count * timing.classical_instr_ns
    if isinstance(ins, SendMsg):
        return timing.classical_instr_ns
    if isinstance(ins, RecvMsg):
        return timing.classical_instr_ns + timing.recv_proc_ns
    if isinstance(ins, QGate):
        g = timing.gate_2q_ns if len(ins.qubits) == 2 else timing.gate_1q_ns
        return timing.quantum_instr_ns + g
    if isinstance(ins, (QAlloc, QMeasure, QFree, QLoad)):
        return timing.quantum_instr_ns
    if isinstance(ins, EprRequest):
        return 0
    raise TypeError(f"unknown instruction {ins!r}")


def estimate_block_duration(
    block: Block, timing: TimingParams, expect_deterministic: bool = False
) -> int:
    """Deterministic duration of ``block`` in ns (0 for QC blocks)."""
    if block.btype is BlockType.QC:
        if expect_deterministic:
            raise StochasticBlockError(f"block {block.id}: stochastic block")
        return 0
    return sum(instruction_duration(i, timing) for i in block.instrs)


# Validation -----------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    block_id: int | None
    rule: str
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations

    def rules(self) -> set[str]:
        return {v.rule for v in self.violations}

    def __bool__(self) -> bool:
        return self.ok


def _ancestors(ids: list[int], preds: Mapping[int, frozenset[int]]) -> dict[int, set[int]]:
    out: dict[int, set[int]] = {}
    for bid in ids:  # ids in a topological order
        acc: set[int] = set()
        for p in preds.get(bid, ()):
            acc.add(p)
            acc |= out.get(p, set())
        out[bid] = acc
    return out


def _check_instruction(b: Block, ins: Instruction, out: list[Violation]) -> None:
    if not isinstance(ins, ALLOWED[b.btype]):
        out.append(Violation(b.id, "instruction type", f"{type(ins).__name__} in {b.btype.value}"))
    for name in instr_reads(ins) | instr_writes(ins):
        if not _NAME_RE.match(name):
            out.append(Violation(b.id, "bad variable name", name))
    if isinstance(ins, QGate):
        if ins.gate not in GATE_ARITY:
            out.append(Violation(b.id, "unsupported gate", ins.gate))
            return
        if len(ins.qubits) != GATE_ARITY[ins.gate] or len(set(ins.qubits)) != len(ins.qubits):
            out.append(Violation(b.id, "gate arity", f"{ins.gate} on {ins.qubits}"))
        if (ins.angle is not None) != (ins.gate in PARAMETRIC_GATES):
            out.append(Violation(b.id, "gate angle", ins.gate))
        elif ins.angle is not None and not math.isfinite(ins.angle.const):
            out.append(Violation(b.id, "gate angle", "non-finite constant"))
    elif isinstance(ins, ClassicalCompute):
        if not isinstance(ins.op_count, int) or ins.op_count < 1:
            out.append(Violation(b.id, "bad op count", repr(ins.op_count)))
    elif isinstance(ins, QMeasure):
        if ins.basis not in BASES:
            out.append(Violation(b.id, "bad basis", ins.basis))
    elif isinstance(ins, QAlloc):
        if ins.initial not in INITIAL_STATES:
            out.append(Violation(b.id, "bad initial state", ins.initial))
    elif isinstance(ins, EprRequest):
        if ins.count < 1 or len(ins.dest_qubits) != ins.count:
            out.append(Violation(b.id, "bad epr request", f"count={ins.count}"))


def validate(program: Program) -> ValidationReport:
    """Check all structural invariants; violations are returned, never raised."""
    out: list[Violation] = []
    ids = [b.id for b in program.blocks]
    index = {}
    for i, bid in enumerate(ids):
        if bid in index:
            out.append(Violation(bid, "duplicate block id"))
        index.setdefault(bid, i)

    for b in program.blocks:
        if not b.instrs:
            out.append(Violation(b.id, "empty block"))
        if b.deadline is not None and not (
            isinstance(b.deadline, int) and 0 < b.deadline < float("inf")
        ):
            out.append(Violation(b.id, "bad deadline", repr(b.deadline)))
        for ins in b.instrs:
            _check_instruction(b, ins, out)

    edges = program.edges()
    edge_ok = True
    known = []
    for a, c in edges:
        if a not in index or c not in index:
            out.append(Violation(c if c in index else a, "unknown block", f"edge {a}->{c}"))
            edge_ok = False
            continue
        known.append((a, c))
        if index[a] >= index[c]:
            out.append(Violation(c, "precedence order", f"edge {a}->{c} against block order"))
            edge_ok = False
    if len(index) == len(ids) and _has_cycle(ids, known):
        out.append(Violation(None, "precedence cycle"))
        edge_ok = False

    spans = []
    for first, last in program.critical_sections:
        if first not in index or last not in index or index[first] > index[last]:
            out.append(Violation(first if first in index else None, "critical section",
                                 f"bad range {first}..{last}"))
            continue
        spans.append((index[first], index[last]))
    spans.sort()
    for (a0, a1), (b0, _b1) in zip(spans, spans[1:]):
        if b0 <= a1:
            out.append(Violation(ids[b0], "critical section", "overlapping sections"))

    if not edge_ok:
        return ValidationReport(tuple(out))

    preds = program.predecessors()
    anc = _ancestors(ids, preds)
    declared = program.variables or frozenset()
    writers: dict[str, set[int]] = {}
    for b in program.blocks:
        for ins in b.instrs:
            for v in instr_writes(ins):
                writers.setdefault(v, set()).add(b.id)
    for b in program.blocks:
        local: set[str] = set()
        for ins in b.instrs:
            for v in instr_reads(ins):
                if v not in declared:
                    out.append(Violation(b.id, "undeclared variable", v))
                elif v not in local and not (writers.get(v, set()) & anc[b.id]):
                    out.append(Violation(b.id, "use before definition", v))
            for v in instr_writes(ins):
                if v not in declared:
                    out.append(Violation(b.id, "undeclared variable", v))
                local.add(v)
    for v, _bit in program.expect:
        if v not in declared:
            out.append(Violation(None, "undeclared variable", f"expect {v}"))

    _check_qubits(program, anc, out)
    return ValidationReport(tuple(out))


def _has_cycle(ids: list[int], edges: Iterable[tuple[int, int]]) -> bool:
    succ: dict[int, list[int]] = {i: [] for i in ids}
    indeg = {i: 0 for i in ids}
    for a, b in edges:
        succ[a].append(b)
        indeg[b] += 1
    stack = [i for i in ids if indeg[i] == 0]
    seen = 0
    while stack:
        i = stack.pop()
        seen += 1
        for j in succ[i]:
            indeg[j] -= 1
            if indeg[j] == 0:
                stack.append(j)
    return seen != len(ids)


def _check_qubits(program: Program, anc: Mapping[int, set[int]], out: list[Violation]) -> None:
    live: dict[str, int] = {}  # qubit -> block that created it
    dead: set[str] = set()
    for b in program.blocks:
        for ins in b.instrs:
            if isinstance(ins, (QAlloc, EprRequest)):
                targets = (ins.qubit,) if isinstance(ins, QAlloc) else ins.dest_qubits
                for q in targets:
                    if q in live:
                        out.append(Violation(b.id, "double allocation", q))
                    live[q] = b.id
                    dead.discard(q)
                continue
            for q in instr_qubits(ins):
                if q not in live:
                    rule = "use after free" if q in dead else "use before allocation"
                    out.append(Violation(b.id, rule, q))
                elif live[q] != b.id and live[q] not in anc[b.id]:
                    out.append(Violation(b.id, "use before allocation", f"{q} not ordered after allocation"))
            if isinstance(ins, (QMeasure, QFree)):
                if ins.qubit in live:
                    del live[ins.qubit]
                    dead.add(ins.qubit)


# Scheduling helpers ---------------------------------------------------------


def available_blocks(program: Program, completed: Iterable[int]) -> set[int]:
    """Blocks not yet completed whose predecessors have all completed."""
    done = set(completed)
    preds = program.predecessors()
    unknown = done - preds.keys()
    if unknown:
        raise PreconditionError(f"unknown block ids in completed set: {sorted(unknown)}")
    for bid in done:
        if not preds[bid] <= done:
            raise PreconditionError(f"completed set is not downward-closed at block {bid}")
    return {bid for bid, ps in preds.items() if bid not in done and ps <= done}
