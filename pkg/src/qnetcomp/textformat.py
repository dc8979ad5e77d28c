"""Line-oriented text format for programs.

Example::

    PROGRAM rotation_server NODE server
    VARS theta0 theta1 m
    PRECEDENCE chain
    EXPECT m 0
    BLOCK 0 CC
      recv client theta0
      recv client theta1
    BLOCK 1 QL deadline=50000
      alloc q0 +Z
      gate RX q0 angle=0.0;1.0*theta0;1.0*theta1
      measure q0 Z m

Rules: one header or instruction per line, ``#`` starts a comment, tokens
are whitespace separated. ``PRECEDENCE explicit`` is followed by
``EDGE <a> <b>`` lines; ``SECTION <first> <last>`` declares a critical
section. Angle expressions are ``const;coef*var;...`` with floats written
by ``repr`` so a dump/parse cycle is lossless.
"""

from __future__ import annotations

from pathlib import Path

from .ir import (
    AngleExpr,
    Block,
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
)


class FormatError(ValueError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


def _instr_line(ins) -> str:
    if isinstance(ins, ClassicalCompute):
        extra = "".join(f" {n}={e.to_text()}" for n, e in ins.assign)
        return f"compute {ins.op_count}{extra}"
    if isinstance(ins, SendMsg):
        return f"send {ins.peer} {ins.payload.to_text()}"
    if isinstance(ins, RecvMsg):
        return f"recv {ins.peer} {ins.dest}"
    if isinstance(ins, QAlloc):
        return f"alloc {ins.qubit} {ins.initial}"
    if isinstance(ins, QGate):
        s = f"gate {ins.gate} {' '.join(ins.qubits)}"
        if ins.angle is not None:
            s += f" angle={ins.angle.to_text()}"
        return s
    if isinstance(ins, QMeasure):
        return f"measure {ins.qubit} {ins.basis} {ins.dest}"
    if isinstance(ins, QFree):
        return f"free {ins.qubit}"
    if isinstance(ins, QLoad):
        return f"load {ins.qubit}"
    if isinstance(ins, EprRequest):
        return f"epr {ins.peer} {ins.count} {' '.join(ins.dest_qubits)}"
    raise TypeError(f"cannot serialize {ins!r}")


def dumps(program: Program) -> str:
    lines = [f"PROGRAM {program.name} NODE {program.node}"]
    lines.append(" ".join(["VARS", *sorted(program.variables or ())]))
    if program.precedence is None:
        lines.append("PRECEDENCE chain")
    else:
        lines.append("PRECEDENCE explicit")
        lines.extend(f"EDGE {a} {b}" for a, b in sorted(program.precedence))
    lines.extend(f"SECTION {a} {b}" for a, b in program.critical_sections)
    lines.extend(f"EXPECT {v} {bit}" for v, bit in program.expect)
    for b in program.blocks:
        head = f"BLOCK {b.id} {b.btype.value}"
        if b.deadline is not None:
            head += f" deadline={b.deadline}"
        lines.append(head)
        lines.extend("  " + _instr_line(i) for i in b.instrs)
    return "\n".join(lines) + "\n"


def _parse_instr(tok: list[str], lineno: int):
    op, args = tok[0], tok[1:]
    try:
        if op == "compute":
            assigns = []
            for a in args[1:]:
                name, expr = a.split("=", 1)
                assigns.append((name, AngleExpr.from_text(expr)))
            return ClassicalCompute(int(args[0]), tuple(assigns))
        if op == "send":
            return SendMsg(args[0], AngleExpr.from_text(args[1]))
        if op == "recv":
            return RecvMsg(args[0], args[1])
        if op == "alloc":
            return QAlloc(args[0], args[1] if len(args) > 1 else "+Z")
        if op == "gate":
            angle = None
            qubits = []
            for a in args[1:]:
                if a.startswith("angle="):
                    angle = AngleExpr.from_text(a[len("angle="):])
                else:
                    qubits.append(a)
            return QGate(args[0], tuple(qubits), angle)
        if op == "measure":
            return QMeasure(args[0], args[1], args[2])
        if op == "free":
            return QFree(args[0])
        if op == "load":
            return QLoad(args[0])
        if op == "epr":
            return EprRequest(args[0], int(args[1]), tuple(args[2:]))
    except (IndexError, ValueError) as exc:
        raise FormatError(lineno, f"malformed '{op}' instruction: {exc}") from None
    raise FormatError(lineno, f"unknown instruction '{op}'")


def loads(text: str) -> Program:
    name = node = None
    variables = None
    explicit = False
    edges: list[tuple[int, int]] = []
    sections: list[tuple[int, int]] = []
    expect: list[tuple[str, int]] = []
    blocks: list[Block] = []
    cur: tuple[int, BlockType, int | None] | None = None
    instrs: list = []

    def flush():
        if cur is not None:
            blocks.append(Block(cur[0], cur[1], tuple(instrs), cur[2]))

    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        head = tok[0]
        try:
            if head == "PROGRAM":
                if len(tok) != 4 or tok[2] != "NODE":
                    raise FormatError(lineno, "expected 'PROGRAM <name> NODE <node>'")
                name, node = tok[1], tok[3]
            elif head == "VARS":
                variables = frozenset(tok[1:])
            elif head == "PRECEDENCE":
                explicit = tok[1] == "explicit"
            elif head == "EDGE":
                edges.append((int(tok[1]), int(tok[2])))
            elif head == "SECTION":
                sections.append((int(tok[1]), int(tok[2])))
            elif head == "EXPECT":
                expect.append((tok[1], int(tok[2])))
            elif head == "BLOCK":
                flush()
                deadline = None
                for extra in tok[3:]:
                    if extra.startswith("deadline="):
                        deadline = int(extra[len("deadline="):])
                    else:
                        raise FormatError(lineno, f"unknown block attribute '{extra}'")
                cur = (int(tok[1]), BlockType(tok[2]), deadline)
                instrs = []
            else:
                if cur is None:
                    raise FormatError(lineno, "instruction outside a block")
                instrs.append(_parse_instr(tok, lineno))
        except FormatError:
            raise
        except (IndexError, ValueError) as exc:
            raise FormatError(lineno, str(exc)) from None
    flush()
    if name is None:
        raise FormatError(0, "missing PROGRAM header")
    return Program(
        name=name,
        node=node,
        blocks=tuple(blocks),
        precedence=frozenset(edges) if explicit else None,
        critical_sections=tuple(sections),
        variables=variables,
        expect=tuple(expect),
    )


def load(path: str | Path) -> Program:
    return loads(Path(path).read_text())


def dump(program: Program, path: str | Path) -> None:
    Path(path).write_text(dumps(program))
