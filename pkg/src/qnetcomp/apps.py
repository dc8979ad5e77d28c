"""Program builders for the rotation, BQC and local benchmark applications."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .compiler import block_cooperative, block_selfish, hybrid_optimize
from .errors import ParameterError
from .ir import (
    AngleExpr,
    Block,
    BlockType,
    ClassicalCompute,
    EprRequest,
    Program,
    QAlloc,
    QGate,
    QMeasure,
    RecvMsg,
    SendMsg,
    estimate_block_duration,
    gate,
    instr_qubits,
    rx,
    rz,
)
from .quantum import eigenstate_outcome, gate_matrix

TWO_PI = 2.0 * math.pi


class _Builder:
    """Appends blocks with consecutive ids."""

    def __init__(self):
        self.blocks: list[Block] = []

    def add(self, btype: BlockType, *instrs, deadline=None) -> None:
        self.blocks.append(Block(len(self.blocks), btype, tuple(instrs), deadline))


# Rotation application -------------------------------------------------------


def rotation_angles(n: int, rng: np.random.Generator) -> list[float]:
    """``n`` random positive angles summing to 2*pi."""
    u = rng.random(n) + 1e-3
    angles = list(u / u.sum() * TWO_PI)
    angles[-1] = TWO_PI - math.fsum(angles[:-1])
    return angles


def build_rotation_app(
    n: int,
    optimized: bool,
    initial: str = "+X",
    angles: list[float] | None = None,
    rng: np.random.Generator | int | None = 0,
    server: str = "server",
    client: str = "client",
) -> tuple[Program, Program]:
    """Client sends ``n`` angles summing to 2*pi; the server rotates and measures.

    The unoptimized server initializes first and interleaves receives with
    single rotations; the optimized server is its hybrid optimization.
    """
    if n < 1:
        raise ParameterError("n must be >= 1")
    if angles is None:
        angles = rotation_angles(n, np.random.default_rng(rng))
    if len(angles) != n:
        raise ParameterError("need exactly n angles")
    c = _Builder()
    for i, a in enumerate(angles):
        c.add(BlockType.CC, SendMsg(server, AngleExpr(a)))
    client_prog = Program(f"rotation_client_n{n}", client, c.blocks)

    basis, bit = eigenstate_outcome(initial)
    s = _Builder()
    s.add(BlockType.QL, QAlloc("q", initial))
    for i in range(n):
        s.add(BlockType.CC, RecvMsg(client, f"theta{i}"))
        if i < n - 1:
            s.add(BlockType.QL, rx("q", f"theta{i}"))
        else:
            s.add(BlockType.QL, rx("q", f"theta{i}"), QMeasure("q", basis, "m"))
    server_prog = Program(f"rotation_server_n{n}", server, s.blocks, expect=(("m", bit),))
    if optimized:
        server_prog = hybrid_optimize(server_prog)
    return client_prog, server_prog


def rotation_success_oracle(k_gates: int, f1: float, initial: str = "+X") -> float:
    """Closed-form success of the rotation app with ``k_gates`` noisy RX gates.

    Depolarizing commutes with unitaries, so the Bloch vector shrinks by
    ``(1-p)`` per gate with ``p = 2(1-f1)``; the ideal rotations cancel.
    """
    p = 2.0 * (1.0 - f1)
    return 0.5 * (1.0 + (1.0 - p) ** k_gates)


def rotation_success_with_dephasing(k_gates: int, f1: float, idle_s: float, t2_s: float) -> float:
    """Average over the six initial states, ``idle_s`` of dephasing before the rotations.

    Z eigenstates are immune to dephasing; X and Y eigenstates lose coherence
    by ``exp(-idle/T2)`` before the rotation mixes the axes. For a total
    rotation of 2*pi the axis returns, so each state keeps its own factor.
    """
    shrink = (1.0 - 2.0 * (1.0 - f1)) ** k_gates
    deph = math.exp(-idle_s / t2_s) if math.isfinite(t2_s) else 1.0
    return (2 * 0.5 * (1 + shrink) + 4 * 0.5 * (1 + shrink * deph)) / 6.0


# BQC ------------------------------------------------------------------------

_H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)


def _phase(a: float) -> np.ndarray:
    return np.diag([1.0, np.exp(1j * a)])


def logical_outcome_probability(phis) -> float:
    """P(0) of the line-cluster computation with measurement angles ``phis``.

    Measuring qubit j of a line cluster in the basis (|0> +/- e^{i phi}|1>)
    teleports ``H diag(1, e^{-i phi})`` onto qubit j+1; the last qubit is
    measured in the same kind of basis.
    """
    psi = np.array([1, 1], dtype=complex) / math.sqrt(2)
    for phi in phis[:-1]:
        psi = _H @ (_phase(-phi) @ psi)
    plus = np.array([1, np.exp(1j * phis[-1])], dtype=complex) / math.sqrt(2)
    return float(abs(np.vdot(plus, psi)) ** 2)


@lru_cache(maxsize=None)
def deterministic_phis(n: int) -> tuple[tuple[float, ...], int]:
    """Lexicographically first angles from {0, pi/2, pi, 3pi/2} with a deterministic outcome."""
    for combo in itertools.product(range(4), repeat=n):
        phis = tuple(k * math.pi / 2 for k in combo)
        p0 = logical_outcome_probability(phis)
        if abs(p0 - 1.0) < 1e-9:
            return phis, 0
        if abs(p0) < 1e-9:
            return phis, 1
    raise RuntimeError(f"no deterministic angle set for n={n}")


@dataclass(frozen=True)
class BqcSecrets:
    """Client-side constants baked into a BQC program pair."""

    phis: tuple[float, ...]
    thetas: tuple[float, ...]
    flips: tuple[int, ...]
    expected: int


def _dependency_sets(n: int) -> list[tuple[list[int], list[int]]]:
    """Outcome indices feeding the X and Z byproducts of each qubit on a line.

    With adapted angles the Z byproduct of qubit i is absorbed by its own
    measurement, so qubit i+1 inherits X from outcome i and Z from the X
    byproduct of i, which is outcome i-1.
    """
    return [([i - 1] if i >= 1 else [], [i - 2] if i >= 2 else []) for i in range(n)]


def _delta_expr(i: int, s: BqcSecrets, deps) -> AngleExpr:
    phi = s.phis[i]
    odd = abs(math.sin(phi)) > 0.5  # odd multiple of pi/2: sign flip adds pi
    expr = AngleExpr(-phi - s.thetas[i] + s.flips[i] * math.pi)
    xs, zs = deps[i]
    terms = ([*xs] if odd else []) + [*zs]
    for j in terms:
        # s_j = m_j xor flip_j; only s_j * pi matters, and that is (m_j + flip_j) * pi mod 2pi.
        expr = expr + AngleExpr(s.flips[j] * math.pi, ((f"m{j}", math.pi),))
    return expr


def build_bqc_app(
    n: int,
    optimized: bool,
    rng: np.random.Generator | int | None = 0,
    server: str = "server",
    client: str = "client",
    app_tag: str = "",
) -> tuple[Program, Program]:
    """Client and server programs of an ``n``-qubit blind computation on a line cluster.

    The client prepares ``|+_theta>`` states remotely, then steers the server's
    measurements with blinded angles. Its final logical result lands in the
    client variable ``out`` and is deterministic for the chosen angles.
    """
    client_prog = build_bqc_client(n, rng, server, client, app_tag)
    return client_prog, build_bqc_server(n, optimized, server, client, app_tag)


def build_bqc_client(
    n: int,
    rng: np.random.Generator | int | None = 0,
    server: str = "server",
    client: str = "client",
    app_tag: str = "",
) -> Program:
    """The client half of :func:`build_bqc_app`; draws fresh secrets from ``rng``."""
    if n < 1:
        raise ParameterError("n must be >= 1")
    gen = np.random.default_rng(rng)
    phis, expected = deterministic_phis(n)
    thetas = tuple(float(k) * math.pi / 4 for k in gen.integers(0, 8, size=n))
    flips = tuple(int(b) for b in gen.integers(0, 2, size=n))
    secrets = BqcSecrets(phis, thetas, flips, expected)
    deps = _dependency_sets(n)

    c = _Builder()
    for i in range(n):
        c.add(BlockType.QC, EprRequest(server, 1, (f"c{i}",)))
        c.add(BlockType.QL, rz(f"c{i}", thetas[i]), QMeasure(f"c{i}", "X", f"r{i}"))
        c.add(BlockType.CC, SendMsg(server, AngleExpr(0.0, ((f"r{i}", math.pi),))))
    for i in range(n):
        c.add(BlockType.CC, SendMsg(server, _delta_expr(i, secrets, deps)))
        c.add(BlockType.CC, RecvMsg(server, f"m{i}"))
    last = f"m{n - 1}"
    out = AngleExpr(1.0, ((last, -1.0),)) if flips[-1] else AngleExpr.var(last)
    c.add(BlockType.CL, ClassicalCompute(1, (("out", out),)))
    client_prog = Program(f"bqc_client{app_tag}_n{n}", client, c.blocks, expect=(("out", expected),))
    object.__setattr__(client_prog, "_cache", {"secrets": secrets})
    return client_prog


def build_bqc_server(
    n: int, optimized: bool, server: str = "server", client: str = "client", app_tag: str = ""
) -> Program:
    """The server half of :func:`build_bqc_app`; it holds no client secrets."""
    if n < 1:
        raise ParameterError("n must be >= 1")
    s = _Builder()
    for i in range(n):
        s.add(BlockType.QC, EprRequest(client, 1, (f"s{i}",)))
        s.add(BlockType.CC, RecvMsg(client, f"zc{i}"))
        s.add(BlockType.QL, rz(f"s{i}", f"zc{i}"))
    for i in range(n - 1):
        s.add(BlockType.QL, gate("CZ", f"s{i}", f"s{i + 1}"))
    for i in range(n):
        s.add(BlockType.CC, RecvMsg(client, f"d{i}"))
        s.add(BlockType.QL, rz(f"s{i}", f"d{i}"), QMeasure(f"s{i}", "X", f"m{i}"))
        s.add(BlockType.CC, SendMsg(client, AngleExpr.var(f"m{i}")))
    server_prog = Program(f"bqc_server{app_tag}_n{n}", server, s.blocks)
    return hybrid_optimize(server_prog) if optimized else server_prog


def bqc_secrets(client_prog: Program) -> BqcSecrets:
    return client_prog._cache["secrets"]


def pad_quantum_blocks(program: Program, target_ns: int, timing) -> Program:
    """Insert identity ``Z Z`` pairs so each QL block lasts about ``target_ns``."""
    pair_ns = 2 * (timing.quantum_instr_ns + timing.gate_1q_ns)
    blocks = []
    for b in program.blocks:
        if b.btype is not BlockType.QL:
            blocks.append(b)
            continue
        dur = estimate_block_duration(b, timing)
        k = max(0, round((target_ns - dur) / pair_ns))
        q = next(qq for ins in b.instrs for qq in instr_qubits(ins))
        pad = [gate("Z", q) for _ in range(2 * k)]
        instrs = list(b.instrs)
        pos = next((j for j, ins in enumerate(instrs) if isinstance(ins, QMeasure)), len(instrs))
        instrs[pos:pos] = pad
        blocks.append(Block(b.id, b.btype, tuple(instrs), b.deadline))
    return program.with_blocks(blocks)


# Local benchmark programs ---------------------------------------------------


def _check_identity(gates: tuple[str, ...]) -> None:
    u = np.eye(2, dtype=complex)
    for g in gates:
        u = gate_matrix(g) @ u
    if abs(abs(np.trace(u)) - 2.0) > 1e-9:
        raise ParameterError("gate sequence must compose to the identity")


def build_scenario1_local(
    selfish: bool = True,
    n_coop: int = 8,
    iterations: int = 200,
    gates: tuple[str, ...] = ("H",) * 8,
    node: str = "server",
) -> Program:
    """``iterations`` x [init |0>, gates, measure Z]; one block (selfish) or ``n_coop``-gate blocks."""
    _check_identity(gates)
    b = _Builder()
    for k in range(iterations):
        b.add(
            BlockType.QL,
            QAlloc("q", "+Z"),
            *(QGate(g, ("q",)) for g in gates),
            QMeasure("q", "Z", f"m{k}"),
        )
    expect = tuple((f"m{k}", 0) for k in range(iterations))
    prog = block_selfish(Program("local_s1", node, b.blocks, expect=expect))
    return prog if selfish else block_cooperative(prog, n_coop)


def build_scenario2_local(
    selfish: bool = True,
    n_coop: int = 8,
    iterations: int = 200,
    gates: tuple[str, ...] = ("H",) * 8,
    initial: str = "+X",
    node: str = "server",
) -> Program:
    """One qubit kept live through ``iterations`` x gates, measured once at the end."""
    _check_identity(gates)
    basis, bit = eigenstate_outcome(initial)
    body = [QGate(g, ("q",)) for _ in range(iterations) for g in gates]
    blk = Block(0, BlockType.QL, (QAlloc("q", initial), *body, QMeasure("q", basis, "m")))
    prog = Program("local_s2", node, (blk,), expect=(("m", bit),))
    return prog if selfish else block_cooperative(prog, n_coop)


def local_iterations_for(multiple: float, expected_epr_ns: float, timing, gates_per_iter: int = 8) -> int:
    """Iterations whose selfish duration is closest to ``multiple`` x expected EPR time."""
    per = 2 * timing.quantum_instr_ns + gates_per_iter * (timing.quantum_instr_ns + timing.gate_1q_ns)
    return max(1, round(multiple * expected_epr_ns / per))
