from __future__ import annotations

import itertools
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _progs import program_pairs
from qnetcomp.apps import build_bqc_app, build_rotation_app, build_scenario1_local, build_scenario2_local
from qnetcomp.compiler import (
    DeadlinePolicy,
    PassConfig,
    Strategy,
    add_critical_section,
    assign_deadlines,
    block_cooperative,
    block_selfish,
    blocks_conflict,
    compile_program,
    hybrid_optimize,
    merge_rotations,
    reorder_blocks,
)
from qnetcomp.errors import NotApplicableError, ParameterError
from qnetcomp.ir import (
    AngleExpr,
    Block,
    BlockType,
    ClassicalCompute,
    Program,
    QAlloc,
    QGate,
    QLoad,
    QMeasure,
    RecvMsg,
    SendMsg,
    TimingParams,
    gate,
    rx,
    rz,
    validate,
)

T = TimingParams()


def types(p: Program) -> list[str]:
    return [b.btype.value for b in p.blocks]


def gates(p: Program) -> Counter:
    return Counter((i.gate, i.qubits) for b in p.blocks for i in b.instrs if isinstance(i, QGate))


def non_gate_instrs(p: Program) -> list:
    return [i for b in p.blocks for i in b.instrs if not isinstance(i, (QGate, QLoad))]


def test_rotation_server_structure():
    _, unopt = build_rotation_app(2, False, rng=1)
    assert types(unopt) == ["QL", "CC", "QL", "CC", "QL"]
    _, opt = build_rotation_app(2, True, rng=1)
    assert types(opt) == ["CC", "CC", "QL"]
    rots = [i for i in opt.blocks[2].instrs if isinstance(i, QGate)]
    assert len(rots) == 1 and rots[0].gate == "RX"
    assert rots[0].angle.variables() == {"theta0", "theta1"}


@pytest.mark.parametrize("n", [1, 3, 5, 10])
def test_rotation_optimized_has_one_rotation(n):
    _, opt = build_rotation_app(n, True)
    assert sum(gates(opt).values()) == 1
    assert types(opt) == ["CC"] * n + ["QL"]


def test_bqc_server_rotation_counts():
    _, unopt = build_bqc_app(3, False)
    _, opt = build_bqc_app(3, True)
    rz_count = lambda p: sum(c for (g, _), c in gates(p).items() if g == "RZ")  # noqa: E731
    assert rz_count(unopt) == 6
    assert rz_count(opt) == 3
    cz = lambda p: sum(c for (g, _), c in gates(p).items() if g == "CZ")  # noqa: E731
    assert cz(unopt) == cz(opt) == 2
    _, one = build_bqc_app(1, True)
    assert cz(one) == 0


def _ql(*instrs):
    return (BlockType.QL, instrs)


def _prog(*blocks, **kw):
    return Program("p", "n", [Block(i, t, ins) for i, (t, ins) in enumerate(blocks)], **kw)


def test_selfish_merges_adjacent_quantum_blocks():
    p = _prog(
        _ql(QAlloc("q")),
        _ql(gate("H", "q")),
        (BlockType.CC, (RecvMsg("c", "t"),)),
        _ql(rx("q", "t"), QMeasure("q", "Z", "m")),
    )
    out = block_selfish(p)
    assert types(out) == ["QL", "CC", "QL"]
    assert [b.id for b in out.blocks] == [0, 1, 2]
    assert validate(out).ok


def _min_blocks_oracle(btypes: list[str]) -> int:
    """Fewest blocks over all ways to fuse contiguous QL runs (exhaustive)."""
    best = len(btypes)
    gaps = [k for k in range(1, len(btypes)) if btypes[k] == btypes[k - 1] == "QL"]
    for mask in itertools.product((0, 1), repeat=len(gaps)):
        best = min(best, len(btypes) - sum(mask))
    return best


@given(st.lists(st.sampled_from(["QL", "CL"]), min_size=1, max_size=10))
@settings(max_examples=150, deadline=None)
def test_selfish_block_count_matches_exhaustive_oracle(seq):
    blocks = []
    for t in seq:
        if t == "QL":
            blocks.append(_ql(QAlloc("q"), QMeasure("q", "Z", "m")))
        else:
            blocks.append((BlockType.CL, (ClassicalCompute(),)))
    out = block_selfish(_prog(*blocks))
    assert len(out.blocks) == _min_blocks_oracle(seq)
    assert all(not (a.btype is b.btype is BlockType.QL) for a, b in zip(out.blocks, out.blocks[1:]))


def test_scenario1_local_selfish_and_cooperative():
    selfish = build_scenario1_local(True)
    assert len(selfish.blocks) == 1
    assert selfish.blocks[0].gate_count() == 1600
    coop = build_scenario1_local(False, n_coop=8)
    assert len(coop.blocks) == 200
    assert sum(b.gate_count() for b in coop.blocks) == 1600
    assert all(b.gate_count() == 8 for b in coop.blocks)
    # Each piece starts a fresh qubit, so nothing live crosses a cut.
    assert not any(isinstance(i, QLoad) for b in coop.blocks for i in b.instrs)


def test_scenario2_local_cooperative_carries_live_qubit():
    coop = build_scenario2_local(False, n_coop=8, iterations=10)
    assert len(coop.blocks) == 10
    assert all(b.gate_count() <= 8 for b in coop.blocks)
    for b in coop.blocks[1:]:
        assert isinstance(b.instrs[0], QLoad)
    assert validate(coop).ok


def test_cooperative_cut_prefers_fewest_live_qubits():
    p = _prog(_ql(
        QAlloc("a"), gate("H", "a"), gate("H", "a"), QMeasure("a", "Z", "x"),
        QAlloc("b"), gate("H", "b"), gate("H", "b"), QMeasure("b", "Z", "y"),
    ))
    out = block_cooperative(p, 2)
    assert len(out.blocks) == 2
    assert out.blocks[0].instrs[-1] == QMeasure("a", "Z", "x")
    assert not any(isinstance(i, QLoad) for b in out.blocks for i in b.instrs)


def test_cooperative_rejects_bad_cap():
    with pytest.raises(ParameterError):
        block_cooperative(build_scenario2_local(), 0)
    with pytest.raises(ParameterError):
        PassConfig(Strategy.BLOCK_COOPERATIVE)


def test_deadlines():
    _, s = build_bqc_app(3, True)
    coop = assign_deadlines(s, DeadlinePolicy.COOPERATIVE, T, 100)
    assert coop.blocks[0].deadline is None
    ql = [b for b in coop.blocks if b.btype is BlockType.QL]
    assert {b.deadline for b in ql} == {15_700_000}
    cc = [b for b in coop.blocks[1:] if b.btype is BlockType.CC]
    assert {b.deadline for b in cc} == {100 * T.classical_instr_ns}
    selfish = assign_deadlines(s, "selfish", T)
    assert {b.deadline for b in selfish.blocks[1:] if b.btype is BlockType.QL} == {T.quantum_instr_ns}
    free = assign_deadlines(coop, "free", T)
    assert all(b.deadline is None for b in free.blocks)
    with pytest.raises(ParameterError):
        assign_deadlines(s, "cooperative", T, 0)


def test_critical_section_placement():
    c, s = build_bqc_app(3, True)
    cs = add_critical_section(s)
    (a, b), = cs.critical_sections
    assert cs.blocks[a].btype is BlockType.QC
    assert a == max(k for k, blk in enumerate(cs.blocks) if blk.btype is BlockType.QC)
    assert any(isinstance(i, QMeasure) for i in cs.blocks[b].instrs)
    assert b == max(k for k, blk in enumerate(cs.blocks) if any(isinstance(i, QMeasure) for i in blk.instrs))
    assert validate(cs).ok
    assert add_critical_section(cs) is cs
    cc = add_critical_section(c)
    assert cc.critical_sections == ((3 * 2, 3 * 2 + 1),)


def test_critical_section_not_applicable():
    with pytest.raises(NotApplicableError):
        add_critical_section(build_rotation_app(2, False)[1])
    with pytest.raises(NotApplicableError):
        add_critical_section(build_scenario1_local())


def test_reorder_respects_dependencies():
    p = _prog(
        _ql(QAlloc("q", "+X")),
        (BlockType.CC, (RecvMsg("c", "a"),)),
        _ql(rx("q", "a")),
        (BlockType.CC, (RecvMsg("c", "b"),)),
        _ql(rx("q", "b"), QMeasure("q", "X", "m")),
    )
    out = reorder_blocks(p)
    assert types(out) == ["CC", "CC", "QL", "QL", "QL"]
    assert validate(out).ok
    assert blocks_conflict(p.blocks[1], p.blocks[2])
    assert not blocks_conflict(p.blocks[0], p.blocks[1])


def test_merge_rotations_same_axis_only():
    p = _prog(_ql(QAlloc("q"), rx("q", 0.1), rx("q", 0.2), rz("q", 0.3), rz("q", 0.4), rx("q", 0.5),
                  QMeasure("q", "Z", "m")))
    out = merge_rotations(p)
    g = [i for i in out.blocks[0].instrs if isinstance(i, QGate)]
    assert [x.gate for x in g] == ["RX", "RZ", "RX"]
    assert g[0].angle == AngleExpr(0.1 + 0.2)
    assert merge_rotations(out) is out


def test_hybrid_is_fixpoint():
    _, s = build_bqc_app(4, True)
    assert hybrid_optimize(s) == s


def test_compile_program_dispatch():
    _, s = build_bqc_app(2, False)
    assert compile_program(s, PassConfig(Strategy.NONE)) is s
    assert compile_program(s, PassConfig("hybrid")) == hybrid_optimize(s)
    with pytest.raises(ValueError):
        PassConfig("teleport")


def test_passes_preserve_explicit_precedence_and_sections():
    p = _prog(
        _ql(QAlloc("q")),
        _ql(gate("H", "q"), gate("H", "q"), gate("H", "q")),
        (BlockType.CC, (SendMsg("c", AngleExpr(1.0)),)),
        _ql(QMeasure("q", "Z", "m")),
        precedence={(0, 1), (1, 2), (1, 3)},
        critical_sections=((1, 3),),
    )
    for out in (block_selfish(p), block_cooperative(p, 1), hybrid_optimize(p)):
        assert validate(out).ok, validate(out).rules()


PIPELINES = [
    "hybrid",
    "block-selfish",
    "block-cooperative:1",
    "block-cooperative:2",
    "hybrid+block-cooperative:1",
    "deadline-selfish",
    "deadline-cooperative:7",
]


def _apply(p: Program, pipe: str) -> Program:
    for part in pipe.split("+"):
        name, _, arg = part.partition(":")
        cfg = PassConfig(name, n=int(arg) if "coop" in name and "block" in name else None,
                         m=int(arg) if name == "deadline-cooperative" else None)
        p = compile_program(p, cfg)
    return p


@given(program_pairs(max_live=3, max_events=12), st.sampled_from(PIPELINES))
@settings(max_examples=300, deadline=None)
def test_every_strategy_outputs_valid_programs(pair, pipe):
    for p in pair:
        out = _apply(p, pipe)
        assert validate(out).ok, (pipe, validate(out).rules())


@given(program_pairs(max_live=3, max_events=12), st.sampled_from([p for p in PIPELINES if "hybrid" not in p]))
@settings(max_examples=300, deadline=None)
def test_non_merging_strategies_preserve_gate_multiset_and_order(pair, pipe):
    for p in pair:
        out = _apply(p, pipe)
        assert gates(out) == gates(p)
        assert non_gate_instrs(out) == non_gate_instrs(p)


@given(program_pairs(max_live=3, max_events=12), st.integers(1, 4))
@settings(max_examples=200, deadline=None)
def test_cooperative_cap_holds(pair, n):
    for p in pair:
        out = block_cooperative(p, n)
        assert all(b.gate_count() <= n for b in out.blocks if b.btype is BlockType.QL)
