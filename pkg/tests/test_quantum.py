from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qnetcomp.errors import ParameterError, QubitLifetimeError
from qnetcomp.quantum import (
    DensityMatrix,
    NoiseModel,
    QubitRegister,
    apply_gate,
    apply_unitary,
    depolarize,
    depolarizing_probability,
    eigenstate_outcome,
    gate_matrix,
    idle_dephase,
    ket,
    make_epr,
    measure,
    project,
    werner,
)

LABELS = ("+Z", "-Z", "+X", "-X", "+Y", "-Y")
PHI_PLUS = np.array([1, 0, 0, 1], dtype=complex) / math.sqrt(2)


def _full_unitary(u: np.ndarray, pos: list[int], n: int) -> np.ndarray:
    """Dense embedding of ``u`` acting on ``pos`` of an n-qubit register (oracle)."""
    dim = 1 << n
    out = np.zeros((dim, dim), dtype=complex)
    k = len(pos)
    for col in range(dim):
        bits = [(col >> (n - 1 - i)) & 1 for i in range(n)]
        sub = 0
        for p in pos:
            sub = (sub << 1) | bits[p]
        for r in range(1 << k):
            amp = u[r, sub]
            if amp == 0:
                continue
            nb = list(bits)
            for i, p in enumerate(pos):
                nb[p] = (r >> (k - 1 - i)) & 1
            row = 0
            for b in nb:
                row = (row << 1) | b
            out[row, col] += amp
    return out


def _random_state(rng: np.random.Generator, n: int) -> np.ndarray:
    m = rng.normal(size=(1 << n, 1 << n)) + 1j * rng.normal(size=(1 << n, 1 << n))
    rho = m @ m.conj().T
    return rho / np.trace(rho)


def test_gate_matrices_are_unitary():
    for name, angle in [("X", 0), ("Z", 0), ("H", 0), ("CZ", 0), ("RX", 0.7), ("RY", -1.2), ("RZ", 2.9)]:
        u = gate_matrix(name, angle)
        assert np.allclose(u @ u.conj().T, np.eye(u.shape[0]))
    with pytest.raises(ParameterError):
        gate_matrix("T")


def test_rotations_by_pi_match_paulis_up_to_phase():
    for rot, pauli in [("RX", "X"), ("RZ", "Z")]:
        u = gate_matrix(rot, math.pi)
        assert np.allclose(u, -1j * gate_matrix(pauli))


def test_eigenstates_measure_deterministically():
    for label in LABELS:
        basis, bit = eigenstate_outcome(label)
        p, _ = project(DensityMatrix.from_label("q", label), "q", basis, bit)
        assert p == pytest.approx(1.0)


def test_unitary_kernel_matches_dense_oracle():
    rng = np.random.default_rng(3)
    for n in (1, 2, 3):
        rho = _random_state(rng, n)
        keys = tuple(range(n))
        for pos in ([0], [n - 1]) + (([0, n - 1], [n - 1, 0]) if n > 1 else ()):
            u = gate_matrix("CZ") if len(pos) == 2 else gate_matrix("RY", 0.4)
            if len(pos) == 2:
                u = u @ np.kron(gate_matrix("H"), gate_matrix("RX", 1.1))
            full = _full_unitary(u, pos, n)
            got = apply_unitary(DensityMatrix(rho, keys), u, pos).data
            assert np.allclose(got, full @ rho @ full.conj().T)


def test_depolarizing_probability_inverts_fidelity():
    assert depolarizing_probability(0.99, 1) == pytest.approx(0.02)
    assert depolarizing_probability(0.95, 2) == pytest.approx(4 * 0.05 / 3)
    assert depolarizing_probability(1.0, 2) == 0.0
    with pytest.raises(ParameterError):
        depolarizing_probability(0.1, 1)


@pytest.mark.parametrize("f1", [0.9, 0.95, 0.99, 0.999, 1.0])
@pytest.mark.parametrize("gate_name,angle", [("H", 0.0), ("RX", 0.8), ("RZ", -2.1), ("X", 0.0)])
def test_single_qubit_average_fidelity_matches_six_state_oracle(f1, gate_name, angle):
    noise = NoiseModel(f1=f1, f2=0.95, t2=math.inf)
    u = gate_matrix(gate_name, angle)
    fids = []
    for label in LABELS:
        out = apply_gate(DensityMatrix.from_label("q", label), gate_name, ["q"], noise, angle)
        fids.append(out.fidelity_pure(u @ ket(label)))
    # The six Pauli eigenstates form a 2-design, so their mean is the average fidelity.
    assert np.mean(fids) == pytest.approx(f1, abs=1e-9)


@pytest.mark.parametrize("f2", [0.8, 0.9, 0.95, 0.99, 1.0])
def test_two_qubit_average_fidelity_matches_choi_oracle(f2):
    noise = NoiseModel(f1=0.99, f2=f2, t2=math.inf)
    # Qubits (a, b) acted on; (ra, rb) are references. |Phi> = Phi+_{a,ra} (x) Phi+_{b,rb}.
    psi = np.kron(PHI_PLUS, PHI_PLUS)
    rho = DensityMatrix.from_ket(psi, ("a", "ra", "b", "rb"))
    out = apply_gate(rho, "CZ", ["a", "b"], noise)
    undone = apply_unitary(out, gate_matrix("CZ").conj().T, ["a", "b"])
    f_e = undone.fidelity_pure(psi)
    d = 4
    assert (d * f_e + 1) / (d + 1) == pytest.approx(f2, abs=1e-9)


def test_depolarize_full_strength_gives_maximally_mixed_marginal():
    rho = DensityMatrix.from_ket(PHI_PLUS, ("a", "b"))
    out = depolarize(rho, ["a"], 1.0)
    assert np.allclose(out.data, np.eye(4) / 4)


def test_dephasing_factor_and_composition():
    noise = NoiseModel(t2=2.0)
    assert noise.dephase_factor(0) == 1.0
    assert noise.dephase_factor(1e9) == pytest.approx(math.exp(-0.5))
    assert NoiseModel(t2=math.inf).dephase_factor(1e12) == 1.0
    with pytest.raises(ParameterError):
        noise.dephase_factor(-1)
    rho = DensityMatrix.from_label("q", "+X")
    once = idle_dephase(rho, "q", 3e8, noise)
    twice = idle_dephase(idle_dephase(rho, "q", 1e8, noise), "q", 2e8, noise)
    assert np.allclose(once.data, twice.data, atol=1e-15)
    assert once.data[0, 1].real == pytest.approx(0.5 * math.exp(-0.15))


def test_dephasing_leaves_populations_and_other_qubits():
    rng = np.random.default_rng(11)
    rho = DensityMatrix(_random_state(rng, 2), ("a", "b"))
    out = idle_dephase(rho, "a", 5e9, NoiseModel(t2=1.0))
    assert np.allclose(np.diag(out.data), np.diag(rho.data))
    assert np.allclose(out.reduced(["b"]).data, rho.reduced(["b"]).data)


@pytest.mark.parametrize("f", [0.25, 0.5, 0.8, 0.95, 1.0])
def test_werner_fidelity(f):
    w = werner(f)
    assert abs(np.real(PHI_PLUS.conj() @ w @ PHI_PLUS) - f) < 1e-12
    DensityMatrix(w, ("a", "b")).check()
    epr = make_epr(NoiseModel(pair_fidelity=f), ("x", "y"))
    assert epr.qubits == ("x", "y") and np.allclose(epr.data, w)


def test_project_born_rule_and_post_state():
    rho = DensityMatrix.from_ket(PHI_PLUS, ("a", "b"))
    p0, post0 = project(rho, "a", "Z", 0)
    assert p0 == pytest.approx(0.5)
    assert post0.qubits == ("b",)
    assert np.allclose(post0.data, np.diag([1, 0]))
    px, postx = project(rho, "a", "X", 1)
    assert px == pytest.approx(0.5)
    assert postx.fidelity_pure(ket("-X")) == pytest.approx(1.0)


def test_measure_statistics_follow_born_rule():
    rho = DensityMatrix.from_label("q", "+Z")
    rho = apply_unitary(rho, gate_matrix("RY", 2 * math.acos(math.sqrt(0.3))), ["q"])
    rng = np.random.default_rng(5)
    ones = sum(measure(rho, "q", "Z", rng)[0] for _ in range(20_000))
    # Binomial(20000, 0.7): sd ~ 65.
    assert abs(ones - 14_000) < 5 * 65


def test_reduced_respects_key_order():
    a = DensityMatrix.from_label("a", "+Z")
    b = DensityMatrix.from_label("b", "+X")
    ab = a.tensor(b)
    ba = ab.reduced(["b", "a"])
    assert np.allclose(ba.data, np.kron(b.data, a.data))


def test_density_matrix_rejects_bad_shapes_and_keys():
    with pytest.raises(ParameterError):
        DensityMatrix(np.eye(2), ("a", "b"))
    with pytest.raises(ParameterError):
        DensityMatrix(np.eye(4) / 4, ("a", "a"))
    with pytest.raises(QubitLifetimeError):
        DensityMatrix.from_label("a").pos("z")


def test_noise_model_validation():
    with pytest.raises(ParameterError):
        NoiseModel(f1=0.0)
    with pytest.raises(ParameterError):
        NoiseModel(t2=0.0)
    with pytest.raises(ParameterError):
        NoiseModel(f2=0.1)
    assert NoiseModel.ideal().gate_p(1) == 0.0


def _random_circuit(rng: np.random.Generator, noise: NoiseModel) -> DensityMatrix:
    n = int(rng.integers(1, 4))
    keys = list(range(n))
    rho = DensityMatrix.from_label(0, LABELS[rng.integers(6)])
    for k in keys[1:]:
        rho = rho.tensor(DensityMatrix.from_label(k, LABELS[rng.integers(6)]))
    for _ in range(int(rng.integers(1, 8))):
        op = rng.integers(4)
        q = int(rng.integers(n))
        if op == 0:
            name = ("X", "Z", "H", "RX", "RY", "RZ")[rng.integers(6)]
            rho = apply_gate(rho, name, [q], noise, float(rng.uniform(-7, 7)))
        elif op == 1 and n > 1:
            r = int(rng.choice([k for k in keys if k != q]))
            rho = apply_gate(rho, "CZ", [q, r], noise)
        elif op == 2:
            rho = idle_dephase(rho, q, float(rng.uniform(0, 5e9)), noise)
        else:
            rho = depolarize(rho, [q], float(rng.uniform(0, 1)))
    return rho


def test_ten_thousand_random_noisy_circuits_keep_density_matrix_invariants():
    rng = np.random.default_rng(2024)
    noise = NoiseModel(f1=0.97, f2=0.9, t2=1.0)
    for _ in range(10_000):
        rho = _random_circuit(rng, noise)
        rho.check(1e-9)
        if rho.n > 1:
            q = rho.qubits[int(rng.integers(rho.n))]
            basis = "XYZ"[rng.integers(3)]
            p0, post0 = project(rho, q, basis, 0)
            p1, post1 = project(rho, q, basis, 1)
            assert p0 + p1 == pytest.approx(1.0, abs=1e-9)
            if p0 > 1e-9:
                post0.check(1e-8)
            if p1 > 1e-9:
                post1.check(1e-8)


@given(st.floats(0.5, 1.0), st.floats(0.0, 20.0), st.sampled_from(LABELS))
@settings(max_examples=200, deadline=None)
def test_noise_never_increases_purity(f1, dt_s, label):
    noise = NoiseModel(f1=f1, t2=1.0)
    rho = apply_gate(DensityMatrix.from_label("q", label), "H", ["q"], noise)
    rho = idle_dephase(rho, "q", dt_s * 1e9, noise)
    assert np.real(np.trace(rho.data @ rho.data)) <= 1.0 + 1e-12
    rho.check()


def test_register_matches_functional_api():
    noise = NoiseModel(f1=0.98, f2=0.93, t2=1.0)
    reg = QubitRegister()
    reg.alloc("a", "+X")
    reg.alloc("b", "+Z")
    reg.gate("H", ["b"], noise)
    reg.gate("CZ", ["a", "b"], noise)
    reg.dephase("a", 2e8, noise)
    rho = DensityMatrix.from_label("a", "+X").tensor(DensityMatrix.from_label("b", "+Z"))
    rho = apply_gate(rho, "H", ["b"], noise)
    rho = apply_gate(rho, "CZ", ["a", "b"], noise)
    rho = idle_dephase(rho, "a", 2e8, noise)
    assert np.allclose(reg.state(["a", "b"]).data, rho.data)
    assert len(reg) == 2 and "a" in reg


def test_register_measure_free_and_lifetime_errors():
    reg = QubitRegister()
    reg.add_state(("a", "b"), werner(1.0))
    rng = np.random.default_rng(0)
    bit = reg.measure("a", "Z", rng)
    assert "a" not in reg
    assert reg.state(["b"]).fidelity_pure(ket("+Z" if bit == 0 else "-Z")) == pytest.approx(1.0)
    reg.free("b")
    assert len(reg) == 0
    with pytest.raises(QubitLifetimeError):
        reg.measure("b", "Z", rng)
    reg.alloc("c")
    with pytest.raises(QubitLifetimeError):
        reg.alloc("c")
    with pytest.raises(QubitLifetimeError):
        reg.add_state(("c",), np.eye(2) / 2)


def test_register_free_traces_out_entangled_partner():
    reg = QubitRegister()
    reg.add_state(("a", "b"), werner(1.0))
    reg.free("a")
    assert np.allclose(reg.state(["b"]).data, np.eye(2) / 2)
