"""Few-qubit density-matrix backend.

Gates are followed by a depolarizing channel on the acted qubits, calibrated
so the channel's average gate fidelity equals the configured value. Idle
qubits dephase with ``exp(-dt/T2)`` on their off-diagonal elements. EPR
pairs are Werner states.

Qubit ordering is big-endian: the first key in ``DensityMatrix.qubits`` is
the most significant tensor factor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Hashable, Sequence

import numpy as np

from .errors import ParameterError, QubitLifetimeError

Key = Hashable

_SQ2 = 1.0 / math.sqrt(2.0)
_I2 = np.eye(2, dtype=complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)
_H = np.array([[1, 1], [1, -1]], dtype=complex) * _SQ2
_SDG = np.array([[1, 0], [0, -1j]], dtype=complex)
_CZ = np.diag([1, 1, 1, -1]).astype(complex)

FIXED_GATES = {"X": _X, "Z": _Z, "H": _H, "CZ": _CZ}

# Rotation taking the "0" eigenstate of each basis to |0>.
_TO_Z = {"Z": _I2, "X": _H, "Y": _H @ _SDG}

_KETS = {
    "+Z": np.array([1, 0], dtype=complex),
    "-Z": np.array([0, 1], dtype=complex),
    "+X": np.array([1, 1], dtype=complex) * _SQ2,
    "-X": np.array([1, -1], dtype=complex) * _SQ2,
    "+Y": np.array([1, 1j], dtype=complex) * _SQ2,
    "-Y": np.array([1, -1j], dtype=complex) * _SQ2,
}


def ket(label: str) -> np.ndarray:
    """State vector of one of the six Pauli eigenstates (``"+Z"`` is |0>)."""
    return _KETS[label].copy()


def eigenstate_outcome(label: str) -> tuple[str, int]:
    """Measurement basis and bit that a Pauli eigenstate deterministically yields."""
    return label[1], 0 if label[0] == "+" else 1


def gate_matrix(name: str, angle: float = 0.0) -> np.ndarray:
    if name in FIXED_GATES:
        return FIXED_GATES[name]
    c, s = math.cos(angle / 2.0), math.sin(angle / 2.0)
    if name == "RX":
        return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)
    if name == "RY":
        return np.array([[c, -s], [s, c]], dtype=complex)
    if name == "RZ":
        return np.array([[c - 1j * s, 0], [0, c + 1j * s]], dtype=complex)
    raise ParameterError(f"unsupported gate {name!r}")


def depolarizing_probability(fidelity: float, n_qubits: int) -> float:
    """Depolarizing parameter whose channel has average gate fidelity ``fidelity``.

    For ``rho -> (1-p) rho + p I/d`` the average fidelity is ``1 - p(d-1)/d``.
    """
    d = 2 ** n_qubits
    p = d * (1.0 - fidelity) / (d - 1)
    if not 0.0 <= p <= d * d / (d * d - 1.0):
        raise ParameterError(f"fidelity {fidelity} gives a non-physical channel")
    return p


@dataclass(frozen=True)
class NoiseModel:
    """Hardware noise. ``t2`` is in seconds (``math.inf`` disables dephasing)."""

    f1: float = 0.99
    f2: float = 0.95
    t2: float = 10.0
    pair_fidelity: float = 0.95
    d1_ns: int = 26_600
    d2_ns: int = 107_000

    def __post_init__(self):
        for name in ("f1", "f2", "pair_fidelity"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise ParameterError(f"{name} must lie in (0, 1], got {v}")
        if not self.t2 > 0:
            raise ParameterError("t2 must be positive")
        if self.d1_ns <= 0 or self.d2_ns <= 0:
            raise ParameterError("gate durations must be positive")
        depolarizing_probability(self.f1, 1)
        depolarizing_probability(self.f2, 2)

    @classmethod
    def ideal(cls) -> "NoiseModel":
        return cls(f1=1.0, f2=1.0, t2=math.inf, pair_fidelity=1.0)

    def gate_p(self, n_qubits: int) -> float:
        return depolarizing_probability(self.f1 if n_qubits == 1 else self.f2, n_qubits)

    def dephase_factor(self, dt_ns: float) -> float:
        if dt_ns < 0:
            raise ParameterError(f"negative idle time {dt_ns}")
        if math.isinf(self.t2) or dt_ns == 0:
            return 1.0
        return math.exp(-dt_ns * 1e-9 / self.t2)


# Raw array kernels ----------------------------------------------------------
# All kernels take an (d, d) array for n qubits and return a new array.


def _apply_1q(rho: np.ndarray, n: int, j: int, u: np.ndarray) -> np.ndarray:
    d = rho.shape[0]
    a, b = 1 << j, 1 << (n - j - 1)
    r = np.matmul(u, rho.reshape(a, 2, b * d))
    r = np.matmul(u.conj(), r.reshape(d * a, 2, b))
    return r.reshape(d, d)


def _apply_unitary(rho: np.ndarray, n: int, pos: Sequence[int], u: np.ndarray) -> np.ndarray:
    if len(pos) == 1:
        return _apply_1q(rho, n, pos[0], u)
    k = len(pos)
    t = rho.reshape([2] * (2 * n))
    m = u.reshape([2] * (2 * k))
    t = np.tensordot(m, t, axes=(list(range(k, 2 * k)), list(pos)))
    t = np.moveaxis(t, list(range(k)), list(pos))
    cols = [n + p for p in pos]
    t = np.tensordot(m.conj(), t, axes=(list(range(k, 2 * k)), cols))
    t = np.moveaxis(t, list(range(k)), cols)
    return np.ascontiguousarray(t).reshape(rho.shape)


def _depolarize(rho: np.ndarray, n: int, pos: Sequence[int], p: float) -> np.ndarray:
    if p == 0.0:
        return rho
    if len(pos) == 1:
        j = pos[0]
        a, b = 1 << j, 1 << (n - j - 1)
        r = rho.reshape(a, 2, b, a, 2, b)
        red = r[:, 0, :, :, 0, :] + r[:, 1, :, :, 1, :]
        out = (1.0 - p) * r
        out[:, 0, :, :, 0, :] += (p / 2.0) * red
        out[:, 1, :, :, 1, :] += (p / 2.0) * red
        return out.reshape(rho.shape)
    k = len(pos)
    order = sorted(pos)
    t = rho.reshape([2] * (2 * n))
    red = t
    m = n
    for q in reversed(order):
        red = np.trace(red, axis1=q, axis2=m + q)
        m -= 1
    ident = (np.eye(1 << k) / (1 << k)).reshape([2] * (2 * k))
    full = np.multiply.outer(ident, red)
    dest = order + [n + q for q in order]
    full = np.moveaxis(full, list(range(2 * k)), dest)
    return (1.0 - p) * rho + p * np.ascontiguousarray(full).reshape(rho.shape)


def _dephase(rho: np.ndarray, n: int, j: int, f: float) -> np.ndarray:
    if f == 1.0:
        return rho
    a, b = 1 << j, 1 << (n - j - 1)
    r = rho.reshape(a, 2, b, a, 2, b).copy()
    r[:, 0, :, :, 1, :] *= f
    r[:, 1, :, :, 0, :] *= f
    return r.reshape(rho.shape)


def _project(rho: np.ndarray, n: int, j: int, basis: str, outcome: int) -> tuple[float, np.ndarray]:
    """Probability of ``outcome`` and the normalized state with qubit j removed."""
    if basis != "Z":
        rho = _apply_1q(rho, n, j, _TO_Z[basis])
    a, b = 1 << j, 1 << (n - j - 1)
    r = rho.reshape(a, 2, b, a, 2, b)
    sub = r[:, outcome, :, :, outcome, :].reshape(a * b, a * b)
    prob = float(np.real(np.trace(sub)))
    prob = min(max(prob, 0.0), 1.0)
    if prob <= 0.0:
        return 0.0, sub
    return prob, sub / prob


def _prob0(rho: np.ndarray, n: int, j: int, basis: str) -> float:
    if basis != "Z":
        rho = _apply_1q(rho, n, j, _TO_Z[basis])
    a, b = 1 << j, 1 << (n - j - 1)
    diag = np.real(np.diagonal(rho)).reshape(a, 2, b)
    return float(min(max(diag[:, 0, :].sum(), 0.0), 1.0))


def werner(fidelity: float) -> np.ndarray:
    phi = np.zeros(4, dtype=complex)
    phi[0] = phi[3] = _SQ2
    proj = np.outer(phi, phi.conj())
    return fidelity * proj + (1.0 - fidelity) / 3.0 * (np.eye(4) - proj)


# Public functional API ------------------------------------------------------


class DensityMatrix:
    """A mixed state over the qubits listed in ``qubits`` (big-endian)."""

    __slots__ = ("data", "qubits")

    def __init__(self, data: np.ndarray, qubits: Sequence[Key]):
        data = np.asarray(data, dtype=complex)
        n = len(qubits)
        if data.shape != (1 << n, 1 << n):
            raise ParameterError(f"shape {data.shape} does not match {n} qubits")
        if len(set(qubits)) != n:
            raise ParameterError("duplicate qubit keys")
        self.data = data
        self.qubits = tuple(qubits)

    @classmethod
    def from_label(cls, key: Key, label: str = "+Z") -> "DensityMatrix":
        v = ket(label)
        return cls(np.outer(v, v.conj()), (key,))

    @classmethod
    def from_ket(cls, psi: np.ndarray, qubits: Sequence[Key]) -> "DensityMatrix":
        psi = np.asarray(psi, dtype=complex)
        return cls(np.outer(psi, psi.conj()), qubits)

    @property
    def n(self) -> int:
        return len(self.qubits)

    @property
    def dim(self) -> int:
        return 1 << len(self.qubits)

    @property
    def qubit_index(self) -> dict[Key, int]:
        return {q: i for i, q in enumerate(self.qubits)}

    def pos(self, key: Key) -> int:
        try:
            return self.qubits.index(key)
        except ValueError:
            raise QubitLifetimeError(f"qubit {key!r} is not live") from None

    def tensor(self, other: "DensityMatrix") -> "DensityMatrix":
        return DensityMatrix(np.kron(self.data, other.data), self.qubits + other.qubits)

    def fidelity_pure(self, psi: np.ndarray) -> float:
        psi = np.asarray(psi, dtype=complex)
        return float(np.real(psi.conj() @ self.data @ psi))

    def reduced(self, keys: Sequence[Key]) -> "DensityMatrix":
        """Partial trace onto ``keys`` (in the given order)."""
        keep = [self.pos(k) for k in keys]
        n = self.n
        t = self.data.reshape([2] * (2 * n))
        drop = sorted(set(range(n)) - set(keep), reverse=True)
        order = list(range(n))
        m = n
        for q in drop:
            t = np.trace(t, axis1=q, axis2=m + q)
            order.remove(q)
            m -= 1
        perm = [order.index(p) for p in keep]
        t = np.transpose(t, perm + [m + x for x in perm])
        k = len(keep)
        return DensityMatrix(t.reshape(1 << k, 1 << k), tuple(keys))

    def check(self, tol: float = 1e-9) -> None:
        """Raise AssertionError unless Hermitian, unit trace and PSD within ``tol``."""
        rho = self.data
        herm = np.max(np.abs(rho - rho.conj().T)) if rho.size else 0.0
        assert herm < tol, f"not Hermitian: {herm}"
        tr = np.trace(rho)
        assert abs(tr - 1.0) < tol, f"trace {tr}"
        ev = np.linalg.eigvalsh((rho + rho.conj().T) / 2)
        assert ev.min() > -tol, f"negative eigenvalue {ev.min()}"

    def __repr__(self) -> str:
        return f"DensityMatrix(qubits={self.qubits})"


def apply_unitary(rho: DensityMatrix, u: np.ndarray, qubits: Sequence[Key]) -> DensityMatrix:
    pos = [rho.pos(q) for q in qubits]
    return DensityMatrix(_apply_unitary(rho.data, rho.n, pos, np.asarray(u, dtype=complex)), rho.qubits)


def depolarize(rho: DensityMatrix, qubits: Sequence[Key], p: float) -> DensityMatrix:
    pos = [rho.pos(q) for q in qubits]
    return DensityMatrix(_depolarize(rho.data, rho.n, pos, p), rho.qubits)


def apply_gate(
    rho: DensityMatrix, gate: str, qubits: Sequence[Key], noise: NoiseModel, angle: float = 0.0
) -> DensityMatrix:
    """Ideal unitary followed by calibrated depolarizing noise on ``qubits``."""
    qubits = tuple(qubits)
    u = gate_matrix(gate, angle)
    if u.shape[0] != 1 << len(qubits):
        raise ParameterError(f"gate {gate} acts on {u.shape[0].bit_length() - 1} qubits")
    pos = [rho.pos(q) for q in qubits]
    data = _apply_unitary(rho.data, rho.n, pos, u)
    data = _depolarize(data, rho.n, pos, noise.gate_p(len(qubits)))
    return DensityMatrix(data, rho.qubits)


def idle_dephase(rho: DensityMatrix, qubit: Key, dt_ns: float, noise: NoiseModel) -> DensityMatrix:
    f = noise.dephase_factor(dt_ns)
    return DensityMatrix(_dephase(rho.data, rho.n, rho.pos(qubit), f), rho.qubits)


def make_epr(noise: NoiseModel, keys: tuple[Key, Key] = ("a", "b")) -> DensityMatrix:
    return DensityMatrix(werner(noise.pair_fidelity), keys)


def project(rho: DensityMatrix, qubit: Key, basis: str, outcome: int) -> tuple[float, DensityMatrix]:
    """Born probability of ``outcome`` and the post-state with ``qubit`` removed."""
    j = rho.pos(qubit)
    prob, data = _project(rho.data, rho.n, j, basis, outcome)
    rest = rho.qubits[:j] + rho.qubits[j + 1:]
    return prob, DensityMatrix(data, rest)


def measure(rho: DensityMatrix, qubit: Key, basis: str, rng: np.random.Generator) -> tuple[int, DensityMatrix]:
    j = rho.pos(qubit)
    p0 = _prob0(rho.data, rho.n, j, basis)
    bit = 0 if rng.random() < p0 else 1
    _, post = project(rho, qubit, basis, bit)
    return bit, post


# Multi-group register -------------------------------------------------------


class QubitRegister:
    """Live qubits stored as independent groups, merged only when entangled.

    Used by the runtime; every call names the noise model of the node that
    holds the qubit so one register can span several nodes.
    """

    def __init__(self):
        self._group: dict[Key, list] = {}  # key -> [keys list, data]

    def __contains__(self, key: Key) -> bool:
        return key in self._group

    def __len__(self) -> int:
        return len(self._group)

    def alloc(self, key: Key, label: str = "+Z") -> None:
        if key in self._group:
            raise QubitLifetimeError(f"qubit {key!r} already live")
        v = _KETS[label]
        self._group[key] = [[key], np.outer(v, v.conj())]

    def add_state(self, keys: Sequence[Key], data: np.ndarray) -> None:
        for k in keys:
            if k in self._group:
                raise QubitLifetimeError(f"qubit {k!r} already live")
        g = [list(keys), np.array(data, dtype=complex)]
        for k in keys:
            self._group[k] = g

    def _get(self, key: Key) -> list:
        try:
            return self._group[key]
        except KeyError:
            raise QubitLifetimeError(f"qubit {key!r} is not live") from None

    def _merge(self, keys: Sequence[Key]) -> list:
        g = self._get(keys[0])
        for k in keys[1:]:
            h = self._get(k)
            if h is not g:
                g[1] = np.kron(g[1], h[1])
                g[0].extend(h[0])
                for q in h[0]:
                    self._group[q] = g
        return g

    def gate(self, name: str, keys: Sequence[Key], noise: NoiseModel, angle: float = 0.0) -> None:
        g = self._merge(keys)
        n = len(g[0])
        pos = [g[0].index(k) for k in keys]
        u = gate_matrix(name, angle)
        data = _apply_unitary(g[1], n, pos, u)
        g[1] = _depolarize(data, n, pos, noise.gate_p(len(keys)))

    def dephase(self, key: Key, dt_ns: float, noise: NoiseModel) -> None:
        f = noise.dephase_factor(dt_ns)
        if f != 1.0:
            g = self._get(key)
            g[1] = _dephase(g[1], len(g[0]), g[0].index(key), f)

    def measure(self, key: Key, basis: str, rng: np.random.Generator) -> int:
        g = self._get(key)
        n = len(g[0])
        j = g[0].index(key)
        p0 = _prob0(g[1], n, j, basis)
        bit = 0 if rng.random() < p0 else 1
        _, g[1] = _project(g[1], n, j, basis, bit)
        del g[0][j]
        del self._group[key]
        return bit

    def free(self, key: Key) -> None:
        g = self._get(key)
        n = len(g[0])
        j = g[0].index(key)
        a, b = 1 << j, 1 << (n - j - 1)
        r = g[1].reshape(a, 2, b, a, 2, b)
        g[1] = (r[:, 0, :, :, 0, :] + r[:, 1, :, :, 1, :]).reshape(a * b, a * b)
        del g[0][j]
        del self._group[key]

    def state(self, keys: Sequence[Key]) -> DensityMatrix:
        """Joint reduced state of ``keys`` (merging groups as needed)."""
        g = self._merge(list(keys))
        return DensityMatrix(g[1].copy(), tuple(g[0])).reduced(keys)
