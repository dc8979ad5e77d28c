"""Exception types shared across the package."""

from __future__ import annotations


class QnetError(Exception):
    """Base class for all package errors."""


class ParameterError(QnetError, ValueError):
    """A numeric or structural parameter is out of range."""


class PreconditionError(QnetError, ValueError):
    """An operation was called with inputs violating its precondition."""


class StochasticBlockError(QnetError, ValueError):
    """A deterministic duration was requested for a QC block."""


class NotApplicableError(QnetError, ValueError):
    """A compiler pass cannot be applied to the given program."""


class QubitLifetimeError(QnetError, RuntimeError):
    """An operation touched a qubit that is not live."""


class DeadlockError(QnetError, RuntimeError):
    """No block can make progress while instances are still incomplete."""

    def __init__(self, message: str, blocked: list[tuple[int, str, list[int]]]):
        super().__init__(message)
        self.blocked = blocked


class AdmissionError(QnetError, RuntimeError):
    """A node ran out of physical qubits."""


class TopologyLookupError(QnetError, KeyError):
    """A server/client pair is not present in the topology table."""


class GridMismatchError(QnetError, ValueError):
    """Two sweep results do not share the same sweep grid."""


class SimulationError(QnetError, RuntimeError):
    """A simulation failure annotated with the sweep point that produced it."""

    def __init__(self, message: str, sweep_value, seed, run_index):
        super().__init__(f"{message} (sweep_value={sweep_value!r}, seed={seed}, run={run_index})")
        self.sweep_value = sweep_value
        self.seed = seed
        self.run_index = run_index
