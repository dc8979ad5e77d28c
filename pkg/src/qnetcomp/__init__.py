"""Compiler and discrete-event simulator for quantum network programs."""

from .errors import (
    AdmissionError,
    DeadlockError,
    GridMismatchError,
    NotApplicableError,
    ParameterError,
    PreconditionError,
    QnetError,
    QubitLifetimeError,
    SimulationError,
    StochasticBlockError,
    TopologyLookupError,
)
from .ir import AngleExpr, Block, BlockType, Program, TimingParams, validate
from .network import LinkParams, NetworkSchedule, build_schedule, calibrated_link
from .quantum import DensityMatrix, NoiseModel
from .runtime import NodeConfig, ProgramInstance, Trace, run_simulation

__version__ = "0.1.0"
