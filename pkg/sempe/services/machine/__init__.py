from sempe.services.machine.jbtable import JbEntry, JbTable, Outcome
from sempe.services.machine.simulator import (
    ExecutionObserver,
    InvalidProgramError,
    MachineMode,
    MachineState,
    MachineTrap,
    run,
    run_legacy,
)
from sempe.services.machine.spm import Snapshot, Spm
from sempe.services.machine.timing import CacheConfig, CacheModel, TimingModel

__all__ = [
    "CacheConfig",
    "CacheModel",
    "ExecutionObserver",
    "InvalidProgramError",
    "JbEntry",
    "JbTable",
    "MachineMode",
    "MachineState",
    "MachineTrap",
    "Outcome",
    "Snapshot",
    "Spm",
    "TimingModel",
    "run",
    "run_legacy",
]
