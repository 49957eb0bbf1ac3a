from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

from sempe.config import Settings, get_settings
from sempe.services.isa.program import Program
from sempe.services.machine.simulator import MachineMode
from sempe.services.seclang.ast import Ast
from sempe.services.seclang.cfg import Cfg, lower
from sempe.services.seclang.instrument import ShadowPlan
from sempe.services.seclang.taint import TaintState, taint


@dataclass
class CompiledProgram:
    program: Program
    ast: Ast
    taint: TaintState
    plan: Optional[ShadowPlan] = None

    @property
    def secure_branches(self) -> int:
        return sum(1 for instruction in self.program.instructions if instruction.secure)

    def source_map(self) -> Dict[int, int]:
        return {
            index: instruction.source_line
            for index, instruction in enumerate(self.program.instructions)
            if instruction.source_line
        }


class CompilePipeline(ABC):
    name: str = ""
    machine_mode: MachineMode = "legacy"

    def __init__(self, settings: Optional[Settings] = None):
        self.settings = settings or get_settings()

    def analyze(self, ast: Ast) -> Tuple[Cfg, TaintState]:
        cfg = lower(ast)
        return cfg, taint(cfg)

    @abstractmethod
    def compile(self, ast: Ast) -> CompiledProgram:
        raise NotImplementedError
