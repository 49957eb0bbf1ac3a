from dataclasses import dataclass, field, replace
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

from sempe.services.isa.opcodes import OPERAND_FORMS, Opcode

InputValue = Union[int, Sequence[int]]


@dataclass(frozen=True)
class Instruction:
    opcode: Opcode
    dst: Optional[int] = None
    src1: Optional[int] = None
    src2: Optional[int] = None
    imm: Optional[int] = None
    secure: bool = False
    source_line: int = field(default=0, compare=False)

    def with_line(self, line: int) -> "Instruction":
        return replace(self, source_line=line)

    def render(self, target_label: Optional[str] = None) -> str:
        mnemonic = ("s." if self.secure else "") + self.opcode.mnemonic
        operands: List[str] = []
        for name in OPERAND_FORMS[self.opcode]:
            value = getattr(self, name)
            if name == "imm":
                if self.opcode in (Opcode.JMP, Opcode.BZ, Opcode.BNZ, Opcode.CALL) and target_label:
                    operands.append(target_label)
                else:
                    operands.append(str(value))
            else:
                operands.append(f"r{value}")
        if not operands:
            return mnemonic
        return f"{mnemonic} {', '.join(operands)}"


@dataclass(frozen=True)
class Program:
    instructions: Tuple[Instruction, ...]
    labels: Dict[str, int] = field(default_factory=dict, compare=False)
    entry: int = 0
    register_count: int = 16
    data_size: int = 0
    memory_image: Tuple[int, ...] = ()
    # name -> (address, size); debug metadata like labels
    symbols: Dict[str, Tuple[int, int]] = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        if len(self.memory_image) < self.data_size:
            padding = (0,) * (self.data_size - len(self.memory_image))
            object.__setattr__(self, "memory_image", tuple(self.memory_image) + padding)

    def __len__(self) -> int:
        return len(self.instructions)

    def line_of(self, pc: int) -> Optional[int]:
        if 0 <= pc < len(self.instructions):
            return self.instructions[pc].source_line or None
        return None

    def initial_memory(self, inputs: Optional[Mapping[str, InputValue]] = None) -> List[int]:
        memory = list(self.memory_image) + [0] * (self.data_size - len(self.memory_image))
        for name, value in (inputs or {}).items():
            if name not in self.symbols:
                raise ValueError(f"unknown data symbol: {name}")
            address, size = self.symbols[name]
            values = [value] if isinstance(value, int) else list(value)
            if len(values) > size:
                raise ValueError(f"{len(values)} values do not fit symbol {name} of size {size}")
            memory[address : address + len(values)] = values
        return memory

    def read_symbols(self, memory: Sequence[int], names: Optional[Sequence[str]] = None) -> Dict[str, List[int]]:
        selected = names if names is not None else sorted(self.symbols)
        state: Dict[str, List[int]] = {}
        for name in selected:
            address, size = self.symbols[name]
            state[name] = list(memory[address : address + size])
        return state
