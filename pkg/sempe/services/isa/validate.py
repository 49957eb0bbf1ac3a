from collections import deque
from dataclasses import dataclass
from typing import List, Optional, Set

from sempe.services.isa.arith import in_int64
from sempe.services.isa.opcodes import BRANCH_OPCODES, OPERAND_FORMS, TARGET_OPCODES, Opcode
from sempe.services.isa.program import Program

_FIELDS = ("dst", "src1", "src2", "imm")


@dataclass(frozen=True)
class Diagnostic:
    index: Optional[int]
    line: Optional[int]
    message: str

    def __str__(self) -> str:
        where = []
        if self.line:
            where.append(f"line {self.line}")
        if self.index is not None:
            where.append(f"instruction {self.index}")
        prefix = ", ".join(where)
        return f"{prefix}: {self.message}" if prefix else self.message


def validate(program: Program) -> List[Diagnostic]:
    """Static checks; returns an empty list for a runnable program."""
    diagnostics: List[Diagnostic] = []
    count = len(program.instructions)
    registers = program.register_count

    def report(index: Optional[int], message: str) -> None:
        line = program.line_of(index) if index is not None else None
        diagnostics.append(Diagnostic(index=index, line=line, message=message))

    if count == 0:
        report(None, "program has no instructions")
        return diagnostics
    if not 0 <= program.entry < count:
        report(None, f"entry {program.entry} out of range")
    if len(program.memory_image) > program.data_size:
        report(None, "memory image larger than data_size")

    for index, instruction in enumerate(program.instructions):
        opcode = instruction.opcode
        form = OPERAND_FORMS[opcode]
        for name in _FIELDS:
            value = getattr(instruction, name)
            if name in form and value is None:
                report(index, f"{opcode.mnemonic} is missing operand {name}")
            elif name not in form and value is not None:
                report(index, f"{opcode.mnemonic} does not take operand {name}")
            elif value is not None and name != "imm" and not 0 <= value < registers:
                report(index, f"register r{value} outside r0..r{registers - 1}")
        if instruction.secure and opcode not in BRANCH_OPCODES:
            report(index, f"secure prefix on non-branch {opcode.mnemonic}")
        if instruction.imm is None:
            continue
        if not in_int64(instruction.imm):
            report(index, f"immediate {instruction.imm} out of 64-bit range")
        if opcode is Opcode.DIVC and instruction.imm == 0:
            report(index, "divc with divisor 0")
        if opcode in TARGET_OPCODES and not 0 <= instruction.imm < count:
            report(index, f"target {instruction.imm} out of range (program has {count} instructions)")

    if not diagnostics and not _halt_reachable(program):
        report(None, "no halt reachable from entry")
    return diagnostics


def _halt_reachable(program: Program) -> bool:
    # RET is treated as ending its path; CALL continues at both the callee and the return site.
    seen: Set[int] = set()
    queue = deque([program.entry])
    while queue:
        pc = queue.popleft()
        if pc in seen or not 0 <= pc < len(program.instructions):
            continue
        seen.add(pc)
        instruction = program.instructions[pc]
        opcode = instruction.opcode
        if opcode is Opcode.HALT:
            return True
        if opcode is Opcode.RET:
            continue
        if opcode in TARGET_OPCODES:
            queue.append(instruction.imm)
        if opcode is not Opcode.JMP:
            queue.append(pc + 1)
    return False
