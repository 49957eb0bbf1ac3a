from enum import IntEnum
from typing import Dict, FrozenSet, Tuple

SECURE_PREFIX = 0x2E


class Opcode(IntEnum):
    LDI = 0x01
    MOV = 0x02
    ADD = 0x03
    SUB = 0x04
    MUL = 0x05
    DIVC = 0x06
    AND = 0x07
    OR = 0x08
    XOR = 0x09
    SHL = 0x0A
    SHR = 0x0B
    SLT = 0x0C
    LD = 0x0D
    ST = 0x0E
    JMP = 0x0F
    BZ = 0x10
    BNZ = 0x11
    CMOV = 0x12
    CALL = 0x13
    RET = 0x14
    HALT = 0x15
    NOP = 0x90
    # Encoded as SECURE_PREFIX followed by NOP; never appears as a lone byte.
    EOSJMP = 0x100

    @property
    def mnemonic(self) -> str:
        return self.name.lower()


# Operand fields each opcode uses; every other field must be None.
OPERAND_FORMS: Dict[Opcode, Tuple[str, ...]] = {
    Opcode.LDI: ("dst", "imm"),
    Opcode.MOV: ("dst", "src1"),
    Opcode.ADD: ("dst", "src1", "src2"),
    Opcode.SUB: ("dst", "src1", "src2"),
    Opcode.MUL: ("dst", "src1", "src2"),
    Opcode.DIVC: ("dst", "src1", "imm"),
    Opcode.AND: ("dst", "src1", "src2"),
    Opcode.OR: ("dst", "src1", "src2"),
    Opcode.XOR: ("dst", "src1", "src2"),
    Opcode.SHL: ("dst", "src1", "imm"),
    Opcode.SHR: ("dst", "src1", "imm"),
    Opcode.SLT: ("dst", "src1", "src2"),
    Opcode.LD: ("dst", "src1", "imm"),
    Opcode.ST: ("src1", "src2", "imm"),
    Opcode.JMP: ("imm",),
    Opcode.BZ: ("src1", "imm"),
    Opcode.BNZ: ("src1", "imm"),
    Opcode.CMOV: ("dst", "src1", "src2"),
    Opcode.CALL: ("imm",),
    Opcode.RET: (),
    Opcode.HALT: (),
    Opcode.NOP: (),
    Opcode.EOSJMP: (),
}

BRANCH_OPCODES: FrozenSet[Opcode] = frozenset({Opcode.BZ, Opcode.BNZ})
TARGET_OPCODES: FrozenSet[Opcode] = frozenset({Opcode.JMP, Opcode.BZ, Opcode.BNZ, Opcode.CALL})
IMM_OPCODES: FrozenSet[Opcode] = frozenset(op for op, form in OPERAND_FORMS.items() if "imm" in form)
WRITES_DST: FrozenSet[Opcode] = frozenset(op for op, form in OPERAND_FORMS.items() if "dst" in form)
BYTE_OPCODES: Dict[int, Opcode] = {int(op): op for op in Opcode if op is not Opcode.EOSJMP}
MNEMONICS: Dict[str, Opcode] = {op.mnemonic: op for op in Opcode}
