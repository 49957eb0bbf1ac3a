import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Literal, Optional, Tuple, Union

from sempe.services.isa.arith import in_int64
from sempe.services.isa.opcodes import (
    BRANCH_OPCODES,
    BYTE_OPCODES,
    IMM_OPCODES,
    OPERAND_FORMS,
    SECURE_PREFIX,
    TARGET_OPCODES,
    Opcode,
)
from sempe.services.isa.program import Instruction, Program

DecodeMode = Literal["sempe", "legacy"]

_OPERANDS = struct.Struct("<BBBB")
_IMMEDIATE = struct.Struct("<q")
_HEADER = struct.Struct("<4sBBHIIII")
_WORD = struct.Struct("<q")
_MAGIC = b"SMPE"
_VERSION = 1


class EncodingError(ValueError):
    pass


class DecodeError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"byte {offset}: {message}")
        self.offset = offset


@dataclass(frozen=True)
class BinaryImage:
    code: bytes
    byte_offsets: Tuple[int, ...]
    register_count: int = 16
    entry: int = 0
    data_size: int = 0
    memory_image: Tuple[int, ...] = ()


def instruction_size(instruction: Instruction) -> int:
    if instruction.opcode is Opcode.NOP:
        return 1
    if instruction.opcode is Opcode.EOSJMP:
        return 2
    size = _OPERANDS.size + (_IMMEDIATE.size if instruction.opcode in IMM_OPCODES else 0)
    return size + (1 if instruction.secure else 0)


def encode(program: Program) -> BinaryImage:
    offsets: List[int] = []
    position = 0
    for instruction in program.instructions:
        offsets.append(position)
        position += instruction_size(instruction)

    out = bytearray()
    count = len(program.instructions)
    for index, instruction in enumerate(program.instructions):
        opcode = instruction.opcode
        if opcode is Opcode.EOSJMP:
            out += bytes((SECURE_PREFIX, Opcode.NOP))
            continue
        if instruction.secure:
            if opcode not in BRANCH_OPCODES:
                raise EncodingError(f"instruction {index}: secure prefix on {opcode.mnemonic}")
            out.append(SECURE_PREFIX)
        if opcode is Opcode.NOP:
            out.append(Opcode.NOP)
            continue

        registers = []
        for name in ("dst", "src1", "src2"):
            value = getattr(instruction, name)
            value = 0 if value is None else value
            if not 0 <= value <= 0xFF:
                raise EncodingError(f"instruction {index}: register {name}={value} does not fit a byte")
            registers.append(value)
        out += _OPERANDS.pack(int(opcode), *registers)

        if opcode in IMM_OPCODES:
            imm = instruction.imm if instruction.imm is not None else 0
            if opcode in TARGET_OPCODES:
                if not 0 <= imm < count:
                    raise EncodingError(f"instruction {index}: target {imm} out of range")
                imm = offsets[imm] - (offsets[index] + instruction_size(instruction))
            if not in_int64(imm):
                raise EncodingError(f"instruction {index}: immediate {imm} out of 64-bit range")
            out += _IMMEDIATE.pack(imm)

    return BinaryImage(
        code=bytes(out),
        byte_offsets=tuple(offsets),
        register_count=program.register_count,
        entry=program.entry,
        data_size=program.data_size,
        memory_image=tuple(program.memory_image),
    )


def decode(image: BinaryImage, mode: DecodeMode = "sempe") -> Program:
    if mode not in ("sempe", "legacy"):
        raise ValueError(f"Unsupported decode mode: {mode}")
    code = image.code
    rows: List[Tuple[int, int, Instruction]] = []
    position = 0
    while position < len(code):
        start = position
        secure = False
        byte = code[position]
        if byte == SECURE_PREFIX:
            if position + 1 >= len(code):
                raise DecodeError("truncated instruction after prefix", position)
            following = code[position + 1]
            if following == Opcode.NOP:
                opcode = Opcode.EOSJMP if mode == "sempe" else Opcode.NOP
                position += 2
                rows.append((start, position, Instruction(opcode=opcode)))
                continue
            if BYTE_OPCODES.get(following) in BRANCH_OPCODES:
                secure = mode == "sempe"
            elif mode == "sempe":
                raise DecodeError(f"prefix 0x2e before non-branch opcode 0x{following:02x}", position)
            position += 1
            byte = following

        opcode = BYTE_OPCODES.get(byte)
        if opcode is None:
            raise DecodeError(f"unknown opcode byte 0x{byte:02x}", position)
        if opcode is Opcode.NOP:
            position += 1
            rows.append((start, position, Instruction(opcode=opcode)))
            continue

        width = _OPERANDS.size + (_IMMEDIATE.size if opcode in IMM_OPCODES else 0)
        if position + width > len(code):
            raise DecodeError(f"truncated {opcode.mnemonic} instruction", start)
        _, dst, src1, src2 = _OPERANDS.unpack_from(code, position)
        imm: Optional[int] = None
        if opcode in IMM_OPCODES:
            (imm,) = _IMMEDIATE.unpack_from(code, position + _OPERANDS.size)
        position += width

        raw = {"dst": dst, "src1": src1, "src2": src2, "imm": imm}
        form = OPERAND_FORMS[opcode]
        fields = {name: (raw[name] if name in form else None) for name in raw}
        rows.append((start, position, Instruction(opcode=opcode, secure=secure, **fields)))

    index_of: Dict[int, int] = {start: index for index, (start, _, _) in enumerate(rows)}
    instructions: List[Instruction] = []
    for start, end, instruction in rows:
        if instruction.opcode in TARGET_OPCODES:
            target_byte = end + instruction.imm
            if target_byte not in index_of:
                raise DecodeError(f"branch target byte {target_byte} is not an instruction boundary", start)
            instruction = Instruction(
                opcode=instruction.opcode,
                src1=instruction.src1,
                imm=index_of[target_byte],
                secure=instruction.secure,
            )
        instructions.append(instruction)

    return Program(
        instructions=tuple(instructions),
        entry=image.entry,
        register_count=image.register_count,
        data_size=image.data_size,
        memory_image=tuple(image.memory_image),
    )


def write_image(path: Union[str, Path], image: BinaryImage) -> None:
    header = _HEADER.pack(
        _MAGIC,
        _VERSION,
        0,
        image.register_count,
        image.entry,
        image.data_size,
        len(image.code),
        0,
    )
    words = b"".join(_WORD.pack(value) for value in image.memory_image)
    Path(path).write_bytes(header + image.code + words)


def read_image(path: Union[str, Path]) -> BinaryImage:
    blob = Path(path).read_bytes()
    if len(blob) < _HEADER.size:
        raise DecodeError("file shorter than header", 0)
    magic, version, _flags, registers, entry, data_size, code_length, _ = _HEADER.unpack_from(blob, 0)
    if magic != _MAGIC or version != _VERSION:
        raise DecodeError("not a sempe binary image", 0)
    code_end = _HEADER.size + code_length
    if len(blob) != code_end + data_size * _WORD.size:
        raise DecodeError("image size does not match header", len(blob))
    code = blob[_HEADER.size : code_end]
    memory = tuple(_WORD.unpack_from(blob, code_end + i * _WORD.size)[0] for i in range(data_size))
    return BinaryImage(
        code=code,
        byte_offsets=_boundaries(code),
        register_count=registers,
        entry=entry,
        data_size=data_size,
        memory_image=memory,
    )


def _boundaries(code: bytes) -> Tuple[int, ...]:
    offsets: List[int] = []
    position = 0
    while position < len(code):
        offsets.append(position)
        byte = code[position]
        if byte == SECURE_PREFIX and position + 1 < len(code):
            if code[position + 1] == Opcode.NOP:
                position += 2
                continue
            position += 1
            byte = code[position]
        opcode = BYTE_OPCODES.get(byte)
        if opcode is None:
            raise DecodeError(f"unknown opcode byte 0x{byte:02x}", position)
        if opcode is Opcode.NOP:
            position += 1
        else:
            position += _OPERANDS.size + (_IMMEDIATE.size if opcode in IMM_OPCODES else 0)
    return tuple(offsets)


def read_memory_words(path: Union[str, Path]) -> List[int]:
    blob = Path(path).read_bytes()
    if len(blob) % _WORD.size:
        raise DecodeError("memory image is not a whole number of 64-bit words", len(blob))
    return [value for (value,) in _WORD.iter_unpack(blob)]
