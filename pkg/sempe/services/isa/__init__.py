from sempe.services.isa.assembler import AssemblyError, assemble, format_program
from sempe.services.isa.encoding import (
    BinaryImage,
    DecodeError,
    EncodingError,
    decode,
    encode,
    read_image,
    write_image,
)
from sempe.services.isa.opcodes import Opcode
from sempe.services.isa.program import Instruction, Program
from sempe.services.isa.validate import Diagnostic, validate

__all__ = [
    "AssemblyError",
    "BinaryImage",
    "DecodeError",
    "Diagnostic",
    "EncodingError",
    "Instruction",
    "Opcode",
    "Program",
    "assemble",
    "decode",
    "encode",
    "format_program",
    "read_image",
    "validate",
    "write_image",
]
