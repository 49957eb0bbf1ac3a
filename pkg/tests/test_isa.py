from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sempe.services.isa import (
    AssemblyError,
    DecodeError,
    EncodingError,
    Instruction,
    Opcode,
    Program,
    assemble,
    decode,
    encode,
    format_program,
    read_image,
    validate,
    write_image,
)
from sempe.services.isa.encoding import BinaryImage, read_memory_words
from sempe.services.isa.opcodes import BRANCH_OPCODES, OPERAND_FORMS, SECURE_PREFIX, TARGET_OPCODES

INT64 = st.integers(min_value=-(2**63), max_value=2**63 - 1)


@st.composite
def programs(draw):
    register_count = draw(st.integers(min_value=8, max_value=32))
    length = draw(st.integers(min_value=1, max_value=40))
    instructions = []
    for _ in range(length):
        opcode = draw(st.sampled_from(list(Opcode)))
        fields = {}
        for name in OPERAND_FORMS[opcode]:
            if name != "imm":
                fields[name] = draw(st.integers(min_value=0, max_value=register_count - 1))
            elif opcode in TARGET_OPCODES:
                fields[name] = draw(st.integers(min_value=0, max_value=length))
            elif opcode is Opcode.DIVC:
                fields[name] = draw(INT64.filter(lambda value: value != 0))
            else:
                fields[name] = draw(INT64)
        secure = opcode in BRANCH_OPCODES and draw(st.booleans())
        instructions.append(Instruction(opcode=opcode, secure=secure, **fields))
    instructions.append(Instruction(Opcode.HALT))
    memory = draw(st.lists(INT64, max_size=12))
    data_size = len(memory) + draw(st.integers(min_value=0, max_value=4))
    return Program(
        instructions=tuple(instructions),
        entry=draw(st.integers(min_value=0, max_value=length)),
        register_count=register_count,
        data_size=data_size,
        memory_image=tuple(memory),
    )


def _legacy_view(program: Program) -> Program:
    erased = []
    for instruction in program.instructions:
        if instruction.opcode is Opcode.EOSJMP:
            erased.append(Instruction(Opcode.NOP))
        else:
            erased.append(replace(instruction, secure=False))
    return replace(program, instructions=tuple(erased))


@settings(max_examples=1000, deadline=None)
@given(programs())
def test_encode_decode_round_trip(program):
    assert decode(encode(program)) == program


@settings(max_examples=1000, deadline=None)
@given(programs())
def test_legacy_decode_erases_secure_annotations(program):
    decoded = decode(encode(program), mode="legacy")

    assert decoded == _legacy_view(program)
    assert not any(instruction.secure for instruction in decoded.instructions)
    assert Opcode.EOSJMP not in {instruction.opcode for instruction in decoded.instructions}


@settings(max_examples=300, deadline=None)
@given(programs())
def test_prefix_byte_starts_only_secure_instructions(program):
    image = encode(program)

    for offset, instruction in zip(image.byte_offsets, program.instructions):
        marked = instruction.secure or instruction.opcode is Opcode.EOSJMP
        assert (image.code[offset] == SECURE_PREFIX) == marked


def test_prefix_value_inside_an_immediate_is_not_a_prefix():
    program = assemble("ldi r1, 46\nhalt")

    image = encode(program)

    assert 0x2E in image.code[1:]
    assert image.code[0] == Opcode.LDI
    assert decode(image) == program
    assert decode(image, mode="legacy") == program


def test_legacy_decode_keeps_instruction_count_and_targets():
    program = assemble(
        """
        ldi r1, 1
        s.bz r1, other
        ldi r2, 7
        jmp end
    other:
        ldi r3, 9
    end:
        eosjmp
        halt
        """
    )

    legacy = decode(encode(program), mode="legacy")

    assert len(legacy) == len(program)
    assert legacy.instructions[1] == Instruction(Opcode.BZ, src1=1, imm=4)
    assert legacy.instructions[5] == Instruction(Opcode.NOP)


def test_eosjmp_and_secure_prefix_encoding():
    program = Program(
        instructions=(
            Instruction(Opcode.BZ, src1=1, imm=1, secure=True),
            Instruction(Opcode.EOSJMP),
            Instruction(Opcode.HALT),
        )
    )

    image = encode(program)

    assert image.code[0] == 0x2E
    assert image.code[1] == Opcode.BZ
    assert image.code[13:15] == bytes((0x2E, 0x90))
    assert image.byte_offsets == (0, 13, 15)


def test_secure_prefix_on_non_branch_is_rejected():
    program = Program(instructions=(Instruction(Opcode.ADD, dst=1, src1=2, src2=3, secure=True), Instruction(Opcode.HALT)))

    with pytest.raises(EncodingError):
        encode(program)


def test_decode_rejects_prefix_before_non_branch():
    code = bytes((0x2E, Opcode.MOV, 1, 2, 0, Opcode.HALT, 0, 0, 0))
    image = BinaryImage(code=code, byte_offsets=(0, 5))

    with pytest.raises(DecodeError):
        decode(image)


def test_decode_rejects_unknown_opcode_byte():
    with pytest.raises(DecodeError, match="unknown opcode"):
        decode(BinaryImage(code=bytes((0x7F,)), byte_offsets=(0,)))


def test_binary_image_file_round_trip(tmp_path):
    program = assemble(
        """
        .memory 4
        .init 0 5 -6 7
        ld r1, r0, 0
        halt
        """
    )
    path = tmp_path / "prog.bin"

    write_image(path, encode(program))

    assert decode(read_image(path)) == program


def test_read_image_rejects_foreign_files(tmp_path):
    path = tmp_path / "junk.bin"
    path.write_bytes(b"\x7fELF" + bytes(40))

    with pytest.raises(DecodeError):
        read_image(path)


def test_read_memory_words(tmp_path):
    path = tmp_path / "mem.bin"
    path.write_bytes((3).to_bytes(8, "little") + (-1).to_bytes(8, "little", signed=True))

    assert read_memory_words(path) == [3, -1]


def test_assembler_resolves_labels_and_symbols():
    program = assemble(
        """
        .memory 3
        .symbol key 2 1
    start:  ld r1, r0, key   ; load the key
        bnz r1, start
        halt
        """
    )

    assert program.instructions[0] == Instruction(Opcode.LD, dst=1, src1=0, imm=2)
    assert program.instructions[1].imm == 0
    assert program.symbols == {"key": (2, 1)}
    assert program.instructions[0].source_line == 4


def test_format_program_assembles_back():
    program = assemble(
        """
        .memory 2
        .init 0 1 2
        .symbol pair 0 2
        ldi r1, -4
        s.bnz r1, done
        cmov r2, r1, r3
    done:
        eosjmp
        halt
        """
    )

    assert assemble(format_program(program)) == program


@pytest.mark.parametrize(
    "source, message",
    [
        ("frob r1\nhalt", "unknown mnemonic"),
        ("s.add r1, r2, r3\nhalt", "secure prefix"),
        ("jmp nowhere\nhalt", "unresolved label"),
        ("add r1, r2\nhalt", "takes 3 operands"),
        ("ldi x1, 3\nhalt", "malformed register"),
        ("a:\na:\nhalt", "duplicate label"),
    ],
)
def test_assembler_errors_carry_line(source, message):
    with pytest.raises(AssemblyError, match=message) as caught:
        assemble(source)

    assert caught.value.line >= 1


def test_validate_reports_register_and_target_errors():
    program = Program(
        instructions=(
            Instruction(Opcode.ADD, dst=20, src1=0, src2=0),
            Instruction(Opcode.JMP, imm=9),
            Instruction(Opcode.HALT),
        ),
        register_count=16,
    )

    messages = [item.message for item in validate(program)]

    assert any("r20" in message for message in messages)
    assert any("target 9" in message for message in messages)


def test_validate_requires_reachable_halt():
    program = Program(instructions=(Instruction(Opcode.JMP, imm=0), Instruction(Opcode.HALT)))

    assert [item.message for item in validate(program)] == ["no halt reachable from entry"]
