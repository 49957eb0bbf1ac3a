import re
from typing import Dict, List, Optional, Tuple

from sempe.services.isa.opcodes import BRANCH_OPCODES, MNEMONICS, OPERAND_FORMS, TARGET_OPCODES, Opcode
from sempe.services.isa.program import Instruction, Program

_LABEL_RE = re.compile(r"^([A-Za-z_.$][\w.$]*):")
_NAME_RE = re.compile(r"^[A-Za-z_.$][\w.$]*$")
_REGISTER_RE = re.compile(r"^r(\d+)$")


class AssemblyError(ValueError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


def _parse_int(text: str, line: int) -> int:
    try:
        return int(text, 0)
    except ValueError:
        raise AssemblyError(f"malformed integer: {text!r}", line) from None


def _split_lines(source_text: str) -> List[Tuple[int, Optional[str], str]]:
    """Strip comments and split off label definitions."""
    rows: List[Tuple[int, Optional[str], str]] = []
    for number, raw in enumerate(source_text.splitlines(), start=1):
        text = raw.split(";", 1)[0].strip()
        while text:
            match = _LABEL_RE.match(text)
            if not match:
                break
            rows.append((number, match.group(1), ""))
            text = text[match.end() :].strip()
        if text:
            rows.append((number, None, text))
    return rows


def assemble(source_text: str) -> Program:
    rows = _split_lines(source_text)

    labels: Dict[str, int] = {}
    symbols: Dict[str, Tuple[int, int]] = {}
    statements: List[Tuple[int, str]] = []
    directives: List[Tuple[int, str]] = []
    for line, label, text in rows:
        if label is not None:
            if label in labels:
                raise AssemblyError(f"duplicate label: {label}", line)
            labels[label] = len(statements)
            continue
        if text.startswith("."):
            directives.append((line, text))
        else:
            statements.append((line, text))

    register_count = 16
    data_size = 0
    image: Dict[int, int] = {}
    entry_label: Optional[Tuple[int, str]] = None
    for line, text in directives:
        parts = text.replace(",", " ").split()
        name, args = parts[0], parts[1:]
        if name == ".registers" and len(args) == 1:
            register_count = _parse_int(args[0], line)
        elif name == ".memory" and len(args) == 1:
            data_size = _parse_int(args[0], line)
        elif name == ".init" and len(args) >= 2:
            base = _parse_int(args[0], line)
            for offset, value in enumerate(args[1:]):
                image[base + offset] = _parse_int(value, line)
        elif name == ".symbol" and len(args) == 3 and _NAME_RE.match(args[0]):
            symbols[args[0]] = (_parse_int(args[1], line), _parse_int(args[2], line))
        elif name == ".entry" and len(args) == 1:
            entry_label = (line, args[0])
        else:
            raise AssemblyError(f"malformed directive: {text}", line)

    if image and max(image) >= data_size:
        data_size = max(image) + 1
    memory_image = tuple(image.get(address, 0) for address in range(data_size))

    instructions = [_assemble_statement(text, line, labels, symbols) for line, text in statements]

    entry = 0
    if entry_label is not None:
        line, name = entry_label
        if name not in labels:
            raise AssemblyError(f"unresolved label: {name}", line)
        entry = labels[name]

    return Program(
        instructions=tuple(instructions),
        labels=labels,
        entry=entry,
        register_count=register_count,
        data_size=data_size,
        memory_image=memory_image,
        symbols=symbols,
    )


def _assemble_statement(
    text: str,
    line: int,
    labels: Dict[str, int],
    symbols: Dict[str, Tuple[int, int]],
) -> Instruction:
    head, _, rest = text.partition(" ")
    mnemonic = head.strip()
    secure = False
    if mnemonic.startswith("s."):
        secure = True
        mnemonic = mnemonic[2:]
    opcode = MNEMONICS.get(mnemonic)
    if opcode is None:
        raise AssemblyError(f"unknown mnemonic: {head}", line)
    if secure and opcode not in BRANCH_OPCODES:
        raise AssemblyError(f"secure prefix on non-branch: {head}", line)

    operands = [item.strip() for item in rest.split(",")] if rest.strip() else []
    form = OPERAND_FORMS[opcode]
    if len(operands) != len(form):
        raise AssemblyError(f"{mnemonic} takes {len(form)} operands, got {len(operands)}", line)

    fields: Dict[str, int] = {}
    for name, operand in zip(form, operands):
        if name == "imm":
            fields[name] = _immediate(opcode, operand, line, labels, symbols)
            continue
        match = _REGISTER_RE.match(operand)
        if not match:
            raise AssemblyError(f"malformed register operand: {operand!r}", line)
        fields[name] = int(match.group(1))

    return Instruction(opcode=opcode, secure=secure, source_line=line, **fields)


def _immediate(
    opcode: Opcode,
    operand: str,
    line: int,
    labels: Dict[str, int],
    symbols: Dict[str, Tuple[int, int]],
) -> int:
    if opcode in TARGET_OPCODES:
        if operand not in labels:
            raise AssemblyError(f"unresolved label: {operand}", line)
        return labels[operand]
    if _NAME_RE.match(operand):
        if operand not in symbols:
            raise AssemblyError(f"unknown data symbol: {operand}", line)
        return symbols[operand][0]
    return _parse_int(operand, line)


def format_program(program: Program) -> str:
    """Render a Program as assembly text that assembles back to an equal Program."""
    names: Dict[int, str] = {}
    for name, index in sorted(program.labels.items(), key=lambda item: (item[1], item[0])):
        names.setdefault(index, name)
    wanted = {program.entry} if program.entry else set()
    wanted.update(ins.imm for ins in program.instructions if ins.opcode in TARGET_OPCODES)
    for index in sorted(wanted):
        names.setdefault(index, f"L{index}")

    lines = [f".registers {program.register_count}", f".memory {program.data_size}"]
    image = list(program.memory_image)
    for base in range(0, len(image), 8):
        chunk = image[base : base + 8]
        if any(chunk):
            lines.append(f".init {base} " + " ".join(str(value) for value in chunk))
    for name, (address, size) in sorted(program.symbols.items(), key=lambda item: item[1]):
        lines.append(f".symbol {name} {address} {size}")
    if program.entry:
        lines.append(f".entry {names[program.entry]}")

    for index, instruction in enumerate(program.instructions):
        if index in names:
            lines.append(f"{names[index]}:")
        target = names.get(instruction.imm) if instruction.opcode in TARGET_OPCODES else None
        lines.append(f"    {instruction.render(target)}")
    if len(program.instructions) in names:
        lines.append(f"{names[len(program.instructions)]}:")
    return "\n".join(lines) + "\n"
