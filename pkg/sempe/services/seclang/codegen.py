import logging
from dataclasses import replace
from typing import Dict, List, Optional, Tuple

from sempe.services.isa.arith import wrap64
from sempe.services.isa.opcodes import WRITES_DST, Opcode
from sempe.services.isa.program import Instruction, Program
from sempe.services.seclang.ast import Assign, BinOp, Bool, Const, Expr, Index, Store, UnaryOp, Var
from sempe.services.seclang.cfg import (
    Branch,
    Cfg,
    Declare,
    EndSecure,
    Halt,
    Jump,
    Merge,
    ShadowCopy,
)
from sempe.services.seclang.storage import TEMP_COUNT, Storage

logger = logging.getLogger(__name__)

_ALU = {
    "+": Opcode.ADD,
    "-": Opcode.SUB,
    "*": Opcode.MUL,
    "&": Opcode.AND,
    "|": Opcode.OR,
    "^": Opcode.XOR,
}
_IMM = {"/": Opcode.DIVC, "<<": Opcode.SHL, ">>": Opcode.SHR}


class CompileRejection(ValueError):
    def __init__(self, diagnostics: List[str]):
        super().__init__("; ".join(diagnostics))
        self.diagnostics = list(diagnostics)


def block_label(block_id: int) -> str:
    return f"B{block_id}"


class _Emitter:
    def __init__(
        self,
        cfg: Cfg,
        storage: Storage,
        locations: Optional[Dict[int, Dict[str, int]]],
        mask_indices: bool,
    ):
        self.cfg = cfg
        self.storage = storage
        self.locations = locations or {}
        self.mask_indices = mask_indices
        self.zero = storage.zero
        self.code: List[Instruction] = []
        self.fixups: List[Tuple[int, str]] = []
        self.labels: Dict[str, int] = {}
        self.block: int = cfg.entry
        self.line = 0

    # -- emission helpers --------------------------------------------

    def emit(self, opcode: Opcode, **fields) -> None:
        self.code.append(Instruction(opcode, source_line=self.line, **fields))

    def emit_target(self, opcode: Opcode, label: str, **fields) -> None:
        self.fixups.append((len(self.code), label))
        self.emit(opcode, imm=0, **fields)

    def temp(self, depth: int) -> int:
        if depth >= TEMP_COUNT:
            raise CompileRejection([f"line {self.line}: expression needs more than {TEMP_COUNT} temporaries"])
        return depth

    def address(self, name: str) -> Optional[int]:
        override = self.locations.get(self.block, {})
        if name in override:
            return override[name]
        location = self.storage.location(name)
        return None if location.in_register else location.address

    def register(self, name: str) -> Optional[int]:
        if name in self.locations.get(self.block, {}):
            return None
        return self.storage.location(name).register

    def load_const(self, value: int, depth: int) -> int:
        value = wrap64(value)
        if value == 0:
            return self.zero
        reg = self.temp(depth)
        self.emit(Opcode.LDI, dst=reg, imm=value)
        return reg

    # -- expressions -------------------------------------------------

    def boolean(self, src: int, depth: int) -> int:
        """(src != 0) into the temp at depth."""
        reg = self.temp(depth)
        scratch = self.temp(depth + 1)
        self.emit(Opcode.SLT, dst=scratch, src1=self.zero, src2=src)
        self.emit(Opcode.SLT, dst=reg, src1=src, src2=self.zero)
        self.emit(Opcode.OR, dst=reg, src1=reg, src2=scratch)
        return reg

    def flip(self, reg: int, depth: int) -> int:
        one = self.load_const(1, depth + 1)
        self.emit(Opcode.XOR, dst=reg, src1=reg, src2=one)
        return reg

    def element(self, name: str, index: Expr, depth: int) -> Tuple[int, int]:
        """Base register and offset addressing name[index]."""
        base = self.address(name)
        mask = self.storage.words(name) - 1
        if isinstance(index, Const):
            return self.zero, base + (index.value & mask)
        src = self.expr(index, depth)
        if not self.mask_indices:
            return src, base
        reg = self.temp(depth)
        mask_reg = self.load_const(mask, depth + 1)
        self.emit(Opcode.AND, dst=reg, src1=src, src2=mask_reg)
        return reg, base

    def expr(self, expr: Expr, depth: int) -> int:
        if isinstance(expr, Const):
            return self.load_const(expr.value, depth)
        if isinstance(expr, Var):
            reg = self.register(expr.name)
            if reg is not None:
                return reg
            dst = self.temp(depth)
            self.emit(Opcode.LD, dst=dst, src1=self.zero, imm=self.address(expr.name))
            return dst
        if isinstance(expr, Index):
            base, offset = self.element(expr.name, expr.index, depth)
            dst = self.temp(depth)
            self.emit(Opcode.LD, dst=dst, src1=base, imm=offset)
            return dst
        if isinstance(expr, Bool):
            return self.boolean(self.expr(expr.operand, depth), depth)
        if isinstance(expr, UnaryOp):
            value = self.expr(expr.operand, depth)
            dst = self.temp(depth)
            if expr.op == "-":
                self.emit(Opcode.SUB, dst=dst, src1=self.zero, src2=value)
                return dst
            return self.flip(self.boolean(value, depth), depth)
        if isinstance(expr, BinOp):
            return self.binary(expr, depth)
        raise TypeError(f"unexpected expression node {type(expr).__name__}")

    def binary(self, expr: BinOp, depth: int) -> int:
        op = expr.op
        if op in _IMM:
            left = self.expr(expr.left, depth)
            dst = self.temp(depth)
            self.emit(_IMM[op], dst=dst, src1=left, imm=expr.right.value)
            return dst
        if op in ("and", "or"):
            left = self.boolean(self.expr(expr.left, depth), depth)
            right = self.boolean(self.expr(expr.right, depth + 1), depth + 1)
            self.emit(Opcode.AND if op == "and" else Opcode.OR, dst=left, src1=left, src2=right)
            return left

        left = self.expr(expr.left, depth)
        right = self.expr(expr.right, depth + 1)
        dst = self.temp(depth)
        if op in _ALU:
            self.emit(_ALU[op], dst=dst, src1=left, src2=right)
        elif op == "<":
            self.emit(Opcode.SLT, dst=dst, src1=left, src2=right)
        elif op == ">":
            self.emit(Opcode.SLT, dst=dst, src1=right, src2=left)
        elif op == "<=":
            self.emit(Opcode.SLT, dst=dst, src1=right, src2=left)
            self.flip(dst, depth)
        elif op == ">=":
            self.emit(Opcode.SLT, dst=dst, src1=left, src2=right)
            self.flip(dst, depth)
        elif op in ("==", "!="):
            self.emit(Opcode.SUB, dst=dst, src1=left, src2=right)
            self.boolean(dst, depth)
            if op == "==":
                self.flip(dst, depth)
        else:
            raise ValueError(f"unknown operator {op}")
        return dst

    # -- statements --------------------------------------------------

    def assign(self, stmt: Assign) -> None:
        target = self.register(stmt.name)
        start = len(self.code)
        value = self.expr(stmt.value, 0)
        if target is None:
            self.emit(Opcode.ST, src1=self.zero, src2=value, imm=self.address(stmt.name))
            return
        if value == target:
            return
        last = self.code[-1] if len(self.code) > start else None
        if value == 0 and last is not None and last.opcode in WRITES_DST and last.dst == 0:
            self.code[-1] = replace(last, dst=target)
            return
        self.emit(Opcode.MOV, dst=target, src1=value)

    def store(self, stmt: Store) -> None:
        base, offset = self.element(stmt.name, stmt.index, 0)
        value = self.expr(stmt.value, 1)
        self.emit(Opcode.ST, src1=base, src2=value, imm=offset)

    def copy_words(self, source: int, targets: List[int], words: int) -> None:
        for offset in range(words):
            self.emit(Opcode.LD, dst=0, src1=self.zero, imm=source + offset)
            for target in targets:
                self.emit(Opcode.ST, src1=self.zero, src2=0, imm=target + offset)

    def merge(self, stmt: Merge) -> None:
        destination = self.address(stmt.name)
        self.emit(Opcode.LD, dst=0, src1=self.zero, imm=stmt.predicate)
        for offset in range(stmt.words):
            self.emit(Opcode.LD, dst=1, src1=self.zero, imm=stmt.nt_address + offset)
            self.emit(Opcode.LD, dst=2, src1=self.zero, imm=stmt.t_address + offset)
            self.emit(Opcode.CMOV, dst=2, src1=0, src2=1)
            self.emit(Opcode.ST, src1=self.zero, src2=2, imm=destination + offset)

    def statement(self, stmt) -> None:
        self.line = getattr(stmt, "line", 0) or self.line
        if isinstance(stmt, Declare):
            info = self.storage.ast.symbols[stmt.name]
            if info.is_array:
                base = self.address(stmt.name)
                for offset in range(info.padded):
                    self.emit(Opcode.ST, src1=self.zero, src2=self.zero, imm=base + offset)
        elif isinstance(stmt, Assign):
            self.assign(stmt)
        elif isinstance(stmt, Store):
            self.store(stmt)
        elif isinstance(stmt, ShadowCopy):
            self.copy_words(self.address(stmt.name), [stmt.nt_address, stmt.t_address], stmt.words)
        elif isinstance(stmt, EndSecure):
            self.emit(Opcode.EOSJMP)
        elif isinstance(stmt, Merge):
            self.merge(stmt)
        else:
            raise TypeError(f"unexpected statement node {type(stmt).__name__}")

    def terminator(self, term, following: Optional[int]) -> None:
        if isinstance(term, Branch):
            self.line = term.line or self.line
            cond = self.expr(term.cond, 0)
            if term.predicate_slot is not None:
                self.emit(Opcode.ST, src1=self.zero, src2=cond, imm=term.predicate_slot)
            self.emit_target(Opcode.BZ, block_label(term.other), src1=cond, secure=term.secure)
            if term.then != following:
                self.emit_target(Opcode.JMP, block_label(term.then))
        elif isinstance(term, Jump):
            if term.target != following:
                self.emit_target(Opcode.JMP, block_label(term.target))
        elif isinstance(term, Halt):
            self.emit(Opcode.HALT)
        else:
            raise TypeError(f"unexpected terminator {type(term).__name__}")

    def run(self) -> Program:
        self.emit(Opcode.LDI, dst=self.zero, imm=0)
        order = self.cfg.order
        for position, block_id in enumerate(order):
            self.block = block_id
            self.labels[block_label(block_id)] = len(self.code)
            block = self.cfg.block(block_id)
            for stmt in block.stmts:
                self.statement(stmt)
            following = order[position + 1] if position + 1 < len(order) else None
            self.terminator(block.terminator, following)

        code = list(self.code)
        for index, label in self.fixups:
            code[index] = replace(code[index], imm=self.labels[label])
        return Program(
            instructions=tuple(code),
            labels=dict(self.labels),
            entry=0,
            register_count=self.storage.register_count,
            data_size=self.storage.size,
            memory_image=self.storage.memory_image(),
            symbols=self.storage.symbols(),
        )


def codegen(
    cfg: Cfg,
    storage: Storage,
    locations: Optional[Dict[int, Dict[str, int]]] = None,
    mask_indices: bool = True,
) -> Program:
    """Select instructions for every block in layout order.

    locations overrides the memory address of a variable inside given
    blocks; secure regions use it to point path code at private copies.
    """
    if cfg.order[0] != cfg.entry:
        raise ValueError("entry block must come first in the layout")
    program = _Emitter(cfg, storage, locations, mask_indices).run()
    logger.debug("codegen: %d blocks, %d instructions, %d data words", len(cfg.order), len(program), program.data_size)
    return program
