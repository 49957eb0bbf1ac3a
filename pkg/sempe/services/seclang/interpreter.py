"""Direct evaluator for resolved SecLang programs.

Used as the semantic reference for the compiled pipelines: arithmetic is
64-bit two's complement and array indices are masked to the padded extent,
exactly as in generated code.
"""

from typing import Dict, List, Mapping, Optional

from sempe.services.isa.arith import boolean, div_trunc, shl, shr, slt, wrap64
from sempe.services.isa.program import InputValue
from sempe.services.seclang.ast import (
    Assign,
    Ast,
    BinOp,
    Bool,
    Const,
    Expr,
    For,
    If,
    Index,
    Stmt,
    Store,
    UnaryOp,
    Var,
    VarDecl,
    While,
)

DEFAULT_STEP_LIMIT = 5_000_000


class InterpreterError(RuntimeError):
    pass


class _Machine:
    def __init__(self, ast: Ast, inputs: Mapping[str, InputValue], step_limit: int):
        self.ast = ast
        self.step_limit = step_limit
        self.steps = 0
        self.scalars: Dict[str, int] = {}
        self.arrays: Dict[str, List[int]] = {}
        for name in ast.globals:
            info = ast.symbols[name]
            if info.is_array:
                values = list(info.init) + [0] * (info.padded - len(info.init))
                self.arrays[name] = [wrap64(value) for value in values]
            else:
                self.scalars[name] = wrap64(info.init[0]) if info.init else 0
        for name, value in inputs.items():
            info = ast.symbols.get(name)
            if info is None or not info.is_global:
                raise ValueError(f"unknown global: {name}")
            if info.is_array:
                values = [value] if isinstance(value, int) else list(value)
                if len(values) > info.size:
                    raise ValueError(f"{len(values)} values do not fit array {name} of size {info.size}")
                for offset, item in enumerate(values):
                    self.arrays[name][offset] = wrap64(item)
            else:
                if not isinstance(value, int):
                    raise ValueError(f"scalar {name} takes a single value")
                self.scalars[name] = wrap64(value)

    def _tick(self) -> None:
        self.steps += 1
        if self.steps > self.step_limit:
            raise InterpreterError(f"step limit of {self.step_limit} exceeded")

    def _slot(self, name: str, index: int) -> int:
        return index & (self.ast.symbols[name].padded - 1)

    def eval(self, expr: Expr) -> int:
        if isinstance(expr, Const):
            return wrap64(expr.value)
        if isinstance(expr, Var):
            return self.scalars.get(expr.name, 0)
        if isinstance(expr, Index):
            return self.arrays[expr.name][self._slot(expr.name, self.eval(expr.index))]
        if isinstance(expr, Bool):
            return boolean(self.eval(expr.operand))
        if isinstance(expr, UnaryOp):
            value = self.eval(expr.operand)
            return wrap64(-value) if expr.op == "-" else 1 - boolean(value)
        if isinstance(expr, BinOp):
            left = self.eval(expr.left)
            right = self.eval(expr.right)
            return _binary(expr.op, left, right)
        raise TypeError(f"unexpected expression node {type(expr).__name__}")

    def run(self, body: List[Stmt]) -> None:
        for stmt in body:
            self._tick()
            if isinstance(stmt, VarDecl):
                if stmt.size is not None:
                    self.arrays[stmt.name] = [0] * self.ast.symbols[stmt.name].padded
                else:
                    self.scalars[stmt.name] = self.eval(stmt.init) if stmt.init is not None else 0
            elif isinstance(stmt, Assign):
                self.scalars[stmt.name] = self.eval(stmt.value)
            elif isinstance(stmt, Store):
                slot = self._slot(stmt.name, self.eval(stmt.index))
                self.arrays[stmt.name][slot] = self.eval(stmt.value)
            elif isinstance(stmt, If):
                self.run(stmt.then if self.eval(stmt.cond) != 0 else stmt.other)
            elif isinstance(stmt, While):
                while self.eval(stmt.cond) != 0:
                    self._tick()
                    self.run(stmt.body)
            elif isinstance(stmt, For):
                self.scalars[stmt.var] = self.eval(stmt.lo)
                self.scalars[stmt.bound] = self.eval(stmt.hi)
                while self.scalars[stmt.var] < self.scalars[stmt.bound]:
                    self._tick()
                    self.run(stmt.body)
                    self.scalars[stmt.var] = wrap64(self.scalars[stmt.var] + 1)
            else:
                raise TypeError(f"unexpected statement node {type(stmt).__name__}")

    def state(self) -> Dict[str, List[int]]:
        result: Dict[str, List[int]] = {}
        for name in self.ast.globals:
            info = self.ast.symbols[name]
            if info.is_array:
                result[name] = list(self.arrays[name][: info.size])
            else:
                result[name] = [self.scalars[name]]
        return result


def _binary(op: str, left: int, right: int) -> int:
    if op == "+":
        return wrap64(left + right)
    if op == "-":
        return wrap64(left - right)
    if op == "*":
        return wrap64(left * right)
    if op == "/":
        return div_trunc(left, right)
    if op == "&":
        return wrap64(left & right)
    if op == "|":
        return wrap64(left | right)
    if op == "^":
        return wrap64(left ^ right)
    if op == "<<":
        return shl(left, right)
    if op == ">>":
        return shr(left, right)
    if op == "<":
        return slt(left, right)
    if op == ">":
        return slt(right, left)
    if op == "<=":
        return 1 - slt(right, left)
    if op == ">=":
        return 1 - slt(left, right)
    if op == "==":
        return 1 if left == right else 0
    if op == "!=":
        return 1 if left != right else 0
    if op == "and":
        return boolean(left) & boolean(right)
    if op == "or":
        return boolean(left) | boolean(right)
    raise ValueError(f"unknown operator {op}")


def interpret(
    ast: Ast,
    inputs: Optional[Mapping[str, InputValue]] = None,
    step_limit: int = DEFAULT_STEP_LIMIT,
) -> Dict[str, List[int]]:
    machine = _Machine(ast, inputs or {}, step_limit)
    machine.run(ast.body)
    return machine.state()
