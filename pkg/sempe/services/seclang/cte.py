"""Constant-time expression rewrite.

Secret conditionals are replaced by guard arithmetic: each secret
condition is booleanized, the path condition of every arm is kept in a
guard temporary, and each assignment under a guard g becomes
x = g*e + (1-g)*x. Public control flow is kept as is.

Variables that steer the kept control flow (loop bounds, array indices,
public conditions) cannot be predicated: their value would then differ
between a taken and a skipped arm. They stay unpredicated and must be
declared under the guard that assigns them.
"""

import logging
from dataclasses import replace
from typing import Dict, List, Optional, Set

from sempe.services.seclang.ast import (
    COMPARE_OPS,
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
    expr_reads,
    index_reads,
    walk_expr,
    walk_stmts,
)
from sempe.services.seclang.codegen import CompileRejection
from sempe.services.seclang.taint import TaintState

logger = logging.getLogger(__name__)

_GLOBAL = "<global>"


def _mul(left: Expr, right: Expr) -> Expr:
    return BinOp("*", left, right)


def _complement(value: Expr) -> Expr:
    return BinOp("-", Const(1), value)


def _select(guard: Expr, value: Expr, current: Expr) -> Expr:
    return BinOp("+", _mul(guard, value), _mul(_complement(guard), current))


def control_set(body: List[Stmt], secret_origins: Set[Stmt]) -> Set[str]:
    """Variables whose values decide public control flow or addressing."""
    control: Set[str] = set()
    for stmt in walk_stmts(body):
        if isinstance(stmt, For):
            control |= {stmt.var, stmt.bound} | expr_reads(stmt.lo) | expr_reads(stmt.hi)
            control |= index_reads(stmt.lo) | index_reads(stmt.hi)
        elif isinstance(stmt, While):
            control |= expr_reads(stmt.cond)
        elif isinstance(stmt, If):
            control |= index_reads(stmt.cond)
            if stmt not in secret_origins:
                control |= expr_reads(stmt.cond)
        elif isinstance(stmt, VarDecl) and stmt.init is not None:
            control |= index_reads(stmt.init)
        elif isinstance(stmt, Assign):
            control |= index_reads(stmt.value)
        elif isinstance(stmt, Store):
            control |= expr_reads(stmt.index) | index_reads(stmt.value)

    changed = True
    while changed:
        changed = False
        for stmt in walk_stmts(body):
            if isinstance(stmt, (VarDecl, Assign, Store)) and stmt.name in control:
                value = stmt.init if isinstance(stmt, VarDecl) else stmt.value
                sources = expr_reads(value) if value is not None else set()
                if not sources <= control:
                    control |= sources
                    changed = True
    return control


class _CteRewriter:
    def __init__(self, ast: Ast, taint: TaintState):
        self.taint = taint
        self.ast = Ast(symbols=dict(ast.symbols), globals=list(ast.globals), body=[], text=ast.text)
        self.control = control_set(ast.body, taint.secret_origins)
        self.declared_under: Dict[str, Optional[str]] = {name: _GLOBAL for name in ast.globals}
        self.diagnostics: List[str] = []

    def reject(self, line: int, message: str) -> None:
        self.diagnostics.append(f"line {line}: {message}")

    def check_indices(self, expr: Optional[Expr], line: int) -> None:
        if expr is None:
            return
        for node in walk_expr(expr):
            if isinstance(node, Index) and self.taint.reads_secret(expr_reads(node.index)):
                self.reject(line, f"index into {self.ast.symbols[node.name].source} depends on a secret")

    def temp(self, hint: str, value: Expr, guard: Optional[str], out: List[Stmt], line: int) -> Var:
        name = self.ast.add_local(hint, line)
        self.declared_under[name] = guard
        out.append(VarDecl(name, value, line))
        return Var(name)

    # -- guards ------------------------------------------------------

    def algebra(self, cond: Expr, guard: Optional[str], out: List[Stmt], line: int) -> Expr:
        """0/1 expression equal to (cond != 0), built from booleanized leaves."""
        if isinstance(cond, BinOp) and cond.op == "and":
            return _mul(self.algebra(cond.left, guard, out, line), self.algebra(cond.right, guard, out, line))
        if isinstance(cond, BinOp) and cond.op == "or":
            left = self.algebra(cond.left, guard, out, line)
            right = self.algebra(cond.right, guard, out, line)
            both = _mul(left, right)
            only_left = _mul(left, _complement(right))
            only_right = _mul(_complement(left), right)
            return BinOp("+", BinOp("+", both, only_left), only_right)
        if isinstance(cond, UnaryOp) and cond.op == "not":
            return _complement(self.algebra(cond.operand, guard, out, line))
        leaf = cond if isinstance(cond, BinOp) and cond.op in COMPARE_OPS else Bool(cond)
        return self.temp("cte.b", leaf, guard, out, line)

    def secret_if(self, stmt: If, guard: Optional[str], out: List[Stmt]) -> None:
        line = stmt.line
        cond = self.algebra(stmt.cond, guard, out, line)
        if guard is not None and not isinstance(cond, Var):
            cond = self.temp("cte.c", cond, guard, out, line)
        outer = Var(guard) if guard is not None else None

        # both guards exist before either arm may change what cond reads
        then_guard = self.temp("cte.g", _mul(outer, cond) if outer else cond, guard, out, line)
        other_guard = None
        if stmt.other:
            other_value = _mul(outer, _complement(cond)) if outer else _complement(then_guard)
            other_guard = self.temp("cte.g", other_value, guard, out, line)

        out.extend(self.body(stmt.then, then_guard.name))
        if other_guard is not None:
            out.extend(self.body(stmt.other, other_guard.name))

    # -- statements --------------------------------------------------

    def unpredicated(self, name: str, guard: Optional[str], line: int) -> bool:
        if guard is None:
            return True
        if name not in self.control:
            return False
        if self.declared_under.get(name) != guard:
            source = self.ast.symbols[name].source
            self.reject(line, f"{source} steers control flow or addressing but is assigned under a secret condition")
        return True

    def body(self, stmts: List[Stmt], guard: Optional[str]) -> List[Stmt]:
        out: List[Stmt] = []
        for stmt in stmts:
            self.stmt(stmt, guard, out)
        return out

    def stmt(self, stmt: Stmt, guard: Optional[str], out: List[Stmt]) -> None:
        line = stmt.line
        if isinstance(stmt, VarDecl):
            self.check_indices(stmt.init, line)
            self.declared_under[stmt.name] = guard
            if guard is None or stmt.init is None or stmt.name in self.control:
                out.append(stmt)
            else:
                out.append(VarDecl(stmt.name, _mul(Var(guard), stmt.init), line))
        elif isinstance(stmt, Assign):
            self.check_indices(stmt.value, line)
            if self.unpredicated(stmt.name, guard, line):
                out.append(stmt)
            else:
                out.append(Assign(stmt.name, _select(Var(guard), stmt.value, Var(stmt.name)), line))
        elif isinstance(stmt, Store):
            self.check_indices(stmt.value, line)
            self.check_indices(Index(stmt.name, stmt.index), line)
            if self.unpredicated(stmt.name, guard, line):
                out.append(stmt)
            else:
                value = _select(Var(guard), stmt.value, Index(stmt.name, stmt.index))
                out.append(Store(stmt.name, stmt.index, value, line))
        elif isinstance(stmt, If):
            self.check_indices(stmt.cond, line)
            if stmt in self.taint.secret_origins:
                self.secret_if(stmt, guard, out)
            else:
                out.append(If(stmt.cond, self.body(stmt.then, guard), self.body(stmt.other, guard), line))
        elif isinstance(stmt, While):
            if stmt in self.taint.secret_origins:
                self.reject(line, "loop condition depends on a secret")
            elif guard is not None:
                self.reject(line, "while loop under a secret condition has no constant-time form")
            self.check_indices(stmt.cond, line)
            out.append(While(stmt.cond, self.body(stmt.body, guard), line))
        elif isinstance(stmt, For):
            if stmt in self.taint.secret_origins:
                self.reject(line, "loop bound depends on a secret")
            self.check_indices(stmt.lo, line)
            self.check_indices(stmt.hi, line)
            self.declared_under[stmt.var] = guard
            self.declared_under[stmt.bound] = guard
            out.append(replace(stmt, body=self.body(stmt.body, guard)))
        else:
            raise TypeError(f"unexpected statement node {type(stmt).__name__}")


def transform_cte(ast: Ast, taint: TaintState) -> Ast:
    """Rewrite ast so that no branch depends on a secret.

    Raises CompileRejection for secret loop bounds, secret array
    indices, while loops under a secret condition and control variables
    assigned under a guard they were not declared under.
    """
    rewriter = _CteRewriter(ast, taint)
    body = rewriter.body(ast.body, None)
    if rewriter.diagnostics:
        logger.info("cte transform rejected: %s", "; ".join(rewriter.diagnostics))
        raise CompileRejection(rewriter.diagnostics)
    rewriter.ast.body = body
    return rewriter.ast
