import logging
from typing import Dict, List, Optional, Set

from sempe.services.seclang.ast import (
    Assign,
    Ast,
    BinOp,
    Bool,
    CallStmt,
    Const,
    Expr,
    For,
    If,
    Index,
    Module,
    Procedure,
    Stmt,
    Store,
    SymbolInfo,
    UnaryOp,
    Var,
    VarDecl,
    While,
    padded_size,
)
from sempe.services.seclang.parser import SecLangSyntaxError

logger = logging.getLogger(__name__)

ENTRY_PROCEDURE = "main"


def _check_recursion(module: Module) -> None:
    calls: Dict[str, List[CallStmt]] = {}
    for name, proc in module.procedures.items():
        found: List[CallStmt] = []
        _collect_calls(proc.body, found)
        calls[name] = found

    state: Dict[str, int] = {}

    def visit(name: str) -> None:
        state[name] = 1
        for call in calls.get(name, []):
            if call.proc not in module.procedures:
                raise SecLangSyntaxError(f"call to undefined procedure {call.proc}", call.line, call.column)
            mark = state.get(call.proc, 0)
            if mark == 1:
                raise SecLangSyntaxError(f"recursive call to {call.proc} is not supported", call.line, call.column)
            if mark == 0:
                visit(call.proc)
        state[name] = 2

    for name in module.procedures:
        if state.get(name, 0) == 0:
            visit(name)


def _collect_calls(body: List[Stmt], found: List[CallStmt]) -> None:
    for stmt in body:
        if isinstance(stmt, CallStmt):
            found.append(stmt)
        elif isinstance(stmt, If):
            _collect_calls(stmt.then, found)
            _collect_calls(stmt.other, found)
        elif isinstance(stmt, (While, For)):
            _collect_calls(stmt.body, found)


class _Resolver:
    def __init__(self, module: Module):
        self.module = module
        self.symbols: Dict[str, SymbolInfo] = {}
        self.globals: List[str] = []
        self.loop_vars: Set[str] = set()
        self.instances: Dict[str, int] = {}

    def resolve(self) -> List[Stmt]:
        for decl in self.module.globals:
            padded = padded_size(decl.size) if decl.size is not None else 1
            self.symbols[decl.name] = SymbolInfo(
                name=decl.name,
                source=decl.name,
                size=decl.size,
                padded=padded,
                is_global=True,
                secret=decl.secret,
                init=tuple(decl.init),
                line=decl.line,
            )
            self.globals.append(decl.name)

        main = self.module.procedures.get(ENTRY_PROCEDURE)
        if main is None:
            raise SecLangSyntaxError("program has no main procedure", 1, 1)
        if main.params:
            raise SecLangSyntaxError("main takes no parameters", main.line, main.column)
        return self._body(main.body, ENTRY_PROCEDURE, [{}])

    # -- names -----------------------------------------------------

    def _declare(
        self,
        prefix: str,
        source: str,
        scopes: List[Dict[str, str]],
        line: int,
        size: Optional[int] = None,
    ) -> str:
        if source in scopes[-1]:
            raise SecLangSyntaxError(f"{source} is already declared in this scope", line, 1)
        unique = f"{prefix}.{source}"
        suffix = 2
        while unique in self.symbols:
            unique = f"{prefix}.{source}.{suffix}"
            suffix += 1
        padded = padded_size(size) if size is not None else 1
        self.symbols[unique] = SymbolInfo(name=unique, source=source, size=size, padded=padded, line=line)
        scopes[-1][source] = unique
        return unique

    def _lookup(self, source: str, scopes: List[Dict[str, str]], line: int) -> str:
        for scope in reversed(scopes):
            if source in scope:
                return scope[source]
        if source in self.symbols and self.symbols[source].is_global:
            return source
        raise SecLangSyntaxError(f"undeclared variable {source}", line, 1)

    def _scalar(self, source: str, scopes: List[Dict[str, str]], line: int) -> str:
        name = self._lookup(source, scopes, line)
        if self.symbols[name].is_array:
            raise SecLangSyntaxError(f"array {source} used as a scalar", line, 1)
        return name

    def _array(self, source: str, scopes: List[Dict[str, str]], line: int) -> str:
        name = self._lookup(source, scopes, line)
        if not self.symbols[name].is_array:
            raise SecLangSyntaxError(f"scalar {source} indexed as an array", line, 1)
        return name

    # -- expressions -----------------------------------------------

    def _expr(self, expr: Expr, scopes: List[Dict[str, str]], line: int) -> Expr:
        if isinstance(expr, Const):
            return expr
        if isinstance(expr, Var):
            return Var(self._scalar(expr.name, scopes, line))
        if isinstance(expr, Index):
            return Index(self._array(expr.name, scopes, line), self._expr(expr.index, scopes, line))
        if isinstance(expr, BinOp):
            return BinOp(expr.op, self._expr(expr.left, scopes, line), self._expr(expr.right, scopes, line))
        if isinstance(expr, UnaryOp):
            return UnaryOp(expr.op, self._expr(expr.operand, scopes, line))
        if isinstance(expr, Bool):
            return Bool(self._expr(expr.operand, scopes, line))
        raise TypeError(f"unexpected expression node {type(expr).__name__}")

    # -- statements ------------------------------------------------

    def _body(self, body: List[Stmt], prefix: str, scopes: List[Dict[str, str]]) -> List[Stmt]:
        out: List[Stmt] = []
        for stmt in body:
            out.extend(self._stmt(stmt, prefix, scopes))
        return out

    def _nested(self, body: List[Stmt], prefix: str, scopes: List[Dict[str, str]]) -> List[Stmt]:
        scopes.append({})
        try:
            return self._body(body, prefix, scopes)
        finally:
            scopes.pop()

    def _stmt(self, stmt: Stmt, prefix: str, scopes: List[Dict[str, str]]) -> List[Stmt]:
        line = stmt.line
        if isinstance(stmt, VarDecl):
            init = self._expr(stmt.init, scopes, line) if stmt.init is not None else None
            unique = self._declare(prefix, stmt.name, scopes, line, stmt.size)
            return [VarDecl(unique, init, line, size=stmt.size)]
        if isinstance(stmt, Assign):
            target = self._scalar(stmt.name, scopes, line)
            if target in self.loop_vars:
                raise SecLangSyntaxError(f"loop variable {stmt.name} cannot be assigned", line, 1)
            return [Assign(target, self._expr(stmt.value, scopes, line), line)]
        if isinstance(stmt, Store):
            target = self._array(stmt.name, scopes, line)
            return [Store(target, self._expr(stmt.index, scopes, line), self._expr(stmt.value, scopes, line), line)]
        if isinstance(stmt, If):
            cond = self._expr(stmt.cond, scopes, line)
            then = self._nested(stmt.then, prefix, scopes)
            other = self._nested(stmt.other, prefix, scopes)
            return [If(cond, then, other, line)]
        if isinstance(stmt, While):
            cond = self._expr(stmt.cond, scopes, line)
            return [While(cond, self._nested(stmt.body, prefix, scopes), line)]
        if isinstance(stmt, For):
            lo = self._expr(stmt.lo, scopes, line)
            hi = self._expr(stmt.hi, scopes, line)
            scopes.append({})
            try:
                bound = self._declare(prefix, f"{stmt.var}.end", scopes, line)
                var = self._declare(prefix, stmt.var, scopes, line)
                self.loop_vars.add(var)
                body = self._body(stmt.body, prefix, scopes)
            finally:
                scopes.pop()
            return [For(var, lo, hi, body, line, bound)]
        if isinstance(stmt, CallStmt):
            return self._inline(stmt, prefix, scopes)
        raise TypeError(f"unexpected statement node {type(stmt).__name__}")

    def _inline(self, call: CallStmt, prefix: str, scopes: List[Dict[str, str]]) -> List[Stmt]:
        proc: Procedure = self.module.procedures[call.proc]
        if len(call.args) != len(proc.params):
            raise SecLangSyntaxError(
                f"{call.proc} takes {len(proc.params)} arguments, got {len(call.args)}",
                call.line,
                call.column,
            )
        if call.target is not None and proc.result is None:
            raise SecLangSyntaxError(f"{call.proc} does not return a value", call.line, call.column)

        args = [self._expr(arg, scopes, call.line) for arg in call.args]
        count = self.instances.get(call.proc, 0) + 1
        self.instances[call.proc] = count
        callee_prefix = f"{call.proc}{count}"
        callee_scopes: List[Dict[str, str]] = [{}]

        out: List[Stmt] = []
        for param, arg in zip(proc.params, args):
            out.append(VarDecl(self._declare(callee_prefix, param, callee_scopes, call.line), arg, call.line))
        out.extend(self._body(proc.body, callee_prefix, callee_scopes))
        if call.target is not None:
            result = self._expr(proc.result, callee_scopes, proc.line)
            if call.declare:
                out.append(VarDecl(self._declare(prefix, call.target, scopes, call.line), result, call.line))
            else:
                target = self._scalar(call.target, scopes, call.line)
                if target in self.loop_vars:
                    raise SecLangSyntaxError(f"loop variable {call.target} cannot be assigned", call.line, 1)
                out.append(Assign(target, result, call.line))
        logger.debug("inlined %s as %s", call.proc, callee_prefix)
        return out


def resolve(module: Module, text: str = "") -> Ast:
    _check_recursion(module)
    resolver = _Resolver(module)
    body = resolver.resolve()
    return Ast(symbols=resolver.symbols, globals=resolver.globals, body=body, text=text)
