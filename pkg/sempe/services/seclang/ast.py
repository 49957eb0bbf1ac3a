from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Set, Tuple, Union

ARITH_OPS = ("+", "-", "*")
COMPARE_OPS = ("<", "<=", ">", ">=", "==", "!=")
LOGIC_OPS = ("and", "or")


# -- expressions -------------------------------------------------------


@dataclass(frozen=True)
class Const:
    value: int


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Index:
    name: str
    index: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class UnaryOp:
    op: str  # "-" or "not"
    operand: "Expr"


@dataclass(frozen=True)
class Bool:
    """(value != 0) normalization."""

    operand: "Expr"


Expr = Union[Const, Var, Index, BinOp, UnaryOp, Bool]


# -- statements --------------------------------------------------------


@dataclass(eq=False)
class VarDecl:
    name: str
    init: Optional[Expr] = None
    line: int = 0
    # set for local arrays, which start zero-filled
    size: Optional[int] = None


@dataclass(eq=False)
class Assign:
    name: str
    value: Expr
    line: int = 0


@dataclass(eq=False)
class Store:
    name: str
    index: Expr
    value: Expr
    line: int = 0


@dataclass(eq=False)
class If:
    cond: Expr
    then: List["Stmt"] = field(default_factory=list)
    other: List["Stmt"] = field(default_factory=list)
    line: int = 0


@dataclass(eq=False)
class While:
    cond: Expr
    body: List["Stmt"] = field(default_factory=list)
    line: int = 0


@dataclass(eq=False)
class For:
    var: str
    lo: Expr
    hi: Expr
    body: List["Stmt"] = field(default_factory=list)
    line: int = 0
    # hidden local holding the end bound, evaluated once
    bound: str = ""


@dataclass(eq=False)
class CallStmt:
    proc: str
    args: List[Expr] = field(default_factory=list)
    target: Optional[str] = None
    declare: bool = False
    line: int = 0
    column: int = 0


Stmt = Union[VarDecl, Assign, Store, If, While, For, CallStmt]


# -- parse tree before resolution --------------------------------------


@dataclass
class GlobalDecl:
    name: str
    size: Optional[int] = None
    init: List[int] = field(default_factory=list)
    secret: bool = False
    line: int = 0
    column: int = 0


@dataclass
class Procedure:
    name: str
    params: List[str]
    body: List[Stmt]
    result: Optional[Expr] = None
    line: int = 0
    column: int = 0


@dataclass
class Module:
    globals: List[GlobalDecl] = field(default_factory=list)
    procedures: Dict[str, Procedure] = field(default_factory=dict)


# -- resolved program --------------------------------------------------


@dataclass(frozen=True)
class SymbolInfo:
    name: str
    source: str
    size: Optional[int] = None
    padded: int = 1
    is_global: bool = False
    secret: bool = False
    init: Tuple[int, ...] = ()
    line: int = 0

    @property
    def is_array(self) -> bool:
        return self.size is not None


@dataclass
class Ast:
    """A parsed program with unique symbol names and every call inlined into main."""

    symbols: Dict[str, SymbolInfo]
    globals: List[str]
    body: List[Stmt]
    text: str = ""

    @property
    def secret_names(self) -> List[str]:
        return [name for name in self.globals if self.symbols[name].secret]

    @property
    def public_globals(self) -> List[str]:
        return [name for name in self.globals if not self.symbols[name].secret]

    def fresh_name(self, hint: str) -> str:
        index = 1
        while f"{hint}.{index}" in self.symbols:
            index += 1
        return f"{hint}.{index}"

    def add_local(self, hint: str, line: int = 0) -> str:
        name = self.fresh_name(hint)
        self.symbols[name] = SymbolInfo(name=name, source=hint, line=line)
        return name


def padded_size(size: int) -> int:
    padded = 1
    while padded < size:
        padded <<= 1
    return padded


def walk_expr(expr: Expr) -> Iterator[Expr]:
    yield expr
    if isinstance(expr, Index):
        yield from walk_expr(expr.index)
    elif isinstance(expr, BinOp):
        yield from walk_expr(expr.left)
        yield from walk_expr(expr.right)
    elif isinstance(expr, (UnaryOp, Bool)):
        yield from walk_expr(expr.operand)


def expr_reads(expr: Expr) -> Set[str]:
    names: Set[str] = set()
    for node in walk_expr(expr):
        if isinstance(node, Var):
            names.add(node.name)
        elif isinstance(node, Index):
            names.add(node.name)
    return names


def index_reads(expr: Expr) -> Set[str]:
    """Names read by array index sub-expressions of expr."""
    names: Set[str] = set()
    for node in walk_expr(expr):
        if isinstance(node, Index):
            names |= expr_reads(node.index)
    return names


def has_array_read(expr: Expr) -> bool:
    return any(isinstance(node, Index) for node in walk_expr(expr))


def walk_stmts(stmts: List[Stmt]) -> Iterator[Stmt]:
    for stmt in stmts:
        yield stmt
        if isinstance(stmt, If):
            yield from walk_stmts(stmt.then)
            yield from walk_stmts(stmt.other)
        elif isinstance(stmt, (While, For)):
            yield from walk_stmts(stmt.body)


def count_arith_ops(stmts: List[Stmt]) -> int:
    """Number of +, - and * operators in all expressions of stmts."""

    def in_expr(expr: Optional[Expr]) -> int:
        if expr is None:
            return 0
        return sum(1 for node in walk_expr(expr) if isinstance(node, BinOp) and node.op in ARITH_OPS)

    total = 0
    for stmt in walk_stmts(stmts):
        if isinstance(stmt, VarDecl):
            total += in_expr(stmt.init)
        elif isinstance(stmt, Assign):
            total += in_expr(stmt.value)
        elif isinstance(stmt, Store):
            total += in_expr(stmt.index) + in_expr(stmt.value)
        elif isinstance(stmt, (If, While)):
            total += in_expr(stmt.cond)
        elif isinstance(stmt, For):
            total += in_expr(stmt.lo) + in_expr(stmt.hi)
    return total
