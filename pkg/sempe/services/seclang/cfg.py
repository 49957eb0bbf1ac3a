from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Set, Tuple, Union

from sempe.services.seclang.ast import (
    Assign,
    Ast,
    BinOp,
    Const,
    Expr,
    For,
    If,
    Stmt,
    Store,
    Var,
    VarDecl,
    While,
    expr_reads,
)

EDGE_FALLTHROUGH = "fallthrough"
EDGE_TAKEN = "taken"
EDGE_JUMP = "jump"


@dataclass(eq=False)
class Declare:
    """Start of a local's scope. Local arrays are zero-filled here."""

    name: str
    line: int = 0


@dataclass(eq=False)
class ShadowCopy:
    """Copy a variable into both private copies of a secure region."""

    name: str
    nt_address: int
    t_address: int
    words: int


@dataclass(eq=False)
class EndSecure:
    line: int = 0


@dataclass(eq=False)
class Merge:
    """Select the copy written by the path that ran, using the stored predicate."""

    name: str
    predicate: int
    nt_address: int
    t_address: int
    words: int


CfgStmt = Union[Declare, Assign, Store, ShadowCopy, EndSecure, Merge]


@dataclass(eq=False)
class Branch:
    cond: Expr
    then: int
    other: int
    origin: Optional[Stmt] = None
    loop: bool = False
    secure: bool = False
    line: int = 0
    # memory word receiving the condition value of a secure branch
    predicate_slot: Optional[int] = None


@dataclass(eq=False)
class Jump:
    target: int


@dataclass(eq=False)
class Halt:
    pass


Terminator = Union[Branch, Jump, Halt]


@dataclass(eq=False)
class BasicBlock:
    id: int
    stmts: List[CfgStmt] = field(default_factory=list)
    terminator: Terminator = field(default_factory=Halt)

    @property
    def successors(self) -> List[int]:
        term = self.terminator
        if isinstance(term, Branch):
            return [term.then] if term.then == term.other else [term.then, term.other]
        if isinstance(term, Jump):
            return [term.target]
        return []


@dataclass
class Cfg:
    blocks: Dict[int, BasicBlock]
    order: List[int]
    entry: int
    exit: int
    ast: Ast

    def block(self, block_id: int) -> BasicBlock:
        return self.blocks[block_id]

    def successors(self, block_id: int) -> List[int]:
        return self.blocks[block_id].successors

    def predecessors(self) -> Dict[int, List[int]]:
        preds: Dict[int, List[int]] = {block_id: [] for block_id in self.order}
        for block_id in self.order:
            for succ in self.successors(block_id):
                if block_id not in preds[succ]:
                    preds[succ].append(block_id)
        return preds

    def edges(self) -> List[Tuple[int, int, str]]:
        result: List[Tuple[int, int, str]] = []
        for block_id in self.order:
            term = self.blocks[block_id].terminator
            if isinstance(term, Branch):
                result.append((block_id, term.then, EDGE_FALLTHROUGH))
                result.append((block_id, term.other, EDGE_TAKEN))
            elif isinstance(term, Jump):
                result.append((block_id, term.target, EDGE_JUMP))
        return result

    def branches(self) -> List[int]:
        return [block_id for block_id in self.order if isinstance(self.blocks[block_id].terminator, Branch)]


class _Builder:
    def __init__(self):
        self.blocks: Dict[int, BasicBlock] = {}
        self.order: List[int] = []

    def new_block(self) -> BasicBlock:
        block = BasicBlock(id=len(self.order))
        self.blocks[block.id] = block
        self.order.append(block.id)
        return block

    def lower_body(self, body: List[Stmt], current: BasicBlock) -> BasicBlock:
        for stmt in body:
            current = self.lower_stmt(stmt, current)
        return current

    def lower_stmt(self, stmt: Stmt, current: BasicBlock) -> BasicBlock:
        if isinstance(stmt, VarDecl):
            current.stmts.append(Declare(stmt.name, stmt.line))
            if stmt.size is not None:
                return current
            value = stmt.init if stmt.init is not None else Const(0)
            current.stmts.append(Assign(stmt.name, value, stmt.line))
            return current
        if isinstance(stmt, (Assign, Store)):
            current.stmts.append(stmt)
            return current
        if isinstance(stmt, If):
            then_block = self.new_block()
            then_end = self.lower_body(stmt.then, then_block)
            other_block = self.new_block() if stmt.other else None
            other_end = self.lower_body(stmt.other, other_block) if other_block else None
            join = self.new_block()
            current.terminator = Branch(
                cond=stmt.cond,
                then=then_block.id,
                other=other_block.id if other_block else join.id,
                origin=stmt,
                line=stmt.line,
            )
            then_end.terminator = Jump(join.id)
            if other_end is not None:
                other_end.terminator = Jump(join.id)
            return join
        if isinstance(stmt, While):
            header = self.new_block()
            current.terminator = Jump(header.id)
            body = self.new_block()
            body_end = self.lower_body(stmt.body, body)
            body_end.terminator = Jump(header.id)
            exit_block = self.new_block()
            header.terminator = Branch(stmt.cond, body.id, exit_block.id, origin=stmt, loop=True, line=stmt.line)
            return exit_block
        if isinstance(stmt, For):
            current.stmts.append(Declare(stmt.var, stmt.line))
            current.stmts.append(Assign(stmt.var, stmt.lo, stmt.line))
            current.stmts.append(Declare(stmt.bound, stmt.line))
            current.stmts.append(Assign(stmt.bound, stmt.hi, stmt.line))
            header = self.new_block()
            current.terminator = Jump(header.id)
            body = self.new_block()
            body_end = self.lower_body(stmt.body, body)
            body_end.stmts.append(Assign(stmt.var, BinOp("+", Var(stmt.var), Const(1)), stmt.line))
            body_end.terminator = Jump(header.id)
            exit_block = self.new_block()
            cond = BinOp("<", Var(stmt.var), Var(stmt.bound))
            header.terminator = Branch(cond, body.id, exit_block.id, origin=stmt, loop=True, line=stmt.line)
            return exit_block
        raise TypeError(f"unexpected statement node {type(stmt).__name__}")


def _thread_empty_jumps(cfg: Cfg) -> None:
    """Remove blocks holding nothing but a jump by retargeting their predecessors."""
    changed = True
    while changed:
        changed = False
        for block_id in list(cfg.order):
            block = cfg.blocks[block_id]
            if block_id in (cfg.entry, cfg.exit) or block.stmts or not isinstance(block.terminator, Jump):
                continue
            target = block.terminator.target
            if target == block_id:
                continue
            for other_id in cfg.order:
                term = cfg.blocks[other_id].terminator
                if isinstance(term, Jump) and term.target == block_id:
                    term.target = target
                elif isinstance(term, Branch):
                    if term.then == block_id:
                        term.then = target
                    if term.other == block_id:
                        term.other = target
            cfg.order.remove(block_id)
            del cfg.blocks[block_id]
            changed = True


def _renumber(cfg: Cfg) -> Cfg:
    mapping = {old: new for new, old in enumerate(cfg.order)}
    blocks: Dict[int, BasicBlock] = {}
    for old in cfg.order:
        block = cfg.blocks[old]
        block.id = mapping[old]
        term = block.terminator
        if isinstance(term, Branch):
            term.then = mapping[term.then]
            term.other = mapping[term.other]
        elif isinstance(term, Jump):
            term.target = mapping[term.target]
        blocks[block.id] = block
    return Cfg(
        blocks=blocks,
        order=list(range(len(cfg.order))),
        entry=mapping[cfg.entry],
        exit=mapping[cfg.exit],
        ast=cfg.ast,
    )


def _prune_unreachable(cfg: Cfg) -> None:
    seen: Set[int] = set()
    stack = [cfg.entry]
    while stack:
        block_id = stack.pop()
        if block_id in seen:
            continue
        seen.add(block_id)
        stack.extend(cfg.successors(block_id))
    for block_id in [b for b in cfg.order if b not in seen]:
        cfg.order.remove(block_id)
        del cfg.blocks[block_id]


def lower(ast: Ast) -> Cfg:
    builder = _Builder()
    entry = builder.new_block()
    exit_block = builder.lower_body(ast.body, entry)
    exit_block.terminator = Halt()
    cfg = Cfg(blocks=builder.blocks, order=builder.order, entry=entry.id, exit=exit_block.id, ast=ast)
    _thread_empty_jumps(cfg)
    _prune_unreachable(cfg)
    return _renumber(cfg)


def clone(cfg: Cfg) -> Cfg:
    """Copy blocks and terminators so passes can rewrite them freely."""
    blocks: Dict[int, BasicBlock] = {}
    for block_id, block in cfg.blocks.items():
        blocks[block_id] = BasicBlock(id=block_id, stmts=list(block.stmts), terminator=replace(block.terminator))
    return Cfg(blocks=blocks, order=list(cfg.order), entry=cfg.entry, exit=cfg.exit, ast=cfg.ast)


# -- liveness --------------------------------------------------------------


def stmt_uses(stmt: CfgStmt) -> Set[str]:
    if isinstance(stmt, Assign):
        return expr_reads(stmt.value)
    if isinstance(stmt, Store):
        return expr_reads(stmt.index) | expr_reads(stmt.value)
    return set()


def _transfer(block: BasicBlock, live_out: Set[str]) -> Set[str]:
    live = set(live_out)
    if isinstance(block.terminator, Branch):
        live |= expr_reads(block.terminator.cond)
    for stmt in reversed(block.stmts):
        if isinstance(stmt, Declare):
            live.discard(stmt.name)
        elif isinstance(stmt, Assign):
            live.discard(stmt.name)
            live |= stmt_uses(stmt)
        elif isinstance(stmt, Store):
            # element stores leave the rest of the array live
            live |= stmt_uses(stmt)
    return live


@dataclass
class Liveness:
    live_in: Dict[int, Set[str]]
    live_out: Dict[int, Set[str]]


def liveness(cfg: Cfg) -> Liveness:
    live_in: Dict[int, Set[str]] = {block_id: set() for block_id in cfg.order}
    live_out: Dict[int, Set[str]] = {block_id: set() for block_id in cfg.order}
    exit_live = set(cfg.ast.globals)
    changed = True
    while changed:
        changed = False
        for block_id in reversed(cfg.order):
            block = cfg.blocks[block_id]
            out: Set[str] = set(exit_live) if block_id == cfg.exit else set()
            for succ in block.successors:
                out |= live_in[succ]
            new_in = _transfer(block, out)
            if out != live_out[block_id] or new_in != live_in[block_id]:
                live_out[block_id] = out
                live_in[block_id] = new_in
                changed = True
    return Liveness(live_in=live_in, live_out=live_out)
