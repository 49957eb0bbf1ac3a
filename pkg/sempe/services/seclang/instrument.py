"""Secure multi-path instrumentation.

Every secret branch becomes a secure branch. Its region gets an exit
block placed in front of the join: an end-of-secure marker followed by
one merge per shadowed variable. Memory variables written inside the
region and still needed afterwards are redirected to two private copies,
one per path, and merged back once both paths have run.
"""

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Set, Tuple

from sempe.services.isa.opcodes import Opcode
from sempe.services.isa.program import Program
from sempe.services.seclang.ast import Assign, Const, Expr, Index, Store, expr_reads, walk_expr
from sempe.services.seclang.cfg import (
    BasicBlock,
    Branch,
    Cfg,
    EndSecure,
    Jump,
    Liveness,
    Merge,
    ShadowCopy,
    clone,
    liveness,
)
from sempe.services.seclang.codegen import CompileRejection, codegen
from sempe.services.seclang.postdom import nesting_depths, nesting_parents
from sempe.services.seclang.storage import Storage
from sempe.services.seclang.taint import TaintState, declaration_blocks

logger = logging.getLogger(__name__)


@dataclass
class ShadowEntry:
    name: str
    words: int
    nt_address: int
    t_address: int


@dataclass
class RegionPlan:
    branch: int
    join: int
    parent: Optional[int]
    depth: int
    predicate_slot: int
    shadows: List[ShadowEntry] = field(default_factory=list)


@dataclass
class ShadowPlan:
    regions: Dict[int, RegionPlan] = field(default_factory=dict)

    @property
    def max_depth(self) -> int:
        return max((plan.depth for plan in self.regions.values()), default=0)

    def shadowed(self, branch: int) -> List[str]:
        return [entry.name for entry in self.regions[branch].shadows]


@dataclass
class InstrumentedCfg:
    cfg: Cfg
    locations: Dict[int, Dict[str, int]]
    plan: ShadowPlan
    exits: Dict[int, int]


def _indices(stmt) -> List[Expr]:
    if isinstance(stmt, Assign):
        roots = [stmt.value]
    elif isinstance(stmt, Store):
        roots = [stmt.index, stmt.value]
    else:
        return []
    found = [node.index for root in roots for node in walk_expr(root) if isinstance(node, Index)]
    if isinstance(stmt, Store):
        found.append(stmt.index)
    return found


def check_regions(cfg: Cfg, taint: TaintState, capacity: int, mask_indices: bool = True) -> List[str]:
    """Reasons the secret regions of cfg cannot be instrumented."""
    diagnostics: List[str] = []
    secret = taint.secret_branches
    for branch in secret:
        term = cfg.block(branch).terminator
        if term.loop:
            diagnostics.append(f"line {term.line}: loop condition depends on a secret")

    depths = nesting_depths(nesting_parents(secret, taint.regions))
    deepest = max(depths.values(), default=0)
    if deepest > capacity:
        diagnostics.append(f"secure branches nest {deepest} deep, beyond the jbTable capacity of {capacity}")

    guarded: Set[int] = set()
    for branch in secret:
        guarded |= taint.regions[branch].blocks
    for block_id in sorted(guarded):
        block = cfg.block(block_id)
        exprs = []
        for stmt in block.stmts:
            exprs.extend((stmt.line, index) for index in _indices(stmt))
        if isinstance(block.terminator, Branch):
            cond = block.terminator.cond
            exprs.extend((block.terminator.line, node.index) for node in walk_expr(cond) if isinstance(node, Index))
        for line, index in exprs:
            if taint.reads_secret(expr_reads(index)):
                diagnostics.append(f"line {line}: array index inside a secure region depends on a secret")
            elif not mask_indices and not isinstance(index, Const):
                diagnostics.append(f"line {line}: unmasked array index inside a secure region may trap")
    return diagnostics


def _written(cfg: Cfg, blocks: Set[int]) -> List[str]:
    names: List[str] = []
    for block_id in sorted(blocks):
        for stmt in cfg.block(block_id).stmts:
            if isinstance(stmt, (Assign, Store)) and stmt.name not in names:
                names.append(stmt.name)
    return names


def plan_shadows(
    cfg: Cfg,
    taint: TaintState,
    storage: Storage,
    live: Optional[Liveness] = None,
    privatize_all: bool = False,
) -> ShadowPlan:
    live = live or liveness(cfg)
    declared_in = declaration_blocks(cfg)
    parents = nesting_parents(taint.secret_branches, taint.regions)
    depths = nesting_depths(parents)
    plan = ShadowPlan()
    for branch in sorted(taint.secret_branches, key=lambda b: (depths[b], b)):
        region = taint.regions[branch]
        term = cfg.block(branch).terminator
        needed = live.live_in[term.then] | live.live_in[term.other] | live.live_in[region.join]
        entries: List[ShadowEntry] = []
        for name in _written(cfg, region.blocks):
            if storage.location(name).in_register:
                continue
            home = declared_in.get(name)
            if home is not None and home in region.blocks:
                continue
            if not privatize_all and name not in needed:
                continue
            words = storage.words(name)
            entries.append(
                ShadowEntry(
                    name=name,
                    words=words,
                    nt_address=storage.allocate(f"{name}@nt{branch}", words),
                    t_address=storage.allocate(f"{name}@t{branch}", words),
                )
            )
        plan.regions[branch] = RegionPlan(
            branch=branch,
            join=region.join,
            parent=parents[branch],
            depth=depths[branch],
            predicate_slot=storage.allocate(f"predicate{branch}"),
            shadows=entries,
        )
    return plan


def _retarget(term, old: int, new: int) -> None:
    if isinstance(term, Jump):
        if term.target == old:
            term.target = new
    elif isinstance(term, Branch):
        if term.then == old:
            term.then = new
        if term.other == old:
            term.other = new


def instrument(cfg: Cfg, taint: TaintState, plan: ShadowPlan) -> InstrumentedCfg:
    out = clone(cfg)
    regions = taint.regions
    by_depth = sorted(plan.regions.values(), key=lambda region: (region.depth, region.branch))

    # private copies seen by each block, outer regions first so inner ones win
    locations: Dict[int, Dict[str, int]] = {}
    for region in by_depth:
        sides = regions[region.branch]
        for entry in region.shadows:
            for block_id in sides.then_side:
                locations.setdefault(block_id, {})[entry.name] = entry.nt_address
            for block_id in sides.else_side:
                locations.setdefault(block_id, {})[entry.name] = entry.t_address

    next_id = max(out.blocks) + 1
    exits: Dict[int, int] = {}
    for region in by_depth:
        exits[region.branch] = next_id
        next_id += 1

    for region in by_depth:
        branch_block = out.block(region.branch)
        line = branch_block.terminator.line
        stmts = [EndSecure(line)]
        stmts.extend(
            Merge(entry.name, region.predicate_slot, entry.nt_address, entry.t_address, entry.words)
            for entry in region.shadows
        )
        parent = region.parent
        if parent is not None and plan.regions[parent].join == region.join:
            target = exits[parent]
        else:
            target = region.join
        exit_id = exits[region.branch]
        out.blocks[exit_id] = BasicBlock(id=exit_id, stmts=stmts, terminator=Jump(target))
        if region.branch in locations:
            locations[exit_id] = dict(locations[region.branch])

    # edges leaving a region for its join enter the innermost exit instead
    for block_id in cfg.order:
        for succ in cfg.successors(block_id):
            owners = [
                region
                for region in plan.regions.values()
                if region.join == succ and (block_id == region.branch or block_id in regions[region.branch].blocks)
            ]
            if owners:
                innermost = max(owners, key=lambda region: region.depth)
                _retarget(out.block(block_id).terminator, succ, exits[innermost.branch])

    for region in by_depth:
        block = out.block(region.branch)
        block.stmts.extend(
            ShadowCopy(entry.name, entry.nt_address, entry.t_address, entry.words) for entry in region.shadows
        )
        block.terminator.secure = True
        block.terminator.predicate_slot = region.predicate_slot

    order = list(out.order)
    for join in sorted({region.join for region in by_depth}):
        sharing = sorted(
            (region for region in by_depth if region.join == join),
            key=lambda region: (-region.depth, region.branch),
        )
        position = order.index(join)
        order[position:position] = [exits[region.branch] for region in sharing]
    out.order = order

    logger.debug("instrumented %d secure regions", len(plan.regions))
    return InstrumentedCfg(cfg=out, locations=locations, plan=plan, exits=exits)


def instrument_sempe(
    cfg: Cfg,
    taint: TaintState,
    storage: Storage,
    capacity: int = 30,
    privatize_all: bool = False,
    mask_indices: bool = True,
) -> Tuple[Program, ShadowPlan]:
    diagnostics = check_regions(cfg, taint, capacity, mask_indices)
    if diagnostics:
        logger.info("sempe instrumentation rejected: %s", "; ".join(diagnostics))
        raise CompileRejection(diagnostics)
    plan = plan_shadows(cfg, taint, storage, privatize_all=privatize_all)
    result = instrument(cfg, taint, plan)
    program = codegen(result.cfg, storage, result.locations, mask_indices=mask_indices)
    return program, plan


def shadow_violations(program: Program, protected: Set[int]) -> List[int]:
    """Stores inside secure paths that target a protected address.

    A path is followed from each secure branch, over both of its
    successors, up to the end-of-secure marker at the same nesting level.
    Stores with a register base are checked by their base offset.
    """
    code = program.instructions
    violations: Set[int] = set()
    for start, instruction in enumerate(code):
        if not (instruction.secure and instruction.opcode in (Opcode.BZ, Opcode.BNZ)):
            continue
        seen: Set[Tuple[int, int]] = set()
        queue = deque([(start + 1, 0), (instruction.imm, 0)])
        while queue:
            pc, depth = queue.popleft()
            if (pc, depth) in seen or not 0 <= pc < len(code):
                continue
            seen.add((pc, depth))
            current = code[pc]
            opcode = current.opcode
            if opcode is Opcode.EOSJMP:
                if depth > 0:
                    queue.append((pc + 1, depth - 1))
                continue
            if opcode is Opcode.ST and current.imm in protected:
                violations.add(pc)
            if opcode is Opcode.JMP:
                queue.append((current.imm, depth))
            elif opcode in (Opcode.BZ, Opcode.BNZ):
                inner = depth + 1 if current.secure else depth
                queue.append((pc + 1, inner))
                queue.append((current.imm, inner))
            elif opcode is not Opcode.HALT:
                queue.append((pc + 1, depth))
    return sorted(violations)
