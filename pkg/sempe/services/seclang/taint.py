"""Secret-label propagation over a lowered program.

Explicit flows follow assignments and array stores. Implicit flows taint
every variable written inside a secret branch's region unless that
variable was declared inside the same region: such a local carries no
information about which path ran.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Set

from sempe.services.seclang.ast import Assign, Stmt, Store, expr_reads
from sempe.services.seclang.cfg import Branch, Cfg, Declare
from sempe.services.seclang.postdom import Region, postdominators, regions

logger = logging.getLogger(__name__)

PUBLIC = "public"
SECRET = "secret"


@dataclass
class TaintState:
    labels: Dict[str, str]
    secret_branches: List[int]
    ipdom: Dict[int, Optional[int]]
    regions: Dict[int, Region]
    # the source statement (If/While/For) behind every secret branch
    secret_origins: Set[Stmt] = field(default_factory=set)

    def is_secret(self, name: str) -> bool:
        return self.labels.get(name) == SECRET

    def reads_secret(self, names: Set[str]) -> bool:
        return any(self.is_secret(name) for name in names)

    def secret_names(self) -> List[str]:
        return sorted(name for name, label in self.labels.items() if label == SECRET)


def declaration_blocks(cfg: Cfg) -> Dict[str, int]:
    """Block holding the Declare of every local."""
    found: Dict[str, int] = {}
    for block_id in cfg.order:
        for stmt in cfg.block(block_id).stmts:
            if isinstance(stmt, Declare):
                found[stmt.name] = block_id
    return found


def taint(cfg: Cfg, secret_decls: Optional[List[str]] = None) -> TaintState:
    ast = cfg.ast
    secret_decls = list(ast.secret_names) if secret_decls is None else list(secret_decls)
    labels: Dict[str, str] = {name: PUBLIC for name in ast.symbols}
    for name in secret_decls:
        labels[name] = SECRET

    ipdom = postdominators(cfg)
    by_branch = regions(cfg, ipdom)
    declared_in = declaration_blocks(cfg)

    def escalate(name: str) -> bool:
        if labels.get(name) == SECRET:
            return False
        labels[name] = SECRET
        return True

    secret_branches: List[int] = []
    changed = True
    while changed:
        changed = False
        secret_branches = [
            block_id
            for block_id in cfg.branches()
            if any(labels.get(name) == SECRET for name in expr_reads(cfg.block(block_id).terminator.cond))
        ]

        guards: Dict[int, List[Region]] = {block_id: [] for block_id in cfg.order}
        for branch in secret_branches:
            for block_id in by_branch[branch].blocks:
                guards[block_id].append(by_branch[branch])

        for block_id in cfg.order:
            for stmt in cfg.block(block_id).stmts:
                if not isinstance(stmt, (Assign, Store)):
                    continue
                sources = expr_reads(stmt.value)
                if isinstance(stmt, Store):
                    sources |= expr_reads(stmt.index)
                if any(labels.get(name) == SECRET for name in sources):
                    changed |= escalate(stmt.name)
                    continue
                home = declared_in.get(stmt.name)
                for region in guards[block_id]:
                    if home is None or home not in region.blocks:
                        changed |= escalate(stmt.name)
                        break

    origins: Set[Stmt] = set()
    for branch in secret_branches:
        term = cfg.block(branch).terminator
        assert isinstance(term, Branch)
        if term.origin is not None:
            origins.add(term.origin)

    logger.debug(
        "taint: %d secret variables, %d secret branches",
        sum(1 for label in labels.values() if label == SECRET),
        len(secret_branches),
    )
    return TaintState(
        labels=labels,
        secret_branches=secret_branches,
        ipdom=ipdom,
        regions=by_branch,
        secret_origins=origins,
    )
