from collections import deque
from dataclasses import dataclass
from typing import Dict, List, Optional, Set

from sempe.services.seclang.cfg import Branch, Cfg


def postdominator_sets(cfg: Cfg) -> Dict[int, Set[int]]:
    """Post-dominator sets by fixed point iteration from the exit block."""
    nodes = list(cfg.order)
    pdom: Dict[int, Set[int]] = {}
    for node in nodes:
        pdom[node] = {node} if node == cfg.exit else set(nodes)

    change = True
    while change:
        change = False
        for node in reversed(nodes):
            if node == cfg.exit:
                continue
            succ_pdoms = [pdom[succ] for succ in cfg.successors(node)]
            if not succ_pdoms:
                continue
            new_pdom = {node} | set.intersection(*succ_pdoms)
            if new_pdom != pdom[node]:
                pdom[node] = new_pdom
                change = True
    return pdom


def postdominators(cfg: Cfg) -> Dict[int, Optional[int]]:
    """Immediate post-dominator of every block; None for the exit.

    ipdom(x) is the n in spdom(x) with pdom(n) == spdom(x).
    """
    pdom = postdominator_sets(cfg)
    ipdom: Dict[int, Optional[int]] = {}
    for node in cfg.order:
        strict = pdom[node] - {node}
        ipdom[node] = None
        for candidate in strict:
            if pdom[candidate] == strict:
                ipdom[node] = candidate
                break
    return ipdom


def _reach(cfg: Cfg, start: int, stop: Optional[int]) -> Set[int]:
    seen: Set[int] = set()
    queue = deque([start])
    while queue:
        node = queue.popleft()
        if node == stop or node in seen:
            continue
        seen.add(node)
        queue.extend(cfg.successors(node))
    return seen


@dataclass
class Region:
    """Blocks controlled by one conditional branch, up to its join block."""

    branch: int
    join: Optional[int]
    then_side: Set[int]
    else_side: Set[int]

    @property
    def blocks(self) -> Set[int]:
        return self.then_side | self.else_side


def region_of(cfg: Cfg, branch_id: int, ipdom: Dict[int, Optional[int]]) -> Region:
    term = cfg.block(branch_id).terminator
    if not isinstance(term, Branch):
        raise ValueError(f"block {branch_id} does not end in a branch")
    join = ipdom[branch_id]
    then_side = _reach(cfg, term.then, join)
    else_side = _reach(cfg, term.other, join) - then_side
    return Region(branch=branch_id, join=join, then_side=then_side, else_side=else_side)


def regions(cfg: Cfg, ipdom: Optional[Dict[int, Optional[int]]] = None) -> Dict[int, Region]:
    ipdom = ipdom if ipdom is not None else postdominators(cfg)
    return {branch: region_of(cfg, branch, ipdom) for branch in cfg.branches()}


def nesting_parents(selected: List[int], by_branch: Dict[int, Region]) -> Dict[int, Optional[int]]:
    """Innermost selected region containing each selected branch block."""
    parents: Dict[int, Optional[int]] = {}
    for branch in selected:
        enclosing = [other for other in selected if other != branch and branch in by_branch[other].blocks]
        # the innermost enclosing region is the smallest one
        enclosing.sort(key=lambda other: (len(by_branch[other].blocks), other))
        parents[branch] = enclosing[0] if enclosing else None
    return parents


def nesting_depths(parents: Dict[int, Optional[int]]) -> Dict[int, int]:
    depths: Dict[int, int] = {}

    def depth(branch: int) -> int:
        if branch not in depths:
            parent = parents[branch]
            depths[branch] = 1 if parent is None else depth(parent) + 1
        return depths[branch]

    for branch in parents:
        depth(branch)
    return depths
