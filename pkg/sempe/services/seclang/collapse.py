import logging
from typing import Optional, Set, Tuple

from sempe.services.seclang.ast import BinOp, has_array_read
from sempe.services.seclang.cfg import Branch, Cfg, clone
from sempe.services.seclang.taint import TaintState, taint as compute_taint

logger = logging.getLogger(__name__)


def _collapsible(cfg: Cfg, outer_id: int, secret: Set[int], allow_array_reads: bool) -> Optional[int]:
    """Id of the inner branch block that can fold into outer_id, if any."""
    outer = cfg.block(outer_id).terminator
    if not isinstance(outer, Branch) or outer.loop or outer.then == outer.other:
        return None
    inner_id = outer.then
    inner_block = cfg.block(inner_id)
    inner = inner_block.terminator
    if inner_block.stmts or not isinstance(inner, Branch) or inner.loop:
        return None
    if inner_id not in secret or inner.other != outer.other:
        return None
    if [pred for pred in cfg.order if inner_id in cfg.successors(pred)] != [outer_id]:
        return None
    if not allow_array_reads and has_array_read(inner.cond):
        return None
    return inner_id


def collapse_nesting(cfg: Cfg, taint: TaintState, allow_array_reads: bool = True) -> Cfg:
    """Fold if (A) { if (B) S } into if (A and B) S for secret A and B.

    Applies repeatedly, so a chain of such levels ends as a single
    branch. The pattern requires the outer branch to have no else arm
    and nothing but the inner branch in its then arm.
    """
    out = clone(cfg)
    secret = set(taint.secret_branches)
    folded = 0
    changed = True
    while changed:
        changed = False
        for outer_id in list(out.order):
            if outer_id not in secret:
                continue
            inner_id = _collapsible(out, outer_id, secret, allow_array_reads)
            if inner_id is None:
                continue
            outer = out.block(outer_id).terminator
            inner = out.block(inner_id).terminator
            outer.cond = BinOp("and", outer.cond, inner.cond)
            outer.then = inner.then
            out.order.remove(inner_id)
            del out.blocks[inner_id]
            secret.discard(inner_id)
            folded += 1
            changed = True
            break
    if folded:
        logger.debug("collapsed %d nested secure branches", folded)
    return out


def collapse_and_retaint(cfg: Cfg, taint: TaintState, allow_array_reads: bool = True) -> Tuple[Cfg, TaintState]:
    collapsed = collapse_nesting(cfg, taint, allow_array_reads)
    if len(collapsed.order) == len(cfg.order):
        return cfg, taint
    return collapsed, compute_taint(collapsed)
