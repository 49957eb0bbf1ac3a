import logging

from sempe.services.pipelines.base import CompiledProgram, CompilePipeline
from sempe.services.seclang.ast import Ast
from sempe.services.seclang.collapse import collapse_and_retaint
from sempe.services.seclang.instrument import instrument_sempe
from sempe.services.seclang.storage import Storage

logger = logging.getLogger(__name__)


class SempePipeline(CompilePipeline):
    name = "sempe"
    machine_mode = "sempe"

    def compile(self, ast: Ast) -> CompiledProgram:
        settings = self.settings
        cfg, labels = self.analyze(ast)
        if settings.collapse_nesting and labels.secret_branches:
            cfg, labels = collapse_and_retaint(cfg, labels, allow_array_reads=settings.mask_indices)
        storage = Storage(ast, settings.register_count, privatize_all=settings.privatize_all)
        program, plan = instrument_sempe(
            cfg,
            labels,
            storage,
            capacity=settings.jbtable_capacity,
            privatize_all=settings.privatize_all,
            mask_indices=settings.mask_indices,
        )
        logger.debug("sempe pipeline: %d secure regions, nesting %d", len(plan.regions), plan.max_depth)
        return CompiledProgram(program=program, ast=ast, taint=labels, plan=plan)


class LegacyPipeline(SempePipeline):
    """The instrumented binary executed on a machine without SeMPE support."""

    name = "legacy"
    machine_mode = "legacy"
