from sempe.services.pipelines.base import CompiledProgram, CompilePipeline
from sempe.services.seclang.ast import Ast
from sempe.services.seclang.cfg import lower
from sempe.services.seclang.codegen import codegen
from sempe.services.seclang.cte import transform_cte
from sempe.services.seclang.storage import Storage
from sempe.services.seclang.taint import taint


class CtePipeline(CompilePipeline):
    name = "cte"
    machine_mode = "legacy"

    def compile(self, ast: Ast) -> CompiledProgram:
        _, labels = self.analyze(ast)
        rewritten = transform_cte(ast, labels)
        cfg = lower(rewritten)
        storage = Storage(rewritten, self.settings.register_count)
        program = codegen(cfg, storage, mask_indices=self.settings.mask_indices)
        return CompiledProgram(program=program, ast=rewritten, taint=taint(cfg))
