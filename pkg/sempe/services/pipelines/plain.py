from sempe.services.pipelines.base import CompiledProgram, CompilePipeline
from sempe.services.seclang.ast import Ast
from sempe.services.seclang.codegen import codegen
from sempe.services.seclang.storage import Storage


class PlainPipeline(CompilePipeline):
    """Uninstrumented code; the baseline every overhead is measured against."""

    name = "baseline"
    machine_mode = "legacy"

    def compile(self, ast: Ast) -> CompiledProgram:
        cfg, labels = self.analyze(ast)
        storage = Storage(ast, self.settings.register_count)
        program = codegen(cfg, storage, mask_indices=self.settings.mask_indices)
        return CompiledProgram(program=program, ast=ast, taint=labels)
