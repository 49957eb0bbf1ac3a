from typing import Optional

from sempe.config import Settings
from sempe.services.pipelines.base import CompiledProgram, CompilePipeline

PIPELINE_MODES = ("baseline", "plain", "sempe", "cte", "legacy")


def get_pipeline(mode: str, settings: Optional[Settings] = None) -> CompilePipeline:
    if mode in ("baseline", "plain"):
        from sempe.services.pipelines.plain import PlainPipeline

        return PlainPipeline(settings)
    if mode == "sempe":
        from sempe.services.pipelines.sempe import SempePipeline

        return SempePipeline(settings)
    if mode == "legacy":
        from sempe.services.pipelines.sempe import LegacyPipeline

        return LegacyPipeline(settings)
    if mode == "cte":
        from sempe.services.pipelines.cte import CtePipeline

        return CtePipeline(settings)
    raise ValueError(f"Unsupported pipeline mode: {mode}")


__all__ = ["CompiledProgram", "CompilePipeline", "PIPELINE_MODES", "get_pipeline"]
