from sempe.services.seclang.ast import Ast, count_arith_ops
from sempe.services.seclang.cfg import Cfg, lower
from sempe.services.seclang.codegen import CompileRejection, codegen
from sempe.services.seclang.collapse import collapse_nesting
from sempe.services.seclang.cte import transform_cte
from sempe.services.seclang.instrument import ShadowPlan, instrument_sempe, plan_shadows, shadow_violations
from sempe.services.seclang.interpreter import InterpreterError, interpret
from sempe.services.seclang.parser import SecLangSyntaxError, parse
from sempe.services.seclang.postdom import postdominators
from sempe.services.seclang.storage import Storage
from sempe.services.seclang.taint import TaintState, taint

__all__ = [
    "Ast",
    "Cfg",
    "CompileRejection",
    "InterpreterError",
    "SecLangSyntaxError",
    "ShadowPlan",
    "Storage",
    "TaintState",
    "codegen",
    "collapse_nesting",
    "count_arith_ops",
    "instrument_sempe",
    "interpret",
    "lower",
    "parse",
    "plan_shadows",
    "postdominators",
    "shadow_violations",
    "taint",
    "transform_cte",
]
