import itertools

import pytest

from sempe.config import Settings
from sempe.services.isa import format_program
from sempe.services.pipelines import get_pipeline
from sempe.services.seclang import (
    CompileRejection,
    SecLangSyntaxError,
    collapse_nesting,
    count_arith_ops,
    interpret,
    lower,
    parse,
    postdominators,
    taint,
    transform_cte,
)
from sempe.services.seclang.ast import If, walk_stmts
from sempe.services.seclang.cfg import EDGE_FALLTHROUGH, EDGE_JUMP, EDGE_TAKEN, Branch

DIAMOND = """
@secret s;
var x;

proc main() {
    if s {
        x = 1;
    } else {
        x = 2;
    }
    x = x + 1;
}
"""

CHAIN = """
@secret a, b, c, d, e;
var x;

proc main() {
    if a { if b { if c { if d { if e { x = 1; } } } } }
}
"""

GUARDED_CHAIN = """
@secret a, b;
var x;
var y;

proc main() {
    if a {
        y = 2;
        if b { x = 1; }
    }
}
"""

COUNTDOWN = """
var x;

proc main() {
    x = 1;
    while x < 5 {
        x = x + 1;
    }
    x = 0;
}
"""

NESTED_THEN_SEQUENTIAL = """
@secret a, b, c;
var x;

proc main() {
    if a {
        if b { x = 1; } else { x = 2; }
    } else {
        x = 3;
    }
    if c { x = x + 1; }
    x = x * 2;
}
"""

BOOLEANS = [dict(zip("ABC", values)) for values in itertools.product((0, 1), repeat=3)]


def _analyze(source):
    ast = parse(source)
    cfg = lower(ast)
    return ast, cfg, taint(cfg)


def test_parse_collects_globals_and_secrets(nested_source):
    ast = parse(nested_source)

    assert ast.globals == ["A", "B", "C", "j", "k"]
    assert ast.secret_names == ["A", "B", "C"]


def test_parse_reports_line_and_column():
    with pytest.raises(SecLangSyntaxError) as caught:
        parse("var x;\nproc main() {\n    x = ;\n}\n")

    assert caught.value.line == 3


def test_recursion_is_rejected():
    source = "proc f() { f(); }\nproc main() { f(); }\n"

    with pytest.raises(SecLangSyntaxError, match="recursive"):
        parse(source)


def test_calls_are_inlined_with_renamed_locals():
    source = """
    var out;
    proc twice(v) { var w = v + v; return w; }
    proc main() { out = twice(3); var again = twice(out); out = again; }
    """

    ast = parse(source)

    assert not any(type(stmt).__name__ == "CallStmt" for stmt in walk_stmts(ast.body))
    assert interpret(ast)["out"] == [12]


def test_interpreter_follows_reference_semantics(nested_source):
    ast = parse(nested_source)

    assert interpret(ast, {"A": 0, "B": 0, "C": 1}) == {"A": [0], "B": [0], "C": [1], "j": [0], "k": [1]}
    assert interpret(ast, {"A": 0, "B": 0, "C": 0})["k"] == [-1]
    assert interpret(ast, {"A": 0, "B": 1, "C": 1})["j"] == [1]


def test_if_else_lowers_to_a_diamond():
    _, cfg, _ = _analyze(DIAMOND)

    assert len(cfg.order) == 4
    assert sorted(cfg.edges()) == [
        (0, 1, EDGE_FALLTHROUGH),
        (0, 2, EDGE_TAKEN),
        (1, 3, EDGE_JUMP),
        (2, 3, EDGE_JUMP),
    ]


def test_postdominators_of_the_diamond():
    _, cfg, _ = _analyze(DIAMOND)

    assert postdominators(cfg) == {0: 3, 1: 3, 2: 3, 3: None}


def test_while_lowers_to_header_body_and_exit():
    _, cfg, _ = _analyze(COUNTDOWN)

    assert len(cfg.order) == 4
    assert sorted(cfg.edges()) == [
        (0, 1, EDGE_JUMP),
        (1, 2, EDGE_FALLTHROUGH),
        (1, 3, EDGE_TAKEN),
        (2, 1, EDGE_JUMP),
    ]
    assert cfg.block(1).terminator.loop
    assert postdominators(cfg) == {0: 1, 1: 3, 2: 1, 3: None}


def test_postdominators_of_nested_then_sequential_branches():
    _, cfg, labels = _analyze(NESTED_THEN_SEQUENTIAL)

    assert postdominators(cfg) == {0: 5, 1: 5, 2: 5, 3: 5, 4: 5, 5: 7, 6: 7, 7: None}
    assert labels.secret_branches == [0, 1, 5]


@pytest.mark.parametrize("source", [DIAMOND, COUNTDOWN, NESTED_THEN_SEQUENTIAL])
def test_single_successor_is_the_immediate_postdominator(source):
    _, cfg, _ = _analyze(source)
    ipdom = postdominators(cfg)

    for block_id in cfg.order:
        successors = cfg.successors(block_id)
        if len(successors) == 1:
            assert ipdom[block_id] == successors[0]


def test_nested_lowering_shares_one_join(nested_source):
    _, cfg, labels = _analyze(nested_source)

    assert len(cfg.order) == 6
    assert labels.secret_branches == [0, 2]
    assert labels.ipdom[0] == labels.ipdom[2] == 5


def test_explicit_flow_taints_assigned_variables():
    _, _, labels = _analyze("@secret s;\nvar x;\nvar y;\nproc main() { x = s * 2; y = x + 1; }\n")

    assert labels.is_secret("x")
    assert labels.is_secret("y")
    assert labels.secret_branches == []


def test_implicit_flow_taints_writes_inside_secret_branch():
    source = "@secret s;\nvar y;\nvar z;\nproc main() { if s > 3 { y = 1; } z = 5; }\n"

    _, _, labels = _analyze(source)

    assert labels.is_secret("y")
    assert not labels.is_secret("z")
    assert labels.secret_branches == [0]


def test_local_declared_inside_the_region_stays_public():
    source = "@secret s;\nvar y;\nproc main() { if s { var t = 4; y = t; } }\n"

    _, _, labels = _analyze(source)

    assert not labels.is_secret("main.t")
    assert labels.is_secret("y")


def test_public_program_has_no_secret_branches():
    source = "var n = 3;\nvar x;\nproc main() { for i in 0 .. n { if x < 2 { x = x + 1; } } }\n"

    _, _, labels = _analyze(source)

    assert labels.secret_branches == []
    assert labels.secret_names() == []


def test_collapse_folds_a_five_level_chain():
    ast, cfg, labels = _analyze(CHAIN)
    assert len(labels.secret_branches) == 5

    collapsed = collapse_nesting(cfg, labels)

    branches = collapsed.branches()
    assert len(branches) == 1
    assert taint(collapsed).secret_branches == branches


def test_collapsed_chain_compiles_to_depth_one():
    compiled = get_pipeline("sempe", Settings(collapse_nesting=True)).compile(parse(CHAIN))
    uncollapsed = get_pipeline("sempe", Settings(collapse_nesting=False)).compile(parse(CHAIN))

    assert compiled.plan.max_depth == 1
    assert compiled.secure_branches == 1
    assert uncollapsed.plan.max_depth == 5


def test_statement_before_inner_branch_blocks_collapse():
    _, cfg, labels = _analyze(GUARDED_CHAIN)

    collapsed = collapse_nesting(cfg, labels)

    assert len(collapsed.branches()) == 2


def test_cte_nested_operation_count(nested_source):
    ast, _, labels = _analyze(nested_source)

    rewritten = transform_cte(ast, labels)

    assert count_arith_ops(ast.body) == 3
    assert 24 <= count_arith_ops(rewritten.body) <= 32
    assert count_arith_ops(rewritten.body) == 26
    assert not any(isinstance(stmt, If) for stmt in walk_stmts(rewritten.body))


@pytest.mark.parametrize("inputs", BOOLEANS)
def test_cte_nested_matches_original(nested_source, inputs):
    ast, _, labels = _analyze(nested_source)

    rewritten = transform_cte(ast, labels)

    assert interpret(rewritten, inputs) == interpret(ast, inputs)


def test_cte_keeps_public_branches():
    source = "@secret s;\nvar n = 2;\nvar x;\nproc main() { if n > 1 { x = s; } }\n"
    ast, _, labels = _analyze(source)

    rewritten = transform_cte(ast, labels)

    assert [type(stmt).__name__ for stmt in rewritten.body] == ["If"]
    assert interpret(rewritten, {"s": 9}) == interpret(ast, {"s": 9})


def test_cte_rejects_secret_index():
    ast, _, labels = _analyze("@secret s;\nvar a[4];\nvar x;\nproc main() { x = a[s]; }\n")

    with pytest.raises(CompileRejection, match="depends on a secret"):
        transform_cte(ast, labels)


def test_cte_rejects_secret_loop_bound():
    ast, _, labels = _analyze("@secret n;\nvar x;\nproc main() { while x < n { x = x + 1; } }\n")

    with pytest.raises(CompileRejection, match="loop condition"):
        transform_cte(ast, labels)


def test_cte_rejects_control_variable_written_under_secret():
    source = "@secret s;\nvar n;\nvar x;\nproc main() { if s { n = 3; } for i in 0 .. n { x = x + 1; } }\n"
    ast, _, labels = _analyze(source)

    with pytest.raises(CompileRejection, match="steers control flow"):
        transform_cte(ast, labels)


def test_sempe_rejects_secret_loop():
    source = "@secret n;\nvar x;\nproc main() { while x < n { x = x + 1; } }\n"

    with pytest.raises(CompileRejection, match="loop condition depends on a secret"):
        get_pipeline("sempe").compile(parse(source))


def test_sempe_rejects_nesting_beyond_capacity():
    with pytest.raises(CompileRejection, match="jbTable capacity"):
        get_pipeline("sempe", Settings(collapse_nesting=False, jbtable_capacity=3)).compile(parse(CHAIN))


def test_codegen_is_deterministic(nested_source):
    first = get_pipeline("sempe").compile(parse(nested_source)).program
    second = get_pipeline("sempe").compile(parse(nested_source)).program

    assert first == second
    assert format_program(first) == format_program(second)


def test_secure_branch_jumps_to_the_other_arm(nested_source):
    _, cfg, _ = _analyze(nested_source)
    term = cfg.block(0).terminator

    assert isinstance(term, Branch)
    assert (term.then, term.other) == (1, 2)
