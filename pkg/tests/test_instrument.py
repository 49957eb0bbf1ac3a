import itertools

import pytest

from sempe.config import Settings
from sempe.services.isa import Opcode, assemble
from sempe.services.machine import run
from sempe.services.pipelines import get_pipeline
from sempe.services.seclang import interpret, parse, shadow_violations
from sempe.services.trace import leakage_scan, observe

ASSIGNMENTS = [dict(zip("ABC", values)) for values in itertools.product((0, 1), repeat=3)]
DOMAIN = {name: [0, 1] for name in "ABC"}

ARRAY_SOURCE = """
@secret key;
var table[8] = {3, 1, 4, 1, 5, 9, 2, 6};
var hits;

proc main() {
    for i in 0 .. 8 {
        if key > table[i] {
            hits = hits + 1;
            table[i] = 0;
        }
    }
}
"""


def _compile(source, mode="sempe", settings=None):
    return get_pipeline(mode, settings).compile(parse(source))


def test_nested_gets_two_secure_branches(nested_source):
    compiled = _compile(nested_source)
    opcodes = [instruction.opcode for instruction in compiled.program.instructions]

    assert compiled.secure_branches == 2
    assert opcodes.count(Opcode.EOSJMP) == 2
    assert compiled.plan.max_depth == 2
    assert compiled.plan.shadowed(0) == ["j", "k"]
    assert compiled.plan.shadowed(2) == ["k"]


def test_secure_paths_never_store_to_real_variables(nested_source):
    compiled = _compile(nested_source)
    program = compiled.program
    protected = {program.symbols[name][0] for name in ("j", "k")}

    assert shadow_violations(program, protected) == []


def test_shadow_violations_flags_a_direct_store():
    program = assemble(
        """
        .memory 2
        ld r1, r0, 0
        s.bz r1, other
        st r0, r1, 1
        jmp end
    other:
        nop
    end:
        eosjmp
        halt
        """
    )

    assert shadow_violations(program, {1}) == [2]


@pytest.mark.parametrize("inputs", ASSIGNMENTS)
@pytest.mark.parametrize("mode, machine", [("sempe", "sempe"), ("legacy", "legacy"), ("plain", "legacy")])
def test_compiled_program_matches_interpreter(nested_source, inputs, mode, machine):
    compiled = _compile(nested_source, mode)
    program = compiled.program

    result = run(program, init_mem=program.initial_memory(inputs), mode=machine)

    assert result.trap is None
    assert program.read_symbols(result.final_mem) == interpret(compiled.ast, inputs)


@pytest.mark.parametrize("inputs", ASSIGNMENTS)
def test_cte_program_matches_interpreter(nested_source, inputs):
    original = parse(nested_source)
    compiled = _compile(nested_source, "cte")
    program = compiled.program

    result = run(program, init_mem=program.initial_memory(inputs), mode="legacy")

    assert program.read_symbols(result.final_mem) == interpret(original, inputs)


def test_sempe_binary_is_indistinguishable(nested_source):
    program = _compile(nested_source).program

    report = leakage_scan(program, None, list("ABC"), DOMAIN, mode="sempe")

    assert report.indistinguishable
    assert report.assignments == 8


def test_same_binary_leaks_on_a_legacy_machine(nested_source):
    program = _compile(nested_source, "legacy").program

    report = leakage_scan(program, None, list("ABC"), DOMAIN, mode="legacy")

    assert not report.indistinguishable


def test_baseline_binary_leaks(nested_source):
    program = _compile(nested_source, "baseline").program

    report = leakage_scan(program, None, list("ABC"), DOMAIN, mode="legacy")

    assert not report.indistinguishable
    assert report.distinguishable_pairs[0].divergence.source_line is not None


def test_cte_binary_is_indistinguishable_without_sempe(nested_source):
    program = _compile(nested_source, "cte").program

    report = leakage_scan(program, None, list("ABC"), DOMAIN, mode="legacy")

    assert report.indistinguishable


def test_array_writes_inside_a_loop_region():
    compiled = _compile(ARRAY_SOURCE)
    program = compiled.program

    for key in (0, 2, 4, 7):
        result = run(program, init_mem=program.initial_memory({"key": key}))
        assert program.read_symbols(result.final_mem) == interpret(compiled.ast, {"key": key})

    report = leakage_scan(program, None, ["key"], {"key": [0, 2, 4, 7]}, mode="sempe")
    assert report.indistinguishable


def test_privatize_all_keeps_results(nested_source):
    settings = Settings(privatize_all=True)
    compiled = _compile(nested_source, settings=settings)
    program = compiled.program

    for inputs in ASSIGNMENTS:
        result = run(program, init_mem=program.initial_memory(inputs))
        assert program.read_symbols(result.final_mem) == interpret(compiled.ast, inputs)


def test_sempe_observation_hides_branch_outcome(nested_source):
    program = _compile(nested_source).program

    taken = observe(program, secret_assignment={"A": 0, "B": 0, "C": 0})
    not_taken = observe(program, secret_assignment={"A": 1, "B": 1, "C": 1})

    assert taken.events == not_taken.events
    assert taken.count("drain") == 6
    assert taken.result.max_nesting == 2
