import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sempe.services.isa import assemble
from sempe.services.machine import JbEntry, JbTable, MachineState, Outcome, TimingModel, run, run_legacy
from sempe.services.machine.jbtable import JbTableError
from sempe.services.machine.timing import CacheConfig, CacheModel
from sempe.services.trace import ObservationRecorder, observe

BRANCH_PROGRAM = """
.memory 1
.symbol s 0 1
    ld r1, r0, s
    s.bz r1, other
    ldi r2, 7
    jmp end
other:
    ldi r3, 9
end:
    eosjmp
    halt
"""


def _nested(depth: int) -> str:
    def level(k: int):
        if k == depth:
            return []
        return [f"    s.bz r1, t{k}"] + level(k + 1) + [f"    jmp e{k}", f"t{k}:", "    nop", f"e{k}:", "    eosjmp"]

    return "\n".join(["    ldi r1, 1"] + level(0) + ["    halt"])


@pytest.mark.parametrize("secret, regs", [(1, (7, 0)), (0, (0, 9))])
def test_secure_branch_keeps_only_the_real_path(secret, regs):
    program = assemble(BRANCH_PROGRAM)

    result = run(program, init_mem=[secret])

    assert result.trap is None
    assert tuple(result.final_regs[2:4]) == regs
    assert result.drains == 3
    assert result.max_nesting == 1


def test_both_paths_commit_regardless_of_outcome():
    program = assemble(BRANCH_PROGRAM)

    taken = observe(program, secret_assignment={"s": 0})
    not_taken = observe(program, secret_assignment={"s": 1})

    assert taken.events == not_taken.events
    assert taken.total_cycles == not_taken.total_cycles
    assert 4 in taken.committed_pcs()
    assert 2 in taken.committed_pcs()


def test_restore_reads_the_same_scratchpad_words_for_both_outcomes():
    program = assemble(BRANCH_PROGRAM)

    reads = []
    for secret in (0, 1):
        observation = observe(program, secret_assignment={"s": secret})
        reads.append([event for event in observation.events if event.kind == "spm_read"])

    assert reads[0] == reads[1]
    assert len(reads[0]) == 3


def test_legacy_machine_runs_one_path():
    program = assemble(BRANCH_PROGRAM)

    taken = run_legacy(program, init_mem=[0])
    not_taken = run_legacy(program, init_mem=[1])

    assert taken.final_regs[3] == 9
    assert not_taken.final_regs[2] == 7
    assert taken.drains == 0
    assert taken.committed_instructions != not_taken.committed_instructions


@pytest.mark.parametrize("depth", [1, 2, 15, 30])
def test_nesting_up_to_capacity_completes(depth):
    result = run(assemble(_nested(depth)), capacity=30)

    assert result.trap is None
    assert result.max_nesting == depth
    assert result.drains == 3 * depth


def test_nesting_past_capacity_traps():
    result = run(assemble(_nested(31)), capacity=30)

    assert result.trap is not None
    assert result.trap.kind == "jbtable_overflow"
    assert result.max_nesting == 30


def test_unmatched_eosjmp_traps():
    result = run(assemble("    eosjmp\n    halt"))

    assert result.trap.kind == "unmatched_eosjmp"
    assert result.trap.pc == 0


def test_eosjmp_is_a_nop_on_the_legacy_machine():
    result = run_legacy(assemble("    eosjmp\n    halt"))

    assert result.trap is None
    assert result.committed_instructions == 2


def test_memory_out_of_bounds_traps():
    result = run(assemble(".memory 2\n    ldi r1, 5\n    ld r2, r1, 0\n    halt"))

    assert result.trap.kind == "memory_out_of_bounds"
    assert result.trap.pc == 1


def test_step_limit_traps():
    result = run(assemble("    ldi r1, 1\nloop:\n    bnz r1, loop\n    halt"), step_limit=50)

    assert result.trap.kind == "step_limit_exceeded"
    assert result.committed_instructions == 50


def test_return_without_call_traps():
    result = run(assemble("    bnz r0, done\n    ret\ndone:\n    halt"))

    assert result.trap.kind == "return_stack_underflow"


def test_call_and_return():
    program = assemble(
        """
        call body
        halt
    body:
        ldi r4, 11
        ret
        """
    )

    result = run(program)

    assert result.final_regs[4] == 11
    assert result.trap is None


def test_cmov_selects_on_predicate():
    program = assemble(
        """
        ldi r1, 1
        ldi r2, 5
        ldi r3, 9
        cmov r3, r1, r2
        ldi r4, 0
        ldi r5, 6
        cmov r5, r4, r2
        halt
        """
    )

    result = run(program)

    assert result.final_regs[3] == 5
    assert result.final_regs[5] == 6


def test_arithmetic_wraps_and_divides_toward_zero():
    program = assemble(
        """
        ldi r1, 0x7fffffffffffffff
        ldi r2, 1
        add r3, r1, r2
        ldi r4, -7
        divc r5, r4, 2
        slt r6, r4, r2
        shr r7, r4, 60
        halt
        """
    )

    regs = run(program).final_regs

    assert regs[3] == -(2**63)
    assert regs[5] == -3
    assert regs[6] == 1
    assert regs[7] == 15


def test_drain_penalty_is_charged_per_drain():
    program = assemble(BRANCH_PROGRAM)

    cheap = run(program, init_mem=[1], timing=TimingModel(drain_penalty=0))
    costly = run(program, init_mem=[1], timing=TimingModel(drain_penalty=14))

    assert costly.cycles - cheap.cycles == 3 * 14


def test_cache_model_counts_hits_and_misses():
    cache = CacheModel(CacheConfig(size=256, ways=2, line=64))

    assert cache.access(0) == 20
    assert cache.access(1) == 0
    assert (cache.hits, cache.misses) == (1, 1)


@given(st.lists(st.booleans(), max_size=60))
def test_jbtable_is_last_in_first_out(pushes):
    table = JbTable(capacity=60)
    shadow = []
    for index, push in enumerate(pushes):
        if push or not shadow:
            entry = JbEntry(next_pc=index, outcome=Outcome.T)
            table.push(entry)
            shadow.append(entry)
        else:
            assert table.pop() is shadow.pop()
        assert table.depth == len(shadow)
        assert table.top() is (shadow[-1] if shadow else None)


def test_jbtable_rejects_push_when_full():
    table = JbTable(capacity=1)
    table.push(JbEntry(next_pc=0, outcome=Outcome.NT))

    assert table.full
    with pytest.raises(JbTableError):
        table.push(JbEntry(next_pc=1, outcome=Outcome.NT))


def _machine(source: str, memory=(), registers=None) -> MachineState:
    program = assemble(source)
    image = program.initial_memory()
    image[: len(memory)] = list(memory)
    return MachineState(program, image, registers=registers, observer=ObservationRecorder())


@pytest.mark.parametrize("secret, outcome", [(0, Outcome.T), (1, Outcome.NT)])
def test_step_sjmp_records_outcome_and_falls_through(secret, outcome):
    state = _machine(BRANCH_PROGRAM, memory=[secret])
    state.step()

    state.step()

    entry = state.jbtable.top()
    assert state.jbtable.depth == 1
    assert entry.outcome is outcome
    assert entry.valid and not entry.jb
    assert entry.next_pc == state.program.instructions[1].imm
    assert state.pc == 2
    assert state.drains == 1
    assert state.spm.slot(0).regs_pre == state.regs


def test_nested_sjmp_uses_the_next_scratchpad_slot():
    state = _machine(_nested(2))
    for _ in range(3):
        state.step()

    writes = [event.addr for event in state.observer.events if event.kind == "spm_write" and event.pc == 2]
    assert state.jbtable.depth == 2
    assert writes == [state.spm.pre_address(1, index) for index in range(state.register_count)]
    assert writes[0] == 2 * state.register_count + 2


def _at_second_eosjmp(secret: int) -> MachineState:
    state = _machine(BRANCH_PROGRAM, memory=[secret], registers=[0, 0, 100, 200])
    for _ in range(6):
        state.step()
    assert state.pc == 5 and state.jbtable.top().jb
    return state


@pytest.mark.parametrize("secret, expected", [(1, (7, 200)), (0, (100, 9))])
def test_restore_registers_picks_the_real_path_values(secret, expected):
    state = _at_second_eosjmp(secret)

    state.restore_registers(state.jbtable.top(), state.spm.slot(0))

    assert tuple(state.regs[2:4]) == expected


def test_restore_registers_reads_are_outcome_independent():
    reads = []
    for secret in (0, 1):
        state = _at_second_eosjmp(secret)
        before = len(state.observer.events)
        cycle = state.cycle
        state.restore_registers(state.jbtable.top(), state.spm.slot(0))
        reads.append(([(event.kind, event.addr) for event in state.observer.events[before:]], state.cycle - cycle))

    assert reads[0] == reads[1]
    assert [addr for _, addr in reads[0][0]] == [
        state.spm.nt_address(0, 2),
        state.spm.pre_address(0, 3),
    ]


@pytest.mark.parametrize("predicate", [0, 1])
def test_step_cmov_cost_does_not_depend_on_predicate(predicate):
    state = _machine(f"    ldi r1, {predicate}\n    ldi r2, 5\n    cmov r3, r1, r2\n    halt")
    state.step()
    state.step()
    cycle = state.cycle

    state.step_cmov(state.program.instructions[2])

    assert state.cycle - cycle == state.timing.base_cpi
    assert state.regs[3] == (5 if predicate else 0)


@st.composite
def region_trees(draw):
    """Nested secure regions; leaves are registers written by ldi."""
    leaves = st.lists(st.integers(min_value=2, max_value=14), max_size=2)
    arms = st.recursive(
        leaves,
        lambda inner: st.lists(st.one_of(st.integers(min_value=2, max_value=14), st.tuples(inner, inner)), max_size=3),
        max_leaves=12,
    )
    return draw(st.tuples(arms, arms))


def _region_program(tree):
    lines = [".memory 1", ".symbol s 0 1", "    ld r1, r0, s"]
    depths = [0]
    labels = iter(range(1000))

    def arm(items, depth):
        lines.append("    nop")
        depths.append(depth)
        for item in items:
            if isinstance(item, tuple):
                region(item, depth)
            else:
                lines.append(f"    ldi r{item}, {item * 3}")
                depths.append(depth)

    def region(node, depth):
        label = next(labels)
        lines.append(f"    s.bz r1, t{label}")
        depths.append(depth)
        arm(node[0], depth + 1)
        lines.append(f"    jmp e{label}")
        depths.append(depth + 1)
        lines.append(f"t{label}:")
        arm(node[1], depth + 1)
        lines.append(f"e{label}:")
        lines.append("    eosjmp")
        depths.append(depth + 1)

    region(tree, 0)
    lines.append("    halt")
    depths.append(0)
    return "\n".join(lines), depths


@settings(max_examples=100, deadline=None)
@given(region_trees(), st.integers(min_value=0, max_value=1))
def test_jbtable_depth_tracks_static_nesting(tree, secret):
    source, depths = _region_program(tree)
    state = _machine(source, memory=[secret])

    while not state.halted:
        assert state.jbtable.depth == depths[state.pc]
        state.step()

    assert state.jbtable.depth == 0
    assert state.max_nesting == max(depths)


@settings(max_examples=100, deadline=None)
@given(region_trees())
def test_random_regions_are_oblivious(tree):
    program = assemble(_region_program(tree)[0])

    taken = observe(program, secret_assignment={"s": 0})
    not_taken = observe(program, secret_assignment={"s": 1})

    assert taken.events == not_taken.events
    assert taken.result.spm_bytes_read == not_taken.result.spm_bytes_read


def test_program_without_secure_branches_runs_alike_on_both_machines():
    program = assemble(".memory 2\n    ldi r1, 4\n    st r0, r1, 1\n    ld r2, r0, 1\n    add r3, r2, r1\n    halt")

    assert run(program) == run_legacy(program)


def test_straight_line_cost_is_base_cpi_per_instruction():
    program = assemble("    ldi r1, 1\n    add r2, r1, r1\n    mov r3, r2\n    halt")

    result = run(program, timing=TimingModel(base_cpi=3))

    assert result.cycles == 4 * 3
    assert result.committed_instructions == 4
