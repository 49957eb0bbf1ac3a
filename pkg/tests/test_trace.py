import pytest

from sempe.schemas import BenchSpec
from sempe.services.bench import generate
from sempe.services.isa import assemble
from sempe.services.pipelines import get_pipeline
from sempe.services.seclang import parse
from sempe.services.trace import (
    Observation,
    ObservationEvent,
    ScanLimitError,
    compare,
    leakage_scan,
    observe,
    parse_observation,
    read_observation,
    source_map_of,
    write_observation,
)

LEAKY_BRANCH = """
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


def test_observation_text_round_trip(tmp_path):
    observation = observe(assemble(LEAKY_BRANCH), secret_assignment={"s": 1})
    path = tmp_path / "run.trace"

    write_observation(path, observation)
    loaded = read_observation(path)

    assert loaded == observation
    assert path.read_text(encoding="utf-8").startswith(f"# total_cycles {observation.total_cycles}\n")


def test_parse_observation_without_header_uses_last_cycle():
    observation = parse_observation("1 commit_pc 0\n2 mem_read 0 5\n\n# note\n3 commit_pc 1\n")

    assert observation.total_cycles == 3
    assert observation.events[1] == ObservationEvent(2, "mem_read", 0, 5)
    assert observation.count("commit_pc") == 2


def test_parse_observation_rejects_unknown_event_kind():
    with pytest.raises(ValueError, match="line 1"):
        parse_observation("1 teleport 0\n")


def test_compare_equal_observations():
    a = Observation(events=(ObservationEvent(1, "commit_pc", 0),), total_cycles=1)

    report = compare(a, a)

    assert report.equal
    assert report.first_divergence is None
    assert "indistinguishable" in report.to_text()


def test_compare_reports_first_divergence_with_source_line():
    program = assemble(LEAKY_BRANCH)
    taken = observe(program, secret_assignment={"s": 0}, mode="legacy")
    not_taken = observe(program, secret_assignment={"s": 1}, mode="legacy")

    report = compare(taken, not_taken, source_map_of(program))

    assert not report.equal
    assert report.first_divergence.index == 3
    assert report.first_divergence.event_a.endswith("commit_pc 4")
    assert report.first_divergence.event_b.endswith("commit_pc 2")
    assert report.first_divergence.source_line == program.instructions[4].source_line
    assert "divergence_index=3" in report.to_key_values()


def test_compare_detects_cycle_only_difference():
    events = (ObservationEvent(1, "commit_pc", 0),)

    report = compare(Observation(events, 10), Observation(events, 12))

    assert not report.equal
    assert report.first_divergence is None
    assert "total cycles only" in report.to_text()


def test_compare_reports_shorter_trace():
    short = Observation((ObservationEvent(1, "commit_pc", 0),), 1)
    longer = Observation(short.events + (ObservationEvent(2, "commit_pc", 1),), 2)

    report = compare(short, longer)

    assert report.first_divergence.index == 1
    assert report.first_divergence.event_a is None


def test_leakage_scan_sempe_is_indistinguishable():
    report = leakage_scan(assemble(LEAKY_BRANCH), None, ["s"], {"s": [0, 1, 5]}, mode="sempe")

    assert report.indistinguishable
    assert report.assignments == 3
    assert report.distinguishable_pairs == []


def test_leakage_scan_legacy_is_distinguishable():
    report = leakage_scan(assemble(LEAKY_BRANCH), None, ["s"], {"s": [0, 1]}, mode="legacy", workers=2)

    assert not report.indistinguishable
    assert report.distinguishable_pairs[0].other == {"s": 1}
    assert "DISTINGUISHABLE" in report.to_text()


def test_leakage_scan_enforces_cap():
    with pytest.raises(ScanLimitError):
        leakage_scan(assemble(LEAKY_BRANCH), None, ["s"], {"s": list(range(10))}, cap=4)


def test_leakage_scan_requires_domain_for_every_secret():
    with pytest.raises(ValueError, match="s"):
        leakage_scan(assemble(LEAKY_BRANCH), None, ["s"], {})


def _ones_program():
    spec = BenchSpec(workload="ones", width=2, iterations=1, workload_size=2)
    return get_pipeline("sempe").compile(parse(generate(spec))).program


@pytest.mark.parametrize("secrets", [{"s1": 0, "s2": 0}, {"s1": 1, "s2": 0}, {"s1": 0, "s2": 1}])
def test_observation_invariants_on_a_compiled_benchmark(secrets):
    observation = observe(_ones_program(), secret_assignment=secrets)

    cycles = [event.cycle for event in observation.events]
    assert cycles == sorted(cycles)
    assert observation.count("commit_pc") == observation.result.committed_instructions
    assert observation.count("drain") == 3 * 2 == observation.result.drains
    assert observation.total_cycles == observation.result.cycles


def test_legacy_observation_has_no_drains_or_scratchpad_traffic():
    observation = observe(_ones_program(), secret_assignment={"s1": 1, "s2": 0}, mode="legacy")

    assert observation.count("drain") == 0
    assert observation.count("spm_read") == observation.count("spm_write") == 0


def test_observe_is_deterministic():
    program = _ones_program()

    first = observe(program, secret_assignment={"s1": 0, "s2": 1})
    second = observe(program, secret_assignment={"s1": 0, "s2": 1})

    assert first == second
    assert first.result == second.result
