import itertools
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, NamedTuple, Optional, Sequence, Tuple, Union

from sempe.config import get_settings
from sempe.schemas import DiffReport, DiffSummary, Divergence, ExecutionResult, ScanPair, ScanReport
from sempe.services.isa.program import InputValue, Program
from sempe.services.machine.simulator import ExecutionObserver, MachineMode, run
from sempe.services.machine.timing import TimingModel

logger = logging.getLogger(__name__)

EVENT_KINDS = ("commit_pc", "mem_read", "mem_write", "drain", "spm_read", "spm_write", "trap")
_TOTAL_PREFIX = "# total_cycles "


class ScanLimitError(ValueError):
    pass


class ObservationEvent(NamedTuple):
    cycle: int
    kind: str
    pc: int
    addr: Optional[int] = None

    def render(self) -> str:
        text = f"{self.cycle} {self.kind} {self.pc}"
        return text if self.addr is None else f"{text} {self.addr}"


@dataclass(frozen=True)
class Observation:
    events: Tuple[ObservationEvent, ...]
    total_cycles: int
    result: Optional[ExecutionResult] = field(default=None, compare=False)

    def count(self, kind: str) -> int:
        return sum(1 for event in self.events if event.kind == kind)

    def committed_pcs(self) -> List[int]:
        return [event.pc for event in self.events if event.kind == "commit_pc"]

    def to_text(self) -> str:
        lines = [f"{_TOTAL_PREFIX}{self.total_cycles}"]
        lines.extend(event.render() for event in self.events)
        return "\n".join(lines) + "\n"


class ObservationRecorder(ExecutionObserver):
    def __init__(self):
        self.events: List[ObservationEvent] = []

    def on_event(self, kind: str, pc: int, addr: Optional[int], cycle: int) -> None:
        self.events.append(ObservationEvent(cycle, kind, pc, addr))


def parse_observation(text: str) -> Observation:
    total: Optional[int] = None
    events: List[ObservationEvent] = []
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith(_TOTAL_PREFIX):
            total = int(line[len(_TOTAL_PREFIX) :])
            continue
        if line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) not in (3, 4) or parts[1] not in EVENT_KINDS:
            raise ValueError(f"line {number}: malformed observation event: {line!r}")
        addr = int(parts[3]) if len(parts) == 4 else None
        events.append(ObservationEvent(int(parts[0]), parts[1], int(parts[2]), addr))
    if total is None:
        total = events[-1].cycle if events else 0
    return Observation(events=tuple(events), total_cycles=total)


def write_observation(path: Union[str, Path], observation: Observation) -> None:
    Path(path).write_text(observation.to_text(), encoding="utf-8")


def read_observation(path: Union[str, Path]) -> Observation:
    return parse_observation(Path(path).read_text(encoding="utf-8"))


def source_map_of(program: Program) -> Dict[int, int]:
    return {pc: ins.source_line for pc, ins in enumerate(program.instructions) if ins.source_line}


def observe(
    program: Program,
    public_inputs: Optional[Mapping[str, InputValue]] = None,
    secret_assignment: Optional[Mapping[str, InputValue]] = None,
    mode: MachineMode = "sempe",
    timing: Optional[TimingModel] = None,
    capacity: Optional[int] = None,
    step_limit: Optional[int] = None,
) -> Observation:
    inputs: Dict[str, InputValue] = dict(public_inputs or {})
    inputs.update(secret_assignment or {})
    recorder = ObservationRecorder()
    result = run(
        program,
        init_mem=program.initial_memory(inputs),
        mode=mode,
        timing=timing,
        observer=recorder,
        capacity=capacity,
        step_limit=step_limit,
    )
    return Observation(events=tuple(recorder.events), total_cycles=result.cycles, result=result)


def compare(
    a: Observation,
    b: Observation,
    source_map: Optional[Mapping[int, int]] = None,
) -> DiffReport:
    common = 0
    for left, right in zip(a.events, b.events):
        if left != right:
            break
        common += 1

    summary = DiffSummary(
        events_a=len(a.events),
        events_b=len(b.events),
        total_cycles_a=a.total_cycles,
        total_cycles_b=b.total_cycles,
        common_prefix=common,
    )
    same_events = common == len(a.events) == len(b.events)
    if same_events:
        return DiffReport(equal=a.total_cycles == b.total_cycles, summary=summary)

    left = a.events[common] if common < len(a.events) else None
    right = b.events[common] if common < len(b.events) else None
    source_line = None
    if source_map:
        for event in (left, right):
            if event is not None and event.pc in source_map:
                source_line = source_map[event.pc]
                break
    divergence = Divergence(
        index=common,
        event_a=left.render() if left else None,
        event_b=right.render() if right else None,
        source_line=source_line,
    )
    return DiffReport(equal=False, first_divergence=divergence, summary=summary)


def leakage_scan(
    program: Program,
    public_inputs: Optional[Mapping[str, InputValue]],
    secret_variables: Sequence[str],
    domain: Mapping[str, Sequence[int]],
    mode: MachineMode = "sempe",
    timing: Optional[TimingModel] = None,
    cap: Optional[int] = None,
    workers: Optional[int] = None,
    capacity: Optional[int] = None,
) -> ScanReport:
    """Run every secret assignment and compare each observation against the first."""
    settings = get_settings()
    cap = settings.scan_cap if cap is None else cap
    workers = settings.scan_workers if workers is None else workers

    names = list(secret_variables)
    missing = [name for name in names if name not in domain or not domain[name]]
    if missing:
        raise ValueError(f"no domain given for secret(s): {', '.join(missing)}")
    total = 1
    for name in names:
        total *= len(domain[name])
    if total > cap:
        raise ScanLimitError(f"{total} secret assignments exceed the scan cap of {cap}")

    assignments = [dict(zip(names, combo)) for combo in itertools.product(*(domain[name] for name in names))]

    def _observe(assignment: Dict[str, int]) -> Observation:
        return observe(program, public_inputs, assignment, mode=mode, timing=timing, capacity=capacity)

    if workers > 1 and len(assignments) > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            observations = list(executor.map(_observe, assignments))
    else:
        observations = [_observe(assignment) for assignment in assignments]

    source_map = source_map_of(program)
    reference = observations[0]
    pairs: List[ScanPair] = []
    for assignment, observation in zip(assignments[1:], observations[1:]):
        report = compare(reference, observation, source_map)
        if not report.equal:
            pairs.append(ScanPair(reference=assignments[0], other=assignment, divergence=report.first_divergence))

    logger.info(
        "leakage scan mode=%s assignments=%d distinguishable=%d",
        mode,
        len(assignments),
        len(pairs),
    )
    return ScanReport(
        mode=mode,
        secret_variables=names,
        assignments=len(assignments),
        indistinguishable=not pairs,
        distinguishable_pairs=pairs,
    )
