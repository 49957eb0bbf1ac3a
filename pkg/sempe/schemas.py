from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field

WorkloadName = Literal["fibonacci", "ones", "quicksort", "queens"]
BenchMode = Literal["baseline", "sempe", "cte", "legacy"]


class Trap(BaseModel):
    kind: str
    pc: int


class ExecutionResult(BaseModel):
    final_regs: List[int]
    final_mem: List[int]
    cycles: int
    committed_instructions: int
    trap: Optional[Trap] = None
    drains: int = 0
    spm_bytes_read: int = 0
    spm_bytes_written: int = 0
    cache_hits: int = 0
    cache_misses: int = 0
    max_nesting: int = 0

    def to_key_values(self) -> str:
        lines = [
            f"cycles={self.cycles}",
            f"committed_instructions={self.committed_instructions}",
            f"drains={self.drains}",
            f"spm_bytes_read={self.spm_bytes_read}",
            f"spm_bytes_written={self.spm_bytes_written}",
            f"max_nesting={self.max_nesting}",
            f"cache_hits={self.cache_hits}",
            f"cache_misses={self.cache_misses}",
            f"trap={self.trap.kind if self.trap else 'none'}",
        ]
        if self.trap is not None:
            lines.append(f"trap_pc={self.trap.pc}")
        lines.append("regs=" + ",".join(str(value) for value in self.final_regs))
        return "\n".join(lines)


class Divergence(BaseModel):
    index: int
    event_a: Optional[str] = None
    event_b: Optional[str] = None
    source_line: Optional[int] = None


class DiffSummary(BaseModel):
    events_a: int
    events_b: int
    total_cycles_a: int
    total_cycles_b: int
    common_prefix: int


class DiffReport(BaseModel):
    equal: bool
    first_divergence: Optional[Divergence] = None
    summary: DiffSummary

    def to_key_values(self) -> str:
        lines = [
            f"equal={'true' if self.equal else 'false'}",
            f"events_a={self.summary.events_a}",
            f"events_b={self.summary.events_b}",
            f"total_cycles_a={self.summary.total_cycles_a}",
            f"total_cycles_b={self.summary.total_cycles_b}",
            f"common_prefix={self.summary.common_prefix}",
        ]
        divergence = self.first_divergence
        if divergence is not None:
            lines.append(f"divergence_index={divergence.index}")
            lines.append(f"event_a={divergence.event_a or '<end>'}")
            lines.append(f"event_b={divergence.event_b or '<end>'}")
            if divergence.source_line is not None:
                lines.append(f"source_line={divergence.source_line}")
        return "\n".join(lines)

    def to_text(self) -> str:
        if self.equal:
            return (
                f"traces are indistinguishable ({self.summary.events_a} events, "
                f"{self.summary.total_cycles_a} cycles)"
            )
        divergence = self.first_divergence
        if divergence is None:
            return (
                "traces differ in total cycles only: "
                f"{self.summary.total_cycles_a} vs {self.summary.total_cycles_b}"
            )
        where = f" (source line {divergence.source_line})" if divergence.source_line is not None else ""
        return (
            f"traces diverge at event {divergence.index}{where}:\n"
            f"  a: {divergence.event_a or '<end of trace>'}\n"
            f"  b: {divergence.event_b or '<end of trace>'}"
        )


class ScanPair(BaseModel):
    reference: Dict[str, int]
    other: Dict[str, int]
    divergence: Optional[Divergence] = None


class ScanReport(BaseModel):
    mode: str
    secret_variables: List[str]
    assignments: int
    indistinguishable: bool
    distinguishable_pairs: List[ScanPair] = Field(default_factory=list)

    def to_text(self) -> str:
        verdict = "indistinguishable" if self.indistinguishable else "DISTINGUISHABLE"
        lines = [
            f"mode={self.mode} secrets={','.join(self.secret_variables) or '-'} "
            f"assignments={self.assignments} verdict={verdict}"
        ]
        for pair in self.distinguishable_pairs:
            other = ",".join(f"{name}={value}" for name, value in pair.other.items())
            reference = ",".join(f"{name}={value}" for name, value in pair.reference.items())
            site = ""
            if pair.divergence is not None:
                site = f" at event {pair.divergence.index}"
                if pair.divergence.source_line is not None:
                    site += f" (source line {pair.divergence.source_line})"
            lines.append(f"  {reference} vs {other}{site}")
        return "\n".join(lines)


class BenchSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    workload: WorkloadName
    iterations: int = Field(default=3, ge=1)
    width: int = Field(default=1, ge=1, le=255)
    workload_size: Optional[int] = Field(default=None, ge=1)
    seed: int = 0


class BenchResult(BaseModel):
    spec: BenchSpec
    mode: BenchMode
    status: Literal["ok", "rejected", "trap"] = "ok"
    cycles: Optional[int] = None
    committed_instructions: Optional[int] = None
    overhead_ratio: Optional[float] = None
    ideal: int = 1
    ratio_vs_ideal: Optional[float] = None
    trap: Optional[str] = None
    final_state: Dict[str, List[int]] = Field(default_factory=dict)


class CliConfig(BaseModel):
    subcommand: str
    input_path: Optional[str] = None
    second_input_path: Optional[str] = None
    output_path: Optional[str] = None
    mode: Optional[str] = None
    pipeline: Optional[str] = None
    config_path: Optional[str] = None
    seed: int = 0
    verbosity: int = 0
    overrides: Dict[str, str] = Field(default_factory=dict)


class ProgramMap(BaseModel):
    """Sidecar written next to a compiled binary."""

    pipeline: str
    source_lines: Dict[int, int] = Field(default_factory=dict)
    symbols: Dict[str, List[int]] = Field(default_factory=dict)
    secrets: List[str] = Field(default_factory=list)
