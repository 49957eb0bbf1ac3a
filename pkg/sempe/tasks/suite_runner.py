import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Sequence, Tuple

from sempe.config import Settings, get_settings
from sempe.schemas import BenchMode, BenchResult, BenchSpec
from sempe.services.bench.generator import generate, ideal_paths
from sempe.services.machine.simulator import run
from sempe.services.machine.timing import TimingModel
from sempe.services.pipelines import get_pipeline
from sempe.services.seclang.codegen import CompileRejection
from sempe.services.seclang.parser import parse

logger = logging.getLogger(__name__)

BENCH_MODES: Tuple[str, ...] = ("baseline", "sempe", "cte", "legacy")
OBSERVED_STATE = ["acc"]


class SuiteRunner:
    def __init__(self, settings: Optional[Settings] = None):
        self.settings = settings or get_settings()
        self.timing = TimingModel.from_settings(self.settings)
        self.executor = ThreadPoolExecutor(max_workers=self.settings.bench_workers)

    def run_cell(self, spec: BenchSpec, mode: BenchMode) -> BenchResult:
        ideal = ideal_paths(spec, mode)
        try:
            pipeline = get_pipeline(mode, self.settings)
            compiled = pipeline.compile(parse(generate(spec)))
        except CompileRejection as exc:
            logger.info("bench %s W=%d %s rejected: %s", spec.workload, spec.width, mode, exc)
            return BenchResult(spec=spec, mode=mode, status="rejected", ideal=ideal, trap=str(exc))

        program = compiled.program
        result = run(
            program,
            mode=pipeline.machine_mode,
            timing=self.timing,
            capacity=self.settings.jbtable_capacity,
            step_limit=self.settings.step_limit,
        )
        state = program.read_symbols(result.final_mem, OBSERVED_STATE)
        if result.trap is not None:
            logger.warning("bench %s W=%d %s trapped: %s", spec.workload, spec.width, mode, result.trap.kind)
            return BenchResult(
                spec=spec,
                mode=mode,
                status="trap",
                cycles=result.cycles,
                committed_instructions=result.committed_instructions,
                ideal=ideal,
                trap=result.trap.kind,
                final_state=state,
            )
        return BenchResult(
            spec=spec,
            mode=mode,
            cycles=result.cycles,
            committed_instructions=result.committed_instructions,
            ideal=ideal,
            final_state=state,
        )

    def run_suite(self, specs: Sequence[BenchSpec], modes: Sequence[str]) -> List[BenchResult]:
        unknown = [mode for mode in modes if mode not in BENCH_MODES]
        if unknown:
            raise ValueError(f"Unsupported bench mode: {', '.join(unknown)}")

        cells = [(spec, mode) for spec in specs for mode in modes]
        extra = [(spec, "baseline") for spec in specs if "baseline" not in modes]
        futures = [self.executor.submit(self.run_cell, spec, mode) for spec, mode in cells + extra]
        finished = [future.result() for future in futures]

        baselines: Dict[BenchSpec, BenchResult] = {}
        for (spec, mode), result in zip(cells + extra, finished):
            if mode == "baseline":
                baselines[spec] = result

        results: List[BenchResult] = []
        for (spec, _), result in zip(cells, finished):
            baseline = baselines[spec]
            if result.status == "ok" and baseline.status == "ok" and baseline.cycles:
                overhead = result.cycles / baseline.cycles
                result = result.model_copy(
                    update={"overhead_ratio": overhead, "ratio_vs_ideal": overhead / result.ideal}
                )
            results.append(result)
        logger.info("bench suite finished: %d cells", len(results))
        return results

    def shutdown(self) -> None:
        self.executor.shutdown(wait=True)


def run_suite(
    specs: Sequence[BenchSpec],
    modes: Sequence[str] = BENCH_MODES,
    settings: Optional[Settings] = None,
) -> List[BenchResult]:
    runner = SuiteRunner(settings)
    try:
        return runner.run_suite(specs, modes)
    finally:
        runner.shutdown()
