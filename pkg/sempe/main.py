import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

from sempe.config import Settings, get_settings, load_config
from sempe.schemas import BenchSpec, CliConfig, ProgramMap
from sempe.services.bench.report import report
from sempe.services.isa.assembler import assemble, format_program
from sempe.services.isa.encoding import decode, encode, read_image, read_memory_words, write_image
from sempe.services.isa.program import InputValue, Program
from sempe.services.machine.timing import TimingModel
from sempe.services.pipelines import PIPELINE_MODES, get_pipeline
from sempe.services.pipelines.base import CompiledProgram
from sempe.services.seclang.codegen import CompileRejection
from sempe.services.seclang.parser import SecLangSyntaxError, parse
from sempe.services.trace import compare, leakage_scan, observe, read_observation, write_observation
from sempe.tasks.suite_runner import BENCH_MODES, run_suite

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_REJECTED = 2
EXIT_TRAP = 3
EXIT_DISTINGUISHABLE = 4

DEFAULT_WIDTHS = "1,2,5,10"
DEFAULT_WORKLOADS = "fibonacci,ones,quicksort,queens"

_OVERRIDES = {
    "capacity": "jbtable_capacity",
    "drain_penalty": "drain_penalty",
    "registers": "register_count",
    "cache": "cache_enabled",
}


class UsageError(ValueError):
    pass


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message: str):
        raise UsageError(message)


# -- argument helpers -------------------------------------------------


def _int_list(text: str) -> List[int]:
    try:
        return [int(part, 0) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise UsageError(f"expected comma separated integers, got {text!r}") from exc


def _assignments(items: Optional[Sequence[str]]) -> Dict[str, InputValue]:
    """NAME=V or NAME=V1,V2,... pairs from repeated --set flags."""
    values: Dict[str, InputValue] = {}
    for item in items or []:
        name, sep, raw = item.partition("=")
        if not sep or not name:
            raise UsageError(f"expected NAME=VALUE, got {item!r}")
        parsed = _int_list(raw)
        values[name] = parsed[0] if len(parsed) == 1 else parsed
    return values


def _domains(items: Optional[Sequence[str]], secrets: Sequence[str]) -> Dict[str, List[int]]:
    domain: Dict[str, List[int]] = {name: [0, 1] for name in secrets}
    for name, value in _assignments(items).items():
        if name not in domain:
            raise UsageError(f"{name} is not a secret of this program")
        domain[name] = [value] if isinstance(value, int) else list(value)
    return domain


def _map_path(path: Path) -> Path:
    return path.with_suffix(".map.json")


def _build_parser() -> argparse.ArgumentParser:
    common = _ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value machine configuration file")
    common.add_argument("-v", "--verbose", action="count", default=0)
    common.add_argument("--capacity", type=int, help="jbTable entries")
    common.add_argument("--drain-penalty", type=int, help="cycles per pipeline drain")
    common.add_argument("--registers", type=int, help="architectural register count")
    common.add_argument("--cache", action="store_true", default=None, help="enable the data cache model")

    parser = _ArgumentParser(prog="sempe", description="Secure multi-path execution toolchain")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    asm = sub.add_parser("asm", parents=[common], help="assemble to a binary image, or disassemble one")
    asm.add_argument("input")
    asm.add_argument("-o", "--output")
    asm.add_argument("--disassemble", action="store_true")
    asm.add_argument("--legacy", action="store_true", help="decode the way a machine without SeMPE support does")

    comp = sub.add_parser("compile", parents=[common], help="compile SecLang to .asm, .bin and a source map")
    comp.add_argument("input")
    comp.add_argument("-o", "--output")
    flavour = comp.add_mutually_exclusive_group()
    flavour.add_argument("--sempe", dest="pipeline", action="store_const", const="sempe")
    flavour.add_argument("--cte", dest="pipeline", action="store_const", const="cte")
    flavour.add_argument("--plain", dest="pipeline", action="store_const", const="plain")
    comp.set_defaults(pipeline="sempe")
    comp.add_argument("--privatize-all", action="store_true", default=None)

    run_cmd = sub.add_parser("run", parents=[common], help="execute a .bin, .asm or .sl program")
    run_cmd.add_argument("input")
    run_cmd.add_argument("--mode", choices=("sempe", "legacy"), default="sempe")
    run_cmd.add_argument("--pipeline", choices=PIPELINE_MODES, default="sempe", help="pipeline for .sl input")
    run_cmd.add_argument("--mem", help="raw little-endian 64-bit memory image")
    run_cmd.add_argument("--set", action="append", metavar="NAME=VALUE")
    run_cmd.add_argument("--trace", help="write the observation trace to this file")

    leak = sub.add_parser("leakcheck", parents=[common], help="compare observations over every secret assignment")
    leak.add_argument("input")
    leak.add_argument("--mode", choices=PIPELINE_MODES, default="sempe")
    leak.add_argument("--domain", action="append", metavar="SECRET=V1,V2,...")
    leak.add_argument("--set", action="append", metavar="NAME=VALUE")
    leak.add_argument("--cap", type=int)

    bench = sub.add_parser("bench", parents=[common], help="run the nested secret-branch benchmark grid")
    bench.add_argument("--workloads", default=DEFAULT_WORKLOADS)
    bench.add_argument("--widths", default=DEFAULT_WIDTHS)
    bench.add_argument("--modes", default=",".join(BENCH_MODES))
    bench.add_argument("--iterations", type=int, default=3)
    bench.add_argument("--size", type=int, help="workload size override")
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("-o", "--output", default="results.csv")
    bench.add_argument("--emit-plotdata", metavar="FILE")

    diff = sub.add_parser("trace-diff", parents=[common], help="compare two observation files")
    diff.add_argument("input")
    diff.add_argument("second")
    diff.add_argument("--format", choices=("text", "kv"), default="text")
    diff.add_argument("--map", help="source map written by compile")
    return parser


def _cli_config(args: argparse.Namespace) -> CliConfig:
    overrides = {
        field: str(getattr(args, flag))
        for flag, field in _OVERRIDES.items()
        if getattr(args, flag, None) is not None
    }
    if getattr(args, "privatize_all", None):
        overrides["privatize_all"] = "true"
    return CliConfig(
        subcommand=args.subcommand,
        input_path=getattr(args, "input", None),
        second_input_path=getattr(args, "second", None),
        output_path=getattr(args, "output", None),
        mode=getattr(args, "mode", None),
        pipeline=getattr(args, "pipeline", None),
        config_path=args.config,
        seed=getattr(args, "seed", 0),
        verbosity=args.verbose,
        overrides=overrides,
    )


def _settings(config: CliConfig) -> Settings:
    settings = load_config(config.config_path) if config.config_path else get_settings()
    if config.overrides:
        values = settings.model_dump()
        values.update(config.overrides)
        settings = Settings(**values)
    return settings


def _configure_logging(config: CliConfig, settings: Settings) -> None:
    if config.verbosity >= 2:
        level = logging.DEBUG
    elif config.verbosity == 1:
        level = logging.INFO
    else:
        level = getattr(logging, settings.log_level.upper(), logging.WARNING)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


# -- program loading --------------------------------------------------


def _compile_file(path: Path, pipeline: str, settings: Settings) -> CompiledProgram:
    ast = parse(path.read_text(encoding="utf-8"))
    return get_pipeline(pipeline, settings).compile(ast)


def _program_map(compiled: CompiledProgram, pipeline: str) -> ProgramMap:
    return ProgramMap(
        pipeline=pipeline,
        source_lines=compiled.source_map(),
        symbols={name: list(entry) for name, entry in compiled.program.symbols.items()},
        secrets=compiled.ast.secret_names,
    )


def _load_program(path: Path, config: CliConfig, settings: Settings, pipeline: str) -> Program:
    if path.suffix == ".sl":
        return _compile_file(path, pipeline, settings).program
    if path.suffix == ".asm":
        return assemble(path.read_text(encoding="utf-8"))
    program = decode(read_image(path), config.mode or "sempe")
    sidecar = _map_path(path)
    if sidecar.is_file():
        mapping = ProgramMap.model_validate_json(sidecar.read_text(encoding="utf-8"))
        program = replace(program, symbols={name: tuple(entry) for name, entry in mapping.symbols.items()})
    return program


# -- subcommands ------------------------------------------------------


def cmd_asm(config: CliConfig, args: argparse.Namespace, settings: Settings) -> int:
    path = Path(config.input_path)
    if args.disassemble:
        program = decode(read_image(path), "legacy" if args.legacy else "sempe")
        text = format_program(program)
        if config.output_path:
            Path(config.output_path).write_text(text, encoding="utf-8")
        else:
            sys.stdout.write(text)
        return EXIT_OK
    program = assemble(path.read_text(encoding="utf-8"))
    output = Path(config.output_path) if config.output_path else path.with_suffix(".bin")
    write_image(output, encode(program))
    print(f"wrote {output} ({len(program)} instructions)")
    return EXIT_OK


def cmd_compile(config: CliConfig, args: argparse.Namespace, settings: Settings) -> int:
    path = Path(config.input_path)
    compiled = _compile_file(path, config.pipeline, settings)
    stem = Path(config.output_path) if config.output_path else path.with_suffix("")
    asm_path = stem.with_suffix(".asm")
    bin_path = stem.with_suffix(".bin")
    asm_path.write_text(format_program(compiled.program), encoding="utf-8")
    write_image(bin_path, encode(compiled.program))
    _map_path(bin_path).write_text(_program_map(compiled, config.pipeline).model_dump_json(indent=2), encoding="utf-8")
    print(
        f"{config.pipeline}: {len(compiled.program)} instructions, "
        f"{compiled.secure_branches} secure branches -> {bin_path}"
    )
    return EXIT_OK


def cmd_run(config: CliConfig, args: argparse.Namespace, settings: Settings) -> int:
    program = _load_program(Path(config.input_path), config, settings, args.pipeline)
    inputs = _assignments(args.set)
    if args.mem:
        words = read_memory_words(args.mem)
        program = replace(program, memory_image=tuple(words), data_size=max(program.data_size, len(words)))
    observation = observe(
        program,
        inputs,
        mode=config.mode,
        timing=TimingModel.from_settings(settings),
        capacity=settings.jbtable_capacity,
        step_limit=settings.step_limit,
    )
    result = observation.result
    print(result.to_key_values())
    if program.symbols:
        for name, values in program.read_symbols(result.final_mem).items():
            print(f"{name}={','.join(str(value) for value in values)}")
    if args.trace:
        write_observation(args.trace, observation)
    return EXIT_TRAP if result.trap is not None else EXIT_OK


def cmd_leakcheck(config: CliConfig, args: argparse.Namespace, settings: Settings) -> int:
    compiled = _compile_file(Path(config.input_path), config.mode, settings)
    pipeline = get_pipeline(config.mode, settings)
    secrets = compiled.ast.secret_names
    scan = leakage_scan(
        compiled.program,
        _assignments(args.set),
        secrets,
        _domains(args.domain, secrets),
        mode=pipeline.machine_mode,
        timing=TimingModel.from_settings(settings),
        cap=args.cap if args.cap is not None else settings.scan_cap,
        workers=settings.scan_workers,
        capacity=settings.jbtable_capacity,
    )
    print(scan.to_text())
    return EXIT_OK if scan.indistinguishable else EXIT_DISTINGUISHABLE


def cmd_bench(config: CliConfig, args: argparse.Namespace, settings: Settings) -> int:
    workloads = [name.strip() for name in args.workloads.split(",") if name.strip()]
    modes = [mode.strip() for mode in args.modes.split(",") if mode.strip()]
    specs = [
        BenchSpec(
            workload=workload,
            iterations=args.iterations,
            width=width,
            workload_size=args.size,
            seed=config.seed,
        )
        for workload in workloads
        for width in _int_list(args.widths)
    ]
    results = run_suite(specs, modes, settings)
    print(report(results, config.output_path, args.emit_plotdata))
    if any(result.status == "trap" for result in results):
        return EXIT_TRAP
    return EXIT_OK


def cmd_trace_diff(config: CliConfig, args: argparse.Namespace, settings: Settings) -> int:
    first = read_observation(config.input_path)
    second = read_observation(config.second_input_path)
    source_map = None
    if args.map:
        source_map = ProgramMap.model_validate_json(Path(args.map).read_text(encoding="utf-8")).source_lines
    diff = compare(first, second, source_map)
    print(diff.to_key_values() if args.format == "kv" else diff.to_text())
    return EXIT_OK if diff.equal else EXIT_DISTINGUISHABLE


COMMANDS: Dict[str, Callable[[CliConfig, argparse.Namespace, Settings], int]] = {
    "asm": cmd_asm,
    "compile": cmd_compile,
    "run": cmd_run,
    "leakcheck": cmd_leakcheck,
    "bench": cmd_bench,
    "trace-diff": cmd_trace_diff,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = _build_parser().parse_args(argv)
        config = _cli_config(args)
        settings = _settings(config)
    except ValueError as exc:
        print(f"sempe: {exc}", file=sys.stderr)
        return EXIT_USAGE

    _configure_logging(config, settings)
    logger.debug("running %s with overrides %s", config.subcommand, config.overrides)
    try:
        return COMMANDS[config.subcommand](config, args, settings)
    except (CompileRejection, SecLangSyntaxError) as exc:
        print(f"sempe: rejected: {exc}", file=sys.stderr)
        return EXIT_REJECTED
    except (OSError, ValueError) as exc:
        print(f"sempe: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
