"""Command-line front end.

    gp2 -p <program>                validate a program
    gp2 -r <rule>                   validate a single rule
    gp2 -h <graph>                  validate a host graph
    gp2 [flags] <program> <graph>   run a program on a host graph
    gp2 bench <config> [-o FILE]    run the benchmark harness, emit CSV

Run flags: -f fast shutdown, -g minimal garbage collection (needs -f),
-n index-scan iteration instead of node chains, -q skip search-plan
optimisation, -m root-reflecting matches, -o DIR also write the output
graph into DIR.

Exit codes: 0 success (graph on stdout), 1 validation/usage error,
2 program failure or runtime error (diagnostics on stderr).
"""

from __future__ import annotations

import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .engine import ConfigError, ExecConfig, run_program
from .textio import SourceError, validate

USAGE = __doc__


class UsageError(Exception):
    pass


@dataclass
class CliInvocation:
    subcommand: str                       # validate-program | validate-rule |
    paths: list[str] = field(default_factory=list)   # validate-graph | run | bench
    config: ExecConfig = field(default_factory=ExecConfig)
    out_dir: str | None = None
    help: bool = False


def parse_args(argv: list[str]) -> CliInvocation:
    if not argv:
        raise UsageError("no arguments; see --help")
    if argv[0] == "--help":
        return CliInvocation("help", help=True)
    if argv[0] == "bench":
        rest = argv[1:]
        paths = []
        out = None
        i = 0
        while i < len(rest):
            if rest[i] == "-o":
                if i + 1 >= len(rest):
                    raise UsageError("-o needs a file argument")
                out = rest[i + 1]
                i += 2
            else:
                paths.append(rest[i])
                i += 1
        if len(paths) != 1:
            raise UsageError("bench takes exactly one configuration file")
        return CliInvocation("bench", paths, out_dir=out)

    validate_modes = {"-p": "validate-program", "-r": "validate-rule",
                      "-h": "validate-graph"}
    if argv[0] in validate_modes:
        if len(argv) != 2:
            raise UsageError(f"{argv[0]} takes exactly one file")
        return CliInvocation(validate_modes[argv[0]], [argv[1]])

    fast_shutdown = minimal_gc = False
    backend = "chain"
    mode = "preserve"
    optimize = True
    out_dir = None
    paths: list[str] = []
    i = 0
    while i < len(argv):
        arg = argv[i]
        if arg == "-f":
            fast_shutdown = True
        elif arg == "-g":
            minimal_gc = True
        elif arg == "-n":
            backend = "index_scan"
        elif arg == "-q":
            optimize = False
        elif arg == "-m":
            mode = "reflect"
        elif arg == "-o":
            if i + 1 >= len(argv):
                raise UsageError("-o needs a directory argument")
            out_dir = argv[i + 1]
            i += 1
        elif arg.startswith("-"):
            raise UsageError(f"unknown flag {arg!r}")
        else:
            paths.append(arg)
        i += 1
    if len(paths) != 2:
        raise UsageError("run mode takes a program file and a host graph file")
    try:
        cfg = ExecConfig(backend=backend, root_mode=mode,
                         fast_shutdown=fast_shutdown, minimal_gc=minimal_gc,
                         optimize_plans=optimize)
    except ConfigError as exc:
        raise UsageError(str(exc))
    return CliInvocation("run", paths, config=cfg, out_dir=out_dir)


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}")


def _run_bench(invocation: CliInvocation) -> int:
    from . import bench, corpus

    try:
        config = bench.parse_config(_read(invocation.paths[0]))
    except bench.BenchError as exc:
        print(f"bad bench configuration: {exc}", file=sys.stderr)
        return 1
    reps = config.reps
    env_reps = os.environ.get("GP2_BENCH_REPS")
    if env_reps:
        reps = max(1, int(env_reps))
    if config.program in corpus.ENTRIES:
        text = corpus.load_program(config.program)
    else:
        text = _read(config.program)
    try:
        samples = bench.run_bench(config.program, text, config.specs,
                                  config.backends, reps, config.mode)
    except SourceError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    csv_text = bench.emit_csv(samples)
    if invocation.out_dir:
        Path(invocation.out_dir).write_text(csv_text)
    else:
        sys.stdout.write(csv_text)
    return 0


def main(argv: list[str]) -> int:
    try:
        invocation = parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1

    if invocation.subcommand == "help":
        print(USAGE)
        return 0
    if invocation.subcommand == "bench":
        return _run_bench(invocation)
    if invocation.subcommand.startswith("validate-"):
        kind = invocation.subcommand.removeprefix("validate-")
        try:
            validate(kind, _read(invocation.paths[0]))
        except SourceError as exc:
            print(str(exc), file=sys.stderr)
            return 1
        except UsageError as exc:
            print(f"usage error: {exc}", file=sys.stderr)
            return 1
        return 0

    # run mode
    try:
        program_text = _read(invocation.paths[0])
        host_text = _read(invocation.paths[1])
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    outcome = run_program(program_text, host_text, invocation.config)
    if outcome.status == "success":
        print(outcome.output)
        if invocation.out_dir:
            out = Path(invocation.out_dir)
            out.mkdir(parents=True, exist_ok=True)
            (out / "out.host").write_text(outcome.output + "\n")
        if invocation.config.fast_shutdown:
            # leave every store to the operating system
            sys.stdout.flush()
            sys.stderr.flush()
            os._exit(0)
        if outcome.graph is not None:
            outcome.graph.teardown()
        return 0
    print(outcome.diagnostic, file=sys.stderr)
    return outcome.exit_code


def entry() -> None:
    sys.exit(main(sys.argv[1:]))


if __name__ == "__main__":
    entry()
