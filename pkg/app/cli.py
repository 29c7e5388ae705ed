"""The ``lowdeg`` command line.

Exit codes: 0 success, 1 when a guaranteed property failed on the instance, 2 for
usage, precondition and budget errors.
"""

import argparse
import csv
import io
import json
import logging
import sys
from collections.abc import Sequence
from pathlib import Path
from typing import Any

from pydantic import ValidationError

from app.core.lines import Backend
from app.exceptions import BudgetExceededError, InvariantViolationError, LowDegreeError
from app.schemas.experiments import CorruptionMode
from app.schemas.run import Command, OutputFormat, RunConfig, RunResponse
from app.services.experiment_service import (
    COMMAND_DESCRIPTIONS,
    ExperimentService,
    ensure_holds,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_USAGE = 2

TABLE_COMMANDS = frozenset(
    {
        Command.CHAR_CHECK,
        Command.LOWDEG_EXACT,
        Command.LOWDEG_MC,
        Command.PLANE_DIAG,
    }
)
WORD_COMMANDS = frozenset({Command.PLCODE_TEST, Command.PLCODE_DECODE})


def _pair(text: str) -> tuple[int, int]:
    left, sep, right = text.partition(":")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected A:B, got {text!r}")
    try:
        return int(left), int(right)
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected integers in {text!r}") from e


def _pairs(text: str) -> list[tuple[int, int]]:
    return [_pair(item) for item in text.split(",") if item]


def _ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from e


def build_parser() -> argparse.ArgumentParser:
    """Argument parser for every command."""
    parser = argparse.ArgumentParser(
        prog="lowdeg",
        description="Low-degree testing experiments over GF(p^s).",
        epilog="\n".join(f"{c}: {COMMAND_DESCRIPTIONS[c]}" for c in Command),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("command", choices=[str(c) for c in Command])

    field = parser.add_argument_group("field and degree")
    field.add_argument("--p", type=int, default=5)
    field.add_argument("--s", type=int, default=1)
    field.add_argument("--modulus", type=_ints, help="Modulus coefficients low-to-high")
    field.add_argument("--m", type=int, default=2)
    field.add_argument("--d", type=int, default=1)

    run = parser.add_argument_group("sampling")
    run.add_argument("--trials", type=int, default=10_000)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--samples", type=int, default=0, help="char-census: sample instead")
    run.add_argument("--backend", choices=[str(b) for b in Backend], default=str(Backend.EXACT))
    run.add_argument("--budget", type=int, help="Line/letter enumeration budget")
    run.add_argument("--workers", type=int, help="Worker threads")

    damage = parser.add_argument_group("corruption")
    damage.add_argument("--corrupt", default="0", help="Fraction corrupted, e.g. 0.05 or 1/20")
    damage.add_argument("--corrupt-mode", choices=[str(c) for c in CorruptionMode])
    damage.add_argument("--corrupt-point", type=_pair, metavar="POINT:VALUE")
    damage.add_argument("--corrupt-points", type=_pairs, metavar="P:V,P:V")

    inputs = parser.add_argument_group("inputs")
    inputs.add_argument("--poly", help="Polynomial as JSON [{'exps': [...], 'coeff': c}]")
    inputs.add_argument("--input", help="FunctionTable or Codeword file, '-' for stdin")
    inputs.add_argument("--family", help="Row/column family JSON file")
    inputs.add_argument("--pairs", type=_pairs, help="binom-sweep (p, s) pairs as p:s,p:s")
    inputs.add_argument("--epsilon", help="bivariate-check epsilon")
    inputs.add_argument("--c1", type=float)
    inputs.add_argument("--c2", type=float)

    out = parser.add_argument_group("output")
    out.add_argument("--format", choices=[str(f) for f in OutputFormat])
    out.add_argument("--output", help="Output path; stdout when omitted")
    return parser


def _read(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    return Path(path).read_text(encoding="utf-8")


def config_from_args(args: argparse.Namespace) -> RunConfig:
    """Translate parsed arguments into a validated :class:`RunConfig`."""
    command = Command(args.command)
    data: dict[str, Any] = {
        "command": command,
        "p": args.p,
        "s": args.s,
        "modulus": args.modulus,
        "m": args.m,
        "d": args.d,
        "trials": args.trials,
        "seed": args.seed,
        "samples": args.samples,
        "backend": args.backend,
        "budget": args.budget,
        "workers": args.workers,
        "corrupt": args.corrupt,
        "epsilon": args.epsilon,
        "c1": args.c1,
        "c2": args.c2,
        "format": args.format,
        "output": args.output,
    }
    if args.corrupt_mode is not None:
        data["corrupt_mode"] = args.corrupt_mode
    if args.corrupt_point is not None:
        data["corrupt_point"], data["corrupt_value"] = args.corrupt_point
    if args.corrupt_points is not None:
        data["corrupt_points"] = args.corrupt_points
    if args.pairs is not None:
        data["pairs"] = args.pairs
    if args.poly is not None:
        data["poly"] = json.loads(args.poly)
    if args.family is not None:
        data["family"] = json.loads(_read(args.family))
    if args.input is not None:
        text = _read(args.input)
        if command in WORD_COMMANDS:
            data["codeword"] = text
        elif command in TABLE_COMMANDS:
            data["table"] = text
        else:
            raise LowDegreeError(f"{command} does not read an input file")
    return RunConfig(**data)


def _csv_rows(response: RunResponse) -> list[dict[str, Any]]:
    report = response.report
    if response.command is Command.BINOM_SWEEP:
        return [
            {**row, "lucas_mismatches": report["lucas_mismatches"]} for row in report["rows"]
        ]
    return [{k: v for k, v in report.items() if not isinstance(v, dict | list)}]


def render(response: RunResponse) -> str:
    """The report in the configured format."""
    match response.config.output_format:
        case OutputFormat.TEXT:
            return response.report["codeword"]
        case OutputFormat.CSV:
            rows = _csv_rows(response)
            buffer = io.StringIO()
            writer = csv.DictWriter(buffer, fieldnames=list(rows[0]), lineterminator="\n")
            writer.writeheader()
            writer.writerows(rows)
            return buffer.getvalue()
        case _:
            return response.model_dump_json(indent=2) + "\n"


def main(argv: Sequence[str] | None = None) -> int:
    """Run one command; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE

    try:
        config = config_from_args(args)
        response = ExperimentService.get_instance().run(config)
    except (ValidationError, json.JSONDecodeError, OSError) as e:
        logger.error(f"Invalid configuration: {e}")  # noqa: TRY400
        return EXIT_USAGE
    except BudgetExceededError as e:
        logger.error(f"Budget exceeded: {e}")  # noqa: TRY400
        return EXIT_USAGE
    except LowDegreeError as e:
        logger.error(f"{type(e).__name__}: {e}")  # noqa: TRY400
        return EXIT_USAGE

    text = render(response)
    if config.output:
        Path(config.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    try:
        ensure_holds(response)
    except InvariantViolationError as e:
        logger.error(str(e))  # noqa: TRY400
        return EXIT_VIOLATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
