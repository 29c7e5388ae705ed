"""Experiment dispatch shared by the CLI and the API."""

import asyncio
import logging
import threading
import time
from collections.abc import Callable, Iterator
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from fractions import Fraction
from typing import ClassVar

from pydantic import BaseModel

from app.config import settings
from app.core.bivariate import RowColFamily, bivariate_sweep, strengthen_check
from app.core.exactchar import (
    binom_report,
    build_counterexample,
    characterization_census,
    characterization_check,
    random_characterization_search,
)
from app.core.field import FieldSpec
from app.core.lines import line_count
from app.core.plcode import (
    Codeword,
    PLCodeSpec,
    code_params,
    corrupt_codeword,
    decode,
    decode_report,
    encode,
    exact_local_rejection,
    local_test,
    rounded_count,
)
from app.core.poly import (
    FunctionTable,
    MultiPoly,
    random_poly,
    table_of,
)
from app.core.sampling import stream
from app.core.tester import (
    apply_corruption,
    contraction_experiment,
    delta_experiment,
    delta_f,
    estimate_delta,
    exact_delta,
    plane_experiment,
)
from app.exceptions import DecodeFailureError, InvariantViolationError, PreconditionError
from app.schemas.experiments import CodewordReport
from app.schemas.run import Command, CommandInfo, RunConfig, RunResponse

logger = logging.getLogger(__name__)

# substream of generated messages, disjoint from the trial blocks
MESSAGE_STREAM = 1 << 40

Outcome = tuple[BaseModel, list[str]]
Handler = Callable[[RunConfig], Outcome]

COMMAND_DESCRIPTIONS: dict[Command, str] = {
    Command.CHAR_CENSUS: "Count functions passing the exact line test against total degree <= d",
    Command.COUNTEREXAMPLE: "Build the total-degree-q function whose line restrictions pass",
    Command.CHAR_CHECK: "Exact line test and total degree of one table or polynomial",
    Command.BINOM_SWEEP: "Binomial divisibility sweep and Lucas cross-check",
    Command.LOWDEG_EXACT: "Exact delta and delta_f of a (corrupted) polynomial table",
    Command.LOWDEG_MC: "Monte-Carlo rejection rate of the line-point test",
    Command.SELF_CORRECT: "Self-correct a corrupted polynomial and check the guaranteed bounds",
    Command.PLANE_DIAG: "Row/column statistics of random affine planes",
    Command.BIVARIATE_CHECK: "Bad-row and bad-column fractions of row/column families",
    Command.PLCODE_ENCODE: "Encode a message with the polynomial-line code",
    Command.PLCODE_TEST: "Rejection rate of the two-query local test",
    Command.PLCODE_DECODE: "Decode a polynomial-line word",
    Command.PARAMS: "Parameters of a polynomial-line code",
}


def _message(config: RunConfig, spec: FieldSpec) -> MultiPoly:
    if config.poly is not None:
        return MultiPoly.from_json(spec, config.poly, config.m)
    return random_poly(spec, config.m, config.d, stream(config.seed, MESSAGE_STREAM))


def _tables(config: RunConfig) -> tuple[FunctionTable, FunctionTable | None]:
    """The table under test and, when it was built from a polynomial, its clean version."""
    if config.table is not None:
        return FunctionTable.from_text(config.table), None
    clean = table_of(_message(config, config.field_spec()))
    return apply_corruption(clean, config.corruption()), clean


def _code(config: RunConfig) -> PLCodeSpec:
    return PLCodeSpec(spec=config.field_spec(), m=config.m, d=config.d, c1=config.c1, c2=config.c2)


def _word(config: RunConfig) -> tuple[Codeword, MultiPoly | None]:
    """The word under test and, when it was generated here, its message."""
    if config.codeword is not None:
        return Codeword.from_text(config.codeword), None
    code = _code(config)
    message = _message(config, code.spec)
    return corrupt_codeword(encode(message, code), config.corrupt, config.seed), message


def _char_census(config: RunConfig) -> Outcome:
    spec = config.field_spec()
    if config.samples:
        report = random_characterization_search(
            spec, config.m, config.d, config.samples, config.seed
        )
        failed = report.hypothesis_holds and report.passing_high_degree > 0
    else:
        report = characterization_census(spec, config.m, config.d)
        failed = report.hypothesis_holds and not report.equal
    return report, ["characterization"] if failed else []


def _counterexample(config: RunConfig) -> Outcome:
    verdict = characterization_check(build_counterexample(config.field_spec(), config.d), config.d)
    ok = verdict.passes_line_test and (verdict.total_deg or 0) > config.d
    return verdict, [] if ok else ["counterexample"]


def _char_check(config: RunConfig) -> Outcome:
    if config.table is None and config.poly is None:
        raise PreconditionError("char-check needs a table or a polynomial")
    table, _ = _tables(config)
    verdict = characterization_check(table, config.d)
    return verdict, [] if verdict.theorem_consistent else ["characterization"]


def _binom_sweep(config: RunConfig) -> Outcome:
    report = binom_report(config.pairs)
    violations = []
    if not all(row.all_nonzero for row in report.rows):
        violations.append("binom_nonzero")
    if report.lucas_mismatches:
        violations.append("lucas")
    return report, violations


def _lowdeg_exact(config: RunConfig) -> Outcome:
    f, clean = _tables(config)
    report = delta_experiment(f, config.d, clean, config.backend)
    violations = list(report.violations)
    if clean is not None and f == clean and report.exact_delta != 0:
        violations.append("completeness")
    return report, violations


def _lowdeg_mc(config: RunConfig) -> Outcome:
    f, _ = _tables(config)
    exact = None
    if line_count(f.spec, f.m) <= settings.line_budget:
        exact = exact_delta(f, config.d, backend=config.backend)
    report = estimate_delta(
        f, config.d, config.trials, config.seed, exact=exact, backend=config.backend
    )
    return report, []


def _self_correct(config: RunConfig) -> Outcome:
    if config.table is not None:
        raise PreconditionError("self-correct corrupts a polynomial; pass poly, not a table")
    spec = config.field_spec()
    report = contraction_experiment(
        _message(config, spec), config.corruption(), config.d, config.backend
    )
    return report, list(report.violations)


def _plane_diag(config: RunConfig) -> Outcome:
    f, _ = _tables(config)
    known = None
    if line_count(f.spec, f.m) <= settings.line_budget:
        known = delta_f(f, config.d, backend=config.backend)
    report = plane_experiment(
        f, config.d, config.trials, config.seed, exact_delta_f=known, backend=config.backend
    )
    return report, []


def _bivariate_check(config: RunConfig) -> Outcome:
    spec = config.field_spec()
    if config.family is None:
        report = bivariate_sweep(spec, config.d, config.trials, config.seed)
        violations = []
        if report.conclusion_failures:
            violations.append("quarter_bad_fractions")
        if report.chain_failures:
            violations.append("inequality_chain")
        return report, violations
    fam = RowColFamily.from_json(spec, config.d, config.family)
    epsilon = config.epsilon if config.epsilon is not None else Fraction(max(config.d, 1), spec.q)
    check = strengthen_check(fam, epsilon)
    violations = []
    if check.conclusion_ok is False:
        violations.append("quarter_bad_fractions")
    if check.chain_ok is False:
        violations.append("inequality_chain")
    return check, violations


def _plcode_encode(config: RunConfig) -> Outcome:
    word, _ = _word(config)
    report = CodewordReport(
        params=word.code.params(),
        n=word.code.n,
        corrupted_letters=rounded_count(config.corrupt, word.code.n),
        codeword=word.to_text(),
    )
    return report, []


def _plcode_test(config: RunConfig) -> Outcome:
    word, message = _word(config)
    exact = None
    if word.code.n * word.code.spec.q <= settings.line_budget:
        exact = exact_local_rejection(word)
    report = local_test(word, config.trials, config.seed, exact=exact)
    clean = message is not None and config.corrupt == 0
    failed = clean and (report.rejections > 0 or (exact is not None and exact != 0))
    return report, ["completeness"] if failed else []


def _plcode_decode(config: RunConfig) -> Outcome:
    word, message = _word(config)
    report = decode_report(word)
    violations = []
    if message is not None and config.corrupt == 0:
        try:
            recovered = decode(word) == message
        except DecodeFailureError:
            recovered = False
        if not recovered:
            violations.append("round_trip")
    return report, violations


def _params(config: RunConfig) -> Outcome:
    return code_params(_code(config), seed=config.seed), []


def ensure_holds(response: RunResponse) -> RunResponse:
    """Return the response unchanged, or raise if a guaranteed property failed.

    Raises:
        InvariantViolationError: Naming every failed property of the run.

    """
    if response.violations:
        raise InvariantViolationError(
            ", ".join(response.violations), f"{response.command} with seed {response.config.seed}"
        )
    return response


HANDLERS: dict[Command, Handler] = {
    Command.CHAR_CENSUS: _char_census,
    Command.COUNTEREXAMPLE: _counterexample,
    Command.CHAR_CHECK: _char_check,
    Command.BINOM_SWEEP: _binom_sweep,
    Command.LOWDEG_EXACT: _lowdeg_exact,
    Command.LOWDEG_MC: _lowdeg_mc,
    Command.SELF_CORRECT: _self_correct,
    Command.PLANE_DIAG: _plane_diag,
    Command.BIVARIATE_CHECK: _bivariate_check,
    Command.PLCODE_ENCODE: _plcode_encode,
    Command.PLCODE_TEST: _plcode_test,
    Command.PLCODE_DECODE: _plcode_decode,
    Command.PARAMS: _params,
}


class ExperimentService:
    """Singleton service running experiments.

    Runs are serialised; budget and worker overrides last for one run.
    """

    _instance: ClassVar["ExperimentService | None"] = None

    def __new__(cls) -> "ExperimentService":
        """Ensure only one instance exists."""
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    @classmethod
    def get_instance(cls) -> "ExperimentService":
        """Get the singleton instance of ExperimentService."""
        if cls._instance is None:
            cls._instance = cls()
        return cls._instance

    def __init__(self) -> None:
        """Initialize the experiment service."""
        if not hasattr(self, "_initialized"):
            self._initialized = True
            self._lock = threading.Lock()
            self._executor = ThreadPoolExecutor(max_workers=settings.max_workers)

    @contextmanager
    def _overrides(self, config: RunConfig) -> Iterator[None]:
        budget, workers = settings.line_budget, settings.max_workers
        if config.budget is not None:
            settings.line_budget = config.budget
        if config.workers is not None:
            settings.max_workers = config.workers
        try:
            yield
        finally:
            settings.line_budget, settings.max_workers = budget, workers

    def run(self, config: RunConfig) -> RunResponse:
        """Run one experiment synchronously.

        Raises:
            LowDegreeError: For precondition, budget and decoding errors.

        """
        with self._lock, self._overrides(config):
            logger.info(f"Running {config.command} (seed={config.seed})")
            start_time = time.time()
            report, violations = HANDLERS[config.command](config)
            logger.info(f"{config.command} finished in {round(time.time() - start_time, 2)}s")
        for name in violations:
            logger.error(f"{config.command}: guaranteed property '{name}' failed")
        return RunResponse(
            command=config.command,
            config=config,
            report=report.model_dump(mode="json"),
            violations=violations,
        )

    async def run_async(self, config: RunConfig) -> RunResponse:
        """Run one experiment on the worker pool without blocking the event loop."""
        loop = asyncio.get_running_loop()
        return await loop.run_in_executor(self._executor, self.run, config)

    def table_check_config(self, text: str, d: int) -> RunConfig:
        """char-check configuration for an uploaded table."""
        table = FunctionTable.from_text(text)
        return RunConfig(
            command=Command.CHAR_CHECK,
            p=table.spec.p,
            s=table.spec.s,
            modulus=list(table.spec.modulus),
            m=table.m,
            d=d,
            table=text,
        )

    def commands(self) -> list[CommandInfo]:
        """Every command with its summary."""
        return [CommandInfo(name=c, description=COMMAND_DESCRIPTIONS[c]) for c in Command]

