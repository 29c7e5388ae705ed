"""The line-point test, delta and delta_f, self-correction and affine-plane diagnostics.

Exact quantities come from fitting every line of F^m once (:class:`TableFits`);
Monte-Carlo quantities use the seeded substreams of :mod:`app.core.sampling`.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from app.core.field import FieldElement, FieldSpec, IndexArray, get_field
from app.core.lines import (
    Backend,
    Line,
    check_degree,
    fit_all_lines,
    fit_lines,
    line_count,
    line_point,
    line_poly,
    restrict_lines,
)
from app.core.poly import (
    FunctionTable,
    MultiPoly,
    UniPoly,
    distance,
    horner,
    table_of,
    total_degree,
    uni_eval,
)
from app.core.sampling import run_trials, stddev_bound, stream
from app.exceptions import PreconditionError
from app.schemas.experiments import (
    ContractionReport,
    CorruptionMode,
    CorruptionSpec,
    DeltaReport,
    PlaneReport,
    TestReport,
)

logger = logging.getLogger(__name__)

LineOracle = Callable[[Line], UniPoly]

ONE_EIGHTH = Fraction(1, 8)
ONE_QUARTER = Fraction(1, 4)


def h_zero_mass(spec: FieldSpec, m: int) -> Fraction:
    """Probability that a uniform direction is zero."""
    return Fraction(1, spec.q**m)


def table_params(f: FunctionTable, d: int, backend: Backend = Backend.EXACT) -> dict[str, object]:
    """Parameter echo shared by every report."""
    return {
        "p": f.spec.p,
        "s": f.spec.s,
        "modulus": list(f.spec.modulus),
        "m": f.m,
        "d": d,
        "backend": str(backend),
    }


@dataclass(frozen=True, eq=False)
class TableFits:
    """Line fits of a table over every line in canonical order."""

    table: FunctionTable
    d: int
    coeffs: IndexArray
    agreement: IndexArray

    @classmethod
    def of(cls, f: FunctionTable, d: int, backend: Backend = Backend.EXACT) -> TableFits:
        """Fit every line of f."""
        coeffs, agreement = fit_all_lines(f, d, backend)
        return cls(f, d, coeffs, agreement)

    @property
    def points(self) -> int:
        """q^m."""
        return self.table.size

    @property
    def votes(self) -> IndexArray:
        """P_{x,h}(0) arranged as [h, x]."""
        return self.coeffs[:, 0].reshape(self.points, self.points)

    def vote_counts(self) -> IndexArray:
        """counts[x, v] = #{h : P_{x,h}(0) = v}."""
        q = self.table.spec.q
        x_of_line = np.tile(np.arange(self.points, dtype=np.int64), self.points)
        flat = np.bincount(x_of_line * q + self.coeffs[:, 0], minlength=self.points * q)
        return flat.reshape(self.points, q)


def _fits(f: FunctionTable, d: int, fits: TableFits | None, backend: Backend) -> TableFits:
    if fits is not None:
        if fits.table != f or fits.d != d:
            raise PreconditionError("Supplied fits belong to another table or degree")
        return fits
    return TableFits.of(f, d, backend)


def fitted_oracle(f: FunctionTable, d: int, backend: Backend = Backend.EXACT) -> LineOracle:
    """Line oracle serving the fitted line polynomials of f."""

    def oracle(line: Line) -> UniPoly:
        return line_poly(f, line, d, backend).poly

    return oracle


def line_point_test_once(
    f: FunctionTable, line_oracle: LineOracle, rng: np.random.Generator
) -> bool:
    """One round of the line-point test; True means accept."""
    q = f.spec.q
    x = rng.integers(0, q, size=f.m)
    h = rng.integers(0, q, size=f.m)
    t = FieldElement(f.spec, int(rng.integers(0, q)))
    line = Line(f.spec, tuple(int(c) for c in x), tuple(int(c) for c in h))
    poly = line_oracle(line)
    return uni_eval(poly, t) == f.value_at(line_point(line, t))


def _report(
    f: FunctionTable,
    d: int,
    trials: int,
    rejections: int,
    seed: int,
    exact: Fraction | None,
    backend: Backend,
) -> TestReport:
    estimate = rejections / trials
    sigma = stddev_bound(rejections, trials)
    within = None
    if exact is not None:
        within = abs(float(exact) - estimate) <= 3 * max(sigma, 1 / trials)
    return TestReport(
        trials=trials,
        rejections=rejections,
        estimate=estimate,
        exact=exact,
        stddev_bound=sigma,
        within_3sigma=within,
        seed=seed,
        h_zero_mass=h_zero_mass(f.spec, f.m),
        params=table_params(f, d, backend),
    )


def estimate_delta(
    f: FunctionTable,
    d: int,
    trials: int,
    seed: int,
    *,
    exact: Fraction | None = None,
    backend: Backend = Backend.EXACT,
) -> TestReport:
    """Monte-Carlo rejection rate of the line-point test against the fitted line polynomials."""
    check_degree(d, f.spec.q)
    field = get_field(f.spec)
    q = f.spec.q

    def block(rng: np.random.Generator, size: int) -> int:
        xs = rng.integers(0, q, size=(size, f.m))
        hs = rng.integers(0, q, size=(size, f.m))
        ts = rng.integers(0, q, size=size)
        rows = restrict_lines(f, xs, hs)
        coeffs, _ = fit_lines(f.spec, rows, d, backend)
        predicted = horner(field, coeffs, ts)
        return int(np.count_nonzero(predicted != rows[np.arange(size), ts]))

    logger.info(f"Estimating delta over {f.spec}, m={f.m}, d={d} with {trials} trials")
    rejections = run_trials(trials, seed, block)
    return _report(f, d, trials, rejections, seed, exact, backend)


def exact_delta(
    f: FunctionTable, d: int, fits: TableFits | None = None, backend: Backend = Backend.EXACT
) -> Fraction:
    """Exact Pr_{x,h,t}[P_{x,h}(t) != f(x + t h)]."""
    fits = _fits(f, d, fits, backend)
    misses = int(np.sum(f.spec.q - fits.agreement))
    return Fraction(misses, line_count(f.spec, f.m) * f.spec.q)


def delta_f(
    f: FunctionTable, d: int, fits: TableFits | None = None, backend: Backend = Backend.EXACT
) -> Fraction:
    """Exact Pr_{x,h}[f(x) != P_{x,h}(0)]."""
    fits = _fits(f, d, fits, backend)
    mismatches = int(np.count_nonzero(fits.votes != f.values[None, :]))
    return Fraction(mismatches, line_count(f.spec, f.m))


def corr(
    f: FunctionTable, d: int, fits: TableFits | None = None, backend: Backend = Backend.EXACT
) -> FunctionTable:
    """Plurality self-correction; ties go to the smallest value index."""
    fits = _fits(f, d, fits, backend)
    return f.with_values(np.argmax(fits.vote_counts(), axis=1))


def exact_plurality_disagreement(
    f: FunctionTable, d: int, fits: TableFits | None = None, backend: Backend = Backend.EXACT
) -> Fraction:
    """Exact Pr_{x,h1,h2}[P_{x,h1}(0) != P_{x,h2}(0)] from the vote counts."""
    fits = _fits(f, d, fits, backend)
    counts = fits.vote_counts()
    collisions = int(np.sum(counts * counts))
    return 1 - Fraction(collisions, fits.points**3)


def corr_vote_disagreement(
    f: FunctionTable, d: int, fits: TableFits | None = None, backend: Backend = Backend.EXACT
) -> Fraction:
    """Exact Pr_{x,h}[Corr_f(x) != P_{x,h}(0)]."""
    fits = _fits(f, d, fits, backend)
    winners = int(np.sum(fits.vote_counts().max(axis=1)))
    return 1 - Fraction(winners, fits.points**2)


def plurality_disagreement(
    f: FunctionTable,
    d: int,
    trials: int,
    seed: int,
    *,
    exact: Fraction | None = None,
    backend: Backend = Backend.EXACT,
) -> TestReport:
    """Monte-Carlo Pr_{x,h1,h2}[P_{x,h1}(0) != P_{x,h2}(0)]."""
    check_degree(d, f.spec.q)
    q = f.spec.q

    def block(rng: np.random.Generator, size: int) -> int:
        xs = rng.integers(0, q, size=(size, f.m))
        h1 = rng.integers(0, q, size=(size, f.m))
        h2 = rng.integers(0, q, size=(size, f.m))
        rows = restrict_lines(f, np.concatenate([xs, xs]), np.concatenate([h1, h2]))
        coeffs, _ = fit_lines(f.spec, rows, d, backend)
        return int(np.count_nonzero(coeffs[:size, 0] != coeffs[size:, 0]))

    rejections = run_trials(trials, seed, block)
    return _report(f, d, trials, rejections, seed, exact, backend)


def delta_experiment(
    f: FunctionTable,
    d: int,
    clean: FunctionTable | None = None,
    backend: Backend = Backend.EXACT,
) -> DeltaReport:
    """Exact delta, delta_f and the distance bounds they guarantee for one table."""
    fits = TableFits.of(f, d, backend)
    exact = exact_delta(f, d, fits)
    before = delta_f(f, d, fits)
    dist_f_corr = distance(f, corr(f, d, fits))
    dist_f_g = distance(f, clean) if clean is not None else None

    violations: list[str] = []
    two_delta = dist_f_corr <= 2 * before
    if not two_delta:
        violations.append("two_delta_f_bound")
    delta_ge = exact >= before
    if not delta_ge:
        violations.append("delta_ge_delta_f")
    theorem = None
    if dist_f_g is not None and exact <= ONE_EIGHTH:
        theorem = dist_f_g <= 2 * exact
        if not theorem:
            violations.append("theorem_bound")
    for name in violations:
        logger.error(f"Guaranteed property '{name}' failed over {f.spec}, m={f.m}, d={d}")
    return DeltaReport(
        params=table_params(f, d, backend),
        exact_delta=exact,
        delta_f=before,
        dist_f_corr=dist_f_corr,
        dist_f_g=dist_f_g,
        two_delta_f_bound=two_delta,
        delta_ge_delta_f=delta_ge,
        theorem_bound=theorem,
        violations=violations,
        h_zero_mass=h_zero_mass(f.spec, f.m),
    )


def apply_corruption(table: FunctionTable, corruption: CorruptionSpec) -> FunctionTable:
    """Damage a table as described by ``corruption``."""
    q = table.spec.q
    n = table.size
    values = table.values.copy()
    match corruption.mode:
        case CorruptionMode.RANDOM_POINTS:
            count = math.floor(corruption.fraction * n + Fraction(1, 2))
            rng = stream(corruption.seed, 0)
            chosen = rng.choice(n, size=count, replace=False)
            values[chosen] = (values[chosen] + rng.integers(1, q, size=count)) % q
        case CorruptionMode.SINGLE_POINT:
            updates = [(corruption.point, corruption.value)]
            values = _set_points(values, updates, n, q)
        case CorruptionMode.ADVERSARIAL:
            values = _set_points(values, corruption.points, n, q)
    return table.with_values(values)


def _set_points(
    values: IndexArray, updates: list[tuple[int | None, int | None]], n: int, q: int
) -> IndexArray:
    for index, value in updates:
        if index is None or value is None or not 0 <= index < n or not 0 <= value < q:
            raise PreconditionError(f"Corruption ({index}, {value}) outside {n} points, {q} values")
        values[index] = value
    return values


def contraction_experiment(
    g: MultiPoly, corruption: CorruptionSpec, d: int, backend: Backend = Backend.EXACT
) -> ContractionReport:
    """Corrupt the table of g, self-correct it and measure every quantity involved."""
    q = g.spec.q
    check_degree(d, q)
    if total_degree(g) > d:
        raise PreconditionError(f"g has total degree {total_degree(g)} > d = {d}")
    clean = table_of(g)
    f = apply_corruption(clean, corruption)
    logger.info(
        f"Contraction experiment over {g.spec}, m={g.m}, d={d}, corruption={corruption.mode}"
    )

    fits_f = TableFits.of(f, d, backend)
    before = delta_f(f, d, fits_f)
    exact = exact_delta(f, d, fits_f)
    corrected = corr(f, d, fits_f)
    after = delta_f(corrected, d, backend=backend)
    plurality = exact_plurality_disagreement(f, d, fits_f)
    vote = corr_vote_disagreement(f, d, fits_f)
    dist_f_g = distance(f, clean)
    dist_f_corr = distance(f, corrected)
    dist_corr_g = distance(corrected, clean)

    epsilon = ONE_EIGHTH - before
    alpha = 4 / (float(epsilon) ** 2 * q) if epsilon > 0 else None
    field_hypothesis = epsilon > 0 and q * epsilon**2 > 16

    violations: list[str] = []
    contraction = None
    if before > 0:
        contraction = after < before
        if field_hypothesis and not contraction:
            violations.append("contraction")
    two_delta = dist_f_corr <= 2 * before
    if not two_delta:
        violations.append("two_delta_f_bound")
    delta_ge = exact >= before
    if not delta_ge:
        violations.append("delta_ge_delta_f")
    game = vote <= plurality
    if not game:
        violations.append("game_inequality")
    quarter = None
    if dist_f_g < ONE_QUARTER - Fraction(1, q):
        quarter = dist_corr_g == 0
        if not quarter and q >= 2 * (d + 2):
            violations.append("quarter_distance")
    theorem = None
    if exact <= ONE_EIGHTH:
        theorem = dist_f_g <= 2 * exact
        if not theorem:
            violations.append("theorem_bound")

    flags = [contraction, two_delta, delta_ge, game, quarter, theorem]
    for name in violations:
        logger.error(f"Guaranteed property '{name}' failed over {g.spec}, m={g.m}, d={d}")
    return ContractionReport(
        params={**table_params(f, d, backend), "corruption": corruption.model_dump(mode="json")},
        delta_f_before=before,
        delta_f_after=after,
        exact_delta=exact,
        dist_f_g=dist_f_g,
        dist_f_corr=dist_f_corr,
        dist_corr_g=dist_corr_g,
        corr_equals_g=dist_corr_g == 0,
        plurality_disagreement=plurality,
        corr_vote_disagreement=vote,
        epsilon=epsilon,
        alpha=alpha,
        field_hypothesis_holds=field_hypothesis,
        contraction=contraction,
        two_delta_f_bound=two_delta,
        delta_ge_delta_f=delta_ge,
        game_inequality=game,
        quarter_distance=quarter,
        theorem_bound=theorem,
        bounds_ok=all(flag is not False for flag in flags),
        violations=violations,
        h_zero_mass=h_zero_mass(f.spec, f.m),
    )


@dataclass(frozen=True, eq=False)
class PlaneSample:
    """One affine plane: the value matrix and its row and column line fits."""

    spec: FieldSpec
    matrix: IndexArray
    row_fits: IndexArray
    col_fits: IndexArray
    row_deltas: list[Fraction]
    col_deltas: list[Fraction]

    def _evaluated(self, fits: IndexArray) -> IndexArray:
        ts = np.arange(self.spec.q, dtype=np.int64)
        return horner(get_field(self.spec), fits[:, None, :], ts[None, :])

    @property
    def row_values(self) -> IndexArray:
        """row_values[i, j] = r_i(j)."""
        return self._evaluated(self.row_fits)

    @property
    def col_values(self) -> IndexArray:
        """col_values[j, i] = c_j(i)."""
        return self._evaluated(self.col_fits)

    @property
    def rowcol_disagreement(self) -> Fraction:
        """Pr_{i,j}[r_i(j) != c_j(i)]."""
        mismatches = int(np.count_nonzero(self.row_values != self.col_values.T))
        return Fraction(mismatches, self.spec.q**2)


def _plane_lines(
    spec: FieldSpec, x: IndexArray, h1: IndexArray, h2: IndexArray, h3: IndexArray
) -> tuple[IndexArray, IndexArray, IndexArray, IndexArray]:
    field = get_field(spec)
    i = field.elements()[:, None]
    row_x = field.add(x[None, :], field.mul(i, h1[None, :]))
    row_h = field.add(h2[None, :], field.mul(i, h3[None, :]))
    col_x = field.add(x[None, :], field.mul(i, h2[None, :]))
    col_h = field.add(h1[None, :], field.mul(i, h3[None, :]))
    return row_x, row_h, col_x, col_h


def affine_plane_sample(
    f: FunctionTable,
    x: IndexArray,
    h1: IndexArray,
    h2: IndexArray,
    h3: IndexArray,
    d: int,
    backend: Backend = Backend.EXACT,
) -> PlaneSample:
    """Matrix m(i, j) = f(x + i h1 + j h2 + i j h3) with its row and column fits."""
    points = [np.asarray(v, dtype=np.int64) for v in (x, h1, h2, h3)]
    for v in points:
        if v.shape != (f.m,):
            raise PreconditionError(f"Plane points must have {f.m} coordinates, got {v.shape}")
    q = f.spec.q
    row_x, row_h, col_x, col_h = _plane_lines(f.spec, *points)
    rows = restrict_lines(f, row_x, row_h)
    cols = restrict_lines(f, col_x, col_h)
    row_fits, row_agreement = fit_lines(f.spec, rows, d, backend)
    col_fits, col_agreement = fit_lines(f.spec, cols, d, backend)
    return PlaneSample(
        spec=f.spec,
        matrix=rows,
        row_fits=row_fits,
        col_fits=col_fits,
        row_deltas=[Fraction(q - int(a), q) for a in row_agreement],
        col_deltas=[Fraction(q - int(a), q) for a in col_agreement],
    )


def plane_experiment(
    f: FunctionTable,
    d: int,
    planes: int,
    seed: int,
    *,
    exact_delta_f: Fraction | None = None,
    backend: Backend = Backend.EXACT,
) -> PlaneReport:
    """Sample random planes and record the events bounded by the second-moment argument."""
    check_degree(d, f.spec.q)
    q = f.spec.q
    epsilon = ONE_EIGHTH - exact_delta_f if exact_delta_f is not None else None
    threshold = ONE_EIGHTH - epsilon / 2 if epsilon is not None and epsilon > 0 else ONE_EIGHTH
    rng = stream(seed, 0)
    totals = np.zeros(8)
    for _ in range(planes):
        x, h1, h2, h3 = rng.integers(0, q, size=(4, f.m))
        sample = affine_plane_sample(f, x, h1, h2, h3, d, backend)
        row_mean = sum(sample.row_deltas) / q
        col_mean = sum(sample.col_deltas) / q
        row_zero = int(np.count_nonzero(sample.row_fits[:, 0] != sample.matrix[:, 0]))
        col_zero = int(np.count_nonzero(sample.col_fits[:, 0] != sample.matrix[0, :]))
        totals += [
            float(row_mean),
            float(col_mean),
            float(sample.rowcol_disagreement),
            row_mean >= threshold,
            col_mean >= threshold,
            row_zero >= threshold * q,
            col_zero >= threshold * q,
            sample.row_fits[0, 0] != sample.col_fits[0, 0],
        ]
    means = totals / planes
    alpha = None
    bound = None
    if epsilon is not None and epsilon > 0:
        alpha = 4 / (float(epsilon) ** 2 * q)
        bound = alpha * float(exact_delta_f) * (1 - float(exact_delta_f))
    return PlaneReport(
        params=table_params(f, d, backend),
        planes=planes,
        seed=seed,
        delta_f=exact_delta_f,
        epsilon=epsilon,
        alpha=alpha,
        event_bound=bound,
        mean_row_delta=means[0],
        mean_col_delta=means[1],
        mean_rowcol_disagreement=means[2],
        row_mean_event=means[3],
        col_mean_event=means[4],
        row_zero_event=means[5],
        col_zero_event=means[6],
        origin_disagreement=means[7],
    )
