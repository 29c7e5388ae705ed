"""Exact characterization of total degree by line restrictions.

A table passes the exact line test when every restriction t -> f(x + t h) is a
degree-<=d function of t. When q - q/p - 1 >= d, passing the test forces total
degree <= d; the counterexample below shows the bound is tight.
"""

import logging
import math
from functools import lru_cache

import numpy as np
from sympy import isprime

from app.config import settings
from app.core.field import FieldSpec, IndexArray, get_field
from app.core.lines import (
    LINE_CHUNK,
    check_degree,
    check_line_budget,
    evaluation_matrix,
    line_count,
    line_coords,
    lines_at,
    restrict_lines,
)
from app.core.poly import (
    FunctionTable,
    MultiPoly,
    degree_mask,
    interpolate_table,
    interpolate_tables,
    interpolation_matrix,
    point_index,
    table_of,
    total_degree,
)
from app.core.sampling import stream
from app.exceptions import BudgetExceededError, InvalidDegreeError, PreconditionError
from app.schemas.common import degree_or_none
from app.schemas.experiments import (
    BinomSweepReport,
    BinomSweepRow,
    CensusReport,
    CharVerdict,
    SearchReport,
    Witness,
)

logger = logging.getLogger(__name__)

LUCAS_CHECK_LIMIT = 300
CENSUS_CELLS_PER_CHUNK = 1 << 22


def hypothesis_holds(spec: FieldSpec, d: int) -> bool:
    """q - q/p - 1 >= d."""
    return spec.q - spec.subfield_index - 1 >= d


@lru_cache(maxsize=64)
def _extension_matrix(spec: FieldSpec, d: int) -> IndexArray:
    # values at t = 0..d -> values of the interpolant at every t
    field = get_field(spec)
    to_coeffs = interpolation_matrix(spec, tuple(range(d + 1)))
    matrix = field.dot(to_coeffs.T, evaluation_matrix(spec, d).T)
    matrix.setflags(write=False)
    return matrix


def _interpolated_rows(spec: FieldSpec, rows: IndexArray, d: int) -> IndexArray:
    """Each row (last axis t) replaced by its degree-<=d interpolant through t = 0..d."""
    return get_field(spec).dot(rows[..., : d + 1], _extension_matrix(spec, d))


def _low_degree_rows(spec: FieldSpec, rows: IndexArray, d: int) -> IndexArray:
    """Mask over the leading axes of ``rows`` (last axis t) of restrictions of degree <= d."""
    return np.all(_interpolated_rows(spec, rows, d) == rows, axis=-1)


def passes_exact_line_test(g: FunctionTable, d: int) -> tuple[bool, Witness | None]:
    """Whether every line restriction of g is a degree-<=d function; else a witness."""
    check_degree(d, g.spec.q)
    count = line_count(g.spec, g.m)
    check_line_budget(count)
    for start in range(0, count, LINE_CHUNK):
        xs, hs = lines_at(g.spec, g.m, np.arange(start, min(start + LINE_CHUNK, count)))
        rows = restrict_lines(g, xs, hs)
        failing = np.nonzero(~_low_degree_rows(g.spec, rows, d))[0]
        if failing.size:
            first = int(failing[0])
            predicted = _interpolated_rows(g.spec, rows[first], d)
            t = int(np.nonzero(predicted != rows[first])[0][0])
            witness = Witness(x=xs[first].tolist(), h=hs[first].tolist(), t=t)
            logger.debug(f"Line test failed at line {start + first}, t={t}")
            return False, witness
    return True, None


def characterization_check(g: FunctionTable, d: int) -> CharVerdict:
    """Line test, total degree and the consistency of the two."""
    passes, witness = passes_exact_line_test(g, d)
    degree = total_degree(interpolate_table(g))
    hypothesis = hypothesis_holds(g.spec, d)
    consistent = not (hypothesis and passes and degree > d)
    if not consistent:
        logger.error(f"Table over {g.spec} passes the line test with total degree {degree} > {d}")
    return CharVerdict(
        passes_line_test=passes,
        witness=witness,
        total_deg=degree_or_none(degree),
        hypothesis_holds=hypothesis,
        theorem_consistent=consistent,
        params={"p": g.spec.p, "s": g.spec.s, "modulus": list(g.spec.modulus), "m": g.m, "d": d},
    )


def counterexample_poly(spec: FieldSpec) -> MultiPoly:
    """(x1^(p-1) x2)^(q/p) as a reduced bivariate polynomial."""
    k = spec.subfield_index
    return MultiPoly.from_terms(spec, 2, {((spec.p - 1) * k, k): 1})


def build_counterexample(spec: FieldSpec, d: int) -> FunctionTable:
    """Table of a total-degree-q function whose line restrictions all have degree <= d."""
    low = spec.q - spec.subfield_index - 1
    if d >= spec.q:
        raise InvalidDegreeError(d, spec.q)
    if d <= low:
        raise PreconditionError(f"The counterexample needs {low} < d < {spec.q}, got d={d}")
    return table_of(counterexample_poly(spec))


def binom_mod_p(n: int, r: int, p: int) -> int:
    """C(n, r) mod p by Lucas' theorem."""
    if not 0 <= r <= n:
        raise PreconditionError(f"Need 0 <= r <= n, got n={n}, r={r}")
    if not isprime(p):
        raise PreconditionError(f"p={p} is not prime")
    result = 1
    while n or r:
        n, n_digit = divmod(n, p)
        r, r_digit = divmod(r, p)
        if r_digit > n_digit:
            return 0
        result = result * math.comb(n_digit, r_digit) % p
    return result


def lemma_binom_sweep(p: int, s: int) -> BinomSweepRow:
    """Check C(n, k p^(s-1)) != 0 mod p for every 0 < k p^(s-1) <= n <= p^s - 1."""
    q = p**s
    if q > settings.binom_budget:
        raise BudgetExceededError("binomial sweep range", q, settings.binom_budget)
    step = p ** (s - 1)
    checked = nonzero = 0
    for n in range(1, q):
        for r in range(step, n + 1, step):
            checked += 1
            nonzero += binom_mod_p(n, r, p) != 0
    if nonzero != checked:
        logger.error(f"Binomial sweep for p={p}, s={s}: {checked - nonzero} zero residues")
    return BinomSweepRow(
        p=p, s=s, pairs_checked=checked, nonzero=nonzero, all_nonzero=nonzero == checked
    )


def lucas_mismatches(
    limit: int = LUCAS_CHECK_LIMIT, primes: tuple[int, ...] = (2, 3, 5, 7)
) -> int:
    """Pairs (n, r), n <= limit, where Lucas disagrees with the big-integer binomial."""
    return sum(
        binom_mod_p(n, r, p) != math.comb(n, r) % p
        for p in primes
        for n in range(limit + 1)
        for r in range(n + 1)
    )


def binom_report(
    pairs: list[tuple[int, int]], limit: int = LUCAS_CHECK_LIMIT
) -> BinomSweepReport:
    """Sweeps for several (p, s) plus the Lucas cross-check."""
    return BinomSweepReport(
        rows=[lemma_binom_sweep(p, s) for p, s in pairs],
        lucas_checked_up_to=limit,
        lucas_mismatches=lucas_mismatches(limit),
    )


def _census_chunk(
    spec: FieldSpec, m: int, d: int, values: IndexArray
) -> tuple[IndexArray, IndexArray]:
    xs, hs = lines_at(spec, m, np.arange(line_count(spec, m)))
    indices = point_index(spec, line_coords(spec, xs, hs))
    rows = values[:, indices]
    passing = np.all(_low_degree_rows(spec, rows, d), axis=1)
    coeffs = interpolate_tables(spec, m, values)
    low_degree = ~np.any(coeffs[:, degree_mask(spec, m, d)] != 0, axis=1)
    return passing, low_degree


def characterization_census(
    spec: FieldSpec, m: int, d: int, candidates: IndexArray | None = None
) -> CensusReport:
    """Count the tables passing the line test and those of total degree <= d.

    Every function F^m -> F is enumerated unless ``candidates`` (shape (F, q^m))
    restricts the census to a supplied set.
    """
    check_degree(d, spec.q)
    q = spec.q
    points = q**m
    lines = line_count(spec, m)
    check_line_budget(lines)
    if candidates is None:
        total = q**points
        if total > settings.census_budget:
            logger.warning(f"Refusing a census of {total} functions")
            raise BudgetExceededError("functions", total, settings.census_budget)
    else:
        candidates = np.asarray(candidates, dtype=np.int64)
        if candidates.ndim != 2 or candidates.shape[1] != points:  # noqa: PLR2004
            raise PreconditionError(f"Candidates must have shape (F, {points})")
        total = candidates.shape[0]

    logger.info(f"Census over {spec}, m={m}, d={d}: {total} functions, {lines} lines")
    chunk = max(1, CENSUS_CELLS_PER_CHUNK // (lines * q))
    weights = q ** np.arange(points, dtype=np.int64)
    passing_count = low_count = 0
    equal = True
    for start in range(0, total, chunk):
        if candidates is None:
            ids = np.arange(start, min(start + chunk, total), dtype=np.int64)
            values = (ids[:, None] // weights) % q
        else:
            values = candidates[start : start + chunk]
        passing, low_degree = _census_chunk(spec, m, d, values)
        passing_count += int(np.count_nonzero(passing))
        low_count += int(np.count_nonzero(low_degree))
        equal = equal and bool(np.array_equal(passing, low_degree))
    return CensusReport(
        functions=total,
        passing_count=passing_count,
        degree_le_d_count=low_count,
        equal=equal,
        hypothesis_holds=hypothesis_holds(spec, d),
        params={"p": spec.p, "s": spec.s, "modulus": list(spec.modulus), "m": m, "d": d},
    )


def random_characterization_search(
    spec: FieldSpec, m: int, d: int, samples: int, seed: int, terms: int = 3
) -> SearchReport:
    """Sample random reduced polynomials of total degree > d and count those passing the test.

    This is a sampled search, not a certificate: a zero count only says none of the
    sampled tables is a counterexample.
    """
    check_degree(d, spec.q)
    q = spec.q
    if m * (q - 1) <= d:
        raise PreconditionError(f"No reduced polynomial in {m} variables has degree > {d}")
    rng = stream(seed, 0)
    passing_high = 0
    for _ in range(samples):
        high = rng.integers(0, q, size=m)
        while int(high.sum()) <= d:
            high = rng.integers(0, q, size=m)
        term_list = [(tuple(int(e) for e in high), int(rng.integers(1, q)))]
        for _ in range(terms - 1):
            exps = rng.integers(0, q, size=m)
            term_list.append((tuple(int(e) for e in exps), int(rng.integers(0, q))))
        table = table_of(MultiPoly.from_terms(spec, m, term_list))
        degree = total_degree(interpolate_table(table))
        if degree > d and passes_exact_line_test(table, d)[0]:
            passing_high += 1
    return SearchReport(
        samples=samples,
        passing_high_degree=passing_high,
        hypothesis_holds=hypothesis_holds(spec, d),
        seed=seed,
        params={"p": spec.p, "s": spec.s, "modulus": list(spec.modulus), "m": m, "d": d},
    )
