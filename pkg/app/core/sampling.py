"""Seeded substreams and the worker pool behind every Monte-Carlo measurement.

Trials are cut into fixed blocks of ``TRIALS_PER_STREAM``. Block ``b`` always draws
from the Philox stream keyed by ``(seed, b)``, and block results are merged in block
order, so a report depends only on ``(inputs, seed, trials)`` and never on how many
workers ran it.
"""

import logging
import math
from collections.abc import Callable, Iterable
from concurrent.futures import ThreadPoolExecutor
from typing import TypeVar

import numpy as np

from app.config import settings
from app.exceptions import PreconditionError

logger = logging.getLogger(__name__)

T = TypeVar("T")
U = TypeVar("U")

TRIALS_PER_STREAM = 4096
MAX_SEED = 2**64 - 1


def check_seed(seed: int) -> int:
    """Validate a 64-bit seed."""
    if not 0 <= seed <= MAX_SEED:
        raise PreconditionError(f"Seed must be a 64-bit unsigned integer, got {seed}")
    return seed


def stream(seed: int, block: int) -> np.random.Generator:
    """Counter-based generator for one block of trials."""
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence(check_seed(seed), spawn_key=(block,)))
    )


def block_sizes(trials: int) -> list[int]:
    """Sizes of the consecutive trial blocks."""
    if trials < 1:
        raise PreconditionError(f"trials must be >= 1, got {trials}")
    full, rest = divmod(trials, TRIALS_PER_STREAM)
    return [TRIALS_PER_STREAM] * full + ([rest] if rest else [])


def parallel_map(fn: Callable[[T], U], items: Iterable[T]) -> list[U]:
    """Map on the worker pool, results in input order."""
    items = list(items)
    if settings.max_workers == 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=settings.max_workers) as pool:
        return list(pool.map(fn, items))


def run_trials(
    trials: int, seed: int, block_fn: Callable[[np.random.Generator, int], int]
) -> int:
    """Total of ``block_fn(rng, size)`` over all blocks, each with its own substream."""
    sizes = block_sizes(trials)
    logger.debug(f"Running {trials} trials in {len(sizes)} blocks (seed={seed})")
    counts = parallel_map(lambda b: block_fn(stream(seed, b), sizes[b]), range(len(sizes)))
    return sum(counts)


def stddev_bound(rejections: int, trials: int) -> float:
    """Binomial one-sigma half width of the estimate rejections / trials."""
    p = rejections / trials
    return math.sqrt(p * (1 - p) / trials)
