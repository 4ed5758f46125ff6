"""Block runner: fans independent work items out to a worker pool."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


class BlockRunner:
    """
    Runs a function over independent work items and returns the results in
    item order, whatever order the workers finish in.

    Work items are loop chunks, loop blocks or subset indices.  numpy releases
    the GIL inside its kernels, so threads share the read-only loop ensemble
    without copying it.  Merging in item order keeps every reduction bitwise
    reproducible for any worker count.

    Args:
        workers: Number of worker threads.  ``1`` runs inline.
    """

    def __init__(self, workers: int = 1) -> None:
        if workers < 1:
            raise ValueError(f"workers must be at least 1, got {workers}")
        self._workers = workers

    @property
    def workers(self) -> int:
        return self._workers

    # ------------------------------------------------------------------
    # Public interface
    # ------------------------------------------------------------------

    def map(self, func: Callable[[T], R], items: Iterable[T]) -> List[R]:
        """Apply *func* to every item.

        Raises:
            Exception: The first failure, in item order, after it is logged.
        """
        work = list(items)
        if self._workers == 1 or len(work) <= 1:
            return [self._call(func, index, item) for index, item in enumerate(work)]
        with ThreadPoolExecutor(max_workers=self._workers) as pool:
            futures = [pool.submit(self._call, func, index, item) for index, item in enumerate(work)]
            return [future.result() for future in futures]

    def reduce(self, func: Callable[[T], R], items: Iterable[T], merge: Callable[[R, R], R]) -> R:
        """Map, then fold the partial results left to right in item order."""
        partials = self.map(func, items)
        if not partials:
            raise ValueError("reduce needs at least one work item")
        total = partials[0]
        for partial in partials[1:]:
            total = merge(total, partial)
        return total

    # ------------------------------------------------------------------
    # Internal helpers
    # ------------------------------------------------------------------

    @staticmethod
    def _call(func: Callable[[T], R], index: int, item: T) -> R:
        try:
            return func(item)
        except Exception:
            logger.exception("Unhandled error while processing work item %d.", index)
            raise
