"""Ensembles of discretized unit Brownian bridges.

Loops are drawn in chunks of :data:`CHUNK` loops.  Every chunk (and, for the
bisection scheme, every refinement level of a chunk) has its own
``SeedSequence`` spawn key, so an ensemble is a pure function of
``(seed, scheme, count, points, dimension)`` however the chunks are scheduled,
and refining a bisection ensemble from M to 2M points reuses the coarse
points bit for bit.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Sequence, Tuple, Union

import numpy as np
from numpy.typing import NDArray

from casimir_worldline._exceptions import EnsembleError
from casimir_worldline._geometry import DiscretizedLoop
from casimir_worldline._runner import BlockRunner

logger = logging.getLogger(__name__)

CHUNK = 1024

# Spawn-key streams; the engine draws base points from stream 2.
_INCREMENT_STREAM = 0
_BISECTION_STREAM = 1
BASEPOINT_STREAM = 2

CACHE_MAGIC = b"WLLOOPS\0"
CACHE_VERSION = 1
CACHE_HEADER = np.dtype(
    [
        ("magic", "S8"),
        ("version", "<u4"),
        ("count", "<u8"),
        ("points", "<u8"),
        ("dimension", "<u4"),
        ("seed", "<u8"),
        ("scheme", "<u4"),
    ]
)


class Scheme(str, Enum):
    """How unit bridges are constructed."""

    INCREMENTAL = "incremental"
    BISECTION = "bisection"


_SCHEME_CODES = {Scheme.INCREMENTAL: 0, Scheme.BISECTION: 1}


@dataclass(frozen=True, eq=False)
class LoopEnsemble:
    """An immutable bank of L closed unit bridges with M segments in d dimensions.

    ``unit_loops`` has shape ``(L, M+1, d)`` and ``unit_loops[:, 0] ==
    unit_loops[:, M] == 0``.
    """

    unit_loops: NDArray[np.float64]
    seed: int
    scheme: Scheme
    _radius: list[float] = field(default_factory=list, repr=False)

    def __post_init__(self) -> None:
        if self.unit_loops.ndim != 3 or self.unit_loops.shape[1] < 3:
            raise EnsembleError(f"unit loops must have shape (L, M+1, d) with M >= 2, got {self.unit_loops.shape}")
        self.unit_loops.flags.writeable = False

    @property
    def count(self) -> int:
        return int(self.unit_loops.shape[0])

    @property
    def points(self) -> int:
        return int(self.unit_loops.shape[1] - 1)

    @property
    def dimension(self) -> int:
        return int(self.unit_loops.shape[2])

    @property
    def max_radius(self) -> float:
        """Largest ``|u_k|`` over the whole ensemble."""
        if not self._radius:
            radius = 0.0
            for start in range(0, self.count, CHUNK):
                block = self.unit_loops[start : start + CHUNK]
                radius = max(radius, float(np.sqrt(np.einsum("lkd,lkd->lk", block, block).max())))
            self._radius.append(radius)
        return self._radius[0]

    def coarse(self) -> LoopEnsemble:
        """The M/2 ensemble obtained by keeping every other point (bisection only)."""
        if self.scheme is not Scheme.BISECTION or self.points % 2:
            raise EnsembleError("only bisection ensembles with even M have a coarse restriction")
        return LoopEnsemble(self.unit_loops[:, ::2], self.seed, self.scheme)


def _chunk_bounds(count: int) -> list[Tuple[int, int]]:
    return [(start, min(start + CHUNK, count)) for start in range(0, count, CHUNK)]


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def _incremental_chunk(out: NDArray[np.float64], seed: int, chunk: int) -> None:
    n, m1, d = out.shape
    m = m1 - 1
    steps = _rng(seed, _INCREMENT_STREAM, chunk).standard_normal((n, m, d)) * math.sqrt(1.0 / m)
    walk = np.zeros((n, m1, d))
    np.cumsum(steps, axis=1, out=walk[:, 1:])
    t = np.arange(m1, dtype=np.float64) / m
    out[...] = walk - t[None, :, None] * walk[:, -1:, :]
    out[:, -1] = 0.0


def _bisection_level(out: NDArray[np.float64], seed: int, chunk: int, level: int) -> None:
    """Fill the midpoints of refinement *level* (1 is the single midpoint t=1/2)."""
    n, m1, d = out.shape
    m = m1 - 1
    half = m >> level
    mids = np.arange(half, m, 2 * half)
    # A bridge pinned over an interval of length 2*half/m has midpoint variance (2*half/m)/4.
    sigma = math.sqrt(half / (2.0 * m))
    z = _rng(seed, _BISECTION_STREAM, chunk, level).standard_normal((n, mids.size, d))
    out[:, mids] = 0.5 * (out[:, mids - half] + out[:, mids + half]) + sigma * z


def _levels(points: int) -> int:
    levels = points.bit_length() - 1
    if points < 2 or 1 << levels != points:
        raise EnsembleError(f"bisection needs M to be a power of two, got {points}")
    return levels


def generate(
    count: int,
    points: int,
    dimension: int,
    seed: int,
    scheme: Union[Scheme, str] = Scheme.BISECTION,
    workers: int = 1,
) -> LoopEnsemble:
    """Generate L unit bridges with M segments each.

    Args:
        count: Number of loops L (>= 1).
        points: Number of segments M (>= 2; a power of two for bisection).
        dimension: Spatial dimension d.
        seed: 64-bit seed.
        scheme: ``incremental`` (pinned Gaussian walk ``w_k - (k/M) w_M``) or
            ``bisection`` (Levy midpoint construction).
        workers: Threads used to fill chunks; the result does not depend on it.

    Raises:
        EnsembleError: On invalid sizes or when the array cannot be allocated.
    """
    scheme = Scheme(scheme)
    if count < 1 or points < 2 or dimension < 1:
        raise EnsembleError(f"need count >= 1, points >= 2, dimension >= 1; got {count}, {points}, {dimension}")
    if not 0 <= seed < 1 << 64:
        raise EnsembleError("seed must be a 64-bit unsigned integer")
    levels = _levels(points) if scheme is Scheme.BISECTION else 0
    try:
        loops = np.zeros((count, points + 1, dimension))
    except MemoryError as exc:
        raise EnsembleError(
            f"cannot allocate {count} x {points + 1} x {dimension} loop ensemble "
            f"({count * (points + 1) * dimension * 8 / 2**30:.1f} GiB)"
        ) from exc

    def fill(chunk: int) -> None:
        start, stop = bounds[chunk]
        view = loops[start:stop]
        if scheme is Scheme.INCREMENTAL:
            _incremental_chunk(view, seed, chunk)
        else:
            for level in range(1, levels + 1):
                _bisection_level(view, seed, chunk, level)

    bounds = _chunk_bounds(count)
    BlockRunner(workers).map(fill, range(len(bounds)))
    logger.info("Generated %d %s loops with M=%d in d=%d (seed=%d).", count, scheme.value, points, dimension, seed)
    return LoopEnsemble(loops, seed, scheme)


def refinement_pair(ensemble: LoopEnsemble, workers: int = 1) -> LoopEnsemble:
    """The 2M-point ensemble whose even-indexed points are exactly *ensemble*.

    Raises:
        EnsembleError: If *ensemble* was not built by bisection.
    """
    if ensemble.scheme is not Scheme.BISECTION:
        raise EnsembleError("refinement requires a bisection ensemble")
    levels = _levels(ensemble.points)
    try:
        fine = np.zeros((ensemble.count, 2 * ensemble.points + 1, ensemble.dimension))
    except MemoryError as exc:
        raise EnsembleError("cannot allocate the refined loop ensemble") from exc
    fine[:, ::2] = ensemble.unit_loops
    bounds = _chunk_bounds(ensemble.count)

    def fill(chunk: int) -> None:
        start, stop = bounds[chunk]
        _bisection_level(fine[start:stop], ensemble.seed, chunk, levels + 1)

    BlockRunner(workers).map(fill, range(len(bounds)))
    return LoopEnsemble(fine, ensemble.seed, ensemble.scheme)


def physical_loop(ensemble: LoopEnsemble, index: int, x: Sequence[float], beta: float) -> DiscretizedLoop:
    """Loop ``index`` of the ensemble, based at *x* and scaled to proper time *beta*."""
    if not 0 <= index < ensemble.count:
        raise IndexError(f"loop index {index} out of range for {ensemble.count} loops")
    if beta < 0.0:
        raise ValueError("beta must be nonnegative")
    base = np.asarray(x, dtype=np.float64)
    if base.shape != (ensemble.dimension,):
        raise ValueError(f"base point must have dimension {ensemble.dimension}")
    return DiscretizedLoop(base, math.sqrt(beta), ensemble.unit_loops[index])


def basepoint_draws(seed: int, count: int, per_loop: int, dimension: int) -> NDArray[np.float64]:
    """Uniform ``[0, 1)^d`` draws, ``per_loop`` for each of ``count`` loops, chunked like the loops."""
    draws = np.empty((count, per_loop, dimension))
    for chunk, (start, stop) in enumerate(_chunk_bounds(count)):
        draws[start:stop] = _rng(seed, BASEPOINT_STREAM, chunk).random((stop - start, per_loop, dimension))
    return draws


# ---------------------------------------------------------------------------
# Binary cache
# ---------------------------------------------------------------------------


def save_ensemble(ensemble: LoopEnsemble, path: Union[str, Path]) -> None:
    """Write the ensemble as a header record followed by little-endian float64 loops."""
    header = np.zeros((), dtype=CACHE_HEADER)
    header["magic"] = CACHE_MAGIC
    header["version"] = CACHE_VERSION
    header["count"] = ensemble.count
    header["points"] = ensemble.points
    header["dimension"] = ensemble.dimension
    header["seed"] = ensemble.seed
    header["scheme"] = _SCHEME_CODES[ensemble.scheme]
    with open(path, "wb") as fh:
        fh.write(header.tobytes())
        np.ascontiguousarray(ensemble.unit_loops, dtype="<f8").tofile(fh)
    logger.info("Cached %d loops to %s.", ensemble.count, path)


def load_ensemble(path: Union[str, Path]) -> LoopEnsemble:
    """Memory-map an ensemble written by :func:`save_ensemble`.

    Raises:
        EnsembleError: If the file is missing, truncated or not an ensemble cache.
    """
    path = Path(path)
    try:
        raw = np.fromfile(path, dtype=CACHE_HEADER, count=1)
    except OSError as exc:
        raise EnsembleError(f"cannot read ensemble cache {path}: {exc}") from exc
    # numpy strips trailing NULs from fixed-width byte fields on read.
    if raw.size != 1 or bytes(raw["magic"][0]) != CACHE_MAGIC.rstrip(b"\0"):
        raise EnsembleError(f"{path} is not a loop ensemble cache")
    header = raw[0]
    if int(header["version"]) != CACHE_VERSION:
        raise EnsembleError(f"unsupported cache version {int(header['version'])}")
    shape = (int(header["count"]), int(header["points"]) + 1, int(header["dimension"]))
    expected = CACHE_HEADER.itemsize + 8 * math.prod(shape)
    if path.stat().st_size != expected:
        raise EnsembleError(f"{path} has {path.stat().st_size} bytes, expected {expected}")
    codes = {code: scheme for scheme, code in _SCHEME_CODES.items()}
    try:
        scheme = codes[int(header["scheme"])]
    except KeyError as exc:
        raise EnsembleError(f"unknown scheme code {int(header['scheme'])}") from exc
    loops = np.memmap(path, dtype="<f8", mode="r", offset=CACHE_HEADER.itemsize, shape=shape)
    return LoopEnsemble(loops, int(header["seed"]), scheme)
