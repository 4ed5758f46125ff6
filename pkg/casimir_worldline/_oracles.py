"""Closed-form energy of the hyper-rectangle formed by 2d pairwise-parallel Dirichlet planes."""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy import integrate, special

logger = logging.getLogger(__name__)

# Default truncation per dimension; the certified tail bracket shrinks like n_max**-2.
DEFAULT_NMAX = {1: 100_000, 2: 4096, 3: 256}
DEFAULT_NMAX_HIGH = 32

# Lattice points summed per block.
_SUM_CELLS = 1 << 20

_COLLAPSE_BASE = {2: 256, 3: 48}
_COLLAPSE_STEPS = tuple(2.0**-k for k in range(1, 7))


@dataclass(frozen=True)
class RectangleConfig:
    """Side lengths of the rectangle and the truncation of the orbit sum.

    Args:
        lengths: ``l_1 .. l_d`` (positive).
        n_max: Highest winding number summed per axis; an int applies to every
            axis.  ``None`` picks a default for the dimension.
    """

    lengths: Tuple[float, ...]
    n_max: Union[int, Tuple[int, ...], None] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "lengths", tuple(float(v) for v in self.lengths))
        if not self.lengths:
            raise ValueError("at least one length is required")
        if not all(math.isfinite(v) and v > 0.0 for v in self.lengths):
            raise ValueError(f"lengths must be positive, got {self.lengths}")
        if self.n_max is not None:
            counts = (self.n_max,) * self.dimension if isinstance(self.n_max, int) else tuple(self.n_max)
            if len(counts) != self.dimension or min(counts) < 1:
                raise ValueError(f"n_max must be >= 1 for each of the {self.dimension} axes")
            object.__setattr__(self, "n_max", counts)

    @property
    def dimension(self) -> int:
        return len(self.lengths)

    @property
    def truncation(self) -> Tuple[int, ...]:
        if self.n_max is None:
            return (DEFAULT_NMAX.get(self.dimension, DEFAULT_NMAX_HIGH),) * self.dimension
        return self.n_max  # type: ignore[return-value]


@dataclass(frozen=True)
class RectangleEnergy:
    """Irreducible ``2**d``-body energy of the rectangle.

    ``value`` is the partial sum plus the midpoint of the certified tail
    bracket ``(tail_lower, tail_upper)``; ``tail_bound`` is the half width of
    the bracket in energy units.
    """

    value: float
    tail_bound: float
    partial_sum: float
    tail_lower: float
    tail_upper: float
    n_max: Tuple[int, ...]


def prefactor(dimension: int) -> float:
    """``-Gamma((d+1)/2) / (4 pi**((d+1)/2))``."""
    s = 0.5 * (dimension + 1)
    return -special.gamma(s) / (4.0 * math.pi**s)


def _partial_sum(lengths: Sequence[float], n_max: Sequence[int]) -> float:
    """``sum_{1 <= n <= n_max} V / L(n)**(d+1)`` with ``L(n)**2 = sum (n_j l_j)**2``."""
    volume = math.prod(lengths)
    power = 0.5 * (len(lengths) + 1)
    first = (np.arange(1, n_max[0] + 1) * lengths[0]) ** 2
    if len(lengths) == 1:
        return math.fsum(volume / first**power)
    rest = np.zeros(1)
    for n, length in zip(n_max[1:], lengths[1:]):
        rest = (rest[:, None] + ((np.arange(1, n + 1) * length) ** 2)[None, :]).ravel()
    rows = max(1, _SUM_CELLS // rest.size)
    totals = []
    for start in range(0, len(first), rows):
        block = first[start : start + rows, None] + rest[None, :]
        totals.append(float((volume / block**power).sum()))
    return math.fsum(totals)


def _orthant_integral(lengths: Sequence[float], corner: Sequence[float]) -> float:
    """``int_{t >= corner} V / L(t)**(d+1) dt`` for a corner with at least one positive entry."""
    d = len(lengths)
    scales = np.asarray([c * length for c, length in zip(corner, lengths)])
    reach = float(scales.max())
    coefficient = 2.0 * math.pi ** (0.5 * d) / (2**d * special.gamma(0.5 * (d + 1)))

    # In units of the largest scale the integrand decays within a few units.
    def integrand(v: float) -> float:
        return float(np.prod(special.erfc(scales / reach * v)))

    value, _ = integrate.quad(integrand, 0.0, np.inf, epsabs=0.0, epsrel=1e-12, limit=400)
    return coefficient * value / reach


def _tail_region(lengths: Sequence[float], edge: Sequence[float], floor: float) -> float:
    """Integral over ``{t_j >= floor for all j, t_j >= edge_j for some j}`` by inclusion-exclusion."""
    d = len(lengths)
    total = []
    for size in range(1, d + 1):
        for axes in itertools.combinations(range(d), size):
            corner = [edge[j] if j in axes else floor for j in range(d)]
            total.append((1.0 if size % 2 else -1.0) * _orthant_integral(lengths, corner))
    return math.fsum(total)


def hrectangle_energy(config: RectangleConfig) -> RectangleEnergy:
    """Energy ``-Gamma((d+1)/2) / (4 pi**((d+1)/2)) * sum_{n >= 1} V / L(n)**(d+1)`` with a certified tail.

    The summand decreases in every winding number, so the omitted terms lie
    between the integrals over the unit cells on either side of each lattice
    point.
    """
    lengths = config.lengths
    n_max = config.truncation
    partial = _partial_sum(lengths, n_max)
    upper = _tail_region(lengths, [float(n) for n in n_max], 0.0)
    lower = _tail_region(lengths, [float(n + 1) for n in n_max], 1.0)
    pref = prefactor(config.dimension)
    result = RectangleEnergy(
        value=pref * (partial + 0.5 * (lower + upper)),
        tail_bound=abs(pref) * 0.5 * (upper - lower),
        partial_sum=partial,
        tail_lower=lower,
        tail_upper=upper,
        n_max=n_max,
    )
    logger.debug("Rectangle %s: E=%.12g +- %.2g (n_max=%s).", lengths, result.value, result.tail_bound, n_max)
    return result


# ---------------------------------------------------------------------------
# Collapse limit
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CollapseCheck:
    """Outcome of shrinking one side of the rectangle to zero.

    Truthy when the extrapolated limit is within *tolerance* of half the
    energy of the rectangle with that side removed.
    """

    limit: float
    target: float
    relative_error: float
    tolerance: float
    steps: Tuple[float, ...]
    energies: Tuple[float, ...]

    @property
    def passed(self) -> bool:
        return bool(self.relative_error <= self.tolerance)

    def __bool__(self) -> bool:
        return self.passed


def richardson(steps: Sequence[float], values: Sequence[float], order: int = 2) -> float:
    """Zero-step limit from the last ``order + 1`` values of a series in integer powers of the step."""
    if len(steps) != len(values) or len(values) < order + 1:
        raise ValueError("richardson needs at least order + 1 matching steps and values")
    h = list(steps[-(order + 1) :])
    table = list(values[-(order + 1) :])
    # Neville's recursion evaluated at h = 0.
    for level in range(1, order + 1):
        table = [
            (h[i + level] * table[i] - h[i] * table[i + 1]) / (h[i + level] - h[i]) for i in range(len(table) - 1)
        ]
    return float(table[0])


def collapse_limit_check(
    config: RectangleConfig, axis: int, *, tolerance: float = 0.01, base: Optional[int] = None
) -> CollapseCheck:
    """Shrink side *axis* through ``1/2 .. 1/64`` and compare the limit with half the lower-dimensional energy.

    Raises:
        ValueError: If the rectangle has fewer than two dimensions.
    """
    d = config.dimension
    if d < 2:
        raise ValueError("the collapse limit needs a rectangle of dimension at least 2")
    if not 0 <= axis < d:
        raise ValueError(f"axis must lie in [0, {d})")
    base = base or _COLLAPSE_BASE.get(d, 16)
    energies = []
    for eps in _COLLAPSE_STEPS:
        lengths = tuple(eps if j == axis else v for j, v in enumerate(config.lengths))
        longest = max(lengths)
        n_max = tuple(max(1, int(math.ceil(base * longest / v))) for v in lengths)
        energies.append(hrectangle_energy(RectangleConfig(lengths, n_max)).value)
    limit = richardson(_COLLAPSE_STEPS, energies)
    reduced = tuple(v for j, v in enumerate(config.lengths) if j != axis)
    target = 0.5 * hrectangle_energy(RectangleConfig(reduced)).value
    check = CollapseCheck(
        limit=limit,
        target=target,
        relative_error=abs(limit - target) / abs(target),
        tolerance=tolerance,
        steps=_COLLAPSE_STEPS,
        energies=tuple(energies),
    )
    logger.info("Collapse of axis %d: limit %.8g vs target %.8g.", axis, limit, target)
    return check
