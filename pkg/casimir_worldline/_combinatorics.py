"""Power-set bookkeeping for the inclusion-exclusion subtraction.

Subsets of the N objects are bitmasks: bit ``i`` set means object ``i`` is
present.  Everything here is exact integer arithmetic except the sums that
take real-valued survival probabilities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Sequence, TypeVar, Union

import numpy as np

MAX_OBJECTS = 30

T = TypeVar("T", float, np.ndarray)


@dataclass(frozen=True)
class SubsetIndex:
    """A subset of ``{1..N}`` stored as a bitmask."""

    mask: int

    def __post_init__(self) -> None:
        if not 0 <= self.mask < 1 << MAX_OBJECTS:
            raise ValueError(f"subset mask {self.mask} out of range for at most {MAX_OBJECTS} objects")

    @classmethod
    def of(cls, members: Iterable[int]) -> SubsetIndex:
        """Build from zero-based member indices."""
        mask = 0
        for i in members:
            mask |= 1 << i
        return cls(mask)

    @property
    def cardinality(self) -> int:
        return popcount(self.mask)

    @property
    def members(self) -> tuple[int, ...]:
        return tuple(i for i in range(MAX_OBJECTS) if self.mask >> i & 1)


SubsetLike = Union[SubsetIndex, int]


def _mask(subset: SubsetLike) -> int:
    return subset.mask if isinstance(subset, SubsetIndex) else int(subset)


def _check_count(n: int) -> None:
    if not 0 <= n <= MAX_OBJECTS:
        raise ValueError(f"N must lie in [0, {MAX_OBJECTS}], got {n}")


def popcount(mask: int) -> int:
    return bin(mask).count("1")


def subsets(n: int) -> range:
    """All bitmasks of the power set of N objects, in increasing order."""
    _check_count(n)
    return range(1 << n)


def submasks(mask: int) -> Iterator[int]:
    """All subsets of *mask*, including the empty set and *mask* itself."""
    sub = mask
    while True:
        yield sub
        if sub == 0:
            return
        sub = (sub - 1) & mask


def signed_weight(n: int, subset: SubsetLike) -> int:
    """``(-1)**(N - |s|)``, the weight of subset *s* in the alternating sum."""
    _check_count(n)
    mask = _mask(subset)
    if mask >= 1 << n:
        raise ValueError(f"subset {mask:#b} is not a subset of {n} objects")
    return -1 if (n - popcount(mask)) % 2 else 1


def astot_sum(n: int, tau_size: int) -> int:
    """Signed number of times a set of size *tau_size* occurs among the subsets of N.

    ``sum_{|s|=|tau|}^{N} (-1)**(N-|s|) * C(N-|tau|, N-|s|)``, which is 0 for
    ``tau_size < N`` and 1 for ``tau_size == N``.
    """
    _check_count(n)
    if not 0 <= tau_size <= n:
        raise ValueError(f"tau_size must lie in [0, {n}], got {tau_size}")
    free = n - tau_size
    return sum((-1) ** (n - size) * math.comb(free, n - size) for size in range(tau_size, n + 1))


def loopcont_sum(n: int, tau: SubsetLike, survivals: Mapping[int, float]) -> float:
    """Contribution to the alternating sum of a loop that meets exactly the objects in *tau*.

    Args:
        n: Number of objects.
        tau: The proper subset of objects the loop encounters.
        survivals: ``p_gamma`` for every ``gamma`` subset of *tau*, keyed by bitmask.

    Returns:
        ``sum_s p_{s & tau} (-1)**(N-|s|)``, zero up to rounding.
    """
    _check_count(n)
    tau_mask = _mask(tau)
    full = (1 << n) - 1
    if tau_mask & ~full or tau_mask == full:
        raise ValueError("tau must be a proper subset of the N objects")
    missing = [g for g in submasks(tau_mask) if g not in survivals]
    if missing:
        raise ValueError(f"survival probabilities missing for subsets {missing}")
    return math.fsum(survivals[s & tau_mask] * signed_weight(n, s) for s in subsets(n))


def _check_survivals(survivals: Sequence[float]) -> np.ndarray:
    values = np.asarray(survivals, dtype=np.float64)
    if values.ndim != 1:
        raise ValueError("survivals must be a flat sequence")
    if values.size > MAX_OBJECTS:
        raise ValueError(f"at most {MAX_OBJECTS} objects are supported")
    if np.any(~np.isfinite(values)) or np.any(values < 0.0) or np.any(values > 1.0):
        raise ValueError(f"survival probabilities must lie in [0, 1], got {values.tolist()}")
    return values


def kill_probability(survivals: Sequence[float], mode: str = "product") -> float:
    """Probability that a path is killed by every object.

    ``product`` computes ``prod_i (1 - s_i)``; ``powerset`` evaluates the
    inclusion-exclusion form ``sum_gamma (-1)**|gamma| prod_{i in gamma} s_i``.
    The two agree whenever the path-conditioned survivals are independent.
    """
    values = _check_survivals(survivals)
    if mode == "product":
        return float(np.prod(1.0 - values))
    if mode == "powerset":
        terms = []
        for gamma in subsets(values.size):
            p = 1.0
            for i in range(values.size):
                if gamma >> i & 1:
                    p *= float(values[i])
            terms.append(-p if popcount(gamma) % 2 else p)
        return math.fsum(terms)
    raise ValueError(f"Unknown mode '{mode}'. Expected 'product' or 'powerset'.")


def irreducible_sum(n: int, values: Mapping[int, T]) -> T:
    """``sum_s (-1)**(N-|s|) values[s]`` over the full power set of N objects."""
    _check_count(n)
    total: T = values[0] * signed_weight(n, 0)
    for s in range(1, 1 << n):
        total = total + values[s] * signed_weight(n, s)
    return total


def mobius_irreducible(n: int, values: Mapping[int, T]) -> dict[int, T]:
    """Irreducible parts of a set function.

    Inverts ``A_s = sum_{tau subset s} a_tau`` for every ``tau``:
    ``a_tau = sum_{sigma subset tau} (-1)**(|tau|-|sigma|) A_sigma``.
    The part for the full set equals :func:`irreducible_sum`.
    """
    _check_count(n)
    parts: dict[int, T] = {}
    for tau in subsets(n):
        size = popcount(tau)
        acc: T = values[tau]
        for sigma in submasks(tau):
            if sigma != tau:
                sign = -1 if (size - popcount(sigma)) % 2 else 1
                acc = acc + values[sigma] * sign
        parts[tau] = acc
    return parts


def mobius_total(parts: Mapping[int, T], subset: SubsetLike) -> T:
    """Re-sum irreducible parts over all subsets of *subset*."""
    mask = _mask(subset)
    total: T = parts[0]
    for tau in submasks(mask):
        if tau:
            total = total + parts[tau]
    return total
