"""Irreducible energies of semi-transparent plates on a line.

A plate ``lambda * delta(x - a)`` scatters a Euclidean mode of frequency xi
with reflection strength ``r = lambda / (lambda + 2 xi)``.  The energy of a
subset of plates relative to empty space is ``(1/2pi) int ln det M_s dxi``
with ``M_ij = delta_ij + lambda_i / (2 xi) exp(-xi |a_i - a_j|)``; the
irreducible energy takes the alternating sum over subsets before integrating,
so the divergent single-plate terms cancel pointwise.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
from scipy import integrate

from casimir_worldline._combinatorics import popcount, signed_weight, subsets
from casimir_worldline._exceptions import IntegrandCancellationError, QuadratureError
from casimir_worldline._runner import BlockRunner

logger = logging.getLogger(__name__)

# Relative change allowed when the quadrature tolerance is halved.
CONVERGENCE = 1e-8

# Beyond |ln(xi / scale)| = 60 the weighted integrand is below 1e-24.
_LOG_CUTOFF = 60.0


@dataclass(frozen=True)
class PlateStack:
    """Two or three parallel delta plates.

    Args:
        positions: Plate positions ``a_i`` (may coincide).
        couplings: Strengths ``lambda_i >= 0`` (inverse length).
    """

    positions: Tuple[float, ...]
    couplings: Tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "positions", tuple(float(v) for v in self.positions))
        object.__setattr__(self, "couplings", tuple(float(v) for v in self.couplings))
        if len(self.positions) != len(self.couplings):
            raise ValueError("positions and couplings must have the same length")
        if self.count not in (2, 3):
            raise ValueError(f"a plate stack has 2 or 3 plates, got {self.count}")
        if not all(math.isfinite(a) for a in self.positions):
            raise ValueError("plate positions must be finite")
        if not all(math.isfinite(c) and c >= 0.0 for c in self.couplings):
            raise ValueError(f"couplings must be finite and nonnegative, got {self.couplings}")

    @property
    def count(self) -> int:
        return len(self.positions)

    @property
    def scale(self) -> float:
        """Natural frequency scale: inverse of the widest gap."""
        gap = max(self.positions) - min(self.positions)
        if gap > 0.0:
            return 1.0 / gap
        return max(max(self.couplings), 1.0)


@dataclass(frozen=True)
class ScatterConfig:
    tolerance: float = 1e-10

    def __post_init__(self) -> None:
        if not 0.0 < self.tolerance < 1.0:
            raise ValueError("tolerance must lie in (0, 1)")


@dataclass(frozen=True)
class ScatterResult:
    energy: float
    quadrature_error: float


@dataclass(frozen=True)
class ScanPoint:
    """One configuration of a coincidence scan: the moving plate's position and the energy there."""

    position: float
    energy: float
    quadrature_error: float


def _members(mask: int, count: int) -> List[int]:
    return [i for i in range(count) if mask >> i & 1]


def _normalized_logdet(stack: PlateStack, members: Sequence[int], xi: float) -> float:
    """``ln det N_s`` with rows of ``M_s`` divided by their diagonal.

    The determinant is propagated plate by plate from the left.  After each
    plate only ``1 - rho`` is kept, where ``rho`` is the reflection of the
    plates passed so far; every factor is then a sum of nonnegative terms and
    stays accurate as ``xi -> 0``, where ``M_s`` itself is nearly singular.
    """
    if len(members) < 2:
        return 0.0
    ordered = sorted(members, key=lambda i: stack.positions[i])
    first = stack.couplings[ordered[0]]
    # 1 - rho after the first plate is its transmission 2 xi / (lambda + 2 xi).
    sigma = 2.0 * xi / (first + 2.0 * xi)
    total = 0.0
    for left, right in zip(ordered, ordered[1:]):
        t = 2.0 * xi / (stack.couplings[right] + 2.0 * xi)
        u = -math.expm1(-2.0 * xi * (stack.positions[right] - stack.positions[left]))
        w = sigma + (1.0 - sigma) * u
        factor = t + (1.0 - t) * w
        if factor <= 0.0:
            raise IntegrandCancellationError(f"plate matrix of subset {list(members)} is singular at xi={xi:.6g}")
        total += math.log(factor)
        sigma = t * w / factor
    return total


def subset_logdet(stack: PlateStack, subset: int, xi: float) -> float:
    """``ln det[delta_ij + lambda_i / (2 xi) exp(-xi |a_i - a_j|)]`` over the plates in *subset*."""
    if xi <= 0.0:
        raise ValueError("xi must be positive")
    members = _members(subset, stack.count)
    diagonal = math.fsum(math.log1p(stack.couplings[i] / (2.0 * xi)) for i in members)
    return diagonal + _normalized_logdet(stack, members, xi)


def combined_integrand(stack: PlateStack, xi: float) -> float:
    """``sum_s (-1)**(K-|s|) ln det M_s`` with the single-plate logarithms cancelled analytically."""
    total = math.fsum(
        signed_weight(stack.count, s) * _normalized_logdet(stack, _members(s, stack.count), xi)
        for s in subsets(stack.count)
        if popcount(s) >= 2
    )
    if not math.isfinite(total):
        raise IntegrandCancellationError(f"combined integrand is not finite at xi={xi:.6g}")
    return total


def _integrate(stack: PlateStack, tolerance: float) -> Tuple[float, float]:
    scale = stack.scale

    # xi = scale * exp(v) resolves both the logarithmic small-xi feature and the exponential tail.
    def integrand(v: float) -> float:
        if abs(v) > _LOG_CUTOFF:
            return 0.0
        xi = scale * math.exp(v)
        return combined_integrand(stack, xi) * xi

    pieces = [
        integrate.quad(integrand, lo, hi, epsabs=0.0, epsrel=tolerance, limit=500)
        for lo, hi in ((-np.inf, 0.0), (0.0, np.inf))
    ]
    return sum(p[0] for p in pieces), sum(p[1] for p in pieces)


def irreducible_energy_1d(stack: PlateStack, config: ScatterConfig = ScatterConfig()) -> ScatterResult:
    """Irreducible K-body energy ``(1/2pi) int_0^inf dxi sum_s (-1)**(K-|s|) ln det M_s``.

    Raises:
        IntegrandCancellationError: If the combined integrand is not finite.
        QuadratureError: If halving the tolerance moves the result by more
            than ``1e-8`` relative.
    """
    value, abserr = _integrate(stack, config.tolerance)
    refined, refined_err = _integrate(stack, 0.5 * config.tolerance)
    change = abs(refined - value)
    if change > CONVERGENCE * abs(refined) + 1e-14 * stack.scale:
        raise QuadratureError(
            f"quadrature changed by {change:.3g} (relative {change / max(abs(refined), 1e-300):.3g}) "
            "when the tolerance was halved"
        )
    energy = refined / (2.0 * math.pi)
    error = (change + refined_err) / (2.0 * math.pi)
    logger.debug("Plates %s couplings %s: E=%.12g +- %.2g.", stack.positions, stack.couplings, energy, error)
    return ScatterResult(energy=energy, quadrature_error=error)


def x_factor(r_i: float, r_j: float, xi: float, gap: float) -> float:
    """Scalar two-plate multiple-reflection factor ``1 / (1 - r_i r_j exp(-2 xi gap))``."""
    return 1.0 / (1.0 - r_i * r_j * math.exp(-2.0 * xi * gap))


def two_body_energy_1d(
    coupling_1: float, coupling_2: float, gap: float, config: ScatterConfig = ScatterConfig()
) -> float:
    """Interaction energy of two plates separated by *gap*."""
    return irreducible_energy_1d(PlateStack((0.0, gap), (coupling_1, coupling_2)), config).energy


def coincidence_scan(
    stack: PlateStack,
    steps: int = 8,
    config: ScatterConfig = ScatterConfig(),
    *,
    workers: int = 1,
) -> List[ScanPoint]:
    """Move plate 2 linearly onto plate 1 in *steps* steps and record the three-body energy.

    The first point is the stack as given, the last has ``a_2 == a_1``.
    """
    if stack.count != 3:
        raise ValueError("a coincidence scan needs three plates")
    if steps < 1:
        raise ValueError("steps must be at least 1")
    start, target = stack.positions[1], stack.positions[0]
    positions = [start + (target - start) * k / steps for k in range(steps + 1)]
    positions[-1] = target

    def evaluate(position: float) -> ScanPoint:
        moved = PlateStack((stack.positions[0], position, stack.positions[2]), stack.couplings)
        result = irreducible_energy_1d(moved, config)
        return ScanPoint(position=position, energy=result.energy, quadrature_error=result.quadrature_error)

    return BlockRunner(workers).map(evaluate, positions)
