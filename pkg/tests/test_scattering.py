"""Tests for the delta-plate scattering energies."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from casimir_worldline import (
    PlateStack,
    ScatterConfig,
    coincidence_scan,
    irreducible_energy_1d,
    subset_logdet,
    two_body_energy_1d,
    x_factor,
)
from casimir_worldline._combinatorics import signed_weight, subsets
from casimir_worldline._scattering import combined_integrand
from tests.conftest import PI_OVER_24

DIRICHLET = 1e9


def _matrix(stack: PlateStack, subset: int, xi: float) -> np.ndarray:
    members = [i for i in range(stack.count) if subset >> i & 1]
    a = np.array([stack.positions[i] for i in members])
    lam = np.array([stack.couplings[i] for i in members])
    return np.eye(len(members)) + (lam / (2.0 * xi))[:, None] * np.exp(-xi * np.abs(a[:, None] - a[None, :]))


stacks = st.builds(
    PlateStack,
    st.tuples(*[st.floats(min_value=0.0, max_value=2.0)] * 3),
    st.tuples(*[st.floats(min_value=0.1, max_value=10.0)] * 3),
)


@given(stacks, st.integers(min_value=1, max_value=7), st.floats(min_value=0.1, max_value=5.0))
def test_subset_logdet_matches_dense_determinant(stack: PlateStack, subset: int, xi: float) -> None:
    sign, logdet = np.linalg.slogdet(_matrix(stack, subset, xi))
    assert sign == 1.0
    assert subset_logdet(stack, subset, xi) == pytest.approx(logdet, rel=1e-9, abs=1e-10)


@given(stacks, st.floats(min_value=0.1, max_value=5.0))
def test_combined_integrand_is_the_alternating_subset_sum(stack: PlateStack, xi: float) -> None:
    expected = math.fsum(signed_weight(3, s) * subset_logdet(stack, s, xi) for s in subsets(3))
    assert combined_integrand(stack, xi) == pytest.approx(expected, abs=1e-9)


def test_two_plate_integrand_is_the_reflection_factor() -> None:
    stack = PlateStack((0.0, 1.5), (2.0, 5.0))
    for xi in (0.01, 0.3, 2.0):
        r1, r2 = 2.0 / (2.0 + 2.0 * xi), 5.0 / (5.0 + 2.0 * xi)
        assert combined_integrand(stack, xi) == pytest.approx(-math.log(x_factor(r1, r2, xi, 1.5)), rel=1e-12)


def test_x_factor() -> None:
    assert x_factor(0.5, 0.5, 1.0, 1.0) == pytest.approx(1.0 / (1.0 - 0.25 * math.exp(-2.0)))


# ---------------------------------------------------------------------------
# Energies
# ---------------------------------------------------------------------------


def test_strong_plates_reach_the_dirichlet_limit() -> None:
    assert two_body_energy_1d(DIRICHLET, DIRICHLET, 1.0) == pytest.approx(-PI_OVER_24, rel=1e-6)


def test_screened_three_body_energy_of_strong_plates() -> None:
    result = irreducible_energy_1d(PlateStack((0.0, 1.0, 2.0), (DIRICHLET,) * 3))
    # The middle plate screens the outer pair, leaving minus their two-body energy.
    assert result.energy == pytest.approx(PI_OVER_24 / 2.0, rel=1e-6)
    assert result.quadrature_error < 1e-8


def test_two_body_energy_matches_direct_quadrature() -> None:
    lam, gap = 3.0, 1.0

    def integrand(xi: float) -> float:
        r = lam / (lam + 2.0 * xi)
        return math.log1p(-(r**2) * math.exp(-2.0 * xi * gap))

    direct, _ = integrate.quad(integrand, 0.0, np.inf, epsabs=1e-13)
    assert two_body_energy_1d(lam, lam, gap) == pytest.approx(direct / (2.0 * math.pi), rel=1e-7)


def test_energy_scales_with_inverse_length() -> None:
    wide = two_body_energy_1d(2.0, 2.0, 1.0)
    narrow = two_body_energy_1d(4.0, 4.0, 0.5)
    assert narrow == pytest.approx(2.0 * wide, rel=1e-8)
    assert wide < 0.0


def test_plate_order_does_not_matter() -> None:
    a = irreducible_energy_1d(PlateStack((0.0, 1.0, 2.5), (1.0, 2.0, 3.0))).energy
    b = irreducible_energy_1d(PlateStack((2.5, 0.0, 1.0), (3.0, 1.0, 2.0))).energy
    assert a == pytest.approx(b, rel=1e-9)
    assert a > 0.0


# ---------------------------------------------------------------------------
# Coincidence scan
# ---------------------------------------------------------------------------


def test_coincidence_scan_moves_plate_two_onto_plate_one() -> None:
    stack = PlateStack((0.0, 1.0, 2.0), (5.0, 5.0, 5.0))
    scan = coincidence_scan(stack, steps=4)
    assert [p.position for p in scan] == [1.0, 0.75, 0.5, 0.25, 0.0]
    assert all(p.energy > 0.0 for p in scan)
    threaded = coincidence_scan(stack, steps=4, workers=2)
    assert [p.energy for p in threaded] == [p.energy for p in scan]


# ---------------------------------------------------------------------------
# Errors
# ---------------------------------------------------------------------------


@pytest.mark.parametrize(
    ("positions", "couplings", "fragment"),
    [
        ((0.0,), (1.0,), "2 or 3 plates"),
        ((0.0, 1.0, 2.0, 3.0), (1.0, 1.0, 1.0, 1.0), "2 or 3 plates"),
        ((0.0, 1.0), (1.0,), "same length"),
        ((0.0, 1.0), (1.0, -1.0), "nonnegative"),
        ((0.0, math.nan), (1.0, 1.0), "finite"),
    ],
)
def test_invalid_stack(positions: tuple, couplings: tuple, fragment: str) -> None:
    with pytest.raises(ValueError, match=fragment):
        PlateStack(positions, couplings)


def test_invalid_arguments() -> None:
    two = PlateStack((0.0, 1.0), (1.0, 1.0))
    with pytest.raises(ValueError, match="xi"):
        subset_logdet(two, 0b11, 0.0)
    with pytest.raises(ValueError, match="three plates"):
        coincidence_scan(two)
    with pytest.raises(ValueError, match="steps"):
        coincidence_scan(PlateStack((0.0, 1.0, 2.0), (1.0, 1.0, 1.0)), steps=0)
    with pytest.raises(ValueError, match="tolerance"):
        ScatterConfig(tolerance=0.0)
