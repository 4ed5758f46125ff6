"""Tests for the lattice lab."""

from __future__ import annotations

import math

import numpy as np
import pytest

from casimir_worldline import (
    Box,
    GridConfig,
    Hyperplane,
    Scene,
    SceneObject,
    build_spectrum,
    decay_check,
    fit_heat_kernel,
    irreducible_decomposition,
    irreducible_spectral_exact,
    kernel,
    kernel_bound_check,
    leading_coefficient_differences,
    parse_scene,
    spectral_function,
    subset_spectra,
)
from casimir_worldline._exceptions import DecayCheckError, GridError
from casimir_worldline._lab import free_lattice_kernel, spectral_rows
from tests.conftest import BOXED_LINES_2D, BOXED_POINT_1D, BOXED_POINTS_1D, SLAB_1D, TWO_POINTS_1D


@pytest.fixture(scope="module")
def boxed_point() -> Scene:
    return parse_scene(BOXED_POINT_1D)


@pytest.fixture(scope="module")
def boxed_points() -> Scene:
    return parse_scene(BOXED_POINTS_1D)


# ---------------------------------------------------------------------------
# Spectra
# ---------------------------------------------------------------------------


def test_empty_box_matches_lattice_sine_modes(boxed_point: Scene) -> None:
    h = 0.01
    spectrum = build_spectrum(boxed_point, GridConfig(h), subset=0)
    k = np.arange(1, 100)
    np.testing.assert_allclose(spectrum.eigenvalues, 4.0 / h**2 * np.sin(k * math.pi * h / 2.0) ** 2, rtol=1e-10)


def test_dirichlet_point_splits_the_box(boxed_point: Scene) -> None:
    spectrum = build_spectrum(boxed_point, GridConfig(0.01))
    assert spectrum.kept.sum() == 98
    # Two boxes of 49 nodes each: every eigenvalue appears twice.
    np.testing.assert_allclose(spectrum.eigenvalues[::2], spectrum.eigenvalues[1::2], rtol=1e-10)


def test_single_point_removes_half_a_mode(boxed_point: Scene) -> None:
    assert irreducible_spectral_exact(boxed_point, GridConfig(0.01), 0.0025) == pytest.approx(-0.5, abs=1e-6)


def test_spectral_function_rejects_nonpositive_beta(boxed_point: Scene) -> None:
    spectrum = build_spectrum(boxed_point, GridConfig(0.1))
    with pytest.raises(ValueError, match="positive"):
        spectral_function(spectrum, 0.0)


def test_subset_spectra_cover_every_mask(boxed_points: Scene) -> None:
    spectra = subset_spectra(boxed_points, GridConfig(0.05), workers=2)
    assert sorted(spectra) == [0, 1, 2, 3]
    assert [spectra[m].kept.sum() for m in range(4)] == [19, 18, 18, 17]


def test_subset_spectra_limit_object_count() -> None:
    objects = tuple(SceneObject(Hyperplane((1.0,), float(k))) for k in range(1, 14))
    scene = Scene(1, objects, Box((0.0,), (14.0,)))
    with pytest.raises(ValueError, match="at most 12"):
        subset_spectra(scene, GridConfig(0.5))


def test_two_lines_in_a_square() -> None:
    scene = parse_scene(BOXED_LINES_2D)
    grid = GridConfig(0.05)
    spectra = subset_spectra(scene, grid)
    exact = irreducible_spectral_exact(scene, grid, 0.05, spectra)
    parts = irreducible_decomposition(scene, grid, 0.05, spectra)
    assert exact > 0.0
    assert parts[0b11] == pytest.approx(exact, rel=1e-9, abs=1e-12)
    assert parts[0] == pytest.approx(spectral_function(spectra[0], 0.05))


def test_spectral_rows_name_every_subset(boxed_points: Scene) -> None:
    rows = spectral_rows(boxed_points, GridConfig(0.05), [0.01, 0.1])
    assert list(rows[0]) == ["beta", "phi_00", "phi_01", "phi_10", "phi_11", "phi_tilde"]
    assert rows[1]["beta"] == 0.1
    row = rows[0]
    assert row["phi_tilde"] == pytest.approx(row["phi_11"] - row["phi_01"] - row["phi_10"] + row["phi_00"])


# ---------------------------------------------------------------------------
# Grid errors
# ---------------------------------------------------------------------------


def test_spacing_must_divide_the_box(boxed_point: Scene) -> None:
    with pytest.raises(GridError, match="multiples"):
        build_spectrum(boxed_point, GridConfig(0.3))


def test_lab_needs_a_box() -> None:
    with pytest.raises(GridError, match="finite scene box"):
        build_spectrum(parse_scene(TWO_POINTS_1D), GridConfig(0.1))


def test_lab_rejects_three_dimensions() -> None:
    scene = parse_scene("dimension = 3\nbox = 0 1 0 1 0 1\n[object]\nshape = sphere 0.5 0.5 0.5 0.1\n")
    with pytest.raises(GridError, match="dimensions 1 and 2"):
        build_spectrum(scene, GridConfig(0.1))


def test_grid_size_is_capped(boxed_point: Scene) -> None:
    with pytest.raises(GridError, match="max_nodes"):
        build_spectrum(boxed_point, GridConfig(0.001, max_nodes=100))


def test_spacing_must_be_positive() -> None:
    with pytest.raises(GridError, match="positive"):
        GridConfig(0.0)


def test_dense_eigenproblem_is_capped_before_allocating() -> None:
    with pytest.raises(GridError, match="max_dense_bytes"):
        build_spectrum(parse_scene(BOXED_LINES_2D), GridConfig(0.05, max_dense_bytes=1000))
    with pytest.raises(GridError, match="max_dense_bytes must be positive"):
        GridConfig(0.05, max_dense_bytes=0)


# ---------------------------------------------------------------------------
# Decay
# ---------------------------------------------------------------------------


def test_decay_slope_tracks_shortest_orbit(boxed_points: Scene) -> None:
    fit = decay_check(boxed_points, GridConfig(0.005), np.geomspace(0.01, 0.04, 8))
    # The orbit bouncing between 0.3 and 0.6 has length 0.6, so the slope is about -0.18.
    assert fit.slope == pytest.approx(-0.18, rel=0.2)
    assert not fit.power_series_detected
    assert all(v > 0.0 for v in fit.values)


def test_decay_check_single_point(boxed_point: Scene) -> None:
    with pytest.raises(DecayCheckError) as info:
        decay_check(boxed_point, GridConfig(0.01), [0.01, 0.02, 0.03, 0.04])
    assert info.value.reason == "no common-intersection suppression for N=1 point object"


def test_decay_check_needs_four_betas(boxed_points: Scene) -> None:
    with pytest.raises(ValueError, match="four"):
        decay_check(boxed_points, GridConfig(0.01), [0.01, 0.02, 0.03])


@pytest.mark.slow
def test_four_crossing_segments_decay_faster_than_beta_to_the_fourth() -> None:
    scene = parse_scene(
        "dimension = 2\nbox = 0 1 0 1\n"
        "[object]\nshape = segment 0.4 0.2 0.4 0.8\n"
        "[object]\nshape = segment 0.6 0.2 0.6 0.8\n"
        "[object]\nshape = segment 0.2 0.4 0.8 0.4\n"
        "[object]\nshape = segment 0.2 0.6 0.8 0.6\n"
    )
    fit = decay_check(scene, GridConfig(0.02), np.geomspace(0.01, 0.025, 5))
    values = np.array(fit.values)
    assert np.all(values > 0.0)
    assert np.all(np.diff(values / np.array(fit.betas) ** 4) > 0.0)
    assert fit.power_exponent > 4.0
    assert fit.slope < 0.0


# ---------------------------------------------------------------------------
# Heat kernel
# ---------------------------------------------------------------------------


KERNEL_SCENES = [
    (BOXED_POINT_1D, 0.01),
    (BOXED_POINTS_1D, 0.01),
    (SLAB_1D, 0.01),
    (BOXED_LINES_2D, 0.05),
    (
        "dimension = 2\nbox = 0 1 0 1\n[object]\nshape = sphere 0.5 0.5 0.15\n"
        "[object]\nshape = plane 1 0 0.25\ninteraction = potential 5 0.1\n",
        0.05,
    ),
]


@pytest.mark.parametrize(("text", "spacing"), KERNEL_SCENES)
def test_kernel_bound_on_random_triples(text: str, spacing: float) -> None:
    scene = parse_scene(text)
    rng = np.random.default_rng(17)
    nodes = round(1.0 / spacing) - 1
    samples = []
    for _ in range(200):
        x = tuple(float(v) for v in spacing * rng.integers(1, nodes + 1, size=scene.dimension))
        y = tuple(float(v) for v in spacing * rng.integers(1, nodes + 1, size=scene.dimension))
        samples.append((x, y, float(rng.uniform(20.0, 400.0)) * spacing**2))
    assert kernel_bound_check(scene, GridConfig(spacing), samples, slack=1e-8)


def test_potential_reduces_the_kernel() -> None:
    scene = parse_scene(SLAB_1D)
    grid = GridConfig(0.01)
    damped = build_spectrum(scene, grid, vectors=True)
    bare = build_spectrum(scene, grid, subset=0, vectors=True)
    for x, y, beta in [((0.5,), (0.5,), 0.01), ((0.4,), (0.6,), 0.02), ((0.1,), (0.3,), 0.05)]:
        assert 0.0 < kernel(damped, x, y, beta) < kernel(bare, x, y, beta)


def test_killed_kernel_stays_below_free_kernel(boxed_points: Scene) -> None:
    samples = [((0.2,), (0.2,), 0.01), ((0.1,), (0.25,), 0.02), ((0.7,), (0.8,), 0.05), ((0.2,), (0.7,), 0.05)]
    assert kernel_bound_check(boxed_points, GridConfig(0.01), samples)


def test_kernel_vanishes_across_a_dirichlet_point(boxed_points: Scene) -> None:
    spectrum = build_spectrum(boxed_points, GridConfig(0.01), vectors=True)
    assert kernel(spectrum, (0.2,), (0.7,), 0.05) == pytest.approx(0.0, abs=1e-9)
    assert kernel(spectrum, (0.3,), (0.2,), 0.05) == 0.0
    assert kernel(spectrum, (0.4,), (0.5,), 0.01) > 0.0


def test_kernel_needs_vectors(boxed_point: Scene) -> None:
    spectrum = build_spectrum(boxed_point, GridConfig(0.1))
    with pytest.raises(ValueError, match="vectors=True"):
        kernel(spectrum, (0.2,), (0.3,), 1.0)


def test_node_must_be_interior(boxed_point: Scene) -> None:
    spectrum = build_spectrum(boxed_point, GridConfig(0.1))
    assert spectrum.node((0.2,)) == 1
    with pytest.raises(GridError, match="interior"):
        spectrum.node((0.0,))


def test_free_lattice_kernel_approaches_gaussian(boxed_point: Scene) -> None:
    spectrum = build_spectrum(boxed_point, GridConfig(0.001), subset=0)
    beta = 0.01
    gaussian = math.exp(-(0.1**2) / (2.0 * beta)) / math.sqrt(2.0 * math.pi * beta)
    assert free_lattice_kernel(spectrum, (0.1,), (0.0,), beta) == pytest.approx(gaussian, rel=1e-3)


def test_heat_kernel_fit_of_empty_box(boxed_point: Scene) -> None:
    spectrum = build_spectrum(boxed_point, GridConfig(0.002), subset=0)
    fit = fit_heat_kernel(spectrum, (0.002, 0.01))
    assert fit.volume == pytest.approx(1.0, rel=1e-2)
    assert fit.boundary == pytest.approx(-0.5, abs=0.03)
    assert fit.window == (0.002, 0.01)


def test_heat_kernel_fit_window_order(boxed_point: Scene) -> None:
    spectrum = build_spectrum(boxed_point, GridConfig(0.1), subset=0)
    with pytest.raises(ValueError, match="window"):
        fit_heat_kernel(spectrum, (0.1, 0.01))


def test_disjoint_points_have_no_joint_coefficients(boxed_points: Scene) -> None:
    coefficients = leading_coefficient_differences(boxed_points, GridConfig(0.002), (0.002, 0.01))
    volume, boundary = coefficients[0b11]
    assert volume == pytest.approx(0.0, abs=1e-2)
    assert boundary == pytest.approx(0.0, abs=0.03)
    for single in (0b01, 0b10):
        volume, boundary = coefficients[single]
        assert volume == pytest.approx(0.0, abs=1e-2)
        assert boundary == pytest.approx(-0.5, abs=0.03)


def test_overlapping_objects_keep_a_power_series() -> None:
    scene = parse_scene(
        "dimension = 1\nbox = 0 1\n[object]\nshape = plane 1 0.5\n"
        "[object]\nshape = plane 1 0.5\ninteraction = potential 20 0.2\n"
    )
    fit = decay_check(scene, GridConfig(0.001), np.geomspace(1e-4, 1e-3, 6))
    assert fit.power_series_detected
    assert fit.power_exponent == pytest.approx(1.0, abs=0.3)
