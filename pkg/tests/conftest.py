"""Shared scenes, sizes and fixtures for casimir-worldline tests."""

from __future__ import annotations

import math

import pytest

from casimir_worldline import LoopEnsemble, Scene, generate, parse_scene, refinement_pair

PI_OVER_24 = math.pi / 24.0

# Two Dirichlet points one unit apart on a line: E = -pi/24, l_min = 2.
TWO_POINTS_1D = """\
dimension = 1

[object]
shape = plane 1 0
interaction = dirichlet

[object]
shape = plane 1 1
interaction = dirichlet
"""

ONE_POINT_1D = """\
dimension = 1

[object]
shape = plane 1 0
"""

# Two points at 0.3 and 0.6 inside the unit box; both lie on every lattice with spacing 0.1 / k.
BOXED_POINTS_1D = """\
dimension = 1
box = 0 1

[object]
shape = plane 1 0.3

[object]
shape = plane 1 0.6
"""

BOXED_POINT_1D = """\
dimension = 1
box = 0 1

[object]
shape = plane 1 0.5
"""

BOXED_LINES_2D = """\
dimension = 2
box = 0 1 0 1

[object]
shape = plane 1 0 0.3

[object]
shape = plane 1 0 0.6
"""

# A soft slab centred in the unit box.
SLAB_1D = """\
dimension = 1
box = 0 1

[object]
shape = plane 1 0.5
interaction = potential 20 0.1
"""

SEMI_TRANSPARENT_PLATE_1D = """\
dimension = 1

[object]
shape = plane 1 0
interaction = potential 20 0.01
"""

# Small Monte Carlo sizes that keep unit tests fast.
SMALL_LOOPS = 2048
SMALL_POINTS = 64
SPECTRAL_LOOPS = 4096
SPECTRAL_POINTS = 256


@pytest.fixture
def two_points() -> Scene:
    return parse_scene(TWO_POINTS_1D)


@pytest.fixture
def one_point() -> Scene:
    return parse_scene(ONE_POINT_1D)


@pytest.fixture(scope="session")
def line_ensemble() -> LoopEnsemble:
    """1D bisection loops refined once, so estimates are extrapolated from (M, 2M)."""
    return refinement_pair(generate(SPECTRAL_LOOPS, SPECTRAL_POINTS, 1, seed=7))


@pytest.fixture(scope="session")
def small_line_ensemble() -> LoopEnsemble:
    return refinement_pair(generate(SMALL_LOOPS, SMALL_POINTS, 1, seed=11))
