"""Scene geometry: shapes, interactions, and per-object loop predicates.

Shapes are closed convex sets (hyperplanes, 2D segments, solid spheres and
axis-aligned boxes).  Every predicate is vectorized over arbitrary leading
batch axes so the engine can evaluate whole loop blocks at once; the scalar
operations :func:`touches`, :func:`potential_integral` and :func:`survival`
are thin wrappers over the batched forms.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from numpy.typing import NDArray
from scipy import optimize

from casimir_worldline._exceptions import IntersectionUndecidableError, SceneError

logger = logging.getLogger(__name__)

FloatArray = NDArray[np.float64]
BoolArray = NDArray[np.bool_]

# Gaussian profiles are truncated at this many widths when sizing sampling boxes.
GAUSSIAN_REACH = 8.0

# Default resolution of the common-intersection test (length units).
INTERSECTION_RESOLUTION = 1e-7


def _vector(values: Sequence[float], name: str) -> Tuple[float, ...]:
    vec = tuple(float(v) for v in values)
    if not all(math.isfinite(v) for v in vec):
        raise SceneError(f"{name} must be finite, got {vec}")
    return vec


# ---------------------------------------------------------------------------
# Shapes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Hyperplane:
    """The set ``{x : normal . x = offset}``: a point in 1D, a line in 2D, a plane in 3D."""

    normal: Tuple[float, ...]
    offset: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "normal", _vector(self.normal, "hyperplane normal"))
        if not math.isfinite(self.offset):
            raise SceneError("hyperplane offset must be finite")
        norm = math.sqrt(sum(v * v for v in self.normal))
        if abs(norm - 1.0) > 1e-9:
            raise SceneError(f"hyperplane normal must have unit length, got |n|={norm:.12g}")

    @property
    def dimension(self) -> int:
        return len(self.normal)

    def signed_distance(self, points: FloatArray) -> FloatArray:
        return np.asarray(points @ np.asarray(self.normal) - self.offset, dtype=np.float64)

    def distance(self, points: FloatArray) -> FloatArray:
        return np.abs(self.signed_distance(points))

    def project(self, point: FloatArray) -> FloatArray:
        n = np.asarray(self.normal)
        return np.asarray(point - (point @ n - self.offset) * n, dtype=np.float64)

    def crossed(self, paths: FloatArray) -> BoolArray:
        s = self.signed_distance(paths)
        return np.asarray((s.min(axis=-1) <= 0.0) & (s.max(axis=-1) >= 0.0))

    def reach_constraints(self, pad: float) -> Tuple[FloatArray, FloatArray]:
        n = np.asarray(self.normal)
        return np.vstack([n, -n]), np.array([self.offset + pad, -self.offset + pad])

    def bounds(self) -> Tuple[FloatArray, FloatArray]:
        lo = np.full(self.dimension, -np.inf)
        hi = np.full(self.dimension, np.inf)
        axis = _axis_of(self.normal)
        if axis is not None:
            value = self.offset * self.normal[axis]
            lo[axis] = hi[axis] = value
        return lo, hi


@dataclass(frozen=True)
class Segment:
    """A closed 2D line segment."""

    start: Tuple[float, ...]
    end: Tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "start", _vector(self.start, "segment start"))
        object.__setattr__(self, "end", _vector(self.end, "segment end"))
        if len(self.start) != 2 or len(self.end) != 2:
            raise SceneError("segments are only defined in two dimensions")
        if self.start == self.end:
            raise SceneError("segment endpoints must differ")

    @property
    def dimension(self) -> int:
        return 2

    def _closest(self, points: FloatArray) -> FloatArray:
        a = np.asarray(self.start)
        ab = np.asarray(self.end) - a
        t = np.clip(((points - a) @ ab) / (ab @ ab), 0.0, 1.0)
        return np.asarray(a + t[..., None] * ab, dtype=np.float64)

    def distance(self, points: FloatArray) -> FloatArray:
        return np.asarray(np.linalg.norm(points - self._closest(points), axis=-1))

    def project(self, point: FloatArray) -> FloatArray:
        return self._closest(point)

    def crossed(self, paths: FloatArray) -> BoolArray:
        p = paths[..., :-1, :]
        q = paths[..., 1:, :]
        s0 = np.asarray(self.start)
        s1 = np.asarray(self.end)
        o1 = _cross(s1 - s0, p - s0)
        o2 = _cross(s1 - s0, q - s0)
        o3 = _cross(q - p, s0 - p)
        o4 = _cross(q - p, s1 - p)
        proper = (o1 * o2 <= 0.0) & (o3 * o4 <= 0.0)
        collinear = (o1 == 0.0) & (o2 == 0.0)
        overlap = np.ones_like(proper)
        for axis in range(2):
            lo = np.minimum(p[..., axis], q[..., axis])
            hi = np.maximum(p[..., axis], q[..., axis])
            overlap &= (lo <= max(s0[axis], s1[axis])) & (hi >= min(s0[axis], s1[axis]))
        return np.asarray((proper & (~collinear | overlap)).any(axis=-1))

    def reach_constraints(self, pad: float) -> Tuple[FloatArray, FloatArray]:
        s0 = np.asarray(self.start)
        s1 = np.asarray(self.end)
        tangent = (s1 - s0) / np.linalg.norm(s1 - s0)
        normal = np.array([-tangent[1], tangent[0]])
        c = normal @ s0
        rows = [normal, -normal, tangent, -tangent]
        rhs = [c + pad, -c + pad, tangent @ s1 + pad, -(tangent @ s0) + pad]
        return np.vstack(rows), np.array(rhs)

    def bounds(self) -> Tuple[FloatArray, FloatArray]:
        pts = np.array([self.start, self.end])
        return pts.min(axis=0), pts.max(axis=0)


@dataclass(frozen=True)
class Sphere:
    """A solid ball (an interval in 1D, a disk in 2D)."""

    center: Tuple[float, ...]
    radius: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "center", _vector(self.center, "sphere center"))
        if not (math.isfinite(self.radius) and self.radius > 0.0):
            raise SceneError(f"sphere radius must be positive, got {self.radius}")

    @property
    def dimension(self) -> int:
        return len(self.center)

    def distance(self, points: FloatArray) -> FloatArray:
        r = np.linalg.norm(points - np.asarray(self.center), axis=-1)
        return np.asarray(np.maximum(r - self.radius, 0.0))

    def project(self, point: FloatArray) -> FloatArray:
        c = np.asarray(self.center)
        offset = point - c
        r = float(np.linalg.norm(offset))
        if r <= self.radius:
            return np.asarray(point, dtype=np.float64)
        return np.asarray(c + offset * (self.radius / r), dtype=np.float64)

    def crossed(self, paths: FloatArray) -> BoolArray:
        c = np.asarray(self.center)
        p = paths[..., :-1, :]
        ab = paths[..., 1:, :] - p
        denom = np.einsum("...i,...i->...", ab, ab)
        with np.errstate(invalid="ignore", divide="ignore"):
            t = np.where(denom > 0.0, np.einsum("...i,...i->...", c - p, ab) / denom, 0.0)
        t = np.clip(t, 0.0, 1.0)
        closest = p + t[..., None] * ab
        gap = np.einsum("...i,...i->...", closest - c, closest - c)
        return np.asarray((gap <= self.radius**2).any(axis=-1))

    def reach_constraints(self, pad: float) -> Tuple[FloatArray, FloatArray]:
        c = np.asarray(self.center)
        return _box_constraints(c - self.radius - pad, c + self.radius + pad)

    def bounds(self) -> Tuple[FloatArray, FloatArray]:
        c = np.asarray(self.center)
        return c - self.radius, c + self.radius


@dataclass(frozen=True)
class Box:
    """A solid axis-aligned box ``lower <= x <= upper``."""

    lower: Tuple[float, ...]
    upper: Tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "lower", _vector(self.lower, "box lower corner"))
        object.__setattr__(self, "upper", _vector(self.upper, "box upper corner"))
        if len(self.lower) != len(self.upper):
            raise SceneError("box corners must have the same dimension")
        if any(hi <= lo for lo, hi in zip(self.lower, self.upper)):
            raise SceneError(f"box must have positive extent on every axis: {self.lower} .. {self.upper}")

    @property
    def dimension(self) -> int:
        return len(self.lower)

    @property
    def volume(self) -> float:
        return math.prod(hi - lo for lo, hi in zip(self.lower, self.upper))

    def contains(self, points: FloatArray) -> BoolArray:
        lo = np.asarray(self.lower)
        hi = np.asarray(self.upper)
        return np.asarray(((points >= lo) & (points <= hi)).all(axis=-1))

    def distance(self, points: FloatArray) -> FloatArray:
        lo = np.asarray(self.lower)
        hi = np.asarray(self.upper)
        excess = np.maximum(np.maximum(lo - points, points - hi), 0.0)
        return np.asarray(np.linalg.norm(excess, axis=-1))

    def project(self, point: FloatArray) -> FloatArray:
        return np.asarray(np.clip(point, self.lower, self.upper), dtype=np.float64)

    def crossed(self, paths: FloatArray) -> BoolArray:
        # Liang-Barsky clipping of every path segment against the box.
        lo = np.asarray(self.lower)
        hi = np.asarray(self.upper)
        p = paths[..., :-1, :]
        delta = paths[..., 1:, :] - p
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = (lo - p) / delta
            t2 = (hi - p) / delta
        still = delta == 0.0
        inside_axis = (p >= lo) & (p <= hi)
        t_near = np.where(still, np.where(inside_axis, -np.inf, np.inf), np.minimum(t1, t2))
        t_far = np.where(still, np.where(inside_axis, np.inf, -np.inf), np.maximum(t1, t2))
        enter = np.maximum(t_near.max(axis=-1), 0.0)
        leave = np.minimum(t_far.min(axis=-1), 1.0)
        return np.asarray((enter <= leave).any(axis=-1))

    def reach_constraints(self, pad: float) -> Tuple[FloatArray, FloatArray]:
        return _box_constraints(np.asarray(self.lower) - pad, np.asarray(self.upper) + pad)

    def bounds(self) -> Tuple[FloatArray, FloatArray]:
        return np.asarray(self.lower, dtype=np.float64), np.asarray(self.upper, dtype=np.float64)


Shape = Union[Hyperplane, Segment, Sphere, Box]


def _cross(u: FloatArray, v: FloatArray) -> FloatArray:
    return np.asarray(u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0])


def _box_constraints(lo: FloatArray, hi: FloatArray) -> Tuple[FloatArray, FloatArray]:
    eye = np.eye(len(lo))
    return np.vstack([eye, -eye]), np.concatenate([hi, -lo])


def _axis_of(normal: Sequence[float]) -> Optional[int]:
    nonzero = [i for i, v in enumerate(normal) if v != 0.0]
    return nonzero[0] if len(nonzero) == 1 else None


def _bounded_centre(lo: FloatArray, hi: FloatArray) -> FloatArray:
    """Midpoint of a bounding box, 0 on unbounded axes."""
    finite = np.isfinite(lo) & np.isfinite(hi)
    centre = np.zeros(len(lo))
    centre[finite] = 0.5 * (lo[finite] + hi[finite])
    return centre


# ---------------------------------------------------------------------------
# Interactions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Dirichlet:
    """Kills every loop that touches the object."""


@dataclass(frozen=True)
class SlabPotential:
    """Uniform potential of coupling ``strength`` spread over a shell of ``width`` around the shape.

    Inside the shell ``V = strength / (2 * width)``; as ``width -> 0`` this is the
    semi-transparent plate ``strength * delta`` of the mode operator.
    """

    strength: float
    width: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.strength) and self.strength >= 0.0):
            raise SceneError(f"potential strength must be nonnegative, got {self.strength}")
        if not (math.isfinite(self.width) and self.width > 0.0):
            raise SceneError(f"slab width must be positive, got {self.width}")

    @property
    def reach(self) -> float:
        return 0.5 * self.width

    def value(self, distance: FloatArray) -> FloatArray:
        return np.where(distance <= 0.5 * self.width, self.strength / (2.0 * self.width), 0.0)


@dataclass(frozen=True)
class GaussianPotential:
    """Gaussian profile ``amplitude * exp(-dist**2 / (2 width**2))`` around the shape."""

    amplitude: float
    width: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.amplitude) and self.amplitude >= 0.0):
            raise SceneError(f"potential amplitude must be nonnegative, got {self.amplitude}")
        if not (math.isfinite(self.width) and self.width > 0.0):
            raise SceneError(f"gaussian width must be positive, got {self.width}")

    @property
    def reach(self) -> float:
        return GAUSSIAN_REACH * self.width

    def value(self, distance: FloatArray) -> FloatArray:
        return np.asarray(self.amplitude * np.exp(-0.5 * (distance / self.width) ** 2))


Interaction = Union[Dirichlet, SlabPotential, GaussianPotential]


@dataclass(frozen=True)
class SceneObject:
    """One object of a scene: a shape with its interaction."""

    shape: Shape
    interaction: Interaction = field(default_factory=Dirichlet)

    @property
    def is_dirichlet(self) -> bool:
        return isinstance(self.interaction, Dirichlet)

    @property
    def reach(self) -> float:
        """Distance beyond the shape at which the interaction still acts."""
        if isinstance(self.interaction, Dirichlet):
            return 0.0
        return self.interaction.reach


@dataclass(frozen=True)
class Scene:
    """The domain ``D_empty`` with N objects embedded.

    Args:
        dimension: Spatial dimension d.
        objects: The N objects, in order.
        box: Optional finite enclosing domain.  ``None`` means all of space.
    """

    dimension: int
    objects: Tuple[SceneObject, ...]
    box: Optional[Box] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "objects", tuple(self.objects))
        if self.dimension < 1:
            raise SceneError(f"dimension must be at least 1, got {self.dimension}")
        if not self.objects:
            raise SceneError("a scene needs at least one object")
        if len(self.objects) > 30:
            raise SceneError("at most 30 objects are supported")
        for index, obj in enumerate(self.objects):
            if obj.shape.dimension != self.dimension:
                raise SceneError(
                    f"object {index + 1} has dimension {obj.shape.dimension}, scene has {self.dimension}"
                )
        if self.box is not None:
            if self.box.dimension != self.dimension:
                raise SceneError("bounding box dimension does not match the scene")
            for index, obj in enumerate(self.objects):
                if not _inside_box(obj.shape, self.box):
                    raise SceneError(f"object {index + 1} does not lie inside the bounding box")

    @property
    def count(self) -> int:
        return len(self.objects)

    def subset(self, mask: int) -> Tuple[SceneObject, ...]:
        """Objects whose indices are set in *mask* (bit i is object i)."""
        return tuple(obj for i, obj in enumerate(self.objects) if mask >> i & 1)

    def translated(self, shift: Sequence[float]) -> Scene:
        """A rigidly translated copy of the scene."""
        c = np.asarray(shift, dtype=np.float64)
        objects = tuple(SceneObject(_translate(obj.shape, c), obj.interaction) for obj in self.objects)
        box = None
        if self.box is not None:
            box = Box(tuple(np.asarray(self.box.lower) + c), tuple(np.asarray(self.box.upper) + c))
        return Scene(self.dimension, objects, box)


def _translate(shape: Shape, c: FloatArray) -> Shape:
    if isinstance(shape, Hyperplane):
        return Hyperplane(shape.normal, shape.offset + float(np.asarray(shape.normal) @ c))
    if isinstance(shape, Segment):
        return Segment(tuple(np.asarray(shape.start) + c), tuple(np.asarray(shape.end) + c))
    if isinstance(shape, Sphere):
        return Sphere(tuple(np.asarray(shape.center) + c), shape.radius)
    return Box(tuple(np.asarray(shape.lower) + c), tuple(np.asarray(shape.upper) + c))


def _inside_box(shape: Shape, box: Box) -> bool:
    if isinstance(shape, Hyperplane):
        # Hyperplanes are infinite; inside D_empty means they cut through it.
        corners = np.array(list(itertools.product(*zip(box.lower, box.upper))))
        s = shape.signed_distance(corners)
        return bool(s.min() <= 0.0 <= s.max())
    lo, hi = shape.bounds()
    return bool(np.all(lo >= np.asarray(box.lower)) and np.all(hi <= np.asarray(box.upper)))


# ---------------------------------------------------------------------------
# Loops
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DiscretizedLoop:
    """A physical loop ``base + scale * samples[k]`` with ``scale = sqrt(beta)``.

    ``samples`` holds the M+1 points of a closed unit bridge, first and last zero.
    """

    base: FloatArray
    scale: float
    samples: FloatArray

    def __post_init__(self) -> None:
        if self.samples.ndim != 2 or self.samples.shape[0] < 3:
            raise ValueError("a discretized loop needs at least M=2 segments")
        if self.scale < 0.0:
            raise ValueError("loop scale must be nonnegative")

    @property
    def beta(self) -> float:
        return self.scale**2

    @property
    def segments(self) -> int:
        return int(self.samples.shape[0] - 1)

    @property
    def points(self) -> FloatArray:
        return np.asarray(self.base + self.scale * self.samples, dtype=np.float64)


# ---------------------------------------------------------------------------
# Batched predicates
# ---------------------------------------------------------------------------


def touches_batch(obj: SceneObject, paths: FloatArray) -> BoolArray:
    """Crossing indicator for closed paths of shape ``(..., M+1, d)``."""
    return obj.shape.crossed(paths)


def potential_integral_batch(obj: SceneObject, paths: FloatArray, beta: float) -> FloatArray:
    """Trapezoidal ``int_0^beta V(x_t) dt`` for closed paths of shape ``(..., M+1, d)``."""
    if isinstance(obj.interaction, Dirichlet):
        raise ValueError("potential_integral requires a potential interaction")
    segments = paths.shape[-2] - 1
    # Closed loop: the trapezoid weights collapse to a plain sum over the first M points.
    values = obj.interaction.value(obj.shape.distance(paths[..., :-1, :]))
    return np.asarray(values.sum(axis=-1) * (beta / segments))


def survival_batch(obj: SceneObject, paths: FloatArray, beta: float) -> FloatArray:
    """Survival probability of every path against one object."""
    if isinstance(obj.interaction, Dirichlet):
        return np.where(touches_batch(obj, paths), 0.0, 1.0)
    return np.asarray(np.exp(-potential_integral_batch(obj, paths, beta)))


# ---------------------------------------------------------------------------
# Single-loop operations
# ---------------------------------------------------------------------------


def touches(obj: SceneObject, loop: DiscretizedLoop) -> bool:
    """Whether the discretized loop crosses or touches a Dirichlet object."""
    if not obj.is_dirichlet:
        raise ValueError("touches requires a Dirichlet object")
    return bool(touches_batch(obj, loop.points))


def potential_integral(obj: SceneObject, loop: DiscretizedLoop) -> float:
    """Dimensionless ``int_0^beta V(x_t) dt`` along the loop."""
    return float(potential_integral_batch(obj, loop.points, loop.beta))


def survival(obj: SceneObject, loop: DiscretizedLoop) -> float:
    """Probability that the loop survives the object, in [0, 1]."""
    return float(survival_batch(obj, loop.points, loop.beta))


# ---------------------------------------------------------------------------
# Common intersection
# ---------------------------------------------------------------------------


def _pair_gap(a: Shape, b: Shape) -> Optional[float]:
    """Exact distance between two primitives where a closed form is cheap."""
    if isinstance(a, Sphere) and isinstance(b, Sphere):
        between = math.dist(a.center, b.center)
        return max(between - a.radius - b.radius, 0.0)
    if isinstance(a, Box) and isinstance(b, Box):
        gaps = [max(lb - hb, la - ha, 0.0) for la, ha, lb, hb in zip(a.lower, a.upper, b.lower, b.upper)]
        return math.sqrt(sum(g * g for g in gaps))
    if isinstance(a, Hyperplane) and isinstance(b, Hyperplane):
        dot = sum(x * y for x, y in zip(a.normal, b.normal))
        if abs(abs(dot) - 1.0) < 1e-12:
            return abs(a.offset - math.copysign(1.0, dot) * b.offset)
        return 0.0
    if isinstance(a, Sphere) and isinstance(b, Hyperplane):
        return _pair_gap(b, a)
    if isinstance(a, Hyperplane) and isinstance(b, Sphere):
        return max(float(a.distance(np.asarray(b.center))) - b.radius, 0.0)
    return None


def _convex_residual(shapes: Sequence[Shape], dimension: int) -> Tuple[float, float]:
    """Minimize ``sum_i dist_i(x)**2`` over x.

    Returns ``(lower, upper)``: ``sqrt(min / N)`` bounds ``min_x max_i dist_i``
    from below, and the largest single distance at the minimizer bounds it
    from above.
    """
    count = len(shapes)

    def objective(x: FloatArray) -> Tuple[float, FloatArray]:
        total = 0.0
        grad = np.zeros(dimension)
        for shape in shapes:
            diff = x - shape.project(x)
            total += float(diff @ diff)
            grad += 2.0 * diff
        return total, grad

    starts = [np.zeros(dimension)]
    for shape in shapes:
        starts.append(shape.project(_bounded_centre(*shape.bounds())))
    best_value = math.inf
    best_x = starts[0]
    for start in starts:
        # Averaged projections are a descent method for this objective; they give a good start.
        x = start
        for _ in range(200):
            x = np.mean([shape.project(x) for shape in shapes], axis=0)
        result = optimize.minimize(objective, x, jac=True, method="L-BFGS-B", options={"ftol": 1e-15, "gtol": 1e-12})
        if result.fun < best_value:
            best_value = float(result.fun)
            best_x = np.asarray(result.x)
    upper = max(float(np.linalg.norm(best_x - shape.project(best_x))) for shape in shapes)
    return math.sqrt(max(best_value, 0.0) / count), upper


def verify_empty_common_intersection(scene: Scene, resolution: float = INTERSECTION_RESOLUTION) -> bool:
    """Certify that the N objects have no common point.

    N = 2 uses exact pairwise gaps where available.  Otherwise, since every
    primitive is convex with a closed-form projection, the common
    intersection is empty iff ``min_x sum_i dist_i(x)**2 > 0``; the minimum is
    located numerically and compared with *resolution*.

    Returns:
        ``True`` if the intersection is certified empty, ``False`` if a common
        point was found.

    Raises:
        IntersectionUndecidableError: If the residual lies between the two
            decision thresholds.
    """
    shapes = [obj.shape for obj in scene.objects]
    if len(shapes) == 1:
        return False
    if len(shapes) == 2:
        gap = _pair_gap(shapes[0], shapes[1])
        if gap is not None:
            if gap > resolution:
                return True
            if gap == 0.0:
                return False
            raise IntersectionUndecidableError(
                f"objects are {gap:.3g} apart, below the resolution {resolution:.3g}", residual=gap
            )
    lower, upper = _convex_residual(shapes, scene.dimension)
    logger.debug("Common-intersection residual: lower=%.3g upper=%.3g", lower, upper)
    if lower > resolution:
        return True
    if upper < 1e-3 * resolution:
        return False
    raise IntersectionUndecidableError(
        f"common-intersection residual {lower:.3g} is undecidable at resolution {resolution:.3g}",
        residual=lower,
    )


# ---------------------------------------------------------------------------
# Shortest touching orbit
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MinimalOrbit:
    """Length of the shortest closed path touching every object."""

    length: float
    approximate: bool


def _analytic_lmin(scene: Scene) -> Optional[float]:
    shapes = [obj.shape for obj in scene.objects]
    if len(shapes) == 1:
        return 0.0
    if scene.dimension == 1:
        # Intervals on a line: the path must span from the highest left end to the lowest right end.
        bounds = [shape.bounds() for shape in shapes]
        highest_low = max(float(lo[0]) for lo, _ in bounds)
        lowest_high = min(float(hi[0]) for _, hi in bounds)
        return 2.0 * max(highest_low - lowest_high, 0.0)
    if not all(isinstance(shape, Hyperplane) for shape in shapes):
        return None
    planes = [shape for shape in shapes if isinstance(shape, Hyperplane)]
    if len(planes) == 2:
        gap = _pair_gap(planes[0], planes[1])
        if gap is not None and gap > 0.0:
            return 2.0 * gap
    if len(planes) == 2 * scene.dimension:
        by_axis: dict[int, list[float]] = {}
        for plane in planes:
            axis = _axis_of(plane.normal)
            if axis is None:
                return None
            by_axis.setdefault(axis, []).append(plane.offset * plane.normal[axis])
        if sorted(by_axis) == list(range(scene.dimension)) and all(len(v) == 2 for v in by_axis.values()):
            return 2.0 * math.sqrt(sum((v[1] - v[0]) ** 2 for v in by_axis.values()))
    return None


def _tour_length(points: FloatArray) -> float:
    return float(np.linalg.norm(np.roll(points, -1, axis=0) - points, axis=1).sum())


def estimate_lmin(scene: Scene, restarts: int = 20, seed: int = 0) -> MinimalOrbit:
    """Shortest closed classical path touching every object.

    Analytic for 1D scenes, parallel hyperplane pairs and axis-aligned
    tic-tac-toe scenes.  Otherwise the tour length is minimized over one
    touch point per object (for every cyclic visiting order when N <= 7)
    from *restarts* random starts; the result is an upper bound and is
    flagged approximate.
    """
    exact = _analytic_lmin(scene)
    if exact is not None:
        return MinimalOrbit(exact, approximate=False)

    shapes = [obj.shape for obj in scene.objects]
    count = len(shapes)
    d = scene.dimension
    if count <= 7:
        orders = [(0,) + perm for perm in itertools.permutations(range(1, count)) if perm[0] < perm[-1] or count < 3]
    else:
        orders = [tuple(range(count))]

    anchors = [_bounded_centre(*shape.bounds()) for shape in shapes]
    spread = max(1.0, float(np.ptp(np.array(anchors), axis=0).max()) if count > 1 else 1.0)
    rng = np.random.default_rng(seed)

    best = math.inf
    for order in orders:
        ordered = [shapes[i] for i in order]

        def length(flat: FloatArray, ordered: list[Shape] = ordered) -> float:
            y = flat.reshape(count, d)
            return _tour_length(np.array([s.project(p) for s, p in zip(ordered, y)]))

        for _ in range(restarts):
            start = np.array([anchors[i] for i in order]) + rng.normal(scale=0.5 * spread, size=(count, d))
            start = np.array([s.project(p) for s, p in zip(ordered, start)])
            result = optimize.minimize(length, start.ravel(), method="Powell", options={"xtol": 1e-10, "ftol": 1e-13})
            best = min(best, float(result.fun))
    logger.debug("Numerical l_min over %d orders: %.10g", len(orders), best)
    return MinimalOrbit(best, approximate=True)


# ---------------------------------------------------------------------------
# Scene builders
# ---------------------------------------------------------------------------


def tictactoe_scene(lengths: Sequence[float], origin: Optional[Sequence[float]] = None) -> Scene:
    """Two Dirichlet hyperplanes per axis enclosing a hyper-rectangle (the tic-tac-toe pattern)."""
    d = len(lengths)
    corner = [0.0] * d if origin is None else [float(v) for v in origin]
    objects = []
    for axis, length in enumerate(lengths):
        normal = tuple(1.0 if i == axis else 0.0 for i in range(d))
        objects.append(SceneObject(Hyperplane(normal, corner[axis])))
        objects.append(SceneObject(Hyperplane(normal, corner[axis] + float(length))))
    return Scene(d, tuple(objects))


def simplex_scene(dimension: int, size: float = 1.0) -> Scene:
    """d+1 Dirichlet hyperplanes bounding a regular simplex of edge *size*.

    A triangle in 2D, a tetrahedral pyramid in 3D.
    """
    if dimension < 2:
        raise SceneError("simplex scenes need dimension >= 2")
    # Vertices of a regular simplex: standard basis of R^(d+1) projected onto the hyperplane sum = 0.
    basis = np.eye(dimension + 1) - 1.0 / (dimension + 1)
    frame = np.linalg.svd(basis)[2][:dimension]
    vertices = basis @ frame.T
    vertices *= size / np.linalg.norm(vertices[0] - vertices[1])
    centroid = vertices.mean(axis=0)
    objects = []
    for k in range(dimension + 1):
        face = np.delete(vertices, k, axis=0)
        normal = np.linalg.svd(face[1:] - face[0])[2][-1]
        offset = float(normal @ face[0])
        if normal @ centroid > offset:
            normal, offset = -normal, -offset
        objects.append(SceneObject(Hyperplane(tuple(normal / np.linalg.norm(normal)), offset)))
    return Scene(dimension, tuple(objects))
