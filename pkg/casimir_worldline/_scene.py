"""Plain-text scene files.

A scene file is a list of ``key = value`` lines.  ``#`` starts a comment.
The header sets the dimension and, optionally, the enclosing box; each
``[object]`` line opens a new object::

    dimension = 1
    box = -5 5            # lo1 hi1 [lo2 hi2 ...]

    [object]
    shape = plane 1 0     # normal components, then offset
    interaction = dirichlet

    [object]
    shape = plane 1 1
    interaction = potential 20 0.01   # slab: coupling, thickness
    profile = gaussian                # optional: amplitude and sigma instead

Shapes: ``plane n_1 .. n_d offset``, ``segment x1 y1 x2 y2``, ``sphere c_1 ..
c_d radius`` and ``box lo1 hi1 .. lod hid``.  Plane normals that are not of
unit length are normalized together with the offset.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from casimir_worldline._exceptions import SceneError, SceneParseError
from casimir_worldline._geometry import (
    Box,
    Dirichlet,
    GaussianPotential,
    Hyperplane,
    Interaction,
    Scene,
    SceneObject,
    Segment,
    Shape,
    SlabPotential,
    Sphere,
)

DEFAULT_SLAB_WIDTH = 0.01

_HEADER_KEYS = {"dimension", "box"}
_OBJECT_KEYS = {"shape", "interaction", "profile"}


@dataclass
class _Block:
    line: int
    entries: Dict[str, Tuple[str, int]] = field(default_factory=dict)


def _reals(text: str, line: int, what: str) -> List[float]:
    try:
        values = [float(token) for token in text.split()]
    except ValueError as exc:
        raise SceneParseError(f"{what} expects real numbers, got '{text}'", line) from exc
    if not all(math.isfinite(v) for v in values):
        raise SceneParseError(f"{what} values must be finite", line)
    return values


def _head(text: str) -> Tuple[str, str]:
    parts = text.split(None, 1)
    if not parts:
        return "", ""
    return parts[0], parts[1] if len(parts) == 2 else ""


def _pairs(values: List[float]) -> Tuple[Tuple[float, ...], Tuple[float, ...]]:
    return tuple(values[0::2]), tuple(values[1::2])


def _shape(text: str, dimension: int, line: int) -> Shape:
    kind, rest = _head(text)
    expected = {
        "plane": dimension + 1,
        "segment": 4,
        "sphere": dimension + 1,
        "box": 2 * dimension,
    }
    if kind not in expected:
        raise SceneParseError(f"unknown shape '{kind}'; expected plane, segment, sphere or box", line)
    values = _reals(rest, line, f"shape '{kind}'")
    if kind == "segment" and dimension != 2:
        raise SceneParseError(f"segments need dimension 2, scene has dimension {dimension}", line)
    if len(values) != expected[kind]:
        raise SceneParseError(
            f"shape '{kind}' in dimension {dimension} takes {expected[kind]} numbers, got {len(values)}", line
        )
    try:
        if kind == "plane":
            normal, offset = values[:-1], values[-1]
            norm = math.sqrt(sum(v * v for v in normal))
            if norm == 0.0:
                raise SceneParseError("plane normal must be nonzero", line)
            if abs(norm - 1.0) > 1e-12:
                normal, offset = [v / norm for v in normal], offset / norm
            return Hyperplane(tuple(normal), offset)
        if kind == "segment":
            return Segment(tuple(values[:2]), tuple(values[2:]))
        if kind == "sphere":
            return Sphere(tuple(values[:-1]), values[-1])
        return Box(*_pairs(values))
    except SceneParseError:
        raise
    except SceneError as exc:
        raise SceneParseError(str(exc), line) from exc


def _interaction(text: str, profile: Optional[str], line: int) -> Interaction:
    kind, rest = _head(text)
    if kind == "dirichlet":
        if rest.strip() or profile is not None:
            raise SceneParseError("dirichlet takes no parameters or profile", line)
        return Dirichlet()
    if kind != "potential":
        raise SceneParseError(f"unknown interaction '{kind}'; expected dirichlet or potential", line)
    values = _reals(rest, line, "potential")
    if len(values) not in (1, 2):
        raise SceneParseError("potential takes a strength and an optional width", line)
    width = values[1] if len(values) == 2 else DEFAULT_SLAB_WIDTH
    try:
        if profile in (None, "slab"):
            return SlabPotential(values[0], width)
        if profile == "gaussian":
            return GaussianPotential(values[0], width)
    except SceneError as exc:
        raise SceneParseError(str(exc), line) from exc
    raise SceneParseError(f"unknown profile '{profile}'; expected slab or gaussian", line)


def parse_scene(text: str) -> Scene:
    """Parse a scene file.

    Raises:
        SceneParseError: On any schema violation; the message names the line.
    """
    header: Dict[str, Tuple[str, int]] = {}
    blocks: List[_Block] = []
    for number, raw in enumerate(text.splitlines(), start=1):
        content = raw.split("#", 1)[0].strip()
        if not content:
            continue
        if content.startswith("["):
            if content != "[object]":
                raise SceneParseError(f"unknown section '{content}'", number)
            blocks.append(_Block(number))
            continue
        key, sep, value = content.partition("=")
        key = key.strip()
        if not sep or not key:
            raise SceneParseError(f"expected 'key = value', got '{content}'", number)
        allowed, target = (_OBJECT_KEYS, blocks[-1].entries) if blocks else (_HEADER_KEYS, header)
        if key not in allowed:
            raise SceneParseError(f"unknown key '{key}'", number)
        if key in target:
            raise SceneParseError(f"duplicate key '{key}'", number)
        target[key] = (value.strip(), number)

    if "dimension" not in header:
        raise SceneParseError("missing 'dimension'")
    dim_text, dim_line = header["dimension"]
    try:
        dimension = int(dim_text)
    except ValueError as exc:
        raise SceneParseError(f"dimension must be an integer, got '{dim_text}'", dim_line) from exc
    if dimension < 1:
        raise SceneParseError("dimension must be at least 1", dim_line)

    box = None
    if "box" in header:
        box_text, box_line = header["box"]
        values = _reals(box_text, box_line, "box")
        if len(values) != 2 * dimension:
            raise SceneParseError(f"box needs {2 * dimension} numbers, got {len(values)}", box_line)
        try:
            box = Box(*_pairs(values))
        except SceneError as exc:
            raise SceneParseError(str(exc), box_line) from exc

    objects = []
    for block in blocks:
        if "shape" not in block.entries:
            raise SceneParseError("object has no 'shape'", block.line)
        shape_text, shape_line = block.entries["shape"]
        shape = _shape(shape_text, dimension, shape_line)
        interaction: Interaction = Dirichlet()
        profile = block.entries.get("profile")
        if "interaction" in block.entries:
            inter_text, inter_line = block.entries["interaction"]
            interaction = _interaction(inter_text, None if profile is None else profile[0], inter_line)
        elif profile is not None:
            raise SceneParseError("'profile' needs a potential interaction", profile[1])
        objects.append(SceneObject(shape, interaction))
    if not objects:
        raise SceneParseError("scene has no objects")
    try:
        return Scene(dimension, tuple(objects), box)
    except SceneError as exc:
        raise SceneParseError(str(exc)) from exc


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------


def _numbers(values: Tuple[float, ...]) -> str:
    return " ".join(repr(float(v)) for v in values)


def _render_shape(shape: Shape) -> str:
    if isinstance(shape, Hyperplane):
        return f"plane {_numbers(shape.normal + (shape.offset,))}"
    if isinstance(shape, Segment):
        return f"segment {_numbers(shape.start + shape.end)}"
    if isinstance(shape, Sphere):
        return f"sphere {_numbers(shape.center + (shape.radius,))}"
    return f"box {_numbers(tuple(v for pair in zip(shape.lower, shape.upper) for v in pair))}"


def render_scene(scene: Scene) -> str:
    """Canonical text of *scene*; :func:`parse_scene` inverts it exactly."""
    lines = [f"dimension = {scene.dimension}"]
    if scene.box is not None:
        lines.append(f"box = {_numbers(tuple(v for pair in zip(scene.box.lower, scene.box.upper) for v in pair))}")
    for obj in scene.objects:
        lines += ["", "[object]", f"shape = {_render_shape(obj.shape)}"]
        interaction = obj.interaction
        if isinstance(interaction, Dirichlet):
            lines.append("interaction = dirichlet")
        elif isinstance(interaction, SlabPotential):
            lines.append(f"interaction = potential {_numbers((interaction.strength, interaction.width))}")
        else:
            lines.append(f"interaction = potential {_numbers((interaction.amplitude, interaction.width))}")
            lines.append("profile = gaussian")
    return "\n".join(lines) + "\n"


def scene_digest(scene: Scene) -> str:
    """SHA-256 of the canonical scene text."""
    return hashlib.sha256(render_scene(scene).encode("utf-8")).hexdigest()
