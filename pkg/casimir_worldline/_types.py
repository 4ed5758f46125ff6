"""Result records, run configuration and constants for casimir-worldline."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, Optional, Tuple

# Engine defaults; both are overridable from the command line.
DEFAULT_LOOPS = 100_000
DEFAULT_POINTS = 4096
DEFAULT_SEED = 0

# Spectral estimates and energies are only sign-checked beyond this many standard errors.
SIGN_SIGMAS = 3.0


@dataclass(frozen=True)
class SamplerConfig:
    """How the base-point integral is sampled.

    Args:
        n_basepoints: Uniform base points drawn per loop.
        padding: Multiple of ``sqrt(beta) * max_radius`` added around every
            object when sizing the sampling box.  1 is exact for Dirichlet
            objects and slabs.
        block_size: Loops per work item.
        workers: Worker threads.
        jackknife_groups: Loop groups for the jackknife error.
    """

    n_basepoints: int = 4
    padding: float = 1.0
    block_size: int = 64
    workers: int = 1
    jackknife_groups: int = 50

    def __post_init__(self) -> None:
        if self.n_basepoints < 1:
            raise ValueError("n_basepoints must be at least 1")
        if self.padding < 0.0:
            raise ValueError("padding must be nonnegative")
        if self.block_size < 1 or self.workers < 1 or self.jackknife_groups < 2:
            raise ValueError("block_size and workers must be positive, jackknife_groups at least 2")


@dataclass(frozen=True)
class QuadratureConfig:
    """The proper-time grid of the energy integral.

    Args:
        beta_min: Lowest node.  ``None`` picks it from ``l_min`` so that the
            suppression ``exp(-l_min**2 / (2 beta_min))`` is below *floor_ratio*.
        beta_max: Highest node.  ``None`` starts at ``100 * l_min**2`` and
            extends by decades until the last decade contributes less than
            *tail_tolerance* of the total.
        nodes_per_decade: Log-spaced nodes per decade of beta.
        tail_tolerance: Relative contribution of the last decade at which
            extension stops.
        max_extra_decades: Extension limit before the tail is declared
            unconverged.
        floor_ratio: Suppression level defining the automatic ``beta_min``.
    """

    beta_min: Optional[float] = None
    beta_max: Optional[float] = None
    nodes_per_decade: int = 8
    tail_tolerance: float = 0.005
    max_extra_decades: int = 6
    floor_ratio: float = 1e-8

    def __post_init__(self) -> None:
        if self.nodes_per_decade < 2:
            raise ValueError("nodes_per_decade must be at least 2")
        if self.beta_min is not None and self.beta_min <= 0.0:
            raise ValueError("beta_min must be positive")
        if self.beta_min is not None and self.beta_max is not None and self.beta_max <= self.beta_min:
            raise ValueError("beta_max must exceed beta_min")
        if not 0.0 < self.floor_ratio < 1.0:
            raise ValueError("floor_ratio must lie in (0, 1)")


@dataclass(frozen=True)
class SpectralEstimate:
    """Monte Carlo estimate of the irreducible spectral function at one beta."""

    beta: float
    value: float
    stderr: float
    n_loops: int
    n_basepoints: int
    box_lower: Tuple[float, ...]
    box_upper: Tuple[float, ...]
    discretization_error: float = 0.0

    @property
    def box_volume(self) -> float:
        return math.prod(max(hi - lo, 0.0) for lo, hi in zip(self.box_lower, self.box_upper))

    def sign_consistent(self, count: int) -> bool:
        """Whether the sign is ``(-1)**N`` or the value is within noise of zero."""
        if abs(self.value) <= SIGN_SIGMAS * self.stderr:
            return True
        return (self.value > 0.0) == (count % 2 == 0)


@dataclass(frozen=True)
class EnergyResult:
    """Irreducible N-body Casimir energy (units 1/length, hbar = c = 1).

    ``beta_grid`` holds ``(beta, weight)`` pairs of the trapezoidal rule in
    ``ln beta``; ``spectral`` the estimate at each node.
    """

    value: float
    stat_error: float
    quadrature_error: float
    discretization_error: float
    beta_grid: Tuple[Tuple[float, float], ...]
    spectral: Tuple[SpectralEstimate, ...]
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def total_error(self) -> float:
        return math.sqrt(self.stat_error**2 + self.quadrature_error**2 + self.discretization_error**2)

    def sign_consistent(self, count: int) -> bool:
        """Whether ``(-1)**N * value < 0`` or the value is within noise of zero."""
        if abs(self.value) <= SIGN_SIGMAS * self.total_error:
            return True
        return (self.value < 0.0) == (count % 2 == 0)


@dataclass
class RunManifest:
    """Everything needed to reproduce a run at equal worker count."""

    command: str
    argv: Tuple[str, ...]
    scene_hash: Optional[str]
    parameters: Dict[str, Any]
    seeds: Dict[str, int]
    version: str
    wall_time: float = 0.0
    errors: Dict[str, float] = field(default_factory=dict)
    flags: Dict[str, Any] = field(default_factory=dict)

    def to_json(self) -> str:
        data = asdict(self)
        data["argv"] = list(self.argv)
        return json.dumps(data, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> RunManifest:
        data = json.loads(text)
        data["argv"] = tuple(data.get("argv", ()))
        return cls(**data)
