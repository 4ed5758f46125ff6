"""Exact spectral functions of small lattice domains.

Every subset domain ``D_s`` is realized on a uniform grid over the scene box
with Dirichlet outer walls: Dirichlet objects delete the nodes within half a
spacing of their shape, potentials add ``2 V`` to the diagonal.  The stored
eigenvalues are those of ``-Laplacian + 2 V``, so the spectral function is
``sum_n exp(-beta lambda_n / 2)`` in the Brownian convention.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import NDArray
from scipy import linalg, sparse, special

from casimir_worldline._combinatorics import irreducible_sum, mobius_irreducible, popcount, subsets
from casimir_worldline._exceptions import DecayCheckError, GridError
from casimir_worldline._geometry import Scene
from casimir_worldline._runner import BlockRunner

logger = logging.getLogger(__name__)

FloatArray = NDArray[np.float64]

MAX_LAB_OBJECTS = 12

# Share of the fitted expansion carried by the highest fitted order above which a fit is unreliable.
NEXT_ORDER_LIMIT = 0.1


@dataclass(frozen=True)
class GridConfig:
    """Lattice used by the lab.

    Args:
        spacing: Grid spacing h; the scene box must be a whole number of
            spacings along every axis.
        max_nodes: Largest interior grid accepted.
        max_dense_bytes: Memory allowed for the dense eigenproblem of a 2D
            grid; larger problems raise before allocating.
    """

    spacing: float
    max_nodes: int = 40_000
    max_dense_bytes: int = 2 * 1024**3

    def __post_init__(self) -> None:
        if not (math.isfinite(self.spacing) and self.spacing > 0.0):
            raise GridError(f"grid spacing must be positive, got {self.spacing}")
        if self.max_nodes < 1:
            raise GridError("max_nodes must be positive")
        if self.max_dense_bytes < 1:
            raise GridError("max_dense_bytes must be positive")


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Eigenvalues of one subset domain on the lattice.

    ``kept`` flags the interior nodes that survive Dirichlet deletion, in C
    order over ``shape``; ``vectors`` (when requested) holds orthonormal
    eigenvectors on the kept nodes, one per column.
    """

    eigenvalues: FloatArray
    spacing: float
    subset: int
    lower: Tuple[float, ...]
    shape: Tuple[int, ...]
    kept: NDArray[np.bool_]
    vectors: Optional[FloatArray] = None

    @property
    def dimension(self) -> int:
        return len(self.shape)

    def node(self, point: Sequence[float]) -> int:
        """Flat index of the grid node nearest to *point*."""
        p = np.asarray(point, dtype=np.float64)
        if p.shape != (self.dimension,):
            raise GridError(f"point must have dimension {self.dimension}")
        index = np.rint((p - np.asarray(self.lower)) / self.spacing).astype(int) - 1
        if np.any(index < 0) or np.any(index >= np.asarray(self.shape)):
            raise GridError(f"point {p.tolist()} is not an interior grid node")
        return int(np.ravel_multi_index(tuple(index), self.shape))


def _grid(scene: Scene, grid: GridConfig) -> Tuple[FloatArray, Tuple[int, ...], FloatArray]:
    """Interior node coordinates ``(nodes, d)``, grid shape and box lower corner."""
    if scene.dimension > 2:
        raise GridError(f"the lab supports dimensions 1 and 2, got {scene.dimension}")
    if scene.box is None:
        raise GridError("the lab needs a finite scene box")
    lower = np.asarray(scene.box.lower)
    cells = (np.asarray(scene.box.upper) - lower) / grid.spacing
    if np.any(np.abs(cells - np.rint(cells)) > 1e-8 * np.maximum(cells, 1.0)):
        raise GridError(f"box sides are not multiples of the spacing {grid.spacing}")
    shape = tuple(int(round(c)) - 1 for c in cells)
    if min(shape) < 1:
        raise GridError("grid has no interior nodes")
    total = math.prod(shape)
    if total > grid.max_nodes:
        raise GridError(f"grid of {total} nodes exceeds max_nodes={grid.max_nodes}")
    axes = [lower[i] + grid.spacing * np.arange(1, n + 1) for i, n in enumerate(shape)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1), shape, lower


def _second_difference(n: int, h: float) -> sparse.csr_matrix:
    return sparse.diags([-np.ones(n - 1), 2.0 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1]) / h**2


def build_spectrum(scene: Scene, grid: GridConfig, subset: Optional[int] = None, *, vectors: bool = False) -> Spectrum:
    """Lattice spectrum of ``D_s`` for the objects in *subset* (default: all).

    Raises:
        GridError: If the grid is unsupported or too large, or an eigenvalue is not positive.
    """
    mask = (1 << scene.count) - 1 if subset is None else subset
    nodes, shape, lower = _grid(scene, grid)
    h = grid.spacing
    kept = np.ones(len(nodes), dtype=bool)
    potential = np.zeros(len(nodes))
    for obj in scene.subset(mask):
        distance = obj.shape.distance(nodes)
        if obj.is_dirichlet:
            kept &= distance > 0.5 * h
        else:
            potential += obj.interaction.value(distance)  # type: ignore[union-attr]
    index = np.flatnonzero(kept)
    if index.size == 0:
        raise GridError(f"subset {mask:#b} deletes every grid node")

    if len(shape) == 1:
        diagonal = 2.0 / h**2 + 2.0 * potential[index]
        off = np.where(np.diff(index) == 1, -1.0 / h**2, 0.0)
        if vectors:
            values, vecs = linalg.eigh_tridiagonal(diagonal, off)
        else:
            values, vecs = linalg.eigh_tridiagonal(diagonal, off, eigvals_only=True), None
    else:
        ex, ey = sparse.identity(shape[0]), sparse.identity(shape[1])
        operator = sparse.kron(_second_difference(shape[0], h), ey) + sparse.kron(ex, _second_difference(shape[1], h))
        # The matrix, the solver workspace and the eigenvectors are each n**2 doubles.
        needed = 8 * index.size**2 * (3 if vectors else 2)
        if needed > grid.max_dense_bytes:
            raise GridError(
                f"dense eigenproblem on {index.size} nodes needs about {needed / 1024**3:.1f} GiB, "
                f"above max_dense_bytes={grid.max_dense_bytes}"
            )
        operator = (operator + sparse.diags(2.0 * potential)).tocsr()[index][:, index]
        dense = operator.toarray()
        if vectors:
            values, vecs = linalg.eigh(dense)
        else:
            values, vecs = linalg.eigh(dense, eigvals_only=True), None
    if values[0] <= 0.0:
        raise GridError(f"non-positive eigenvalue {values[0]:.3g} for subset {mask:#b}")
    logger.debug("Subset %#b: %d nodes, lowest eigenvalue %.6g.", mask, index.size, values[0])
    return Spectrum(
        eigenvalues=np.asarray(values),
        spacing=h,
        subset=mask,
        lower=tuple(float(v) for v in lower),
        shape=shape,
        kept=kept,
        vectors=None if vecs is None else np.asarray(vecs),
    )


def spectral_function(spectrum: Spectrum, beta: float) -> float:
    """``sum_n exp(-beta lambda_n / 2)``."""
    if beta <= 0.0:
        raise ValueError("beta must be positive")
    return float(np.exp(-0.5 * beta * spectrum.eigenvalues).sum())


def subset_spectra(scene: Scene, grid: GridConfig, *, workers: int = 1, vectors: bool = False) -> Dict[int, Spectrum]:
    """Spectra of all ``2**N`` subset domains, keyed by bitmask."""
    if scene.count > MAX_LAB_OBJECTS:
        raise ValueError(f"the lab handles at most {MAX_LAB_OBJECTS} objects, got {scene.count}")
    masks = list(subsets(scene.count))
    spectra = BlockRunner(workers).map(lambda mask: build_spectrum(scene, grid, mask, vectors=vectors), masks)
    return dict(zip(masks, spectra))


def _spectra(scene: Scene, grid: GridConfig, spectra: Optional[Mapping[int, Spectrum]]) -> Mapping[int, Spectrum]:
    return spectra if spectra is not None else subset_spectra(scene, grid)


def irreducible_spectral_exact(
    scene: Scene, grid: GridConfig, beta: float, spectra: Optional[Mapping[int, Spectrum]] = None
) -> float:
    """``sum_s (-1)**(N-|s|) phi_s(beta)`` over all subset domains on the lattice."""
    spectra = _spectra(scene, grid, spectra)
    values = {mask: spectral_function(spectrum, beta) for mask, spectrum in spectra.items()}
    return float(irreducible_sum(scene.count, values))


def irreducible_decomposition(
    scene: Scene, grid: GridConfig, beta: float, spectra: Optional[Mapping[int, Spectrum]] = None
) -> Dict[int, float]:
    """Irreducible k-body spectral function of every subset of objects.

    The entry for the full mask equals :func:`irreducible_spectral_exact`;
    the entry for the empty mask is ``phi_empty``.
    """
    spectra = _spectra(scene, grid, spectra)
    values = {mask: spectral_function(spectrum, beta) for mask, spectrum in spectra.items()}
    return {mask: float(v) for mask, v in mobius_irreducible(scene.count, values).items()}


# ---------------------------------------------------------------------------
# Decay of the irreducible spectral function
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DecayFit:
    """Fits of ``ln|phi_tilde|`` against ``1/beta`` and against ``ln beta``.

    ``slope`` estimates ``-l_min**2 / 2`` when the decay is exponential;
    ``power_series_detected`` is set when the power law fits better or the
    slope is not negative.
    """

    slope: float
    intercept: float
    power_exponent: float
    exponential_residual: float
    power_residual: float
    power_series_detected: bool
    betas: Tuple[float, ...]
    values: Tuple[float, ...]


def _linear_fit(x: FloatArray, y: FloatArray) -> Tuple[float, float, float]:
    coeffs, residual, _, _ = np.linalg.lstsq(np.vstack([x, np.ones_like(x)]).T, y, rcond=None)
    rms = math.sqrt(float(residual[0]) / len(x)) if residual.size else 0.0
    return float(coeffs[0]), float(coeffs[1]), rms


def decay_check(
    scene: Scene,
    grid: GridConfig,
    betas: Sequence[float],
    spectra: Optional[Mapping[int, Spectrum]] = None,
) -> DecayFit:
    """Fit the small-beta decay of the exact irreducible spectral function.

    Raises:
        ValueError: If fewer than four betas are given.
        DecayCheckError: If N = 1 or the values underflow.
    """
    if len(betas) < 4:
        raise ValueError("decay_check needs at least four beta values")
    if scene.count == 1:
        raise DecayCheckError(
            "a single object has no common-intersection suppression; phi_tilde tends to a constant",
            reason="no common-intersection suppression for N=1 point object",
        )
    spectra = _spectra(scene, grid, spectra)
    b = np.sort(np.asarray(betas, dtype=np.float64))
    values = np.array([irreducible_spectral_exact(scene, grid, beta, spectra) for beta in b])
    usable = values != 0.0
    if usable.sum() < 3:
        raise DecayCheckError("irreducible spectral function underflows in the beta window", reason="underflow")
    logs = np.log(np.abs(values[usable]))
    slope, intercept, exp_rms = _linear_fit(1.0 / b[usable], logs)
    power, _, power_rms = _linear_fit(np.log(b[usable]), logs)
    detected = slope >= 0.0 or power_rms < exp_rms
    if detected:
        logger.warning("Irreducible spectral function shows a nonvanishing power series (slope %.3g).", slope)
    return DecayFit(
        slope=slope,
        intercept=intercept,
        power_exponent=power,
        exponential_residual=exp_rms,
        power_residual=power_rms,
        power_series_detected=detected,
        betas=tuple(float(v) for v in b),
        values=tuple(float(v) for v in values),
    )


# ---------------------------------------------------------------------------
# Heat kernel
# ---------------------------------------------------------------------------


def kernel(spectrum: Spectrum, x: Sequence[float], y: Sequence[float], beta: float) -> float:
    """Heat kernel ``K(x, y; beta)`` by eigenfunction expansion (density per unit volume)."""
    if spectrum.vectors is None:
        raise ValueError("kernel needs a spectrum built with vectors=True")
    i, j = spectrum.node(x), spectrum.node(y)
    if not (spectrum.kept[i] and spectrum.kept[j]):
        return 0.0
    position = np.cumsum(spectrum.kept) - 1
    weights = np.exp(-0.5 * beta * spectrum.eigenvalues)
    value = float((spectrum.vectors[position[i]] * spectrum.vectors[position[j]] * weights).sum())
    return value / spectrum.spacing**spectrum.dimension


def free_lattice_kernel(spectrum: Spectrum, x: Sequence[float], y: Sequence[float], beta: float) -> float:
    """Kernel of the unbounded lattice: ``prod_i exp(-z) I_{n_i}(z) / h`` with ``z = beta / h**2``.

    It dominates every killed kernel on the same lattice and tends to
    ``(2 pi beta)**(-d/2) exp(-|x-y|**2 / (2 beta))`` as ``h -> 0``.
    """
    h = spectrum.spacing
    steps = np.rint((np.asarray(x, dtype=np.float64) - np.asarray(y, dtype=np.float64)) / h)
    return float(np.prod(special.ive(np.abs(steps), beta / h**2) / h))


def kernel_bound_check(
    scene: Scene,
    grid: GridConfig,
    samples: Sequence[Tuple[Sequence[float], Sequence[float], float]],
    subset: Optional[int] = None,
    *,
    slack: float = 1e-10,
) -> bool:
    """Check ``0 <= K(x, y; beta) <= K_free(x, y; beta)`` at every ``(x, y, beta)`` sample."""
    spectrum = build_spectrum(scene, grid, subset, vectors=True)
    ok = True
    for x, y, beta in samples:
        value = kernel(spectrum, x, y, beta)
        bound = free_lattice_kernel(spectrum, x, y, beta)
        if not -slack <= value <= bound + slack:
            logger.warning("Kernel bound violated at x=%s y=%s beta=%.4g: %.6g > %.6g.", x, y, beta, value, bound)
            ok = False
    return ok


@dataclass(frozen=True)
class HeatKernelFit:
    """Leading small-beta coefficients of a spectral function.

    ``phi(beta) ~ volume (2 pi beta)**(-d/2) + boundary (2 pi beta)**(-(d-1)/2)
    + next_order (2 pi beta)**(-(d-2)/2)`` over ``window``.
    """

    volume: float
    boundary: float
    next_order: float
    window: Tuple[float, float]
    residual: float
    next_order_share: float

    @property
    def reliable(self) -> bool:
        return self.next_order_share < NEXT_ORDER_LIMIT


def fit_heat_kernel(spectrum: Spectrum, window: Tuple[float, float], nodes: int = 12) -> HeatKernelFit:
    """Least-squares fit of the three leading heat-kernel orders over a log-spaced window."""
    lo, hi = window
    if not 0.0 < lo < hi:
        raise ValueError("window must satisfy 0 < lo < hi")
    betas = np.geomspace(lo, hi, nodes)
    phi = np.array([spectral_function(spectrum, b) for b in betas])
    d = spectrum.dimension
    basis = np.stack([(2.0 * math.pi * betas) ** (-0.5 * (d - k)) for k in range(3)], axis=1)
    # Weight by 1/phi so every node counts with its relative error.
    coeffs, *_ = np.linalg.lstsq(basis / phi[:, None], np.ones_like(phi), rcond=None)
    model = basis @ coeffs
    share = float(np.max(np.abs(coeffs[2] * basis[:, 2]) / np.abs(model)))
    fit = HeatKernelFit(
        volume=float(coeffs[0]),
        boundary=float(coeffs[1]),
        next_order=float(coeffs[2]),
        window=(float(lo), float(hi)),
        residual=float(np.sqrt(np.mean((model / phi - 1.0) ** 2))),
        next_order_share=share,
    )
    if not fit.reliable:
        logger.warning("Heat-kernel fit over [%.3g, %.3g] leans on the next order (%.0f%%).", lo, hi, 100 * share)
    return fit


def leading_coefficient_differences(
    scene: Scene,
    grid: GridConfig,
    window: Tuple[float, float],
    spectra: Optional[Mapping[int, Spectrum]] = None,
) -> Dict[int, Tuple[float, float]]:
    """Reduced ``(volume, boundary)`` coefficients of every subset.

    The coefficients fitted on each subset domain are split into irreducible
    parts; the part of a set of disjoint objects vanishes up to fit error.
    """
    spectra = _spectra(scene, grid, spectra)
    fits = {mask: fit_heat_kernel(spectrum, window) for mask, spectrum in spectra.items()}
    volume = mobius_irreducible(scene.count, {m: f.volume for m, f in fits.items()})
    boundary = mobius_irreducible(scene.count, {m: f.boundary for m, f in fits.items()})
    return {mask: (float(volume[mask]), float(boundary[mask])) for mask in fits}


def spectral_rows(
    scene: Scene, grid: GridConfig, betas: Sequence[float], spectra: Optional[Mapping[int, Spectrum]] = None
) -> List[Dict[str, float]]:
    """Rows of ``beta``, ``phi_<mask>`` per subset and ``phi_tilde`` for CSV output."""
    spectra = _spectra(scene, grid, spectra)
    width = max(scene.count, 1)
    rows = []
    for beta in betas:
        values = {mask: spectral_function(spectrum, beta) for mask, spectrum in spectra.items()}
        row: Dict[str, float] = {"beta": float(beta)}
        for mask in sorted(values, key=lambda m: (popcount(m), m)):
            row[f"phi_{mask:0{width}b}"] = values[mask]
        row["phi_tilde"] = float(irreducible_sum(scene.count, values))
        rows.append(row)
    return rows
