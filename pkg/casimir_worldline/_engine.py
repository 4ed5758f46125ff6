"""Worldline estimator of the irreducible spectral function and energy.

A loop based at x contributes to the irreducible N-body spectral function
only if it stays inside ``D_empty`` and is killed by every object.  The
estimator samples base points uniformly in a box that contains every x from
which some ensemble loop can reach all objects, scales the shared unit loops
by ``sqrt(beta)``, and averages ``prod_i (1 - s_i)`` per loop.  Errors come
from a grouped jackknife over loops, because the same loops are reused for
every base point and every beta.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import NDArray
from scipy import optimize

from casimir_worldline._exceptions import (
    IntersectionUndecidableError,
    SamplingBoxUnboundedError,
    SceneError,
    TailNotConvergedError,
)
from casimir_worldline._geometry import (
    Hyperplane,
    Scene,
    SceneObject,
    estimate_lmin,
    survival_batch,
    verify_empty_common_intersection,
)
from casimir_worldline._loops import LoopEnsemble, Scheme, basepoint_draws
from casimir_worldline._runner import BlockRunner
from casimir_worldline._types import EnergyResult, QuadratureConfig, SamplerConfig, SpectralEstimate

logger = logging.getLogger(__name__)

FloatArray = NDArray[np.float64]

# Crossing probabilities of a path monitored at M points converge like M**-1/2.
_RICHARDSON = 1.0 / (math.sqrt(2.0) - 1.0)

_ENERGY_PREFACTOR = -1.0 / math.sqrt(8.0 * math.pi)

SamplingBox = Optional[Tuple[FloatArray, FloatArray]]


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------


def jackknife(values: FloatArray, groups: int = 50) -> Tuple[float, float]:
    """Mean and grouped-jackknife standard error of per-loop values."""
    values = np.asarray(values, dtype=np.float64)
    n = values.size
    mean = float(values.mean())
    if n < 2:
        return mean, math.inf
    parts = np.array_split(values, min(groups, n))
    sums = np.array([part.sum() for part in parts])
    sizes = np.array([part.size for part in parts], dtype=np.float64)
    leave_out = (sums.sum() - sums) / (n - sizes)
    g = len(parts)
    stderr = math.sqrt((g - 1) / g * float(((leave_out - leave_out.mean()) ** 2).sum()))
    return mean, stderr


def sampling_box(scene: Scene, beta: float, max_radius: float, padding: float = 1.0) -> SamplingBox:
    """Bounding box of all base points from which a loop can reach every object.

    Each object contributes the linear constraints of its shape widened by
    ``padding * sqrt(beta) * max_radius`` plus its interaction reach; the box
    is found by one linear program per axis and direction.

    Returns:
        ``(lower, upper)``, or ``None`` when no base point can reach all objects.

    Raises:
        SamplingBoxUnboundedError: If the reach region is unbounded.
    """
    reach = padding * math.sqrt(beta) * max_radius
    rows: List[FloatArray] = []
    rhs: List[FloatArray] = []
    for obj in scene.objects:
        a, b = obj.shape.reach_constraints(reach + obj.reach)
        rows.append(a)
        rhs.append(b)
    if scene.box is not None:
        eye = np.eye(scene.dimension)
        rows.append(np.vstack([eye, -eye]))
        rhs.append(np.concatenate([np.asarray(scene.box.upper), -np.asarray(scene.box.lower)]))
    a_ub = np.vstack(rows)
    b_ub = np.concatenate(rhs)
    lower = np.empty(scene.dimension)
    upper = np.empty(scene.dimension)
    for axis in range(scene.dimension):
        for sign, out in ((1.0, lower), (-1.0, upper)):
            cost = np.zeros(scene.dimension)
            cost[axis] = sign
            result = optimize.linprog(cost, A_ub=a_ub, b_ub=b_ub, bounds=(None, None), method="highs")
            if result.status == 2:
                return None
            if result.status == 3:
                raise SamplingBoxUnboundedError(
                    f"kill region is unbounded along axis {axis}; the objects do not confine loops in that direction"
                )
            if result.status != 0:
                raise SamplingBoxUnboundedError(f"sampling-box linear program failed: {result.message}")
            out[axis] = result.x[axis]
    return lower, upper


def _strides(ensemble: LoopEnsemble, extrapolate: bool) -> Tuple[int, ...]:
    if extrapolate and ensemble.scheme is Scheme.BISECTION and ensemble.points % 2 == 0 and ensemble.points >= 4:
        return (1, 2)
    return (1,)


def _has_dirichlet(scene: Scene) -> bool:
    return any(obj.is_dirichlet for obj in scene.objects)


def _combine(per_loop: FloatArray, scene: Scene) -> FloatArray:
    """Per-loop estimate from ``(..., strides)`` values: fine, or extrapolated from (M/2, M).

    The fine and coarse columns lie in [0, 1].  The extrapolated value adds
    the missed-crossing correction and may exceed 1 for a single loop; only
    its mean estimates a probability.  When the Dirichlet objects are
    hyperplanes and the scene has no box, the coarse column never exceeds the
    fine one, so the correction is nonnegative and keeps the sign.
    """
    if per_loop.shape[-1] == 1 or not _has_dirichlet(scene):
        return np.asarray(per_loop[..., 0])
    fine = per_loop[..., 0]
    return np.asarray(fine + (fine - per_loop[..., 1]) * _RICHARDSON)


# ---------------------------------------------------------------------------
# Block evaluation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Batch:
    scene: Scene
    ensemble: LoopEnsemble
    draws: FloatArray
    betas: Tuple[float, ...]
    boxes: Tuple[SamplingBox, ...]
    strides: Tuple[int, ...]


def _is_plane_wall(obj: SceneObject) -> bool:
    return obj.is_dirichlet and isinstance(obj.shape, Hyperplane)


def _evaluate_block(batch: _Batch, start: int, stop: int) -> FloatArray:
    """Mean kill probability per loop: shape ``(loops, betas, strides)``.

    When the scene has Dirichlet objects, potential factors always come from
    the full loop, so the coarse column differs from the fine one by missed
    crossings alone.  Pure-potential scenes evaluate every stride in full.
    """
    scene = batch.scene
    planes = [obj for obj in scene.objects if _is_plane_wall(obj)]
    walls = [obj for obj in scene.objects if obj.is_dirichlet and not _is_plane_wall(obj)]
    potentials = [obj for obj in scene.objects if not obj.is_dirichlet]
    draws = batch.draws[start:stop]
    full = np.asarray(batch.ensemble.unit_loops[start:stop])
    out = np.zeros((stop - start, len(batch.betas), len(batch.strides)))
    shared = len(potentials) < scene.count
    weights: Dict[Tuple[int, int], FloatArray] = {}

    def potential_weight(bi: int, si: int, x: FloatArray, root: float, beta: float) -> FloatArray:
        key = (bi, 0 if shared else si)
        if key not in weights:
            loops = full if shared else full[:, :: batch.strides[si]]
            paths = x[:, :, None, :] + root * loops[:, None, :, :]
            weight = np.ones(x.shape[:2])
            for obj in potentials:
                weight *= 1.0 - survival_batch(obj, paths, beta)
            weights[key] = weight
        return weights[key]

    for si, stride in enumerate(batch.strides):
        unit = full[:, ::stride]
        # Dirichlet hyperplanes only need the extent of each loop along the normal.
        extents = []
        for obj in planes:
            assert isinstance(obj.shape, Hyperplane)
            along = unit @ np.asarray(obj.shape.normal)
            extents.append((obj.shape, along.min(axis=1)[:, None], along.max(axis=1)[:, None]))
        if scene.box is not None:
            unit_lo = unit.min(axis=1)[:, None, :]
            unit_hi = unit.max(axis=1)[:, None, :]
        for bi, (beta, box) in enumerate(zip(batch.betas, batch.boxes)):
            if box is None:
                continue
            root = math.sqrt(beta)
            x = box[0] + (box[1] - box[0]) * draws
            kill = np.ones(x.shape[:2])
            for plane, lo, hi in extents:
                d0 = plane.signed_distance(x)
                kill *= (d0 + root * lo <= 0.0) & (d0 + root * hi >= 0.0)
            if scene.box is not None:
                inside = (x + root * unit_lo >= np.asarray(scene.box.lower)) & (
                    x + root * unit_hi <= np.asarray(scene.box.upper)
                )
                kill *= inside.all(axis=-1)
            if walls and kill.any():
                paths = x[:, :, None, :] + root * unit[:, None, :, :]
                for obj in walls:
                    kill *= 1.0 - survival_batch(obj, paths, beta)
            if potentials and kill.any():
                kill *= potential_weight(bi, si, x, root, beta)
            out[:, bi, si] = kill.mean(axis=1)
    return out


def _evaluate(batch: _Batch, sampler: SamplerConfig) -> FloatArray:
    count = batch.ensemble.count
    starts = list(range(0, count, sampler.block_size))
    blocks = BlockRunner(sampler.workers).map(
        lambda start: _evaluate_block(batch, start, min(start + sampler.block_size, count)), starts
    )
    return np.concatenate(blocks, axis=0)


# ---------------------------------------------------------------------------
# Public operations
# ---------------------------------------------------------------------------


def estimate_kill_probability(
    scene: Scene,
    ensemble: LoopEnsemble,
    x: Sequence[float],
    beta: float,
    *,
    extrapolate: bool = True,
    sampler: SamplerConfig = SamplerConfig(),
) -> Tuple[float, float]:
    """Probability that a loop based at *x* stays in ``D_empty`` and is killed by every object.

    With a bisection ensemble of even M the estimate is extrapolated from the
    (M/2, M) pair when the scene has Dirichlet objects.

    Returns:
        ``(mean, stderr)`` over the ensemble.
    """
    point = np.asarray(x, dtype=np.float64)
    if point.shape != (scene.dimension,):
        raise ValueError(f"base point must have dimension {scene.dimension}")
    batch = _Batch(
        scene=scene,
        ensemble=ensemble,
        draws=np.zeros((ensemble.count, 1, scene.dimension)),
        betas=(float(beta),),
        boxes=((point, point),),
        strides=_strides(ensemble, extrapolate),
    )
    per_loop = _combine(_evaluate(batch, sampler)[:, 0, :], scene)
    return jackknife(per_loop, sampler.jackknife_groups)


def spectral_table(
    scene: Scene,
    ensemble: LoopEnsemble,
    betas: Sequence[float],
    sampler: SamplerConfig = SamplerConfig(),
    *,
    extrapolate: bool = True,
    lmin: Optional[float] = None,
) -> List[SpectralEstimate]:
    """Irreducible spectral function at every beta, sharing loops and base points."""
    estimates, _, _ = _spectral_rows(scene, ensemble, betas, sampler, extrapolate, lmin)
    return estimates


def estimate_spectral(
    scene: Scene,
    ensemble: LoopEnsemble,
    beta: float,
    sampler: SamplerConfig = SamplerConfig(),
    *,
    extrapolate: bool = True,
) -> SpectralEstimate:
    """Irreducible N-body spectral function at one beta.

    ``value = (-1)**N (2 pi beta)**(-d/2) Vol(box) <kill probability>``.

    Raises:
        SamplingBoxUnboundedError: If the kill region does not localize.
    """
    return spectral_table(scene, ensemble, [beta], sampler, extrapolate=extrapolate)[0]


def _spectral_rows(
    scene: Scene,
    ensemble: LoopEnsemble,
    betas: Sequence[float],
    sampler: SamplerConfig,
    extrapolate: bool,
    lmin: Optional[float],
) -> Tuple[List[SpectralEstimate], FloatArray, FloatArray]:
    """Estimates plus the per-loop contributions ``(loops, betas, strides)`` and per-beta factors."""
    if ensemble.dimension != scene.dimension:
        raise SceneError(f"ensemble dimension {ensemble.dimension} does not match scene dimension {scene.dimension}")
    if any(beta <= 0.0 for beta in betas):
        raise ValueError("beta must be positive")
    radius = ensemble.max_radius
    boxes = tuple(sampling_box(scene, beta, radius, sampler.padding) for beta in betas)
    batch = _Batch(
        scene=scene,
        ensemble=ensemble,
        draws=basepoint_draws(ensemble.seed, ensemble.count, sampler.n_basepoints, scene.dimension),
        betas=tuple(float(b) for b in betas),
        boxes=boxes,
        strides=_strides(ensemble, extrapolate),
    )
    per_loop = _evaluate(batch, sampler)
    sign = -1.0 if scene.count % 2 else 1.0
    factors = np.empty(len(betas))
    estimates = []
    for j, (beta, box) in enumerate(zip(batch.betas, boxes)):
        lower, upper = box if box is not None else (np.zeros(scene.dimension), np.zeros(scene.dimension))
        volume = float(np.prod(upper - lower))
        factors[j] = sign * (2.0 * math.pi * beta) ** (-0.5 * scene.dimension) * volume
        mean, stderr = jackknife(factors[j] * _combine(per_loop[:, j, :], scene), sampler.jackknife_groups)
        disc = 0.0
        if per_loop.shape[2] == 2:
            disc = abs(factors[j]) * abs(float(per_loop[:, j, 0].mean() - per_loop[:, j, 1].mean()))
        if lmin is not None and lmin > 0.0:
            raw, raw_err = jackknife(per_loop[:, j, 0], sampler.jackknife_groups)
            if raw > math.exp(-(lmin**2) / (2.0 * beta)) + 3.0 * raw_err:
                logger.warning(
                    "Kill probability %.3g at beta=%.4g exceeds the orbit bound %.3g.",
                    raw,
                    beta,
                    math.exp(-(lmin**2) / (2.0 * beta)),
                )
        estimate = SpectralEstimate(
            beta=beta,
            value=0.0 if box is None else mean,
            stderr=0.0 if box is None else stderr,
            n_loops=ensemble.count,
            n_basepoints=sampler.n_basepoints,
            box_lower=tuple(float(v) for v in lower),
            box_upper=tuple(float(v) for v in upper),
            discretization_error=disc,
        )
        if not estimate.sign_consistent(scene.count):
            logger.warning("Spectral estimate at beta=%.4g has the wrong sign: %.4g +- %.2g", beta, mean, stderr)
        logger.debug("beta=%.5g phi_tilde=%.6g +- %.2g (box volume %.4g)", beta, mean, stderr, volume)
        estimates.append(estimate)
    return estimates, per_loop, factors


# ---------------------------------------------------------------------------
# Energy
# ---------------------------------------------------------------------------


def _trapezoid_weights(betas: FloatArray) -> FloatArray:
    u = np.log(betas)
    weights = np.zeros_like(u)
    steps = np.diff(u)
    weights[:-1] += 0.5 * steps
    weights[1:] += 0.5 * steps
    return weights


def _tail(betas: FloatArray, integrand: FloatArray, per_decade: int) -> Tuple[float, float, float]:
    """Power-law fit of the last decade: ``(tail integral, its uncertainty, decay exponent)``."""

    def fit(points: int) -> Tuple[float, float]:
        b = betas[-points:]
        g = integrand[-points:]
        keep = g != 0.0
        if keep.sum() < 2 or np.any(np.sign(g[keep]) != np.sign(g[keep][-1])):
            return 0.0, 0.0
        slope, intercept = np.polyfit(np.log(b[keep]), np.log(np.abs(g[keep])), 1)
        return float(-slope), float(np.sign(g[keep][-1]) * math.exp(intercept + slope * math.log(betas[-1])))

    exponent, at_end = fit(per_decade + 1)
    if at_end == 0.0:
        return 0.0, 0.0, math.inf
    if exponent <= 0.05:
        raise TailNotConvergedError(
            f"large-beta integrand does not decay (fitted exponent {exponent:.3g})", exponent=exponent
        )
    tail = at_end / exponent
    short_exponent, short_end = fit(max(per_decade // 2 + 1, 2))
    short = short_end / short_exponent if short_exponent > 0.05 else tail
    return tail, abs(tail - short), exponent


def _check_intersection(scene: Scene, allow_undecidable: bool) -> Dict[str, bool]:
    try:
        empty = verify_empty_common_intersection(scene)
    except IntersectionUndecidableError as exc:
        if not allow_undecidable:
            raise
        logger.warning("Proceeding although the common intersection is undecidable: %s", exc)
        return {"intersection_undecidable": True}
    if not empty:
        raise SceneError("the objects have a common intersection; the irreducible energy is not finite")
    return {"intersection_undecidable": False}


def integrate_energy(
    scene: Scene,
    ensemble: LoopEnsemble,
    quadrature: QuadratureConfig = QuadratureConfig(),
    sampler: SamplerConfig = SamplerConfig(),
    *,
    extrapolate: bool = True,
    allow_undecidable: bool = False,
) -> EnergyResult:
    """Irreducible N-body Casimir energy ``-(8 pi)**-1/2 int phi_tilde(beta) beta**-3/2 dbeta``.

    The integral is a trapezoidal rule in ``ln beta`` on a log grid.  The
    upper end is extended by decades until the last decade contributes less
    than ``quadrature.tail_tolerance``; the remainder is added from a
    power-law fit.

    Raises:
        SceneError: If the objects share a common point.
        IntersectionUndecidableError: If emptiness cannot be decided and
            *allow_undecidable* is false.
        TailNotConvergedError: If the large-beta integrand does not decay.
    """
    flags: Dict[str, object] = dict(_check_intersection(scene, allow_undecidable))
    orbit = estimate_lmin(scene)
    if orbit.length <= 0.0:
        raise SceneError("shortest touching orbit has zero length; the irreducible energy is not finite")
    lmin = orbit.length
    beta_min = quadrature.beta_min or lmin**2 / (2.0 * math.log(1.0 / quadrature.floor_ratio))
    beta_max = quadrature.beta_max or 100.0 * lmin**2
    per_decade = quadrature.nodes_per_decade
    nodes = max(int(math.ceil(math.log10(beta_max / beta_min) * per_decade)) + 1, 3)
    betas = np.geomspace(beta_min, beta_max, nodes)
    logger.info("Energy grid: %d nodes on [%.4g, %.4g], l_min=%.6g%s.", nodes, beta_min, beta_max, lmin,
                " (approximate)" if orbit.approximate else "")

    estimates, per_loop, factors = _spectral_rows(scene, ensemble, betas, sampler, extrapolate, lmin)
    extra = 0
    while quadrature.beta_max is None:
        means = np.array([e.value for e in estimates])
        integrand = means / np.sqrt(betas)
        weights = _trapezoid_weights(betas)
        total = float((weights * integrand).sum())
        last = betas >= betas[-1] / 10.0
        share = abs(float((weights[last] * integrand[last]).sum())) / max(abs(total), 1e-300)
        if share < quadrature.tail_tolerance:
            break
        if extra == quadrature.max_extra_decades:
            logger.warning("Last decade still contributes %.2g%% after %d extensions.", 100 * share, extra)
            break
        extra += 1
        new = np.geomspace(betas[-1], 10.0 * betas[-1], per_decade + 1)[1:]
        more, more_loops, more_factors = _spectral_rows(scene, ensemble, new, sampler, extrapolate, lmin)
        betas = np.concatenate([betas, new])
        estimates += more
        per_loop = np.concatenate([per_loop, more_loops], axis=1)
        factors = np.concatenate([factors, more_factors])
        logger.debug("Extended beta_max to %.4g (last-decade share %.3g).", betas[-1], share)

    weights = _trapezoid_weights(betas)
    coefficient = _ENERGY_PREFACTOR * weights * factors / np.sqrt(betas)
    means = np.array([e.value for e in estimates])
    integrand = means / np.sqrt(betas)
    tail, tail_uncertainty, exponent = _tail(betas, integrand, per_decade)

    per_loop_energy = _combine(per_loop, scene) @ coefficient
    value, stat_error = jackknife(per_loop_energy, sampler.jackknife_groups)
    value += _ENERGY_PREFACTOR * tail

    discretization = 0.0
    if per_loop.shape[2] == 2:
        discretization = abs(float((per_loop[:, :, 0] @ coefficient).mean() - (per_loop[:, :, 1] @ coefficient).mean()))

    head = abs(integrand[0]) * 2.0 * beta_min / lmin**2
    half = betas[::2]
    coarse_rule = float((_trapezoid_weights(half) * integrand[::2]).sum())
    # Dropping every other node doubles the step; the trapezoid error scales with the step squared.
    trapezoid = abs(float((weights * integrand).sum()) - coarse_rule) / 3.0
    quadrature_error = abs(_ENERGY_PREFACTOR) * (head + tail_uncertainty + trapezoid)

    flags["lmin_approximate"] = orbit.approximate
    flags["extrapolated"] = per_loop.shape[2] == 2 and _has_dirichlet(scene)
    result = EnergyResult(
        value=value,
        stat_error=stat_error,
        quadrature_error=quadrature_error,
        discretization_error=discretization,
        beta_grid=tuple((float(b), float(w)) for b, w in zip(betas, weights)),
        spectral=tuple(estimates),
        metadata={
            "lmin": lmin,
            "loops": ensemble.count,
            "points": ensemble.points,
            "seed": ensemble.seed,
            "scheme": ensemble.scheme.value,
            "basepoints": sampler.n_basepoints,
            "padding": sampler.padding,
            "tail": _ENERGY_PREFACTOR * tail,
            "tail_exponent": exponent,
            "extra_decades": extra,
            **flags,
        },
    )
    if not result.sign_consistent(scene.count):
        logger.warning("Energy %.6g +- %.2g violates the sign rule for N=%d.", value, result.total_error, scene.count)
    logger.info("Irreducible %d-body energy: %.6g +- %.2g.", scene.count, value, result.total_error)
    return result
