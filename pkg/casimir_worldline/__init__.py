"""casimir-worldline: irreducible N-body Casimir energies from worldline Monte Carlo."""

from casimir_worldline._combinatorics import (
    SubsetIndex,
    astot_sum,
    irreducible_sum,
    kill_probability,
    loopcont_sum,
    mobius_irreducible,
    mobius_total,
    signed_weight,
)
from casimir_worldline._engine import (
    estimate_kill_probability,
    estimate_spectral,
    integrate_energy,
    jackknife,
    sampling_box,
    spectral_table,
)
from casimir_worldline._exceptions import (
    ConvergenceError,
    DecayCheckError,
    EnsembleError,
    GridError,
    IntegrandCancellationError,
    IntersectionUndecidableError,
    QuadratureError,
    SamplingBoxUnboundedError,
    SceneError,
    SceneParseError,
    TailNotConvergedError,
    WorldlineError,
)
from casimir_worldline._geometry import (
    Box,
    Dirichlet,
    DiscretizedLoop,
    GaussianPotential,
    Hyperplane,
    MinimalOrbit,
    Scene,
    SceneObject,
    Segment,
    SlabPotential,
    Sphere,
    estimate_lmin,
    potential_integral,
    simplex_scene,
    survival,
    tictactoe_scene,
    touches,
    verify_empty_common_intersection,
)
from casimir_worldline._lab import (
    DecayFit,
    GridConfig,
    HeatKernelFit,
    Spectrum,
    build_spectrum,
    decay_check,
    fit_heat_kernel,
    irreducible_decomposition,
    irreducible_spectral_exact,
    kernel,
    kernel_bound_check,
    leading_coefficient_differences,
    spectral_function,
    subset_spectra,
)
from casimir_worldline._loops import (
    LoopEnsemble,
    Scheme,
    generate,
    load_ensemble,
    physical_loop,
    refinement_pair,
    save_ensemble,
)
from casimir_worldline._oracles import (
    CollapseCheck,
    RectangleConfig,
    RectangleEnergy,
    collapse_limit_check,
    hrectangle_energy,
)
from casimir_worldline._runner import BlockRunner
from casimir_worldline._scattering import (
    PlateStack,
    ScanPoint,
    ScatterConfig,
    ScatterResult,
    coincidence_scan,
    irreducible_energy_1d,
    subset_logdet,
    two_body_energy_1d,
    x_factor,
)
from casimir_worldline._scene import parse_scene, render_scene, scene_digest
from casimir_worldline._types import (
    EnergyResult,
    QuadratureConfig,
    RunManifest,
    SamplerConfig,
    SpectralEstimate,
)

__version__ = "0.1.0"

__all__ = [
    # Scenes
    "Scene",
    "SceneObject",
    "Hyperplane",
    "Segment",
    "Sphere",
    "Box",
    "Dirichlet",
    "SlabPotential",
    "GaussianPotential",
    "DiscretizedLoop",
    "MinimalOrbit",
    "touches",
    "potential_integral",
    "survival",
    "verify_empty_common_intersection",
    "estimate_lmin",
    "tictactoe_scene",
    "simplex_scene",
    "parse_scene",
    "render_scene",
    "scene_digest",
    # Loops
    "LoopEnsemble",
    "Scheme",
    "generate",
    "refinement_pair",
    "physical_loop",
    "save_ensemble",
    "load_ensemble",
    "BlockRunner",
    # Combinatorics
    "SubsetIndex",
    "signed_weight",
    "astot_sum",
    "loopcont_sum",
    "kill_probability",
    "irreducible_sum",
    "mobius_irreducible",
    "mobius_total",
    # Engine
    "SamplerConfig",
    "QuadratureConfig",
    "SpectralEstimate",
    "EnergyResult",
    "RunManifest",
    "jackknife",
    "sampling_box",
    "estimate_kill_probability",
    "estimate_spectral",
    "spectral_table",
    "integrate_energy",
    # Lab
    "GridConfig",
    "Spectrum",
    "DecayFit",
    "HeatKernelFit",
    "build_spectrum",
    "spectral_function",
    "subset_spectra",
    "irreducible_spectral_exact",
    "irreducible_decomposition",
    "decay_check",
    "kernel",
    "kernel_bound_check",
    "fit_heat_kernel",
    "leading_coefficient_differences",
    # Oracles
    "RectangleConfig",
    "RectangleEnergy",
    "CollapseCheck",
    "hrectangle_energy",
    "collapse_limit_check",
    # Scattering
    "PlateStack",
    "ScatterConfig",
    "ScatterResult",
    "ScanPoint",
    "subset_logdet",
    "irreducible_energy_1d",
    "coincidence_scan",
    "x_factor",
    "two_body_energy_1d",
    # Errors
    "WorldlineError",
    "SceneError",
    "SceneParseError",
    "IntersectionUndecidableError",
    "EnsembleError",
    "SamplingBoxUnboundedError",
    "ConvergenceError",
    "TailNotConvergedError",
    "IntegrandCancellationError",
    "QuadratureError",
    "GridError",
    "DecayCheckError",
]
