"""Command-line front end: ``casimir-worldline <command> [flags]``.

Exit codes: 0 on success, 1 on invalid input (scene, arguments, ensemble
cache, grid), 2 when a numerical procedure does not converge.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
import time
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from casimir_worldline._engine import integrate_energy, spectral_table
from casimir_worldline._exceptions import (
    ConvergenceError,
    DecayCheckError,
    EnsembleError,
    GridError,
    IntersectionUndecidableError,
    SamplingBoxUnboundedError,
    SceneError,
)
from casimir_worldline._geometry import Scene, estimate_lmin
from casimir_worldline._lab import GridConfig, decay_check, spectral_rows, subset_spectra
from casimir_worldline._loops import LoopEnsemble, generate, load_ensemble, refinement_pair, save_ensemble
from casimir_worldline._oracles import RectangleConfig, hrectangle_energy
from casimir_worldline._output import (
    read_manifest,
    write_energy_csv,
    write_lab_csv,
    write_lmin_csv,
    write_manifest,
    write_rect_csv,
    write_scatter_csv,
    write_spectral_csv,
)
from casimir_worldline._scattering import PlateStack, ScatterConfig, coincidence_scan, irreducible_energy_1d
from casimir_worldline._scene import parse_scene, scene_digest
from casimir_worldline._types import (
    DEFAULT_LOOPS,
    DEFAULT_POINTS,
    DEFAULT_SEED,
    QuadratureConfig,
    RunManifest,
    SamplerConfig,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_CONVERGENCE = 2

_COLORS = {
    logging.DEBUG: "\033[36m",
    logging.INFO: "\033[32m",
    logging.WARNING: "\033[33m",
    logging.ERROR: "\033[31m",
    logging.CRITICAL: "\033[1;31m",
}


class _LevelColorFormatter(logging.Formatter):
    def format(self, record: logging.LogRecord) -> str:
        text = super().format(record)
        color = _COLORS.get(record.levelno)
        return f"{color}{text}\033[0m" if color else text


def configure_logging(verbosity: int, stream: Any = None) -> None:
    """Attach one stderr handler to the root logger; ``-v`` gives INFO, ``-vv`` DEBUG."""
    stream = stream if stream is not None else sys.stderr
    level = logging.WARNING if verbosity <= 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    use_color = not os.environ.get("NO_COLOR") and hasattr(stream, "isatty") and stream.isatty()
    fmt = "%(levelname)s %(name)s: %(message)s"
    handler = logging.StreamHandler(stream)
    handler.setFormatter(_LevelColorFormatter(fmt) if use_color else logging.Formatter(fmt))
    root = logging.getLogger()
    for existing in list(root.handlers):
        if getattr(existing, "_casimir_worldline", False):
            root.removeHandler(existing)
    handler._casimir_worldline = True  # type: ignore[attr-defined]
    root.addHandler(handler)
    root.setLevel(level)


class _Parser(argparse.ArgumentParser):
    """Argument errors exit with the input-error code."""

    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _positive_float(text: str) -> float:
    value = float(text)
    if not (math.isfinite(value) and value > 0.0):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return value


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    from casimir_worldline import __version__

    parser = _Parser(
        prog="casimir-worldline",
        description="Irreducible N-body Casimir energies by worldline Monte Carlo, with exact oracles.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="INFO with -v, DEBUG with -vv")
    parser.add_argument("--manifest", metavar="PATH", help="re-run the command recorded in a run manifest")
    commands = parser.add_subparsers(dest="command", metavar="COMMAND")

    def monte_carlo(sub: argparse.ArgumentParser) -> None:
        sub.add_argument("scene", type=Path, help="scene file")
        sub.add_argument("--samples", type=_positive_int, default=DEFAULT_LOOPS, help="loops L")
        sub.add_argument("--points", type=_positive_int, default=DEFAULT_POINTS, help="points per loop M")
        sub.add_argument("--seed", type=int, default=DEFAULT_SEED)
        sub.add_argument("--workers", type=_positive_int, default=1)
        sub.add_argument("--basepoints", type=_positive_int, default=4, help="base points per loop")
        sub.add_argument("--padding", type=float, default=1.0, help="multiple of sqrt(beta) * max loop radius")
        sub.add_argument("--cache", type=Path, help="loop ensemble cache (read if present, else written)")
        sub.add_argument("--no-refine", action="store_true", help="skip the (M, 2M) refinement extrapolation")

    energy = commands.add_parser(
        "energy",
        help="irreducible N-body energy",
        description="Writes OUT.csv (beta, phi_tilde, stderr, n_loops, box_volume, weight), "
        "OUT.energy.csv (value, stat_error, quadrature_error, discretization_error, total_error) and OUT.json.",
    )
    monte_carlo(energy)
    energy.add_argument("--beta-min", type=_positive_float)
    energy.add_argument("--beta-max", type=_positive_float)
    energy.add_argument("--beta-nodes", type=_positive_int, default=8, help="nodes per decade of beta")
    energy.add_argument("--allow-undecidable", action="store_true", help="proceed if emptiness is undecidable")
    energy.add_argument("--out", default="energy", help="output prefix")

    spectral = commands.add_parser(
        "spectral",
        help="irreducible spectral function at given betas",
        description="Writes OUT.csv (beta, phi_tilde, stderr, n_loops, box_volume) and OUT.json.",
    )
    monte_carlo(spectral)
    spectral.add_argument("--beta", type=_positive_float, nargs="+", required=True)
    spectral.add_argument("--out", default="spectral", help="output prefix")

    rect = commands.add_parser(
        "oracle-rect",
        help="closed-form rectangle energy",
        description="Writes OUT.csv (dimension, lengths, n_max, value, tail_bound) and OUT.json.",
    )
    rect.add_argument("--dim", type=_positive_int, required=True)
    rect.add_argument("--lengths", type=_positive_float, nargs="+", required=True)
    rect.add_argument("--nmax", type=_positive_int)
    rect.add_argument("--out", default="rect", help="output prefix")

    lab = commands.add_parser(
        "lab",
        help="exact lattice spectral functions",
        description="Writes OUT.csv (beta, phi_<mask> per subset, phi_tilde) and OUT.json.",
    )
    lab.add_argument("scene", type=Path)
    lab.add_argument("--spacing", type=_positive_float, required=True)
    lab.add_argument("--beta", type=_positive_float, nargs="+", required=True)
    lab.add_argument("--decay", action="store_true", help="fit the small-beta decay and record it in the manifest")
    lab.add_argument("--workers", type=_positive_int, default=1)
    lab.add_argument("--out", default="lab", help="output prefix")

    scatter = commands.add_parser(
        "scatter1d",
        help="delta-plate scattering energy",
        description="Writes OUT.csv (positions, couplings, energy, quadrature_error) and OUT.json.",
    )
    scatter.add_argument("--positions", type=float, nargs="+", required=True)
    scatter.add_argument("--couplings", type=float, nargs="+", required=True)
    scatter.add_argument("--tolerance", type=_positive_float, default=1e-10)
    scatter.add_argument("--scan", type=_positive_int, metavar="STEPS", help="move plate 2 onto plate 1")
    scatter.add_argument("--workers", type=_positive_int, default=1)
    scatter.add_argument("--out", default="scatter", help="output prefix")

    lmin = commands.add_parser("lmin", help="shortest closed orbit touching every object")
    lmin.add_argument("scene", type=Path)
    lmin.add_argument("--out", help="also write OUT.csv (lmin, approximate)")
    return parser


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

Outcome = Tuple[Optional[str], Dict[str, Any], Dict[str, float], Dict[str, Any]]


def _load_scene(path: Path) -> Scene:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise SceneError(f"cannot read scene file {path}: {exc}") from exc
    return parse_scene(text)


def _ensemble(args: argparse.Namespace, dimension: int) -> Tuple[LoopEnsemble, bool]:
    """Loop ensemble for a Monte Carlo command and whether to extrapolate."""
    if args.cache is not None and args.cache.exists():
        ensemble = load_ensemble(args.cache)
        if ensemble.dimension != dimension:
            raise EnsembleError(f"cached ensemble has dimension {ensemble.dimension}, scene has {dimension}")
        logger.info("Loaded %d cached loops from %s.", ensemble.count, args.cache)
    else:
        ensemble = generate(args.samples, args.points, dimension, args.seed, workers=args.workers)
        if args.cache is not None:
            save_ensemble(ensemble, args.cache)
    if args.no_refine:
        return ensemble, False
    return refinement_pair(ensemble, workers=args.workers), True


def _sampler(args: argparse.Namespace) -> SamplerConfig:
    return SamplerConfig(n_basepoints=args.basepoints, padding=args.padding, workers=args.workers)


def _run_energy(args: argparse.Namespace) -> Outcome:
    scene = _load_scene(args.scene)
    ensemble, extrapolate = _ensemble(args, scene.dimension)
    quadrature = QuadratureConfig(beta_min=args.beta_min, beta_max=args.beta_max, nodes_per_decade=args.beta_nodes)
    result = integrate_energy(
        scene,
        ensemble,
        quadrature,
        _sampler(args),
        extrapolate=extrapolate,
        allow_undecidable=args.allow_undecidable,
    )
    write_spectral_csv(f"{args.out}.csv", result.spectral, [w for _, w in result.beta_grid])
    write_energy_csv(f"{args.out}.energy.csv", result)
    print(f"E = {result.value!r} +- {result.total_error!r}")
    errors = {
        "stat_error": result.stat_error,
        "quadrature_error": result.quadrature_error,
        "discretization_error": result.discretization_error,
        "total_error": result.total_error,
    }
    return scene_digest(scene), {"seed": ensemble.seed}, errors, dict(result.metadata)


def _run_spectral(args: argparse.Namespace) -> Outcome:
    scene = _load_scene(args.scene)
    ensemble, extrapolate = _ensemble(args, scene.dimension)
    estimates = spectral_table(scene, ensemble, args.beta, _sampler(args), extrapolate=extrapolate)
    write_spectral_csv(f"{args.out}.csv", estimates)
    for estimate in estimates:
        print(f"beta={estimate.beta!r} phi_tilde={estimate.value!r} +- {estimate.stderr!r}")
    return scene_digest(scene), {"seed": ensemble.seed}, {}, {"extrapolated": extrapolate}


def _run_rect(args: argparse.Namespace) -> Outcome:
    if len(args.lengths) != args.dim:
        raise ValueError(f"--lengths needs {args.dim} values, got {len(args.lengths)}")
    config = RectangleConfig(tuple(args.lengths), args.nmax)
    energy = hrectangle_energy(config)
    write_rect_csv(f"{args.out}.csv", config, energy)
    print(f"E = {energy.value!r} +- {energy.tail_bound!r}")
    return None, {}, {"tail_bound": energy.tail_bound}, {}


def _run_lab(args: argparse.Namespace) -> Outcome:
    scene = _load_scene(args.scene)
    grid = GridConfig(args.spacing)
    spectra = subset_spectra(scene, grid, workers=args.workers)
    write_lab_csv(f"{args.out}.csv", spectral_rows(scene, grid, args.beta, spectra))
    flags: Dict[str, Any] = {}
    if args.decay:
        fit = decay_check(scene, grid, args.beta, spectra)
        lmin = estimate_lmin(scene)
        flags["decay"] = {
            "slope": fit.slope,
            "expected_slope": -0.5 * lmin.length**2,
            "power_exponent": fit.power_exponent,
            "power_series_detected": fit.power_series_detected,
        }
        print(f"slope = {fit.slope!r} (expected {-0.5 * lmin.length**2!r})")
    return scene_digest(scene), {}, {}, flags


def _run_scatter(args: argparse.Namespace) -> Outcome:
    if len(args.positions) != len(args.couplings):
        raise ValueError("--positions and --couplings need the same number of values")
    stack = PlateStack(tuple(args.positions), tuple(args.couplings))
    config = ScatterConfig(args.tolerance)
    rows: List[Dict[str, Any]] = []
    if args.scan:
        for point in coincidence_scan(stack, args.scan, config, workers=args.workers):
            positions = (stack.positions[0], point.position, stack.positions[2])
            rows.append(
                {
                    "positions": positions,
                    "couplings": stack.couplings,
                    "energy": point.energy,
                    "quadrature_error": point.quadrature_error,
                }
            )
    else:
        result = irreducible_energy_1d(stack, config)
        rows.append(
            {
                "positions": stack.positions,
                "couplings": stack.couplings,
                "energy": result.energy,
                "quadrature_error": result.quadrature_error,
            }
        )
    write_scatter_csv(f"{args.out}.csv", rows)
    for row in rows:
        print(f"E = {row['energy']!r} +- {row['quadrature_error']!r}")
    return None, {}, {"quadrature_error": max(row["quadrature_error"] for row in rows)}, {}


def _run_lmin(args: argparse.Namespace) -> Outcome:
    scene = _load_scene(args.scene)
    orbit = estimate_lmin(scene)
    print(f"lmin = {orbit.length!r} ({'approximate' if orbit.approximate else 'exact'})")
    if args.out:
        write_lmin_csv(f"{args.out}.csv", orbit.length, orbit.approximate)
    return scene_digest(scene), {}, {}, {"approximate": orbit.approximate}


_COMMANDS: Dict[str, Callable[[argparse.Namespace], Outcome]] = {
    "energy": _run_energy,
    "spectral": _run_spectral,
    "oracle-rect": _run_rect,
    "lab": _run_lab,
    "scatter1d": _run_scatter,
    "lmin": _run_lmin,
}


def _parameters(args: argparse.Namespace) -> Dict[str, Any]:
    skip = {"command", "verbose", "manifest"}
    return {k: str(v) if isinstance(v, Path) else v for k, v in vars(args).items() if k not in skip}


def run(argv: Sequence[str]) -> int:
    """Parse *argv*, run the command and write its outputs; returns the exit code."""
    parser = build_parser()
    args = parser.parse_args(list(argv))
    if args.manifest:
        try:
            argv = read_manifest(args.manifest).argv
        except (OSError, ValueError, TypeError) as exc:
            print(f"casimir-worldline: error: cannot read manifest {args.manifest}: {exc}", file=sys.stderr)
            return EXIT_INPUT
        args = parser.parse_args(list(argv))
    configure_logging(args.verbose)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_INPUT

    from casimir_worldline import __version__

    started = time.perf_counter()
    try:
        scene_hash, seeds, errors, flags = _COMMANDS[args.command](args)
    except (ConvergenceError, SamplingBoxUnboundedError, DecayCheckError) as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        return EXIT_CONVERGENCE
    except (SceneError, EnsembleError, GridError, IntersectionUndecidableError, ValueError) as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        return EXIT_INPUT

    out = getattr(args, "out", None)
    if out:
        manifest = RunManifest(
            command=args.command,
            argv=tuple(argv),
            scene_hash=scene_hash,
            parameters=_parameters(args),
            seeds=seeds,
            version=__version__,
            wall_time=time.perf_counter() - started,
            errors=errors,
            flags=flags,
        )
        write_manifest(f"{out}.json", manifest)
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    return run(sys.argv[1:] if argv is None else argv)


if __name__ == "__main__":
    sys.exit(main())
