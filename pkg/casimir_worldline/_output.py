"""CSV tables and JSON run manifests."""

from __future__ import annotations

import csv
import logging
from pathlib import Path
from typing import Any, Iterable, List, Mapping, Optional, Sequence, Union

from casimir_worldline._oracles import RectangleConfig, RectangleEnergy
from casimir_worldline._types import EnergyResult, RunManifest, SpectralEstimate

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

SPECTRAL_COLUMNS = ("beta", "phi_tilde", "stderr", "n_loops", "box_volume")
ENERGY_COLUMNS = ("value", "stat_error", "quadrature_error", "discretization_error", "total_error")
RECT_COLUMNS = ("dimension", "lengths", "n_max", "value", "tail_bound")
SCATTER_COLUMNS = ("positions", "couplings", "energy", "quadrature_error")
LMIN_COLUMNS = ("lmin", "approximate")


def _cell(value: Any) -> str:
    if isinstance(value, float):
        return repr(float(value))
    if isinstance(value, (tuple, list)):
        return " ".join(_cell(v) for v in value)
    return str(value)


def write_rows(path: PathLike, columns: Sequence[str], rows: Iterable[Mapping[str, Any]]) -> None:
    """Write *rows* with a header line; floats use their shortest exact repr."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_cell(row[c]) for c in columns])
    logger.info("Wrote %s.", path)


def write_spectral_csv(
    path: PathLike, estimates: Sequence[SpectralEstimate], weights: Optional[Sequence[float]] = None
) -> None:
    columns: List[str] = list(SPECTRAL_COLUMNS)
    if weights is not None:
        columns.append("weight")
    rows = []
    for index, estimate in enumerate(estimates):
        row = {
            "beta": estimate.beta,
            "phi_tilde": estimate.value,
            "stderr": estimate.stderr,
            "n_loops": estimate.n_loops,
            "box_volume": estimate.box_volume,
        }
        if weights is not None:
            row["weight"] = float(weights[index])
        rows.append(row)
    write_rows(path, columns, rows)


def write_energy_csv(path: PathLike, result: EnergyResult) -> None:
    write_rows(
        path,
        ENERGY_COLUMNS,
        [
            {
                "value": result.value,
                "stat_error": result.stat_error,
                "quadrature_error": result.quadrature_error,
                "discretization_error": result.discretization_error,
                "total_error": result.total_error,
            }
        ],
    )


def write_lab_csv(path: PathLike, rows: Sequence[Mapping[str, float]]) -> None:
    """Rows from the lab: ``beta``, one ``phi_<mask>`` column per subset, ``phi_tilde``."""
    if not rows:
        raise ValueError("no lab rows to write")
    write_rows(path, list(rows[0]), rows)


def write_rect_csv(path: PathLike, config: RectangleConfig, energy: RectangleEnergy) -> None:
    write_rows(
        path,
        RECT_COLUMNS,
        [
            {
                "dimension": config.dimension,
                "lengths": config.lengths,
                "n_max": energy.n_max,
                "value": energy.value,
                "tail_bound": energy.tail_bound,
            }
        ],
    )


def write_scatter_csv(path: PathLike, rows: Sequence[Mapping[str, Any]]) -> None:
    write_rows(path, SCATTER_COLUMNS, rows)


def write_lmin_csv(path: PathLike, lmin: float, approximate: bool) -> None:
    write_rows(path, LMIN_COLUMNS, [{"lmin": lmin, "approximate": str(approximate).lower()}])


def write_manifest(path: PathLike, manifest: RunManifest) -> None:
    Path(path).write_text(manifest.to_json() + "\n", encoding="utf-8")
    logger.info("Wrote manifest %s.", path)


def read_manifest(path: PathLike) -> RunManifest:
    return RunManifest.from_json(Path(path).read_text(encoding="utf-8"))
