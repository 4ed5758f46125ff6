"""Tests for the command-line front end."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import pytest

from casimir_worldline import __version__
from casimir_worldline._cli import EXIT_CONVERGENCE, EXIT_INPUT, EXIT_OK, main
from tests.conftest import BOXED_POINT_1D, BOXED_POINTS_1D, ONE_POINT_1D, PI_OVER_24, TWO_POINTS_1D

FAST_MC = ["--samples", "256", "--points", "16"]


def _scene(tmp_path: Path, text: str, name: str = "scene.txt") -> str:
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


def _rows(path: Path) -> list:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def _manifest(path: Path) -> dict:
    return json.loads(path.read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# Oracles
# ---------------------------------------------------------------------------


def test_oracle_rect(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    out = tmp_path / "rect"
    assert main(["oracle-rect", "--dim", "1", "--lengths", "1", "--out", str(out)]) == EXIT_OK
    assert capsys.readouterr().out.startswith("E = ")
    (row,) = _rows(tmp_path / "rect.csv")
    assert float(row["value"]) == pytest.approx(-PI_OVER_24, abs=1e-9)
    manifest = _manifest(tmp_path / "rect.json")
    assert manifest["command"] == "oracle-rect"
    assert manifest["scene_hash"] is None
    assert manifest["version"] == __version__
    assert manifest["parameters"]["dim"] == 1
    assert manifest["errors"]["tail_bound"] < 1e-9


def test_oracle_rect_length_count(tmp_path: Path) -> None:
    args = ["oracle-rect", "--dim", "2", "--lengths", "1", "--out", str(tmp_path / "rect")]
    assert main(args) == EXIT_INPUT
    assert not (tmp_path / "rect.json").exists()


def test_scatter1d(tmp_path: Path) -> None:
    out = tmp_path / "scatter"
    args = ["scatter1d", "--positions", "0", "1", "--couplings", "1e9", "1e9", "--out", str(out)]
    assert main(args) == EXIT_OK
    (row,) = _rows(tmp_path / "scatter.csv")
    assert row["positions"] == "0.0 1.0"
    assert float(row["energy"]) == pytest.approx(-PI_OVER_24, rel=1e-6)


def test_scatter1d_scan(tmp_path: Path) -> None:
    out = tmp_path / "scan"
    args = ["scatter1d", "--positions", "0", "1", "2", "--couplings", "5", "5", "5", "--scan", "2", "--out", str(out)]
    assert main(args) == EXIT_OK
    rows = _rows(tmp_path / "scan.csv")
    assert [r["positions"] for r in rows] == ["0.0 1.0 2.0", "0.0 0.5 2.0", "0.0 0.0 2.0"]
    assert all(math.isfinite(float(r["energy"])) for r in rows)


def test_scatter1d_mismatched_values(tmp_path: Path) -> None:
    args = ["scatter1d", "--positions", "0", "1", "--couplings", "1", "--out", str(tmp_path / "s")]
    assert main(args) == EXIT_INPUT


# ---------------------------------------------------------------------------
# Scene commands
# ---------------------------------------------------------------------------


def test_lmin(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    scene = _scene(tmp_path, TWO_POINTS_1D)
    assert main(["lmin", scene, "--out", str(tmp_path / "lmin")]) == EXIT_OK
    assert "lmin = 2.0 (exact)" in capsys.readouterr().out
    assert _rows(tmp_path / "lmin.csv") == [{"lmin": "2.0", "approximate": "false"}]
    assert len(_manifest(tmp_path / "lmin.json")["scene_hash"]) == 64


def test_missing_scene_file(tmp_path: Path) -> None:
    assert main(["lmin", str(tmp_path / "absent.txt")]) == EXIT_INPUT


def test_invalid_scene_file(tmp_path: Path) -> None:
    scene = _scene(tmp_path, "dimension = 1\n[object]\nshape = cube 1\n")
    assert main(["lmin", scene]) == EXIT_INPUT


def test_lab_with_decay(tmp_path: Path) -> None:
    scene = _scene(tmp_path, BOXED_POINTS_1D)
    out = tmp_path / "lab"
    args = ["lab", scene, "--spacing", "0.005", "--beta", "0.01", "0.02", "0.03", "0.04", "--decay", "--out", str(out)]
    assert main(args) == EXIT_OK
    rows = _rows(tmp_path / "lab.csv")
    assert list(rows[0]) == ["beta", "phi_00", "phi_01", "phi_10", "phi_11", "phi_tilde"]
    decay = _manifest(tmp_path / "lab.json")["flags"]["decay"]
    assert decay["expected_slope"] == pytest.approx(-0.18)
    assert decay["slope"] == pytest.approx(-0.18, rel=0.2)
    assert decay["power_series_detected"] is False


def test_lab_decay_of_single_point_does_not_converge(tmp_path: Path) -> None:
    scene = _scene(tmp_path, BOXED_POINT_1D)
    args = ["lab", scene, "--spacing", "0.01", "--beta", "0.01", "0.02", "0.03", "0.04", "--decay"]
    assert main([*args, "--out", str(tmp_path / "lab")]) == EXIT_CONVERGENCE


def test_lab_grid_error(tmp_path: Path) -> None:
    scene = _scene(tmp_path, BOXED_POINT_1D)
    assert main(["lab", scene, "--spacing", "0.3", "--beta", "0.1", "--out", str(tmp_path / "lab")]) == EXIT_INPUT


def test_spectral(tmp_path: Path) -> None:
    scene = _scene(tmp_path, TWO_POINTS_1D)
    out = tmp_path / "spectral"
    assert main(["spectral", scene, *FAST_MC, "--beta", "0.5", "2", "--out", str(out)]) == EXIT_OK
    rows = _rows(tmp_path / "spectral.csv")
    assert [float(r["beta"]) for r in rows] == [0.5, 2.0]
    assert all(int(r["n_loops"]) == 256 for r in rows)
    manifest = _manifest(tmp_path / "spectral.json")
    assert manifest["seeds"] == {"seed": 0}
    assert manifest["flags"] == {"extrapolated": True}
    assert manifest["parameters"]["samples"] == 256


def test_spectral_uses_loop_cache(tmp_path: Path) -> None:
    scene = _scene(tmp_path, TWO_POINTS_1D)
    cache = tmp_path / "loops.bin"
    common = ["spectral", scene, *FAST_MC, "--beta", "1", "--cache", str(cache)]
    assert main([*common, "--out", str(tmp_path / "first")]) == EXIT_OK
    assert cache.exists()
    assert main([*common, "--out", str(tmp_path / "second")]) == EXIT_OK
    assert _rows(tmp_path / "first.csv") == _rows(tmp_path / "second.csv")


def test_spectral_unbounded_kill_region(tmp_path: Path) -> None:
    scene = _scene(tmp_path, "dimension = 2\n[object]\nshape = plane 0 1 0\n[object]\nshape = plane 0 1 1\n")
    assert main(["spectral", scene, *FAST_MC, "--beta", "1", "--out", str(tmp_path / "s")]) == EXIT_CONVERGENCE


def test_energy_rejects_single_object(tmp_path: Path) -> None:
    scene = _scene(tmp_path, ONE_POINT_1D)
    assert main(["energy", scene, *FAST_MC, "--out", str(tmp_path / "energy")]) == EXIT_INPUT


# ---------------------------------------------------------------------------
# Front end
# ---------------------------------------------------------------------------


def test_manifest_replays_the_run(tmp_path: Path) -> None:
    out = tmp_path / "rect"
    assert main(["oracle-rect", "--dim", "2", "--lengths", "1", "2", "--nmax", "64", "--out", str(out)]) == EXIT_OK
    first = _rows(tmp_path / "rect.csv")
    (tmp_path / "rect.csv").unlink()
    assert main(["--manifest", str(tmp_path / "rect.json")]) == EXIT_OK
    assert _rows(tmp_path / "rect.csv") == first


def test_unreadable_manifest(tmp_path: Path) -> None:
    bad = tmp_path / "bad.json"
    bad.write_text("not json", encoding="utf-8")
    assert main(["--manifest", str(bad)]) == EXIT_INPUT


def test_version(capsys: pytest.CaptureFixture[str]) -> None:
    with pytest.raises(SystemExit) as info:
        main(["--version"])
    assert info.value.code == 0
    assert capsys.readouterr().out.strip() == f"casimir-worldline {__version__}"


def test_argument_errors_exit_with_input_code() -> None:
    with pytest.raises(SystemExit) as info:
        main(["oracle-rect", "--dim", "1"])
    assert info.value.code == EXIT_INPUT


def test_no_command() -> None:
    assert main([]) == EXIT_INPUT


def test_verbose_logs_written_files(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    assert main(["-v", "oracle-rect", "--dim", "1", "--lengths", "2", "--out", str(tmp_path / "r")]) == EXIT_OK
    assert "INFO casimir_worldline._output: Wrote" in capsys.readouterr().err
