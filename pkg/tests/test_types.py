"""Tests for configuration and result records."""

from __future__ import annotations

import json
import math

import pytest

from casimir_worldline._types import (
    EnergyResult,
    QuadratureConfig,
    RunManifest,
    SamplerConfig,
    SpectralEstimate,
)


def _estimate(value: float, stderr: float) -> SpectralEstimate:
    return SpectralEstimate(
        beta=1.0,
        value=value,
        stderr=stderr,
        n_loops=100,
        n_basepoints=4,
        box_lower=(-1.0, 0.0),
        box_upper=(1.0, 3.0),
    )


# ---------------------------------------------------------------------------
# Configs
# ---------------------------------------------------------------------------


def test_sampler_defaults() -> None:
    config = SamplerConfig()
    assert config.n_basepoints == 4
    assert config.padding == 1.0
    assert config.workers == 1


@pytest.mark.parametrize(
    "kwargs",
    [{"n_basepoints": 0}, {"padding": -0.5}, {"block_size": 0}, {"workers": 0}, {"jackknife_groups": 1}],
)
def test_sampler_rejects_invalid_values(kwargs: dict) -> None:
    with pytest.raises(ValueError):
        SamplerConfig(**kwargs)


def test_quadrature_defaults_leave_range_automatic() -> None:
    config = QuadratureConfig()
    assert config.beta_min is None
    assert config.beta_max is None
    assert config.nodes_per_decade == 8


@pytest.mark.parametrize(
    "kwargs",
    [
        {"nodes_per_decade": 1},
        {"beta_min": 0.0},
        {"beta_min": 2.0, "beta_max": 1.0},
        {"floor_ratio": 1.5},
    ],
)
def test_quadrature_rejects_invalid_values(kwargs: dict) -> None:
    with pytest.raises(ValueError):
        QuadratureConfig(**kwargs)


# ---------------------------------------------------------------------------
# Results
# ---------------------------------------------------------------------------


def test_box_volume() -> None:
    assert _estimate(0.1, 0.01).box_volume == 6.0


def test_spectral_sign_rule() -> None:
    assert _estimate(0.2, 0.01).sign_consistent(2)
    assert not _estimate(0.2, 0.01).sign_consistent(3)
    assert _estimate(-0.2, 0.01).sign_consistent(1)


def test_spectral_sign_rule_tolerates_noise() -> None:
    assert _estimate(-0.02, 0.01).sign_consistent(2)


def test_energy_total_error_adds_in_quadrature() -> None:
    result = EnergyResult(
        value=-0.13,
        stat_error=0.003,
        quadrature_error=0.004,
        discretization_error=0.0,
        beta_grid=(),
        spectral=(),
    )
    assert math.isclose(result.total_error, 0.005)


def test_energy_sign_rule() -> None:
    attractive = EnergyResult(-0.13, 0.001, 0.0, 0.0, (), ())
    assert attractive.sign_consistent(2)
    assert not attractive.sign_consistent(3)


def test_manifest_json_round_trip() -> None:
    manifest = RunManifest(
        command="energy",
        argv=("energy", "scene.txt", "--samples", "10"),
        scene_hash="ab" * 32,
        parameters={"samples": 10},
        seeds={"seed": 3},
        version="0.1.0",
        errors={"total_error": 0.01},
        flags={"extrapolated": True},
    )
    text = manifest.to_json()
    assert json.loads(text)["argv"] == ["energy", "scene.txt", "--samples", "10"]
    assert RunManifest.from_json(text) == manifest
