"""Tests for environment-driven settings."""
import pytest

from anisolab.config import Settings


def test_settings_read_the_prefixed_environment(monkeypatch):
    monkeypatch.setenv("ANISOLAB_TOLERANCE_C", "0.25")
    monkeypatch.setenv("ANISOLAB_RADIAL_GRID_POINTS", "4001")
    fresh = Settings()
    assert fresh.tolerance_c == pytest.approx(0.25)
    assert fresh.radial_grid_points == 4001


def test_settings_use_the_v2_configuration():
    assert Settings.model_config["env_prefix"] == "ANISOLAB_"
    assert Settings.model_config["env_file"] == ".env"
    assert "Config" not in vars(Settings)


def test_worker_count_is_at_least_one(monkeypatch):
    monkeypatch.setenv("ANISOLAB_THREADS", "0")
    assert Settings().worker_count == 1
