"""Config module tests: env overrides and clamping."""

import importlib

import pytest

from lib import config

_KEYS = ("CSTREE_THREADS", "CSTREE_PERMUTATION_LIMIT", "CSTREE_TARGET_BUDGET",
         "CSTREE_DIRICHLET_ALPHA", "CSTREE_SEED", "LOG_LEVEL")


@pytest.fixture
def reload_config(monkeypatch):
    def _reload(**env):
        for key in _KEYS:
            monkeypatch.delenv(key, raising=False)
        for key, value in env.items():
            monkeypatch.setenv(key, value)
        return importlib.reload(config)
    yield _reload
    for key in _KEYS:
        monkeypatch.delenv(key, raising=False)
    importlib.reload(config)


def test_env_overrides(reload_config):
    cfg = reload_config(CSTREE_THREADS="3", CSTREE_SEED="42", LOG_LEVEL="debug")
    assert cfg.CSTREE_THREADS == 3
    assert cfg.CSTREE_SEED == 42
    assert cfg.LOG_LEVEL == "DEBUG"


def test_values_are_clamped(reload_config):
    cfg = reload_config(CSTREE_THREADS="0", CSTREE_PERMUTATION_LIMIT="50", CSTREE_TARGET_BUDGET="-5")
    assert cfg.CSTREE_THREADS == 1
    assert cfg.CSTREE_PERMUTATION_LIMIT == 10
    assert cfg.CSTREE_TARGET_BUDGET == 1
    assert "CSTREE_PERMUTATION_LIMIT=50 -> 10" in cfg._clamped


def test_non_positive_alpha_falls_back(reload_config):
    cfg = reload_config(CSTREE_DIRICHLET_ALPHA="0")
    assert cfg.CSTREE_DIRICHLET_ALPHA == 1.0


def test_defaults(reload_config):
    cfg = reload_config()
    assert cfg.CSTREE_PERMUTATION_LIMIT == 8
    assert cfg.CSTREE_TARGET_BUDGET == 2**15
    assert cfg._clamped == []
