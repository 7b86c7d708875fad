"""Shared pytest fixtures for skeletonizer tests."""

from __future__ import annotations

import numpy as np
import pytest


@pytest.fixture
def rng():
    """Seeded generator so random tensors are the same on every run."""
    return np.random.default_rng(1234)


@pytest.fixture
def out_dir(tmp_path, monkeypatch):
    """Temporary results dir + TNS_OUTPUT_DIR env override."""
    d = tmp_path / "results"
    monkeypatch.setenv("TNS_OUTPUT_DIR", str(d))
    return d


@pytest.fixture
def rel_gap():
    """Relative gap of two LogScalar values; infinite when the signs differ."""
    import math

    def gap(a, b) -> float:
        if a.sign != b.sign:
            return math.inf
        return abs(a.log_abs - b.log_abs) / max(abs(b.log_abs), 1e-300)

    return gap
