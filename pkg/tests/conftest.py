"""
Pytest configuration and fixtures.
"""
import json

import numpy as np
import pytest

from tests.helpers import build_model, deterministic_boundary
from vrlab.models.coefficients import DriftSpec, FrozenCoefficients
from vrlab.models.presets import affine_diffusion, constant_boundary, linear_drift, ramp_boundary


@pytest.fixture
def minus_l():
    """f(t, y, l) = -l."""
    return linear_drift(b=1.0)


@pytest.fixture
def zero_g():
    return affine_diffusion()


@pytest.fixture
def small_model():
    """T = 1 lattice with two steps."""
    return build_model(1.0, 2)


@pytest.fixture
def unit_model():
    """T = 1 lattice with four steps."""
    return build_model(1.0, 4)


@pytest.fixture
def short_model():
    """T = 0.25 lattice with six steps."""
    return build_model(0.25, 6)


@pytest.fixture
def square_boundary(unit_model):
    """X_t = t^2 on [0, 1]."""
    return deterministic_boundary(unit_model, lambda t: t * t, name="square")


@pytest.fixture
def ramp(unit_model):
    """X_t = min(2t, 1) on [0, 1]."""
    return ramp_boundary(unit_model, slope=2.0, cap=1.0)


@pytest.fixture
def flat(unit_model):
    return constant_boundary(unit_model, 0.7)


@pytest.fixture
def frozen(unit_model, minus_l, zero_g):
    return FrozenCoefficients(unit_model, minus_l, zero_g)


@pytest.fixture
def coupled_drift():
    """f(t, y, l) = 0.1 y - l."""
    return linear_drift(b=1.0, c=0.1)


@pytest.fixture
def coupled_diffusion():
    """g(t, y) = 0.1 y."""
    return affine_diffusion(e=0.1)


@pytest.fixture
def cubic_drift():
    """f(t, y, l) = -l^3 declared with slope band [1, 3]."""
    return DriftSpec(func=lambda t, y, l: -np.asarray(l) ** 3 + 0.0 * np.asarray(y),
                     lipschitz_y=0.0, lower_slope=1.0, upper_slope=3.0)


@pytest.fixture
def increasing_drift():
    """f(t, y, l) = +l, which is not decreasing in l."""
    return DriftSpec(func=lambda t, y, l: np.asarray(l) + 0.0 * np.asarray(y),
                     lipschitz_y=0.0, lower_slope=1.0, upper_slope=1.0)


@pytest.fixture
def write_config(tmp_path):
    """Write a scenario dict to a JSON file and return its path."""
    def _write(data, name="scenario.json"):
        path = tmp_path / name
        path.write_text(json.dumps(data), encoding="utf-8")
        return path
    return _write


@pytest.fixture
def out_dir(tmp_path):
    return tmp_path / "out"
