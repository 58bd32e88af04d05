"""Named coefficient and boundary presets addressable from scenario configs."""
from typing import Callable, Optional

import numpy as np

from vrlab.exceptions import ConfigError
from vrlab.models.coefficients import BoundarySpec, DiffusionSpec, DriftSpec
from vrlab.models.lattice import LatticeModel


def linear_drift(a: float = 0.0, b: float = 1.0, c: float = 0.0,
                 lipschitz_y: Optional[float] = None,
                 lower_slope: Optional[float] = None,
                 upper_slope: Optional[float] = None) -> DriftSpec:
    """f(t, y, l) = a - b*l + c*y."""
    return DriftSpec(
        func=lambda t, y, l: a - b * l + c * y,
        lipschitz_y=abs(c) if lipschitz_y is None else lipschitz_y,
        lower_slope=b if lower_slope is None else lower_slope,
        upper_slope=b if upper_slope is None else upper_slope,
        name="linear",
        params={"a": a, "b": b, "c": c},
    )


def affine_diffusion(d: float = 0.0, e: float = 0.0, lipschitz_y: Optional[float] = None) -> DiffusionSpec:
    """g(t, y) = d + e*y."""
    return DiffusionSpec(
        func=lambda t, y: d + e * y,
        lipschitz_y=abs(e) if lipschitz_y is None else lipschitz_y,
        name="affine_g",
        params={"d": d, "e": e},
    )


def constant_boundary(model: LatticeModel, value: float = 0.0) -> BoundarySpec:
    return BoundarySpec(model.field_from(lambda t, w, s: np.full(np.shape(w), value)),
                        name="constant", params={"value": value})


def ramp_boundary(model: LatticeModel, slope: float = 2.0, cap: float = 1.0) -> BoundarySpec:
    """X_t = min(slope*t, cap)."""
    return BoundarySpec(model.field_from(lambda t, w, s: np.full(np.shape(w), min(slope * t, cap))),
                        name="ramp", params={"slope": slope, "cap": cap})


def linear_boundary(model: LatticeModel, slope: float = 1.0) -> BoundarySpec:
    """X_t = slope*t."""
    return BoundarySpec(model.field_from(lambda t, w, s: np.full(np.shape(w), slope * t)),
                        name="linear", params={"slope": slope})


def convex_boundary(model: LatticeModel, scale: float = 1.0) -> BoundarySpec:
    """X_t = scale*t^2."""
    return BoundarySpec(model.field_from(lambda t, w, s: np.full(np.shape(w), scale * t * t)),
                        name="convex", params={"scale": scale})


def lattice_functional_boundary(model: LatticeModel, phi: Callable, name: str = "lattice_functional",
                                **params) -> BoundarySpec:
    """X_t = phi(t, W_t), phi vectorised over W_t."""
    return BoundarySpec(model.field_from(lambda t, w, s: phi(t, w)), name=name, params=dict(params))


def w_affine_boundary(model: LatticeModel, level: float = 1.0, drift: float = 0.0,
                      vol: float = 0.0) -> BoundarySpec:
    """X_t = level + drift*t + vol*W_t; the config-addressable lattice functional."""
    return lattice_functional_boundary(
        model, lambda t, w: level + drift * t + vol * w,
        level=level, drift=drift, vol=vol,
    )


DRIFT_PRESETS = {"linear": linear_drift}
DIFFUSION_PRESETS = {"affine_g": affine_diffusion}
BOUNDARY_PRESETS = {
    "constant": constant_boundary,
    "ramp": ramp_boundary,
    "linear": linear_boundary,
    "convex": convex_boundary,
    "lattice_functional": w_affine_boundary,
}


def make_boundary(model: LatticeModel, preset: str, **params) -> BoundarySpec:
    """Build a preset boundary; a ``shift`` parameter adds a constant to any preset."""
    shift = params.pop("shift", 0.0)
    try:
        factory = BOUNDARY_PRESETS[preset]
    except KeyError:
        raise ConfigError(f"boundary.preset: unknown preset '{preset}' (known: {sorted(BOUNDARY_PRESETS)})")
    try:
        boundary = factory(model, **params)
    except TypeError as e:
        raise ConfigError(f"boundary.params: {e}")
    return boundary.shifted(shift) if shift else boundary


def make_drift(preset: str, lipschitz_y: Optional[float] = None, lower_slope: Optional[float] = None,
               upper_slope: Optional[float] = None, **params) -> DriftSpec:
    try:
        factory = DRIFT_PRESETS[preset]
    except KeyError:
        raise ConfigError(f"coefficients.drift.preset: unknown preset '{preset}' (known: {sorted(DRIFT_PRESETS)})")
    try:
        return factory(lipschitz_y=lipschitz_y, lower_slope=lower_slope, upper_slope=upper_slope, **params)
    except TypeError as e:
        raise ConfigError(f"coefficients.drift.params: {e}")


def make_diffusion(preset: str, lipschitz_y: Optional[float] = None, **params) -> DiffusionSpec:
    try:
        factory = DIFFUSION_PRESETS[preset]
    except KeyError:
        raise ConfigError(
            f"coefficients.diffusion.preset: unknown preset '{preset}' (known: {sorted(DIFFUSION_PRESETS)})"
        )
    try:
        return factory(lipschitz_y=lipschitz_y, **params)
    except TypeError as e:
        raise ConfigError(f"coefficients.diffusion.params: {e}")
