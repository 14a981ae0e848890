"""Control barrier functions for the shipped plant models.

Each constraint encodes a safe set {x : h(x) >= 0} and reduces, at a given
state, to one linear-in-u inequality row a . u >= b enforcing the
strengthened barrier condition hdot + gamma * h >= 0:

    a = grad_h(x) . g(x)          (length control_dim)
    b = -grad_h(x) . f(x) - gamma * h(x)

Constraint kinds:

  geofence_1d      h = p_limit - p - v|v| / (2 u_max)
                   Braking-distance form: h >= 0 iff the position plus the
                   distance needed to stop at full deceleration u_max stays
                   at or below p_limit. The v|v| form keeps h defined and
                   monotone for both velocity signs with one expression.

  geofence_2d_circle
                   h = radius - ||pos - center|| - max(0, v_r)^2 / (2 u_max)
                   with v_r the radial outward velocity component. Gradient
                   is singular at pos == center.

  speed_limit      h = v_max^2 - ||v||^2
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from types import MappingProxyType

import numpy as np

from .dynamics import PlantModel, PlantState, eval_dynamics
from .errors import InvalidConfig, InvalidState, SingularGradient

GEOFENCE_1D = "geofence_1d"
GEOFENCE_2D_CIRCLE = "geofence_2d_circle"
SPEED_LIMIT = "speed_limit"

_REQUIRED_PARAMS = {
    GEOFENCE_1D: ("p_limit", "u_max"),
    GEOFENCE_2D_CIRCLE: ("center", "radius", "u_max"),
    SPEED_LIMIT: ("v_max",),
}


@dataclass(frozen=True)
class BarrierConstraint:
    """One safety constraint h(x) >= 0 with class-kappa gain alpha(h) = gamma*h."""

    id: str
    kind: str
    params: dict
    gamma: float = 1.0
    hazard_id: str = ""

    def __post_init__(self):
        if self.kind not in _REQUIRED_PARAMS:
            raise InvalidConfig(f"unknown constraint kind '{self.kind}'")
        missing = [k for k in _REQUIRED_PARAMS[self.kind] if k not in self.params]
        if missing:
            raise InvalidConfig(f"constraint '{self.id}' missing params {missing}")
        if not (np.isfinite(self.gamma) and self.gamma > 0):
            raise InvalidConfig(f"constraint '{self.id}': gamma must be finite and > 0")
        params = dict(self.params)
        if self.kind == GEOFENCE_2D_CIRCLE:
            center = np.asarray(params["center"], dtype=float)
            if center.shape != (2,) or not np.all(np.isfinite(center)):
                raise InvalidConfig(f"constraint '{self.id}': center must be a finite 2-vector")
            params["center"] = (float(center[0]), float(center[1]))
        for name in _REQUIRED_PARAMS[self.kind]:
            if name == "center":
                continue
            value = float(params[name])
            if not (np.isfinite(value) and value > 0):
                raise InvalidConfig(f"constraint '{self.id}': {name} must be finite and > 0")
            params[name] = value
        object.__setattr__(self, "params", MappingProxyType(params))


def _check_dim(constraint: BarrierConstraint, state: PlantState) -> int:
    dim = state.x.shape[0]
    if constraint.kind == GEOFENCE_1D and dim != 2:
        raise InvalidState(f"constraint '{constraint.id}' expects a 2-dim state, got {dim}")
    if constraint.kind == GEOFENCE_2D_CIRCLE and dim != 4:
        raise InvalidState(f"constraint '{constraint.id}' expects a 4-dim state, got {dim}")
    if constraint.kind == SPEED_LIMIT and dim not in (2, 4):
        raise InvalidState(f"constraint '{constraint.id}' expects a 2- or 4-dim state, got {dim}")
    return dim


def eval_h(constraint: BarrierConstraint, state: PlantState) -> float:
    """Barrier value; h >= 0 iff the state is in the constraint's safe set."""
    dim = _check_dim(constraint, state)
    x = state.x
    p = constraint.params
    if constraint.kind == GEOFENCE_1D:
        pos, vel = float(x[0]), float(x[1])
        return p["p_limit"] - pos - vel * abs(vel) / (2.0 * p["u_max"])
    if constraint.kind == GEOFENCE_2D_CIRCLE:
        cx, cy = p["center"]
        r0 = float(x[0]) - cx
        r1 = float(x[1]) - cy
        d = math.hypot(r0, r1)
        v_r = (r0 * float(x[2]) + r1 * float(x[3])) / d if d > 0.0 else 0.0
        out = max(0.0, v_r)
        return p["radius"] - d - out * out / (2.0 * p["u_max"])
    # speed_limit
    if dim == 2:
        v = float(x[1])
        return p["v_max"] ** 2 - v * v
    v0, v1 = float(x[2]), float(x[3])
    return p["v_max"] ** 2 - v0 * v0 - v1 * v1


def eval_grad_h(constraint: BarrierConstraint, state: PlantState) -> np.ndarray:
    """Gradient of h with respect to the state vector."""
    dim = _check_dim(constraint, state)
    x = state.x
    p = constraint.params
    if constraint.kind == GEOFENCE_1D:
        vel = float(x[1])
        return np.array([-1.0, -abs(vel) / p["u_max"]])
    if constraint.kind == GEOFENCE_2D_CIRCLE:
        cx, cy = p["center"]
        r0 = float(x[0]) - cx
        r1 = float(x[1]) - cy
        d = math.hypot(r0, r1)
        if d == 0.0:
            raise SingularGradient(constraint.id)
        rh0, rh1 = r0 / d, r1 / d
        v0, v1 = float(x[2]), float(x[3])
        v_r = rh0 * v0 + rh1 * v1
        if v_r > 0.0:
            c = v_r / p["u_max"]
            return np.array(
                [
                    -rh0 - c * (v0 - v_r * rh0) / d,
                    -rh1 - c * (v1 - v_r * rh1) / d,
                    -c * rh0,
                    -c * rh1,
                ]
            )
        return np.array([-rh0, -rh1, 0.0, 0.0])
    # speed_limit
    if dim == 2:
        return np.array([0.0, -2.0 * float(x[1])])
    return np.array([0.0, 0.0, -2.0 * float(x[2]), -2.0 * float(x[3])])


def cbf_row(constraint: BarrierConstraint, model: PlantModel, state: PlantState) -> tuple[np.ndarray, float]:
    """Reduce the constraint to the linear row a . u >= b at this state.

    The admissible set {u : a.u >= b} is the strengthened barrier condition
    hdot + gamma*h >= 0 under the model's control-affine dynamics. a and b
    depend only on the state, never on u.
    """
    h = eval_h(constraint, state)
    grad = eval_grad_h(constraint, state)
    f, g = eval_dynamics(model, state)
    a = grad @ g
    b = -float(grad @ f) - constraint.gamma * h
    return a, b


def constraint_from_config(cfg: dict) -> BarrierConstraint:
    """Build a constraint from its config mapping (fields: id, kind, params,
    gamma, hazard_id)."""
    try:
        return BarrierConstraint(
            id=str(cfg["id"]),
            kind=str(cfg["kind"]),
            params=dict(cfg.get("params", {})),
            gamma=float(cfg.get("gamma", 1.0)),
            hazard_id=str(cfg.get("hazard_id", "")),
        )
    except KeyError as exc:
        raise InvalidConfig(f"constraint config missing field {exc}") from exc


def check_bounds_consistency(constraint: BarrierConstraint, model: PlantModel) -> None:
    """Verify that a u_max baked into h equals the plant's per-axis bound
    magnitude. A mismatch means the braking-distance derivation does not
    describe the actual actuation authority, so it is a configuration error.
    """
    if constraint.kind == SPEED_LIMIT:
        return
    u_max = constraint.params["u_max"]
    axes = [0] if constraint.kind == GEOFENCE_1D else [0, 1]
    for axis in axes:
        lo, hi = model.control_bounds[axis]
        if not (math.isclose(-lo, u_max, rel_tol=1e-12) and math.isclose(hi, u_max, rel_tol=1e-12)):
            raise InvalidConfig(
                f"constraint '{constraint.id}' uses u_max={u_max} but model bounds on axis "
                f"{axis} are [{lo}, {hi}]"
            )
