"""Primary (performance) controllers feeding the safety filter.

Three kinds:
  * nn:          MLP inference from a serialized weights file. The network
                 is opaque to the rest of the system; only its output is
                 filtered. Inputs are the raw state vector, unnormalized.
  * pd:          per-axis proportional-derivative law u = -kp*p - kd*v.
  * adversarial: full-magnitude command in the direction that decreases a
                 target constraint's barrier value; exists to exercise the
                 filter under worst-case commands, not to fly well.

Every controller's output is saturated into the plant's box, so downstream
code always sees an in-bounds desired command.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .barrier import BarrierConstraint, eval_grad_h
from .dynamics import ControlInput, PlantModel, PlantState, eval_dynamics
from .errors import InvalidConfig, InvalidModel, ParseError

ACTIVATIONS = ("tanh", "relu", "linear")


@dataclass(frozen=True)
class MlpSpec:
    """Fully-connected network: per-layer weights W[k] of shape
    (sizes[k+1], sizes[k]), biases b[k], and an activation per layer."""

    layer_sizes: tuple[int, ...]
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]
    activations: tuple[str, ...]

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        object.__setattr__(self, "layer_sizes", sizes)
        n_layers = len(sizes) - 1
        if n_layers < 1:
            raise InvalidModel("network needs at least one layer")
        if not (len(self.weights) == len(self.biases) == len(self.activations) == n_layers):
            raise InvalidModel(
                f"expected {n_layers} weight/bias/activation entries, got "
                f"{len(self.weights)}/{len(self.biases)}/{len(self.activations)}"
            )
        weights = []
        biases = []
        for k in range(n_layers):
            w = np.asarray(self.weights[k], dtype=float)
            b = np.asarray(self.biases[k], dtype=float)
            if w.shape != (sizes[k + 1], sizes[k]):
                raise InvalidModel(
                    f"layer {k}: weight shape {w.shape} does not chain "
                    f"{sizes[k]} -> {sizes[k + 1]}"
                )
            if b.shape != (sizes[k + 1],):
                raise InvalidModel(f"layer {k}: bias shape {b.shape} != ({sizes[k + 1]},)")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise InvalidModel(f"layer {k}: non-finite weights or biases")
            if self.activations[k] not in ACTIVATIONS:
                raise InvalidModel(f"layer {k}: unknown activation '{self.activations[k]}'")
            w.setflags(write=False)
            b.setflags(write=False)
            weights.append(w)
            biases.append(b)
        object.__setattr__(self, "weights", tuple(weights))
        object.__setattr__(self, "biases", tuple(biases))
        object.__setattr__(self, "activations", tuple(self.activations))


@dataclass(frozen=True)
class NnController:
    spec: MlpSpec


@dataclass(frozen=True)
class PdController:
    """Per-axis gains; raw command on axis j is -kp[j]*p_j - kd[j]*v_j."""

    kp: tuple[float, ...]
    kd: tuple[float, ...]

    def __post_init__(self):
        kp = tuple(float(v) for v in self.kp)
        kd = tuple(float(v) for v in self.kd)
        if len(kp) != len(kd):
            raise InvalidConfig("kp and kd must have the same length")
        if not all(np.isfinite(kp)) or not all(np.isfinite(kd)):
            raise InvalidConfig("pd gains must be finite")
        object.__setattr__(self, "kp", kp)
        object.__setattr__(self, "kd", kd)


@dataclass(frozen=True)
class AdversarialController:
    """Drives toward violation of one constraint. The target is referenced by
    id in configs and resolved against the scenario's constraint list (and
    plant model) before use."""

    target_constraint_id: str
    constraint: BarrierConstraint | None = None
    model: PlantModel | None = None

    def bind(self, constraint: BarrierConstraint, model: PlantModel) -> "AdversarialController":
        if constraint.id != self.target_constraint_id:
            raise InvalidConfig(
                f"adversarial target '{self.target_constraint_id}' bound to "
                f"constraint '{constraint.id}'"
            )
        return AdversarialController(self.target_constraint_id, constraint, model)


ControllerKind = NnController | PdController | AdversarialController


def mlp_forward(spec: MlpSpec, x: np.ndarray) -> np.ndarray:
    """Sequential affine-then-activation evaluation."""
    v = np.asarray(x, dtype=float)
    if v.shape != (spec.layer_sizes[0],):
        raise InvalidModel(f"input length {v.shape} != {spec.layer_sizes[0]}")
    for w, b, act in zip(spec.weights, spec.biases, spec.activations):
        v = w @ v + b
        if act == "tanh":
            v = np.tanh(v)
        elif act == "relu":
            v = np.maximum(v, 0.0)
    return v


def desired_control(controller: ControllerKind, state: PlantState, model: PlantModel) -> ControlInput:
    """Raw controller output saturated componentwise into the plant's box."""
    if isinstance(controller, NnController):
        raw = mlp_forward(controller.spec, state.x)
    elif isinstance(controller, PdController):
        half = state.x.shape[0] // 2
        pos, vel = state.x[:half], state.x[half:]
        kp = np.asarray(controller.kp)
        kd = np.asarray(controller.kd)
        raw = -kp * pos - kd * vel
    elif isinstance(controller, AdversarialController):
        raw = _adversarial_raw(controller, state, model)
    else:
        raise InvalidConfig(f"unknown controller {controller!r}")
    return ControlInput(model.saturate(raw), model.control_bounds)


def _adversarial_raw(controller: AdversarialController, state: PlantState, model: PlantModel) -> np.ndarray:
    """Full-magnitude command minimizing the target constraint's hdot
    contribution a . u (a = grad_h . g). Where that row has no control
    sensitivity, fall back to pushing along the position gradient mapped to
    the paired control axis, which decreases h over the following steps on
    these double-integrator plants.
    """
    if controller.constraint is None or controller.model is None:
        raise InvalidConfig("adversarial controller used before binding to a constraint")
    grad = eval_grad_h(controller.constraint, state)
    _, g = eval_dynamics(model, state)
    a = grad @ g
    if not a.any():
        a = grad[: model.control_dim]  # push along the position gradient instead
    bounds = model.control_bounds
    raw = np.empty(model.control_dim)
    for j in range(model.control_dim):
        if a[j] < 0.0:
            raw[j] = bounds[j, 1]
        elif a[j] > 0.0:
            raw[j] = bounds[j, 0]
        else:
            raw[j] = 0.0
    return raw


def controller_from_config(cfg: dict) -> ControllerKind:
    """Build a controller from its scenario-config mapping. nn controllers
    reference a weights file by path; pd and adversarial are inline."""
    kind = cfg.get("kind")
    if kind == "nn":
        if "path" not in cfg:
            raise InvalidConfig("nn controller config needs a 'path' to a weights file")
        controller = load_controller(cfg["path"])
        if not isinstance(controller, NnController):
            raise InvalidConfig(f"file {cfg['path']} does not contain network weights")
        return controller
    if kind == "pd":
        return PdController(kp=tuple(cfg["kp"]), kd=tuple(cfg["kd"]))
    if kind == "adversarial":
        return AdversarialController(target_constraint_id=str(cfg["target_constraint_id"]))
    raise InvalidConfig(f"unknown controller kind '{kind}'")


def load_controller(path) -> ControllerKind:
    """Load a controller from a JSON file.

    Network files carry layer_sizes / weights / biases / activations
    (weights as row-major matrices); pd files carry kp / kd arrays.
    Dimension invariants are checked at load time.
    """
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc.msg}", line=exc.lineno) from exc
    if not isinstance(doc, dict):
        raise ParseError(f"{path}: expected a JSON object", line=1)
    if "layer_sizes" in doc:
        for field in ("weights", "biases", "activations"):
            if field not in doc:
                raise ParseError(f"{path}: missing field '{field}'", line=1)
        spec = MlpSpec(
            layer_sizes=tuple(doc["layer_sizes"]),
            weights=tuple(np.asarray(w, dtype=float) for w in doc["weights"]),
            biases=tuple(np.asarray(b, dtype=float) for b in doc["biases"]),
            activations=tuple(doc["activations"]),
        )
        return NnController(spec)
    if "kp" in doc and "kd" in doc:
        return PdController(kp=tuple(doc["kp"]), kd=tuple(doc["kd"]))
    raise ParseError(f"{path}: neither network weights nor pd gains found", line=1)
