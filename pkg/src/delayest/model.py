"""Drift catalog, the three delay-SDE models and their validation.

Three observation models are supported::

    shift       dX_t = S(X_{t - theta}) dt + eps dW_t,        X_s = x0 for s <= 0
    pantograph  dX_t = (a X_t + b X_{theta t}) dt + eps dW_t,  X_0 = x0
    scale       dX_t = S(X_{theta t}) dt + eps dW_t,           X_0 = x0

Model objects are plain frozen dataclasses; construction never raises on a
bad parameter combination so that :func:`validate_model` can report every
violation at once.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from typing import Any, Mapping, Union

import numpy as np

from .errors import ConfigError

# Kernel drift codes. Every catalog drift reduces to one of these two forms.
AFFINE = 0
SIGMOID = 1

IDENTIFIABILITY_THRESHOLD = 1e-6


@dataclass(frozen=True)
class DriftSpec:
    """A named smooth scalar drift ``S`` with first and second derivatives.

    ``params`` is stored as a sorted tuple of ``(name, value)`` pairs so the
    spec stays hashable. ``kind``, ``c0`` and ``c1`` are the compiled-kernel
    encoding: ``c0 + c1 * x`` (affine) or ``c0 + c1 / (1 + exp(-x))``.
    """

    name: str
    params: tuple[tuple[str, float], ...]
    kind: int
    c0: float
    c1: float
    d1_bound: float
    d2_bound: float

    def param(self, key: str) -> float:
        return dict(self.params)[key]

    def eval(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == AFFINE:
            return self.c0 + self.c1 * x
        return self.c0 + self.c1 * _sigmoid(x)

    def eval_d1(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == AFFINE:
            return np.full_like(x, self.c1)
        s = _sigmoid(x)
        return self.c1 * s * (1.0 - s)

    def eval_d2(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == AFFINE:
            return np.zeros_like(x)
        s = _sigmoid(x)
        return self.c1 * s * (1.0 - s) * (1.0 - 2.0 * s)

    def to_dict(self) -> dict:
        return {"name": self.name, "params": dict(self.params)}


def _sigmoid(x):
    # exp(-x) overflows to inf for x < -709, which still gives the right limit 0
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-x))


def _linear(gamma: float) -> DriftSpec:
    if not gamma > 0:
        raise ConfigError("DRIFT_PARAM_INVALID", f"linear drift needs gamma > 0, got {gamma}")
    return DriftSpec("linear", (("gamma", float(gamma)),), AFFINE, 0.0, -float(gamma),
                     d1_bound=float(gamma), d2_bound=0.0)


def _affine(c0: float, c1: float) -> DriftSpec:
    return DriftSpec("affine", (("c0", float(c0)), ("c1", float(c1))), AFFINE,
                     float(c0), float(c1), d1_bound=abs(float(c1)), d2_bound=0.0)


def _shifted_sigmoid(c0: float, c1: float) -> DriftSpec:
    if not c0 > abs(c1):
        raise ConfigError("DRIFT_PARAM_INVALID",
                          f"shifted_sigmoid needs c0 > |c1| (S > 0), got c0={c0}, c1={c1}")
    # max |s(1-s)| = 1/4, max |s(1-s)(1-2s)| = 1/(6 sqrt 3)
    return DriftSpec("shifted_sigmoid", (("c0", float(c0)), ("c1", float(c1))), SIGMOID,
                     float(c0), float(c1), d1_bound=abs(c1) / 4.0,
                     d2_bound=abs(c1) / (6.0 * math.sqrt(3.0)))


_CATALOG = {
    "linear": {
        "builder": _linear,
        "params": {"gamma": "decay rate, > 0"},
        "formula": "S(x) = -gamma * x",
    },
    "affine": {
        "builder": _affine,
        "params": {"c0": "intercept", "c1": "slope"},
        "formula": "S(x) = c0 + c1 * x",
    },
    "shifted_sigmoid": {
        "builder": _shifted_sigmoid,
        "params": {"c0": "offset, c0 > |c1|", "c1": "amplitude"},
        "formula": "S(x) = c0 + c1 / (1 + exp(-x))",
    },
}


def drift_catalog() -> list[dict]:
    """List the built-in drifts with their parameter schemas.

    All catalog drifts are infinitely differentiable with bounded first and
    second derivatives; only ``S``, ``S'`` and ``S''`` are exposed.
    """
    return [
        {"name": name, "params": dict(entry["params"]), "formula": entry["formula"],
         "smoothness": "C-infinity, bounded S' and S''"}
        for name, entry in _CATALOG.items()
    ]


def lookup(name: str, **params: float) -> DriftSpec:
    """Build a catalog drift, e.g. ``lookup("linear", gamma=1.0)``."""
    try:
        entry = _CATALOG[name]
    except KeyError:
        raise ConfigError("UNKNOWN_DRIFT", f"no drift named {name!r}") from None
    expected = set(entry["params"])
    if set(params) != expected:
        raise ConfigError("DRIFT_PARAM_INVALID",
                          f"drift {name!r} takes parameters {sorted(expected)}, got {sorted(params)}")
    return entry["builder"](**{k: float(v) for k, v in params.items()})


@dataclass(frozen=True)
class ThetaWindow:
    alpha: float
    beta: float

    def contains(self, theta: float) -> bool:
        return self.alpha <= theta <= self.beta


@dataclass(frozen=True)
class ShiftModel:
    drift: DriftSpec
    x0: float
    T: float
    window: ThetaWindow
    epsilon: float

    kind = "shift"


@dataclass(frozen=True)
class PantographModel:
    a: float
    b: float
    x0: float
    T: float
    window: ThetaWindow
    epsilon: float

    kind = "pantograph"

    @property
    def drift(self) -> DriftSpec:
        """The delayed part ``b * x`` of the right-hand side as an affine drift."""
        return _affine(0.0, self.b)


@dataclass(frozen=True)
class ScaleModel:
    drift: DriftSpec
    x0: float
    T: float
    window: ThetaWindow
    epsilon: float

    kind = "scale"


Model = Union[ShiftModel, PantographModel, ScaleModel]


def undelayed_coef(model: Model) -> float:
    """Coefficient of the undelayed state in the drift (``a`` for Pantograph)."""
    return float(model.a) if isinstance(model, PantographModel) else 0.0


def drift_args(model: Model) -> tuple[int, float, float]:
    d = model.drift
    return d.kind, d.c0, d.c1


# --------------------------------------------------------------------------
# validation

@dataclass(frozen=True)
class Violation:
    code: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...]
    warnings: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def codes(self) -> list[str]:
        return [v.code for v in self.violations]

    def raise_if_invalid(self) -> None:
        if self.violations:
            first, *rest = self.violations
            msg = first.message + "".join(f"; {v.code}: {v.message}" for v in rest)
            raise ConfigError(first.code, msg)


def validate_model(model: Model, threshold: float = IDENTIFIABILITY_THRESHOLD,
                   positivity: str = "warn") -> ValidationReport:
    """Check the type invariants and the standing conditions of a model.

    For drift models the limit trajectory at the window midpoint is solved
    and two conditions are checked along it: ``S > 0`` (code
    ``DRIFT_NOT_POSITIVE``) and ``max |S'(x_t)| > threshold`` (code
    ``UNIDENTIFIABLE``). Positivity is reported as a warning unless
    ``positivity="error"``, because the linear (Ornstein-Uhlenbeck) drift
    changes sign along its own trajectory yet is a regular, identifiable model.
    """
    if positivity not in ("warn", "error"):
        raise ValueError("positivity must be 'warn' or 'error'")
    bad: list[Violation] = []
    warn: list[Violation] = []

    def check(cond: bool, code: str, msg: str) -> None:
        if not cond:
            bad.append(Violation(code, msg))

    finite = all(math.isfinite(v) for v in (model.x0, model.T, model.epsilon,
                                             model.window.alpha, model.window.beta))
    check(finite, "NONFINITE_PARAMETER", "x0, T, epsilon and window must be finite")
    check(model.T > 0, "T_NONPOSITIVE", f"horizon T must be > 0, got {model.T}")
    check(model.epsilon >= 0, "EPSILON_NEGATIVE", f"epsilon must be >= 0, got {model.epsilon}")
    w = model.window
    upper = model.T if isinstance(model, ShiftModel) else 1.0
    upper_name = "T" if isinstance(model, ShiftModel) else "1"
    window_ok = 0 < w.alpha < w.beta < upper
    check(window_ok, "WINDOW_INVALID",
          f"window must satisfy 0 < alpha < beta < {upper_name}, got ({w.alpha}, {w.beta})")
    if isinstance(model, PantographModel):
        check(model.x0 != 0 and model.b != 0 and model.a + model.b != 0,
              "CONDITION_A_VIOLATED",
              f"need x0 != 0, b != 0, a + b != 0; got x0={model.x0}, a={model.a}, b={model.b}")
    elif model.drift.name not in _CATALOG:
        bad.append(Violation("UNKNOWN_DRIFT", f"drift {model.drift.name!r} not in catalog"))
    elif window_ok and finite and model.T > 0:
        _check_drift_conditions(model, threshold, positivity, bad, warn)
    return ValidationReport(tuple(bad), tuple(warn))


def _check_drift_conditions(model, threshold, positivity, bad, warn) -> None:
    from .limit import limit_values  # local import: limit depends on this module

    theta = 0.5 * (model.window.alpha + model.window.beta)
    h = min(theta / 10.0, model.T / 1000.0)
    x = limit_values(model, theta, h)
    s = model.drift.eval(x)
    if not np.all(s > 0):
        v = Violation("DRIFT_NOT_POSITIVE",
                      f"S takes value {float(s.min()):.6g} <= 0 on the midpoint limit trajectory")
        (bad if positivity == "error" else warn).append(v)
    slope = float(np.max(np.abs(model.drift.eval_d1(x))))
    if not slope > threshold:
        bad.append(Violation("UNIDENTIFIABLE",
                             f"max |S'(x_t)| = {slope:.3g} does not exceed {threshold:g}"))


# --------------------------------------------------------------------------
# JSON schema

_COMMON_KEYS = {"type", "x0", "T", "window", "epsilon"}
_TYPE_KEYS = {
    "shift": _COMMON_KEYS | {"drift"},
    "scale": _COMMON_KEYS | {"drift"},
    "pantograph": _COMMON_KEYS | {"a", "b"},
}


def model_from_dict(data: Mapping[str, Any]) -> Model:
    """Parse the JSON model schema. Unknown keys are rejected."""
    if not isinstance(data, Mapping):
        raise ConfigError("CONFIG_INVALID", "model must be a JSON object")
    mtype = data.get("type")
    if mtype not in _TYPE_KEYS:
        raise ConfigError("CONFIG_INVALID", f"model type must be one of {sorted(_TYPE_KEYS)}, got {mtype!r}")
    allowed = _TYPE_KEYS[mtype]
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError("CONFIG_UNKNOWN_KEY", f"unknown key(s) for {mtype} model: {sorted(unknown)}")
    missing = allowed - set(data)
    if missing:
        raise ConfigError("CONFIG_MISSING_KEY", f"missing key(s) for {mtype} model: {sorted(missing)}")
    window = data["window"]
    if not (isinstance(window, (list, tuple)) and len(window) == 2):
        raise ConfigError("CONFIG_INVALID", "window must be a two-element list [alpha, beta]")
    try:
        common = dict(x0=float(data["x0"]), T=float(data["T"]),
                      window=ThetaWindow(float(window[0]), float(window[1])),
                      epsilon=float(data["epsilon"]))
        if mtype == "pantograph":
            return PantographModel(a=float(data["a"]), b=float(data["b"]), **common)
    except (TypeError, ValueError) as exc:
        raise ConfigError("CONFIG_INVALID", f"non-numeric model field: {exc}") from None
    drift = drift_from_dict(data["drift"])
    cls = ShiftModel if mtype == "shift" else ScaleModel
    return cls(drift=drift, **common)


def drift_from_dict(data: Mapping[str, Any]) -> DriftSpec:
    if not isinstance(data, Mapping):
        raise ConfigError("CONFIG_INVALID", "drift must be an object {name, params}")
    unknown = set(data) - {"name", "params"}
    if unknown:
        raise ConfigError("CONFIG_UNKNOWN_KEY", f"unknown drift key(s): {sorted(unknown)}")
    params = data.get("params", {})
    if not isinstance(params, Mapping):
        raise ConfigError("CONFIG_INVALID", "drift params must be an object")
    return lookup(str(data.get("name")), **params)


def model_to_dict(model: Model) -> dict:
    out: dict[str, Any] = {"type": model.kind}
    if isinstance(model, PantographModel):
        out["a"] = model.a
        out["b"] = model.b
    else:
        out["drift"] = model.drift.to_dict()
    out.update(x0=model.x0, T=model.T, window=[model.window.alpha, model.window.beta],
               epsilon=model.epsilon)
    return out


def model_digest(model: Model, theta0: float | None = None) -> str:
    """Short stable identifier of a model (and optionally the true delay)."""
    payload = {"model": model_to_dict(model), "theta0": theta0}
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]
