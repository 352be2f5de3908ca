"""Deterministic (zero-noise) limit trajectories and their closed-form oracles."""
from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .errors import DelayEstError
from .model import Model, ShiftModel, drift_args, undelayed_coef


def grid_size(T: float, h: float) -> int:
    """Number of steps ``n`` of the uniform grid ``0, h, ..., n h`` on [0, T]."""
    if not h > 0:
        raise DelayEstError("STEP_INVALID", f"step must be > 0, got {h}")
    return int(math.floor(T / h + 1e-9))


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Function of time sampled on ``t_k = k h``, linearly interpolated.

    ``pre_history`` is the constant value for ``t <= 0`` (shift models only).
    """

    h: float
    values: np.ndarray
    pre_history: Optional[float] = None
    t0: float = 0.0

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 1 or v.size == 0:
            raise ValueError("trajectory values must be a non-empty 1-d array")
        if not self.h > 0:
            raise ValueError("trajectory step must be > 0")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.size - 1

    @property
    def end(self) -> float:
        return self.t0 + self.n * self.h

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.h * np.arange(self.values.size)

    def __call__(self, t):
        return eval_trajectory(self, t)


def eval_trajectory(traj: Trajectory, t):
    """Evaluate by linear interpolation; ``t <= 0`` gives the pre-history.

    Raises ``OUT_OF_RANGE`` beyond the grid end, or below the grid start
    when the trajectory has no pre-history.
    """
    tt = np.asarray(t, dtype=float)
    slack = 1e-9 * traj.h
    if np.any(tt > traj.end + slack):
        raise DelayEstError("OUT_OF_RANGE", f"t={float(np.max(tt))} beyond grid end {traj.end}")
    if traj.pre_history is None and np.any(tt < traj.t0 - slack):
        raise DelayEstError("OUT_OF_RANGE", f"t={float(np.min(tt))} before grid start")
    out = interp_uniform(traj.values, traj.h, tt - traj.t0,
                         traj.values[0] if traj.pre_history is None else traj.pre_history)
    return float(out) if out.ndim == 0 else out


def interp_uniform(values: np.ndarray, h: float, s, before: float):
    """Linear interpolation of ``values`` (nodes ``k h``) at times ``s``.

    Uses the same cell arithmetic as the kernels; ``s <= 0`` gives ``before``
    and times past the last node give the last value.
    """
    s = np.asarray(s, dtype=float)
    n = values.size - 1
    u = np.maximum(s, 0.0) / h
    i = np.minimum(np.floor(u).astype(np.int64), n)
    i1 = np.minimum(i + 1, n)
    w = np.where(i >= n, 0.0, u - i)
    out = values[i] + w * (values[i1] - values[i])
    return np.where(s <= 0.0, before, out)


def _check_theta(model: Model, theta: float, check_window: bool) -> None:
    if check_window and not model.window.contains(theta):
        raise DelayEstError("THETA_OUT_OF_WINDOW",
                            f"theta={theta} outside [{model.window.alpha}, {model.window.beta}]")


def limit_values(model: Model, theta: float, h: float, n: int | None = None) -> np.ndarray:
    """Raw limit-trajectory values on the grid; no window checks."""
    if n is None:
        n = grid_size(model.T, h)
    kind, c0, c1 = drift_args(model)
    if isinstance(model, ShiftModel):
        return kernels.shift_limit(kind, c0, c1, model.x0, theta, h, n)
    return kernels.scale_limit(kind, c0, c1, undelayed_coef(model), model.x0, theta, h, n)


def solve_shift_limit(model: ShiftModel, theta: float, h: float,
                      check_window: bool = True) -> Trajectory:
    """Solve dx/dt = S(x(t - theta)), x = x0 on (-inf, 0].

    Fourth-order one-step scheme with linearly interpolated delayed values;
    the interpolation caps the global order at two. Requires
    ``h <= theta / 10`` so every delayed value comes from computed history.
    """
    if not isinstance(model, ShiftModel):
        raise DelayEstError("MODEL_MISMATCH", "solve_shift_limit needs a ShiftModel")
    _check_theta(model, theta, check_window)
    if not theta > 0 or h > theta / 10.0 * (1 + 1e-12):
        raise DelayEstError("STEP_TOO_COARSE", f"need h <= theta/10, got h={h}, theta={theta}")
    return Trajectory(h, limit_values(model, theta, h), pre_history=model.x0)


def solve_scale_limit(model, theta: float, h: float, check_window: bool = True) -> Trajectory:
    """Solve dx/dt = a x(t) + b x(theta t) (Pantograph) or dx/dt = S(x(theta t)).

    Delayed values inside the current step (only near t = 0) are
    extrapolated with the step's initial slope.
    """
    if isinstance(model, ShiftModel):
        raise DelayEstError("MODEL_MISMATCH", "solve_scale_limit needs a Pantograph or scale model")
    if not 0 < theta < 1:
        raise DelayEstError("THETA_OUT_OF_WINDOW", f"scale delay must lie in (0, 1), got {theta}")
    _check_theta(model, theta, check_window)
    return Trajectory(h, limit_values(model, theta, h))


def solve_limit(model: Model, theta: float, h: float, check_window: bool = True) -> Trajectory:
    if isinstance(model, ShiftModel):
        return solve_shift_limit(model, theta, h, check_window)
    return solve_scale_limit(model, theta, h, check_window)


def _ou_y(gamma: float, theta: float, u: float) -> float:
    if u < 0:
        return 0.0
    return sum((-gamma) ** k / math.factorial(k) * (u - k * theta) ** k
               for k in range(int(math.floor(u / theta)) + 1))


def _ou_y_integral(gamma: float, theta: float, u: float) -> float:
    # antiderivative of y from 0; each term is a polynomial starting at k*theta
    if u <= 0:
        return 0.0
    return sum((-gamma) ** k / math.factorial(k + 1) * (u - k * theta) ** (k + 1)
               for k in range(int(math.floor(u / theta)) + 1))


def ou_series(gamma_drift: float, theta: float, x0: float, t):
    """Closed-form solution of dx/dt = -gamma x(t - theta), x = x0 for t <= 0.

    ``x_t = x0 y_t - gamma x0 int_{-theta}^0 y_{t-s-theta} ds`` with
    ``y_u = sum_{k <= u/theta} (-gamma)^k (u - k theta)^k / k!`` and
    ``y_u = 0`` for ``u < 0``. The integral is evaluated exactly.
    """
    if not theta > 0:
        raise ValueError("theta must be > 0")

    def one(tv: float) -> float:
        if tv < 0:
            raise ValueError("t must be >= 0")
        integral = _ou_y_integral(gamma_drift, theta, tv) - _ou_y_integral(gamma_drift, theta, tv - theta)
        return x0 * _ou_y(gamma_drift, theta, tv) - gamma_drift * x0 * integral

    if np.ndim(t) == 0:
        return one(float(t))
    return np.array([one(float(v)) for v in np.ravel(t)]).reshape(np.shape(t))


def pantograph_taylor(a: float, b: float, x0: float, theta: float, t):
    """Second-order expansion of the Pantograph solution at t = 0."""
    t = np.asarray(t, dtype=float)
    out = x0 + x0 * t * (a + b) + 0.5 * x0 * t**2 * (a + b) * (a + b * theta)
    return float(out) if out.ndim == 0 else out


def trajectory_csv(traj: Trajectory) -> str:
    """CSV text with header ``t,x`` and one row per grid node."""
    buf = io.StringIO()
    buf.write("t,x\n")
    for t, x in zip(traj.times, traj.values):
        buf.write(f"{float(t)!r},{float(x)!r}\n")
    return buf.getvalue()


def write_trajectory_csv(traj: Trajectory, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(trajectory_csv(traj))
