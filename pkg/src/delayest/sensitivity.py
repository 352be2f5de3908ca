"""Sensitivities of the limit trajectory, score kernels and Fisher informations."""
from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DelayEstError
from .limit import Trajectory, interp_uniform, solve_limit
from .model import (IDENTIFIABILITY_THRESHOLD, DriftSpec, Model, PantographModel,
                    ScaleModel, ShiftModel, drift_args, undelayed_coef)


@dataclass(frozen=True)
class FisherInfo:
    theta: float
    value: float
    tau: float
    model_kind: str


def _x(traj: Trajectory, s):
    """Trajectory values at times ``s``; non-positive times give the pre-history."""
    before = traj.values[0] if traj.pre_history is None else traj.pre_history
    return interp_uniform(traj.values, traj.h, s, before)


def _check_shift_traj(traj: Trajectory) -> float:
    if traj.pre_history is None or traj.t0 != 0.0:
        raise DelayEstError("GRID_MISMATCH", "expected a shift-model trajectory starting at 0")
    return traj.pre_history


def quad_nodes(lo: float, hi: float, h: float, breaks=()) -> np.ndarray:
    """Grid nodes ``k h`` inside ``(lo, hi)`` plus both ends and any break points."""
    k0 = int(np.floor(lo / h)) + 1
    k1 = int(np.ceil(hi / h)) - 1
    inner = h * np.arange(k0, max(k1, k0 - 1) + 1)
    inner = inner[(inner > lo + 1e-9 * h) & (inner < hi - 1e-9 * h)]
    extra = [b for b in breaks if lo < b < hi]
    return np.unique(np.concatenate(([lo], inner, extra, [hi])))


def trapezoid(y, t) -> float:
    return float(np.trapezoid(y, t)) if hasattr(np, "trapezoid") else float(np.trapz(y, t))


# --------------------------------------------------------------------------
# sensitivity trajectories

def shift_sensitivity(drift: DriftSpec, x_traj: Trajectory, theta: float,
                      form: str = "variational") -> Trajectory:
    """Derivative of the shift-model limit trajectory with respect to theta.

    ``form="variational"`` (default) integrates the exact variational equation
    ``dz/dt = S'(x_{t-theta}) [z_{t-theta} - S(x_{t-2 theta})]``, ``z = 0`` on
    ``[0, theta]``. ``form="integral"`` is the cumulative trapezoid of
    ``-S'(x_{s-theta}) S(x_{s-2 theta})`` from theta, which drops the
    ``z_{t-theta}`` feedback and is therefore exact only for ``t <= 2 theta``.
    """
    x0 = _check_shift_traj(x_traj)
    h = x_traj.h
    if form == "variational":
        z = kernels.shift_variational(drift.kind, drift.c0, drift.c1, x0, theta, h, x_traj.values)
        return Trajectory(h, z, pre_history=0.0)
    if form != "integral":
        raise ValueError("form must be 'variational' or 'integral'")
    t = x_traj.times
    nodes = quad_nodes(theta, x_traj.end, h)
    g = -h_kernel_shift(drift, x_traj, theta, nodes)
    cum = np.concatenate(([0.0], np.cumsum(0.5 * np.diff(nodes) * (g[1:] + g[:-1]))))
    z = np.where(t <= theta, 0.0, np.interp(t, nodes, cum))
    return Trajectory(h, z, pre_history=0.0)


def pantograph_sensitivity(model: PantographModel, x_traj: Trajectory, theta: float) -> Trajectory:
    """Solve ``dz/dt = a z + b z_{theta t} + b t [a x_{theta t} + b x_{theta^2 t}]``, ``z_0 = 0``."""
    return scale_sensitivity(model, x_traj, theta)


def scale_sensitivity(model: PantographModel | ScaleModel, x_traj: Trajectory,
                      theta: float) -> Trajectory:
    """Theta-derivative of a scale-delay limit trajectory.

    Solves ``dz/dt = a z + S'(x_{theta t}) [z_{theta t} + t x'(theta t)]``
    with the same one-step scheme as the limit solver.
    """
    if isinstance(model, ShiftModel):
        raise DelayEstError("MODEL_MISMATCH", "scale sensitivity needs a Pantograph or scale model")
    if x_traj.t0 != 0.0 or abs(x_traj.values[0] - model.x0) > 1e-12 * max(1.0, abs(model.x0)):
        raise DelayEstError("GRID_MISMATCH", "trajectory does not start at x0 at t = 0")
    kind, c0, c1 = drift_args(model)
    z = kernels.scale_variational(kind, c0, c1, undelayed_coef(model), model.x0, theta,
                                  x_traj.h, x_traj.values)
    return Trajectory(x_traj.h, z)


def sensitivity(model: Model, x_traj: Trajectory, theta: float) -> Trajectory:
    if isinstance(model, ShiftModel):
        return shift_sensitivity(model.drift, x_traj, theta)
    return scale_sensitivity(model, x_traj, theta)


# --------------------------------------------------------------------------
# score kernels

def h_kernel_shift(drift: DriftSpec, x_traj: Trajectory, theta: float, t):
    """``H(t, theta) = S'(x_{t-theta}) S(x_{t-2 theta})``."""
    t = np.asarray(t, dtype=float)
    out = drift.eval_d1(_x(x_traj, t - theta)) * drift.eval(_x(x_traj, t - 2 * theta))
    return float(out) if out.ndim == 0 else out


def h_kernel_t_derivative_shift(drift: DriftSpec, x_traj: Trajectory, theta: float, t):
    """Time derivative of :func:`h_kernel_shift` along the limit trajectory.

    ``S''(x_{t-theta}) S(x_{t-2theta})^2
    + S'(x_{t-theta}) S'(x_{t-2theta}) S(x_{t-3theta}) 1{t >= 2 theta}``.
    """
    t = np.asarray(t, dtype=float)
    x1 = _x(x_traj, t - theta)
    x2 = _x(x_traj, t - 2 * theta)
    x3 = _x(x_traj, t - 3 * theta)
    out = drift.eval_d2(x1) * drift.eval(x2) ** 2
    out = out + np.where(t >= 2 * theta, drift.eval_d1(x1) * drift.eval_d1(x2) * drift.eval(x3), 0.0)
    return float(out) if out.ndim == 0 else out


def h_kernel_scale(drift: DriftSpec, x_traj: Trajectory, theta: float, t):
    """``H(t, theta) = t S'(x_{theta t}) S(x_{theta^2 t})``."""
    t = np.asarray(t, dtype=float)
    out = t * drift.eval_d1(_x(x_traj, theta * t)) * drift.eval(_x(x_traj, theta**2 * t))
    return float(out) if out.ndim == 0 else out


def h_kernel_t_derivative_scale(drift: DriftSpec, x_traj: Trajectory, theta: float, t,
                                a: float = 0.0):
    """Time derivative of :func:`h_kernel_scale` by the chain rule.

    With ``x'(u) = a x_u + S(x_{theta u})`` (``a = 0`` for the scale model)::

        S'(x_{th t}) S(x_{th^2 t}) + t th S''(x_{th t}) x'(th t) S(x_{th^2 t})
            + t th^2 S'(x_{th t}) S'(x_{th^2 t}) x'(th^2 t)
    """
    t = np.asarray(t, dtype=float)
    x1 = _x(x_traj, theta * t)
    x2 = _x(x_traj, theta**2 * t)
    x3 = _x(x_traj, theta**3 * t)
    d1 = a * x1 + drift.eval(x2)
    d2 = a * x2 + drift.eval(x3)
    out = (drift.eval_d1(x1) * drift.eval(x2)
           + t * theta * drift.eval_d2(x1) * d1 * drift.eval(x2)
           + t * theta**2 * drift.eval_d1(x1) * drift.eval_d1(x2) * d2)
    return float(out) if out.ndim == 0 else out


def pantograph_score_kernel(model: PantographModel, x_traj: Trajectory, theta: float, t,
                            mode: str = "fisher-consistent"):
    """Score kernel ``K(t)`` of the two-step correction, without the factor ``b``.

    ``"fisher-consistent"``: ``t [a x_{theta t} + b x_{theta^2 t}]``;
    ``"as-printed"``: ``t [a x_t + b x_{theta t}]``.
    """
    t = np.asarray(t, dtype=float)
    if mode == "fisher-consistent":
        out = t * (model.a * _x(x_traj, theta * t) + model.b * _x(x_traj, theta**2 * t))
    elif mode == "as-printed":
        out = t * (model.a * _x(x_traj, t) + model.b * _x(x_traj, theta * t))
    else:
        raise ValueError(f"unknown kernel mode {mode!r}")
    return float(out) if out.ndim == 0 else out


# --------------------------------------------------------------------------
# Fisher informations

def _info(theta, value, tau, kind, threshold) -> FisherInfo:
    if not value > threshold:
        raise DelayEstError("NONPOSITIVE_INFO",
                            f"information {value:.6g} at theta={theta} does not exceed {threshold:g}")
    return FisherInfo(float(theta), float(value), float(tau), kind)


def fisher_shift(model: ShiftModel, theta: float, h: float, x_traj: Trajectory | None = None,
                 threshold: float = IDENTIFIABILITY_THRESHOLD) -> FisherInfo:
    """``I(theta) = int_theta^T S'(x_{t-theta})^2 S(x_{t-2theta})^2 dt`` by trapezoid."""
    if x_traj is None:
        x_traj = solve_limit(model, theta, h, check_window=False)
    hi = min(model.T, x_traj.end)
    if hi <= theta:
        return _info(theta, 0.0, theta, "shift", threshold)
    nodes = quad_nodes(theta, hi, x_traj.h, (2 * theta, 3 * theta))
    value = trapezoid(h_kernel_shift(model.drift, x_traj, theta, nodes) ** 2, nodes)
    return _info(theta, value, theta, "shift", threshold)


def fisher_pantograph(model: PantographModel, theta: float, tau: float, h: float,
                      x_traj: Trajectory | None = None,
                      threshold: float = IDENTIFIABILITY_THRESHOLD) -> FisherInfo:
    """``I_tau(theta) = b^2 int_tau^T t^2 [a x_{theta t} + b x_{theta^2 t}]^2 dt``."""
    if not 0 <= tau < model.T:
        raise DelayEstError("TAU_INVALID", f"need 0 <= tau < T, got {tau}")
    if x_traj is None:
        x_traj = solve_limit(model, theta, h, check_window=False)
    hi = min(model.T, x_traj.end)
    nodes = quad_nodes(tau, hi, x_traj.h)
    k = pantograph_score_kernel(model, x_traj, theta, nodes)
    value = model.b**2 * trapezoid(k**2, nodes)
    return _info(theta, value, tau, "pantograph", threshold)


def fisher_pantograph_running(model: PantographModel, theta: float, tau: float,
                              times, x_traj: Trajectory, z_traj: Trajectory | None = None,
                              form: str = "sensitivity") -> np.ndarray:
    """Running information ``I^t_tau`` at each of ``times``.

    ``form="sensitivity"`` is ``b^2 int_tau^t zdot_s^2 ds`` with ``zdot`` the
    sensitivity trajectory; ``form="fisher"`` is the running version of
    :func:`fisher_pantograph`.
    """
    times = np.asarray(times, dtype=float)
    nodes = quad_nodes(tau, float(times.max()), x_traj.h, times)
    if form == "sensitivity":
        if z_traj is None:
            z_traj = pantograph_sensitivity(model, x_traj, theta)
        g = _x(z_traj, nodes) ** 2
    elif form == "fisher":
        g = pantograph_score_kernel(model, x_traj, theta, nodes) ** 2
    else:
        raise ValueError("form must be 'sensitivity' or 'fisher'")
    cum = np.concatenate(([0.0], np.cumsum(0.5 * np.diff(nodes) * (g[1:] + g[:-1]))))
    return model.b**2 * np.interp(times, nodes, cum)


def fisher_scale(model: ScaleModel, theta: float, h: float, x_traj: Trajectory | None = None,
                 threshold: float = IDENTIFIABILITY_THRESHOLD) -> FisherInfo:
    """``I(theta) = int_0^T t^2 S'(x_{theta t})^2 S(x_{theta^2 t})^2 dt``."""
    if x_traj is None:
        x_traj = solve_limit(model, theta, h, check_window=False)
    hi = min(model.T, x_traj.end)
    nodes = quad_nodes(0.0, hi, x_traj.h)
    value = trapezoid(h_kernel_scale(model.drift, x_traj, theta, nodes) ** 2, nodes)
    return _info(theta, value, 0.0, "scale", threshold)


def fisher(model: Model, theta: float, h: float, tau: float = 0.0) -> FisherInfo:
    if isinstance(model, ShiftModel):
        return fisher_shift(model, theta, h)
    if isinstance(model, PantographModel):
        return fisher_pantograph(model, theta, tau, h)
    return fisher_scale(model, theta, h)


def q_tau(model: PantographModel | ScaleModel, theta: float, tau: float, h: float,
          z_traj: Trajectory | None = None) -> float:
    """``Q_tau(theta) = int_0^tau zdot_t(theta)^2 dt``."""
    if not 0 < tau <= model.T:
        raise DelayEstError("TAU_INVALID", f"need 0 < tau <= T, got {tau}")
    if z_traj is None:
        x_traj = solve_limit(model, theta, h, check_window=False)
        z_traj = scale_sensitivity(model, x_traj, theta)
    nodes = quad_nodes(0.0, tau, z_traj.h)
    return trapezoid(_x(z_traj, nodes) ** 2, nodes)


def fisher_csv(rows) -> str:
    """CSV text with header ``theta,info`` from ``(theta, info)`` pairs."""
    buf = io.StringIO()
    buf.write("theta,info\n")
    for theta, info in rows:
        buf.write(f"{float(theta)!r},{float(info)!r}\n")
    return buf.getvalue()
