"""Delay estimators: preliminary estimators and their Fisher-score corrections.

Shift and scale models use the minimum distance estimator followed by a
one-step MLE correction. The Pantograph model uses the cascade
substitution -> one-step MDE -> two-step MLE, where the preliminary stages
only look at ``[0, tau]`` so that the final Ito integral over ``[tau, T]`` is
well defined.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Any

import numpy as np

from . import kernels
from .errors import DelayEstError
from .limit import Trajectory, interp_uniform, limit_values
from .model import (IDENTIFIABILITY_THRESHOLD, Model, PantographModel, ScaleModel,
                    ShiftModel, ThetaWindow, drift_args, undelayed_coef)
from .sensitivity import (_x, fisher_pantograph, fisher_pantograph_running, fisher_scale,
                          fisher_shift, h_kernel_scale, h_kernel_shift,
                          h_kernel_t_derivative_scale, pantograph_score_kernel,
                          pantograph_sensitivity, quad_nodes, scale_sensitivity,
                          shift_sensitivity, trapezoid)
from .simulate import SamplePath, gen_noise, simulate_first_derivative

KERNEL_MODES = ("fisher-consistent", "as-printed")
Q_THRESHOLD = 1e-14
_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class EstimateRecord:
    """Output of one estimator stage.

    ``theta_hat`` is the window-projected value, ``raw`` the unprojected one.
    ``info`` is the normalizer used by the stage (Fisher information or
    ``Q_tau``), ``tau`` the length of the initial segment for the Pantograph
    stages (0 otherwise).
    """

    estimator: str
    theta_hat: float
    raw: float
    clamped: bool
    info: float | None = None
    tau: float = 0.0
    kernel_mode: str | None = None
    diagnostics: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"estimator": self.estimator, "theta_hat": self.theta_hat, "raw": self.raw,
                "clamped": self.clamped, "info": self.info, "tau": self.tau,
                "kernel_mode": self.kernel_mode, "diagnostics": dict(self.diagnostics)}


def clamp_to_window(raw: float, window: ThetaWindow) -> tuple[float, bool]:
    """Project onto ``[alpha, beta]``; the bounds themselves are not clamped."""
    if not math.isfinite(raw):
        raise DelayEstError("NONFINITE_ESTIMATE", f"estimate is {raw}")
    value = min(max(raw, window.alpha), window.beta)
    return float(value), value != raw


def _record(name, raw, model, **kw) -> EstimateRecord:
    value, clamped = clamp_to_window(float(raw), model.window)
    return EstimateRecord(name, value, float(raw), clamped, **kw)


def _check_grid(path: SamplePath, h: float | None) -> float:
    if h is not None and abs(path.h - h) > 1e-12 * h:
        raise DelayEstError("GRID_MISMATCH", f"path step {path.h} differs from h={h}")
    return path.h


def _horizon(model: Model, path: SamplePath) -> float:
    return min(model.T, path.end)


def stoch_integral(f_values, path: SamplePath, lo: float, hi: float) -> float:
    """Left-point Ito sum ``sum f(t_k) (X_{k+1} - X_k)`` over ``t_k`` in ``[lo, hi)``.

    ``f_values`` holds ``f`` at the path nodes (length ``n`` or ``n + 1``).
    """
    f = np.asarray(f_values, dtype=float)
    if f.size not in (path.n, path.n + 1):
        raise DelayEstError("GRID_MISMATCH", f"{f.size} integrand values for a path with {path.n} steps")
    if not 0.0 <= lo < hi <= path.end + 1e-9 * path.h:
        raise DelayEstError("RANGE_INVALID", f"need 0 <= from < to <= {path.end}, got [{lo}, {hi})")
    k0, k1 = _index_range(lo, hi, path.h, path.n)
    dx = np.diff(path.values[k0:k1 + 1])
    return float(np.dot(f[k0:k1], dx))


def _index_range(lo: float, hi: float, h: float, n: int) -> tuple[int, int]:
    # nodes t_k with lo <= t_k < hi, up to rounding of the grid times
    k0 = max(0, math.ceil(lo / h - 1e-9))
    k1 = min(n, math.ceil(hi / h - 1e-9))
    return k0, k1


# --------------------------------------------------------------------------
# minimum distance estimator

def _mde_lower(model: Model) -> float:
    return model.window.alpha if isinstance(model, ShiftModel) else 0.0


@lru_cache(maxsize=8)
def _mde_bank(model: Model, h: float, n: int, coarse_n: int):
    # coarse_n limit trajectories sampled at the quadrature nodes of the norm
    lo = _mde_lower(model)
    nodes = quad_nodes(lo, n * h, h)
    weights = np.zeros_like(nodes)
    dt = np.diff(nodes)
    weights[:-1] += 0.5 * dt
    weights[1:] += 0.5 * dt
    thetas = np.linspace(model.window.alpha, model.window.beta, coarse_n)
    bank = np.empty((coarse_n, nodes.size))
    for j, th in enumerate(thetas):
        bank[j] = interp_uniform(limit_values(model, th, h, n), h, nodes, model.x0)
    sq = (bank**2) @ weights
    for arr in (nodes, weights, thetas, bank, sq):
        arr.setflags(write=False)
    return nodes, weights, thetas, bank, sq


def mde(path: SamplePath, model: Model, h: float | None = None, coarse_n: int = 512,
        tol: float = 1e-8) -> EstimateRecord:
    """Minimum distance estimator ``argmin_theta ||X - x(theta)||^2``.

    The squared ``L2`` distance is taken over ``[alpha, T]`` for shift models
    and over ``[0, T]`` for scale-type models, by the trapezoid rule on the
    path grid. A coarse scan over ``coarse_n`` equispaced delays (ties go to
    the smaller delay) is refined by golden-section search on the
    neighbouring cells to width ``tol``.
    """
    h = _check_grid(path, h)
    if coarse_n < 3:
        raise ValueError("coarse_n must be >= 3")
    if isinstance(model, ShiftModel) and h > model.window.alpha / 10.0 * (1 + 1e-12):
        raise DelayEstError("STEP_TOO_COARSE", f"need h <= alpha/10, got {h}")
    n = path.n
    nodes, weights, thetas, bank, sq = _mde_bank(replace(model, epsilon=0.0), h, n, coarse_n)
    xn = interp_uniform(path.values, h, nodes, model.x0)
    wx = weights * xn
    base = float(wx @ xn)
    coarse = base - 2.0 * (bank @ wx) + sq
    j = int(np.argmin(coarse))

    def objective(theta: float) -> float:
        x = interp_uniform(limit_values(model, theta, h, n), h, nodes, model.x0)
        return float(weights @ (xn - x) ** 2)

    lo = thetas[max(j - 1, 0)]
    hi = thetas[min(j + 1, coarse_n - 1)]
    best_t, best_j = _golden(objective, lo, hi, tol)
    if coarse[j] < best_j:
        best_t, best_j = float(thetas[j]), float(coarse[j])
    return _record("mde", best_t, model, diagnostics={"objective": best_j, "coarse_index": j})


def _golden(f, a: float, b: float, tol: float) -> tuple[float, float]:
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
    return (c, fc) if fc <= fd else (d, fd)


def _sensitivity(model: Model, x_traj: Trajectory, theta: float) -> Trajectory:
    if isinstance(model, ShiftModel):
        return shift_sensitivity(model.drift, x_traj, theta)
    return scale_sensitivity(model, x_traj, theta)


def _limit_traj(model: Model, theta: float, h: float, n: int) -> Trajectory:
    pre = model.x0 if isinstance(model, ShiftModel) else None
    return Trajectory(h, limit_values(model, theta, h, n), pre_history=pre)


def mde_zeta(model: Model, x1: Trajectory, z: Trajectory,
             threshold: float = IDENTIFIABILITY_THRESHOLD) -> float:
    """``zeta = (int zdot^2 dt)^{-1} int x1 zdot dt`` over the MDE norm range."""
    lo = _mde_lower(model)
    nodes = quad_nodes(lo, min(model.T, z.end), z.h)
    zn = _x(z, nodes)
    norm = trapezoid(zn**2, nodes)
    if not norm > threshold:
        raise DelayEstError("NONPOSITIVE_INFO", f"int zdot^2 = {norm:.3g} too small")
    return trapezoid(_x(x1, nodes) * zn, nodes) / norm


def mde_zeta_samples(model: Model, theta0: float, h: float, reps: int, seed: int,
                     rep_ids=None) -> np.ndarray:
    """Independent draws of the MDE limit variable ``zeta``.

    Draw ``r`` uses the noise stream ``(seed, rep_ids[r])``; by default
    ``rep_ids = range(reps)``.
    """
    from .limit import grid_size

    n = grid_size(model.T, h)
    x = _limit_traj(model, theta0, h, n)
    z = _sensitivity(model, x, theta0)
    ids = range(reps) if rep_ids is None else rep_ids
    out = np.empty(len(ids))
    for i, r in enumerate(ids):
        x1 = simulate_first_derivative(model, theta0, x, gen_noise(seed, int(r), n, h))
        out[i] = mde_zeta(model, x1, z)
    return out


def mde_limit_variance(model: Model, theta0: float, h: float, reps: int, seed: int,
                       rep_ids=None) -> float:
    """Sample variance ``D(theta0)`` of ``zeta`` over ``reps`` simulated copies."""
    samples = mde_zeta_samples(model, theta0, h, reps, seed, rep_ids)
    if samples.size < 2:
        raise DelayEstError("DEGENERATE_SAMPLE", "need at least two replications")
    return float(np.var(samples, ddof=1))


# --------------------------------------------------------------------------
# one-step MLE (shift and scale)

def one_step_mle_shift(path: SamplePath, model: ShiftModel, theta_bar: float,
                       h: float | None = None) -> EstimateRecord:
    """Fisher-score correction of a preliminary shift-model estimate.

    ``theta* = theta_bar + I^{-1} [int H S(X_{t-theta_bar}) dt - Psi]`` with
    ``Psi = H(T) X_T - H(theta_bar) X_{theta_bar} - int H'_t X_t dt``, the
    integration-by-parts form of ``int H dX``; no stochastic integral is
    evaluated. All integrals run over ``[theta_bar, T]``.
    """
    if not isinstance(model, ShiftModel):
        raise DelayEstError("PIPELINE_MODEL_MISMATCH", "one_step_mle_shift needs a shift model")
    h = _check_grid(path, h)
    th = float(theta_bar)
    x = _limit_traj(model, th, h, path.n)
    info = fisher_shift(model, th, h, x_traj=x).value
    d = model.drift
    T = _horizon(model, path)
    nodes = quad_nodes(th, T, h, (2 * th, 3 * th))
    X = path.at(nodes)
    hk = h_kernel_shift(d, x, th, nodes)
    drift_term = trapezoid(hk * d.eval(path.at(nodes - th, before=model.x0)), nodes)
    x1 = _x(x, nodes - th)
    x2 = _x(x, nodes - 2 * th)
    hprime_smooth = trapezoid(d.eval_d2(x1) * d.eval(x2) ** 2 * X, nodes)
    # the S'S'S term switches on at t = 2 theta; integrate it on [2 theta, T] only
    tail = nodes >= 2 * th
    if np.count_nonzero(tail) >= 2:
        tn = nodes[tail]
        hprime_tail = trapezoid(d.eval_d1(_x(x, tn - th)) * d.eval_d1(_x(x, tn - 2 * th))
                                * d.eval(_x(x, tn - 3 * th)) * path.at(tn), tn)
    else:
        hprime_tail = 0.0
    psi = hk[-1] * X[-1] - hk[0] * X[0] - (hprime_smooth + hprime_tail)
    score = drift_term - psi
    return _record("one_step_mle_shift", th + score / info, model, info=info,
                   diagnostics={"score": score, "theta_bar": th})


def one_step_mle_scale(path: SamplePath, model: ScaleModel, theta_bar: float,
                       h: float | None = None) -> EstimateRecord:
    """Fisher-score correction for the nonlinear scale model.

    ``theta* = theta_bar + I^{-1} [Psi - int_0^T H S(X_{theta_bar t}) dt]`` with
    ``Psi = H(T) X_T - H(0) x0 - int_0^T H'_t X_t dt``.
    """
    if not isinstance(model, ScaleModel):
        raise DelayEstError("PIPELINE_MODEL_MISMATCH", "one_step_mle_scale needs a scale model")
    h = _check_grid(path, h)
    th = float(theta_bar)
    x = _limit_traj(model, th, h, path.n)
    info = fisher_scale(model, th, h, x_traj=x).value
    d = model.drift
    T = _horizon(model, path)
    nodes = quad_nodes(0.0, T, h)
    X = path.at(nodes)
    hk = h_kernel_scale(d, x, th, nodes)
    drift_term = trapezoid(hk * d.eval(path.at(th * nodes)), nodes)
    psi = (hk[-1] * X[-1] - hk[0] * model.x0
           - trapezoid(h_kernel_t_derivative_scale(d, x, th, nodes) * X, nodes))
    score = psi - drift_term
    return _record("one_step_mle_scale", th + score / info, model, info=info,
                   diagnostics={"score": score, "theta_bar": th})


# --------------------------------------------------------------------------
# Pantograph cascade

def _require_pantograph(model) -> None:
    if not isinstance(model, PantographModel):
        raise DelayEstError("PIPELINE_MODEL_MISMATCH", "estimator needs a Pantograph model")
    if model.x0 == 0 or model.b == 0 or model.a + model.b == 0:
        raise DelayEstError("CONDITION_A_VIOLATED", "need x0 != 0, b != 0, a + b != 0")


def substitution_variance(model: PantographModel) -> float:
    """Limit variance ``4 / (x0^2 (a+b)^2 b^2)`` of ``(tau^{3/2}/eps)(theta_bar - theta0)``."""
    return 4.0 / (model.x0**2 * (model.a + model.b) ** 2 * model.b**2)


def substitution_value(x_tau: float, model: PantographModel, tau: float) -> float:
    """Raw substitution estimate from the observed value ``X_tau``."""
    a, b, x0 = model.a, model.b, model.x0
    return 2.0 * (x_tau - x0 - x0 * tau * (a + b)) / ((a + b) * b * x0 * tau**2) - a / b


def substitution(path: SamplePath, model: PantographModel, tau: float) -> EstimateRecord:
    """Estimator of substitution from the value ``X_tau``.

    Inverts the second-order expansion
    ``x_tau = x0 + x0 tau (a+b) + x0 tau^2 (a+b)(a + b theta) / 2``.
    """
    _require_pantograph(model)
    if not 0 < tau < model.T:
        raise DelayEstError("TAU_INVALID", f"need 0 < tau < T, got {tau}")
    raw = substitution_value(path.at(tau), model, tau)
    return _record("substitution", raw, model, info=substitution_variance(model), tau=tau)


def one_step_mde(path: SamplePath, model: PantographModel, theta_bar: float, tau: float,
                 h: float | None = None, threshold: float = Q_THRESHOLD) -> EstimateRecord:
    """One Gauss-Newton step on the distance over ``[0, tau]``.

    ``theta* = theta_bar + Q_tau^{-1} int_0^tau [X_t - x_t(theta_bar)] zdot_t dt``.
    """
    _require_pantograph(model)
    h = _check_grid(path, h)
    if not 0 < tau < model.T:
        raise DelayEstError("TAU_INVALID", f"need 0 < tau < T, got {tau}")
    th = float(theta_bar)
    n = min(path.n, int(math.ceil(tau / h)) + 1)
    x = _limit_traj(model, th, h, n)
    z = pantograph_sensitivity(model, x, th)
    nodes = quad_nodes(0.0, tau, h)
    zn = _x(z, nodes)
    q = trapezoid(zn**2, nodes)
    if not q > threshold:
        raise DelayEstError("DEGENERATE_NORMALIZER", f"Q_tau = {q:.3g} at theta={th}")
    corr = trapezoid((path.at(nodes) - _x(x, nodes)) * zn, nodes) / q
    return _record("one_step_mde", th + corr, model, info=q, tau=tau,
                   diagnostics={"theta_bar": th})


def _two_step_increments(path: SamplePath, model: PantographModel, theta: float,
                         tau: float, T: float):
    # residual increments dX_k - (a X_k + b X_{theta t_k}) h for t_k in [tau, T)
    h = path.h
    k0, k1 = _index_range(tau, T, h, path.n)
    t = h * np.arange(k0, k1)
    xk = path.values[k0:k1]
    resid = np.diff(path.values[k0:k1 + 1]) - (model.a * xk + model.b * path.at(theta * t)) * h
    return t, resid


def two_step_mle(path: SamplePath, model: PantographModel, theta_star: float, tau: float,
                 h: float | None = None, kernel_mode: str = "fisher-consistent") -> EstimateRecord:
    """Fisher-score correction with an Ito integral over ``[tau, T]``.

    ``theta = theta* + I_tau(theta*)^{-1} b int_tau^T K(t) [dX_t - (a X_t +
    b X_{theta* t}) dt]``; see :func:`pantograph_score_kernel` for ``K``.
    """
    _require_pantograph(model)
    h = _check_grid(path, h)
    if not tau > 0:
        raise DelayEstError("TAU_NONPOSITIVE", f"tau must be > 0, got {tau}")
    if kernel_mode not in KERNEL_MODES:
        raise ValueError(f"kernel_mode must be one of {KERNEL_MODES}")
    th = float(theta_star)
    x = _limit_traj(model, th, h, path.n)
    T = _horizon(model, path)
    info = fisher_pantograph(model, th, tau, h, x_traj=x).value
    t, resid = _two_step_increments(path, model, th, tau, T)
    score = model.b * float(np.dot(pantograph_score_kernel(model, x, th, t, kernel_mode), resid))
    return _record("two_step_mle", th + score / info, model, info=info, tau=tau,
                   kernel_mode=kernel_mode, diagnostics={"score": score, "theta_star": th})


def two_step_mle_process(path: SamplePath, model: PantographModel, theta_star: float,
                         tau: float, eval_times, h: float | None = None,
                         kernel_mode: str = "as-printed",
                         info_form: str = "sensitivity") -> list[EstimateRecord]:
    """The two-step correction evaluated at several end times in one pass.

    The score is the running Ito sum up to each time in ``eval_times``. The
    information is ``b^2 int_tau^t zdot_s^2 ds`` (``info_form="sensitivity"``) or
    the running ``I_tau`` integrand (``info_form="fisher"``).
    """
    _require_pantograph(model)
    h = _check_grid(path, h)
    if not tau > 0:
        raise DelayEstError("TAU_NONPOSITIVE", f"tau must be > 0, got {tau}")
    times = np.asarray(eval_times, dtype=float)
    T = _horizon(model, path)
    if times.size == 0 or np.any(times <= tau) or np.any(times > T + 1e-9 * h):
        raise DelayEstError("RANGE_INVALID", f"eval_times must lie in (tau, T] = ({tau}, {T}]")
    th = float(theta_star)
    x = _limit_traj(model, th, h, path.n)
    t, resid = _two_step_increments(path, model, th, tau, float(times.max()))
    csum = np.concatenate(([0.0], np.cumsum(pantograph_score_kernel(model, x, th, t, kernel_mode)
                                            * resid)))
    info = fisher_pantograph_running(model, th, tau, times, x, form=info_form)
    k0, _ = _index_range(tau, T, h, path.n)
    out = []
    for te, it in zip(times, info):
        _, k1 = _index_range(tau, te, h, path.n)
        if not it > IDENTIFIABILITY_THRESHOLD:
            raise DelayEstError("NONPOSITIVE_INFO", f"running information {it:.3g} at t={te}")
        score = model.b * float(csum[k1 - k0])
        out.append(_record("two_step_mle_process", th + score / it, model, info=float(it),
                           tau=tau, kernel_mode=kernel_mode,
                           diagnostics={"t": float(te), "info_form": info_form}))
    return out


# --------------------------------------------------------------------------
# brute-force MLE

def loglik_grid(path: SamplePath, model: Model, thetas) -> np.ndarray:
    """Delay-dependent part of the log-likelihood ratio on a grid of delays.

    ``int S(X_{del}) dX - 1/2 int [S(X_{del})^2 + 2 a X_t S(X_{del})] dt`` with
    left-point sums for both integrals (``a = 0`` except for Pantograph).
    """
    thetas = np.ascontiguousarray(thetas, dtype=float)
    kind, c0, c1 = drift_args(model)
    X = np.ascontiguousarray(path.values, dtype=float)
    if isinstance(model, ShiftModel):
        return kernels.shift_loglik_grid(kind, c0, c1, model.x0, X, path.h, thetas)
    return kernels.scale_loglik_grid(kind, c0, c1, undelayed_coef(model), model.x0, X,
                                     path.h, thetas)


def grid_mle(path: SamplePath, model: Model, grid_n: int = 2048) -> EstimateRecord:
    """Maximize the log-likelihood over ``grid_n`` equispaced delays in the window.

    No refinement: the likelihood is not differentiable in the delay. Ties
    go to the smallest delay; a constant objective is flagged with
    ``FLAT_OBJECTIVE`` in the diagnostics.
    """
    if grid_n < 2:
        raise ValueError("grid_n must be >= 2")
    thetas = np.linspace(model.window.alpha, model.window.beta, grid_n)
    ll = loglik_grid(path, model, thetas)
    j = int(np.argmax(ll))
    spread = float(ll.max() - ll.min())
    diag: dict[str, Any] = {"loglik": float(ll[j]), "grid_index": j}
    if not spread > 1e-12 * max(1.0, abs(float(ll[j]))):
        diag["FLAT_OBJECTIVE"] = True
    return _record("grid_mle", thetas[j], model, diagnostics=diag)
