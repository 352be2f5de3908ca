"""Replication campaigns, normality diagnostics and small-noise scaling studies."""
from __future__ import annotations

import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np
from scipy import stats

from .errors import ConfigError, DelayEstError
from .estimators import (KERNEL_MODES, EstimateRecord, grid_mle, mde, mde_limit_variance,
                         one_step_mde, one_step_mle_scale, one_step_mle_shift,
                         substitution, substitution_variance, two_step_mle,
                         two_step_mle_process)
from .kernels import BACKEND
from .limit import grid_size
from .model import (Model, PantographModel, ScaleModel, ShiftModel, model_digest,
                    model_to_dict, validate_model)
from .sensitivity import fisher
from .simulate import SamplePath, gen_noise, simulate

PIPELINES = {"shift": ShiftModel, "pantograph": PantographModel, "scale": ScaleModel}
ZERO_NOISE_TAU = 0.01
FAILURE_LIMIT = 0.05
# noise streams for the limit-variance target are keyed (seed, TARGET_REP_BASE + r)
# so they never coincide with the campaign's own (seed, r) paths
TARGET_REP_BASE = 2**40


def default_step(model: Model) -> float:
    """Default grid step: ``min(alpha/10, T/2000)`` for shift models, ``T/2000`` otherwise."""
    if isinstance(model, ShiftModel):
        return min(model.window.alpha / 10.0, model.T / 2000.0)
    return model.T / 2000.0


@dataclass(frozen=True)
class McConfig:
    model: Model
    theta0: float
    h: float | None = None
    reps: int = 1000
    seed: int = 0
    pipeline: str | None = None
    tau_exponent: float = 0.45
    tau: float | None = None
    kernel_mode: str = "fisher-consistent"
    compare_kernels: bool = False
    eval_times: tuple[float, ...] | None = None
    coarse_n: int = 512
    grid_n: int = 2048
    include_grid_mle: bool = False
    target_reps: int = 2000
    workers: int = 1

    @property
    def step(self) -> float:
        return self.h if self.h is not None else default_step(self.model)

    @property
    def pipeline_name(self) -> str:
        return self.pipeline if self.pipeline is not None else self.model.kind

    @property
    def tau_value(self) -> float:
        """Initial-segment length of the Pantograph cascade: ``eps^tau_exponent``.

        At ``eps = 0`` the power is zero, so ``ZERO_NOISE_TAU`` is used
        unless ``tau`` is given explicitly.
        """
        if self.tau is not None:
            return self.tau
        eps = self.model.epsilon
        return eps**self.tau_exponent if eps > 0 else ZERO_NOISE_TAU


def validate_config(cfg: McConfig) -> None:
    """Raise :class:`ConfigError` on any invalid campaign setting."""
    validate_model(cfg.model).raise_if_invalid()
    name = cfg.pipeline_name
    if name not in PIPELINES:
        raise ConfigError("CONFIG_INVALID", f"pipeline must be one of {sorted(PIPELINES)}")
    if not isinstance(cfg.model, PIPELINES[name]):
        raise ConfigError("PIPELINE_MODEL_MISMATCH",
                          f"pipeline {name!r} cannot run on a {cfg.model.kind} model")
    if cfg.reps < 1:
        raise ConfigError("CONFIG_INVALID", f"reps must be >= 1, got {cfg.reps}")
    if cfg.workers < 1:
        raise ConfigError("CONFIG_INVALID", f"workers must be >= 1, got {cfg.workers}")
    if not cfg.model.window.contains(cfg.theta0):
        raise ConfigError("THETA_OUT_OF_WINDOW", f"theta0={cfg.theta0} outside the window")
    if not cfg.step > 0:
        raise ConfigError("CONFIG_INVALID", "h must be > 0")
    if isinstance(cfg.model, ShiftModel) and cfg.step > cfg.model.window.alpha / 10 * (1 + 1e-12):
        raise ConfigError("STEP_TOO_COARSE", f"need h <= alpha/10, got {cfg.step}")
    if cfg.kernel_mode not in KERNEL_MODES:
        raise ConfigError("CONFIG_INVALID", f"kernel_mode must be one of {KERNEL_MODES}")
    if name == "pantograph":
        if not 0.4 < cfg.tau_exponent < 0.5:
            raise ConfigError("TAU_EXPONENT_INVALID",
                              f"tau_exponent must lie in (2/5, 1/2), got {cfg.tau_exponent}")
        tau = cfg.tau_value
        if not 0 < tau < cfg.model.T:
            raise ConfigError("TAU_INVALID", f"tau={tau} must lie in (0, T)")
        if cfg.eval_times is not None and any(not tau < t <= cfg.model.T for t in cfg.eval_times):
            raise ConfigError("CONFIG_INVALID", "eval_times must lie in (tau, T]")
    elif cfg.eval_times is not None:
        raise ConfigError("CONFIG_INVALID", "eval_times only apply to the pantograph pipeline")


def run_pipeline(path: SamplePath, cfg: McConfig) -> list[EstimateRecord]:
    """All estimator stages of the configured pipeline on one path, in order."""
    model, h = cfg.model, cfg.step
    name = cfg.pipeline_name
    if not isinstance(model, PIPELINES.get(name, ())):
        raise ConfigError("PIPELINE_MODEL_MISMATCH",
                          f"pipeline {name!r} cannot run on a {model.kind} model")
    out: list[EstimateRecord] = []
    if name in ("shift", "scale"):
        prelim = mde(path, model, h, coarse_n=cfg.coarse_n)
        out.append(prelim)
        step = one_step_mle_shift if name == "shift" else one_step_mle_scale
        out.append(step(path, model, prelim.theta_hat, h))
    else:
        tau = cfg.tau_value
        sub = substitution(path, model, tau)
        star = one_step_mde(path, model, sub.theta_hat, tau, h)
        out += [sub, star, two_step_mle(path, model, star.theta_hat, tau, h, cfg.kernel_mode)]
        if cfg.compare_kernels:
            other = [m for m in KERNEL_MODES if m != cfg.kernel_mode][0]
            alt = two_step_mle(path, model, star.theta_hat, tau, h, other)
            out.append(replace(alt, estimator=f"two_step_mle:{other}"))
        if cfg.eval_times:
            for r in two_step_mle_process(path, model, star.theta_hat, tau, cfg.eval_times, h):
                out.append(replace(r, estimator=f"two_step_mle_process@{r.diagnostics['t']!r}"))
    if cfg.include_grid_mle:
        out.append(grid_mle(path, model, cfg.grid_n))
    return out


@dataclass(frozen=True)
class RepResult:
    rep: int
    records: tuple[EstimateRecord, ...] = ()
    error: str | None = None


def _run_rep(cfg: McConfig, rep: int) -> RepResult:
    try:
        n = grid_size(cfg.model.T, cfg.step)
        path = simulate(cfg.model, cfg.theta0, cfg.step, cfg.seed, rep,
                        noise=gen_noise(cfg.seed, rep, n, cfg.step))
        return RepResult(rep, tuple(run_pipeline(path, cfg)))
    except DelayEstError as exc:
        return RepResult(rep, error=exc.code)


def _run_block(cfg: McConfig, reps: list[int]) -> list[RepResult]:
    return [_run_rep(cfg, r) for r in reps]


@dataclass
class McReport:
    """Aggregate statistics of a campaign.

    ``estimators`` maps estimator name to ``{count, mean, variance,
    ks_statistic, ks_pvalue, target, clamp_rate}`` over the normalized
    errors; ``targets`` holds the theoretical limit variances.
    """

    config: dict[str, Any]
    targets: dict[str, float]
    estimators: dict[str, dict[str, Any]]
    n_failed: int
    failures: dict[str, int]
    records: list[tuple[int, EstimateRecord, float]] = field(repr=False, default_factory=list)
    elapsed: float = 0.0

    def to_dict(self) -> dict:
        return {"config": self.config, "targets": self.targets, "estimators": self.estimators,
                "n_failed": self.n_failed, "failures": self.failures,
                "runtime": {"backend": BACKEND, "reps": self.config["reps"]}}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, allow_nan=False) + "\n"

    def records_csv(self) -> str:
        buf = io.StringIO()
        buf.write("rep,estimator,theta_hat,raw,clamped,normalized_error\n")
        for rep, rec, err in self.records:
            buf.write(f"{rep},{rec.estimator},{rec.theta_hat!r},{rec.raw!r},"
                      f"{str(rec.clamped).lower()},{err!r}\n")
        return buf.getvalue()

    def normalized_errors(self, estimator: str) -> np.ndarray:
        return np.array([e for _, r, e in self.records if r.estimator == estimator])


def normalizer(estimator: str, cfg: McConfig) -> float:
    """Scale factor of the normalized error ``factor * (raw - theta0)``.

    ``1/eps`` for every stage except substitution, which uses
    ``tau^{3/2}/eps``. At ``eps = 0`` raw errors are reported (factor 1).
    """
    eps = cfg.model.epsilon
    if eps == 0:
        return 1.0
    if estimator == "substitution":
        return cfg.tau_value**1.5 / eps
    return 1.0 / eps


def compute_targets(cfg: McConfig) -> dict[str, float]:
    model, h = cfg.model, cfg.step
    out: dict[str, float] = {}
    out["inverse_fisher"] = 1.0 / fisher(model, cfg.theta0, h, tau=0.0).value
    if isinstance(model, PantographModel):
        out["substitution_variance"] = substitution_variance(model)
    elif cfg.target_reps >= 2:
        ids = range(TARGET_REP_BASE, TARGET_REP_BASE + cfg.target_reps)
        out["mde_variance"] = mde_limit_variance(model, cfg.theta0, h, cfg.target_reps,
                                                 cfg.seed, rep_ids=ids)
    return out


def _target_for(estimator: str, targets: dict[str, float]) -> float | None:
    if estimator == "mde":
        return targets.get("mde_variance")
    if estimator == "substitution":
        return targets.get("substitution_variance")
    if estimator in ("one_step_mle_shift", "one_step_mle_scale", "two_step_mle", "grid_mle"):
        return targets.get("inverse_fisher")
    return None


def _variance(x: np.ndarray) -> float:
    return float(np.var(x, ddof=1)) if x.size >= 2 else 0.0


def config_to_dict(cfg: McConfig) -> dict:
    d = {k: getattr(cfg, k) for k in cfg.__dataclass_fields__ if k not in ("model", "workers")}
    d["model"] = model_to_dict(cfg.model)
    d["h"] = cfg.step
    d["pipeline"] = cfg.pipeline_name
    d["tau"] = cfg.tau_value if cfg.pipeline_name == "pantograph" else None
    d["eval_times"] = list(cfg.eval_times) if cfg.eval_times else None
    d["model_digest"] = model_digest(cfg.model, cfg.theta0)
    return d


def run_campaign(cfg: McConfig) -> McReport:
    """Simulate ``reps`` paths and run the pipeline on each.

    Replication ``r`` uses the noise stream ``(seed, r)``, so the outcome
    does not depend on ``workers``. Failed replications are counted by
    error code; the campaign aborts if more than 5% fail.
    """
    validate_config(cfg)
    start = time.perf_counter()
    reps = list(range(cfg.reps))
    if cfg.workers == 1:
        results = _run_block(cfg, reps)
    else:
        blocks = [reps[i::cfg.workers] for i in range(cfg.workers)]
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            parts = list(pool.map(_run_block, [cfg] * len(blocks), blocks))
        results = sorted((r for part in parts for r in part), key=lambda r: r.rep)
    failures: dict[str, int] = {}
    for r in results:
        if r.error is not None:
            failures[r.error] = failures.get(r.error, 0) + 1
    n_failed = sum(failures.values())
    if n_failed > FAILURE_LIMIT * cfg.reps:
        raise DelayEstError("CAMPAIGN_ABORTED",
                            f"{n_failed} of {cfg.reps} replications failed: {failures}")
    records = []
    for r in results:
        for rec in r.records:
            records.append((r.rep, rec, normalizer(rec.estimator, cfg) * (rec.raw - cfg.theta0)))
    targets = compute_targets(cfg)
    stats_out: dict[str, dict[str, Any]] = {}
    names = list(dict.fromkeys(rec.estimator for _, rec, _ in records))
    for name in names:
        errs = np.array([e for _, rec, e in records if rec.estimator == name])
        clamps = [rec.clamped for _, rec, _ in records if rec.estimator == name]
        target = _target_for(name, targets)
        entry: dict[str, Any] = {
            "count": int(errs.size), "mean": float(np.mean(errs)), "variance": _variance(errs),
            "clamp_rate": float(np.mean(clamps)), "target": target,
            "ks_statistic": None, "ks_pvalue": None,
        }
        if target is not None and errs.size >= 20 and cfg.model.epsilon > 0:
            entry["ks_statistic"], entry["ks_pvalue"] = ks_statistic(errs, target)
        stats_out[name] = entry
    return McReport(config_to_dict(cfg), targets, stats_out, n_failed, failures, records,
                    time.perf_counter() - start)


def ks_statistic(samples, target_variance: float) -> tuple[float, float]:
    """One-sample Kolmogorov-Smirnov test against ``N(0, target_variance)``.

    Returns the statistic and its asymptotic (Kolmogorov distribution) p-value.
    """
    x = np.asarray(samples, dtype=float)
    if x.size < 20:
        raise DelayEstError("DEGENERATE_SAMPLE", f"need at least 20 samples, got {x.size}")
    if not target_variance > 0:
        raise DelayEstError("DEGENERATE_SAMPLE", "target variance must be > 0")
    res = stats.kstest(x, "norm", args=(0.0, math.sqrt(target_variance)), method="asymp")
    return float(res.statistic), float(res.pvalue)


# --------------------------------------------------------------------------
# scaling studies

def _check_eps_list(eps_list) -> np.ndarray:
    eps = np.asarray(eps_list, dtype=float)
    if eps.size < 3:
        raise DelayEstError("EPS_LIST_INVALID", "need at least three noise levels")
    if np.any(eps <= 0) or np.any(np.diff(eps) >= 0):
        raise DelayEstError("EPS_LIST_INVALID", "noise levels must be positive and strictly decreasing")
    return eps


def scaling_study(model: Model, theta0: float, eps_list, reps: int, seed: int,
                  h: float | None = None, moment: str = "sup") -> dict[str, Any]:
    """Small-noise scaling of the deviation from the zero-noise path.

    ``moment="sup"``: mean over replications of ``sup_t |X_t - x_t|``,
    regressed on ``log eps``. ``moment="second"``: mean of
    ``|X_T - x_T|^2`` regressed on ``log eps^2``. In both cases the
    expected slope is 1. ``x`` is the ``eps = 0`` Euler path on the same
    grid, so the discretization error cancels.
    """
    if moment not in ("sup", "second"):
        raise ValueError("moment must be 'sup' or 'second'")
    eps = _check_eps_list(eps_list)
    h = default_step(model) if h is None else h
    n = grid_size(model.T, h)
    ref = simulate(replace(model, epsilon=0.0), theta0, h, seed, 0,
                   noise=gen_noise(seed, 0, n, h)).values
    means = []
    for e in eps:
        m = replace(model, epsilon=float(e))
        vals = np.empty(reps)
        for r in range(reps):
            x = simulate(m, theta0, h, seed, r, noise=gen_noise(seed, r, n, h)).values
            vals[r] = np.max(np.abs(x - ref)) if moment == "sup" else (x[-1] - ref[-1]) ** 2
        means.append(float(vals.mean()))
    regressor = np.log(eps) if moment == "sup" else np.log(eps**2)
    slope = float(np.polyfit(regressor, np.log(means), 1)[0])
    return {"moment": moment, "eps": eps.tolist(), "mean": means, "slope": slope, "reps": reps}


def rate_study_substitution(model: PantographModel, theta0: float, eps_list,
                            tau_exponent: float, reps: int, seed: int,
                            steps_per_tau: int = 1000) -> dict[str, Any]:
    """Variance of ``(tau^{3/2}/eps)(theta_bar - theta0)`` per noise level.

    ``tau = eps^tau_exponent``. Only ``[0, tau]`` is simulated, on a grid of
    ``steps_per_tau`` steps. The target is ``4 / (x0^2 (a+b)^2 b^2)``.
    """
    if not 0.4 < tau_exponent < 2.0 / 3.0:
        raise DelayEstError("TAU_EXPONENT_INVALID",
                            f"tau_exponent must lie in (2/5, 2/3), got {tau_exponent}")
    eps = np.asarray(eps_list, dtype=float)
    if eps.size < 1 or np.any(eps <= 0):
        raise DelayEstError("EPS_LIST_INVALID", "noise levels must be positive")
    target = substitution_variance(model)
    rows = []
    for e in eps:
        tau = float(e) ** tau_exponent
        h = tau / steps_per_tau
        short = replace(model, epsilon=float(e), T=tau + 2 * h)
        n = grid_size(short.T, h)
        norm = tau**1.5 / e
        errs = np.empty(reps)
        clamped = 0
        for r in range(reps):
            path = simulate(short, theta0, h, seed, r, noise=gen_noise(seed, r, n, h))
            rec = substitution(path, short, tau)
            errs[r] = norm * (rec.raw - theta0)
            clamped += rec.clamped
        var = _variance(errs)
        rows.append({"eps": float(e), "tau": tau, "variance": var, "mean": float(errs.mean()),
                     "relative_error": abs(var - target) / target, "clamp_rate": clamped / reps})
    return {"target": target, "tau_exponent": tau_exponent, "reps": reps, "rows": rows}
