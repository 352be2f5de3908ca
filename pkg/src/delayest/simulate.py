"""Seeded Euler-Maruyama paths and first-derivative processes."""
from __future__ import annotations

import io
import json
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DelayEstError
from .limit import Trajectory, grid_size, interp_uniform, limit_values
from .model import Model, ShiftModel, drift_args, model_digest, undelayed_coef

_TWO_PI = 2.0 * np.pi
_U53 = 2.0**-53


@dataclass(frozen=True, eq=False)
class NoisePath:
    """Brownian increments ``dW_k ~ N(0, h)`` for steps ``k = start, ..., start + n - 1``."""

    h: float
    increments: np.ndarray
    seed: int
    rep: int
    start: int = 0

    def __len__(self) -> int:
        return self.increments.size


def gen_noise(seed: int, rep: int, n: int, h: float, start: int = 0) -> NoisePath:
    """Counter-based Gaussian increments.

    Increment ``k`` is derived from the two 64-bit words ``2k`` and ``2k+1``
    of the Philox-4x64 stream keyed by ``(seed, rep)``: each word ``r`` maps
    to a uniform ``((r >> 11) + 0.5) 2^-53`` in (0, 1) and the pair is turned
    into a standard normal by Box-Muller, ``sqrt(-2 ln u1) cos(2 pi u2)``.
    Because word ``j`` lives in Philox block ``j // 4``, any increment can be
    produced without generating the ones before it.
    """
    if n < 1:
        raise DelayEstError("NOISE_LENGTH_INVALID", f"need n >= 1, got {n}")
    if seed < 0 or rep < 0:
        raise DelayEstError("SEED_INVALID", "seed and rep must be non-negative")
    bg = np.random.Philox(key=[seed, rep])
    first_word = 2 * start
    bg.advance(first_word // 4)
    skip = first_word % 4
    raw = bg.random_raw(skip + 2 * n)[skip:]
    u = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * _U53
    z = np.sqrt(-2.0 * np.log(u[0::2])) * np.cos(_TWO_PI * u[1::2])
    dw = np.sqrt(h) * z
    dw.setflags(write=False)
    return NoisePath(float(h), dw, int(seed), int(rep), int(start))


@dataclass(frozen=True, eq=False)
class SamplePath:
    """One observed path on ``t_k = k h`` with its provenance."""

    h: float
    values: np.ndarray
    seed: int
    rep: int
    model_digest: str

    @property
    def n(self) -> int:
        return self.values.size - 1

    @property
    def times(self) -> np.ndarray:
        return self.h * np.arange(self.values.size)

    @property
    def end(self) -> float:
        return self.n * self.h

    def at(self, t, before: float | None = None):
        """Linearly interpolated path; times ``<= 0`` give ``before`` (default ``X_0``)."""
        b = self.values[0] if before is None else before
        out = interp_uniform(self.values, self.h, t, b)
        return float(out) if np.ndim(out) == 0 else out

    def envelope(self) -> dict:
        return {"seed": self.seed, "rep": self.rep, "h": self.h, "n": self.n,
                "model_digest": self.model_digest}


def _check_sim(model: Model, theta0: float, h: float) -> int:
    if not model.window.contains(theta0):
        raise DelayEstError("THETA_OUT_OF_WINDOW",
                            f"theta0={theta0} outside [{model.window.alpha}, {model.window.beta}]")
    if isinstance(model, ShiftModel) and h > model.window.alpha / 10.0 * (1 + 1e-12):
        raise DelayEstError("STEP_TOO_COARSE", f"need h <= alpha/10, got h={h}")
    if not h > 0:
        raise DelayEstError("STEP_INVALID", f"step must be > 0, got {h}")
    return grid_size(model.T, h)


def _em(model: Model, theta0: float, h: float, dw: np.ndarray) -> np.ndarray:
    kind, c0, c1 = drift_args(model)
    if isinstance(model, ShiftModel):
        return kernels.shift_em(kind, c0, c1, model.x0, theta0, h, model.epsilon, dw)
    return kernels.scale_em(kind, c0, c1, undelayed_coef(model), model.x0, theta0, h,
                            model.epsilon, dw)


def simulate(model: Model, theta0: float, h: float, seed: int, rep: int,
             noise: NoisePath | None = None) -> SamplePath:
    """Euler-Maruyama path of any of the three models.

    ``X_{k+1} = X_k + b(X, t_k) h + eps dW_k`` with the delayed value read
    from the linearly interpolated partial path (``x0`` before time 0).
    """
    n = _check_sim(model, theta0, h)
    if noise is None:
        noise = gen_noise(seed, rep, n, h)
    elif len(noise) != n or noise.h != h:
        raise DelayEstError("GRID_MISMATCH", "noise length or step does not match the model grid")
    x = _em(model, theta0, h, noise.increments)
    x.setflags(write=False)
    return SamplePath(float(h), x, noise.seed, noise.rep, model_digest(model, theta0))


def simulate_shift(model: ShiftModel, theta0: float, h: float, seed: int, rep: int) -> SamplePath:
    if not isinstance(model, ShiftModel):
        raise DelayEstError("MODEL_MISMATCH", "simulate_shift needs a ShiftModel")
    return simulate(model, theta0, h, seed, rep)


def simulate_scale(model, theta0: float, h: float, seed: int, rep: int) -> SamplePath:
    if isinstance(model, ShiftModel):
        raise DelayEstError("MODEL_MISMATCH", "simulate_scale needs a Pantograph or scale model")
    return simulate(model, theta0, h, seed, rep)


def noiseless_path(model: Model, theta0: float, h: float) -> SamplePath:
    """The limit trajectory at ``theta0`` packaged as an observation.

    This is the exact ``eps = 0`` observation; ``simulate`` with ``eps = 0``
    instead returns its Euler approximation, which is ``O(h)`` away.
    """
    _check_sim(model, theta0, h)
    x = limit_values(model, theta0, h)
    x.setflags(write=False)
    return SamplePath(float(h), x, -1, -1, model_digest(model, theta0))


def simulate_first_derivative(model: Model, theta0: float, x_traj: Trajectory,
                              noise: NoisePath) -> Trajectory:
    """Euler scheme for the Gaussian first-derivative process driven by ``noise``.

    Shift: ``dx1 = S'(x_{t-theta0}) x1_{t-theta0} dt + dW``, ``x1 = 0`` for
    ``t <= 0``. Scale: ``dx1 = [a x1 + S'(x_{theta0 t}) x1_{theta0 t}] dt + dW``.
    Using the increments of a sample path gives the coupled process.
    """
    if noise.h != x_traj.h or len(noise) > x_traj.n or noise.start != 0:
        raise DelayEstError("GRID_MISMATCH", "noise grid does not match the trajectory grid")
    kind, c0, c1 = drift_args(model)
    if isinstance(model, ShiftModel):
        y = kernels.shift_first_derivative(kind, c0, c1, model.x0, theta0, x_traj.h,
                                           x_traj.values, noise.increments)
        return Trajectory(x_traj.h, y, pre_history=0.0)
    y = kernels.scale_first_derivative(kind, c0, c1, undelayed_coef(model), model.x0, theta0,
                                       x_traj.h, x_traj.values, noise.increments)
    return Trajectory(x_traj.h, y)


def path_csv(path: SamplePath) -> str:
    buf = io.StringIO()
    buf.write("t,x\n")
    for t, x in zip(path.times, path.values):
        buf.write(f"{float(t)!r},{float(x)!r}\n")
    return buf.getvalue()


def write_path(path: SamplePath, csv_file, json_file=None) -> None:
    """Write the path CSV and, optionally, its JSON provenance envelope."""
    with open(csv_file, "w", newline="") as fh:
        fh.write(path_csv(path))
    if json_file is not None:
        with open(json_file, "w") as fh:
            json.dump(path.envelope(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def read_path(csv_file, envelope: dict | None = None) -> SamplePath:
    """Read a path CSV (header ``t,x``); the step is taken from the time column."""
    with open(csv_file) as fh:
        header = fh.readline().strip()
        if header != "t,x":
            raise DelayEstError("PATH_FORMAT", f"expected header 't,x', got {header!r}")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if data.shape[0] < 2:
        raise DelayEstError("PATH_FORMAT", "path needs at least two rows")
    t, x = data[:, 0], data[:, 1]
    h = float(t[1] - t[0])
    if t[0] != 0.0 or not np.allclose(np.diff(t), h, rtol=1e-9, atol=1e-12):
        raise DelayEstError("GRID_MISMATCH", "path times are not a uniform grid from 0")
    env = envelope or {}
    h = float(env.get("h", h))
    x.setflags(write=False)
    return SamplePath(h, x, int(env.get("seed", -1)), int(env.get("rep", -1)),
                      str(env.get("model_digest", "")))
