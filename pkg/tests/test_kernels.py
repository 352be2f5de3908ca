"""The compiled kernels and the pure-Python fallback agree to rounding."""
import os
import subprocess
import sys

import numpy as np
import pytest

from delayest import _pykernels as py
from delayest import kernels

core = pytest.importorskip("delayest._core")

DRIFTS = [(0, 0.3, -1.2), (1, 2.0, 1.0)]
H, N = 0.01, 200


def close(a, b):
    np.testing.assert_allclose(np.asarray(a), np.asarray(b), rtol=1e-11, atol=1e-12)


def noise(n=N, seed=0):
    return np.random.default_rng(seed).normal(0.0, np.sqrt(H), n)


@pytest.mark.parametrize("drift", DRIFTS)
def test_limit_and_em(drift):
    for impl_args in [("shift_limit", (0.5, 0.37, H, N)),
                      ("scale_limit", (-0.4, 0.5, 0.37, H, N)),
                      ("shift_em", (0.5, 0.37, H, 0.1, noise())),
                      ("scale_em", (-0.4, 0.5, 0.37, H, 0.1, noise()))]:
        name, args = impl_args
        close(getattr(core, name)(*drift, *args), getattr(py, name)(*drift, *args))


@pytest.mark.parametrize("drift", DRIFTS)
def test_variational_and_first_derivative(drift):
    x_shift = np.asarray(py.shift_limit(*drift, 0.5, 0.37, H, N))
    x_scale = np.asarray(py.scale_limit(*drift, -0.4, 0.5, 0.37, H, N))
    close(core.shift_variational(*drift, 0.5, 0.37, H, x_shift),
          py.shift_variational(*drift, 0.5, 0.37, H, x_shift))
    close(core.scale_variational(*drift, -0.4, 0.5, 0.37, H, x_scale),
          py.scale_variational(*drift, -0.4, 0.5, 0.37, H, x_scale))
    dw = noise()
    close(core.shift_first_derivative(*drift, 0.5, 0.37, H, x_shift, dw),
          py.shift_first_derivative(*drift, 0.5, 0.37, H, x_shift, dw))
    close(core.scale_first_derivative(*drift, -0.4, 0.5, 0.37, H, x_scale, dw),
          py.scale_first_derivative(*drift, -0.4, 0.5, 0.37, H, x_scale, dw))


@pytest.mark.parametrize("drift", DRIFTS)
def test_loglik_grid(drift):
    X = np.asarray(py.shift_em(*drift, 0.5, 0.37, H, 0.1, noise()))
    thetas = np.linspace(0.1, 0.9, 17)
    close(core.shift_loglik_grid(*drift, 0.5, X, H, thetas),
          py.shift_loglik_grid(*drift, 0.5, X, H, thetas))
    close(core.scale_loglik_grid(*drift, -0.4, 0.5, X, H, thetas),
          py.scale_loglik_grid(*drift, -0.4, 0.5, X, H, thetas))


def test_backend_selection():
    assert kernels.BACKEND == core.__backend__
    env = dict(os.environ, DELAYEST_PURE_PYTHON="1")
    res = subprocess.run([sys.executable, "-c", "from delayest.kernels import BACKEND; print(BACKEND)"],
                         capture_output=True, text=True, env=env)
    assert res.stdout.strip() == py.__backend__
