"""Pure-Python versions of the compiled kernels in ``_core.pyx``.

Same signatures and the same arithmetic, so results agree with the compiled
module to rounding. Used when the extension is not built or when
``DELAYEST_PURE_PYTHON=1`` is set.
"""
import math

import numpy as np

__backend__ = "python"


def _s(kind, c0, c1, x):
    if kind == 0:
        return c0 + c1 * x
    return c0 + c1 / (1.0 + _exp(-x))


def _s1(kind, c0, c1, x):
    if kind == 0:
        return c1
    s = 1.0 / (1.0 + _exp(-x))
    return c1 * s * (1.0 - s)


def _exp(v):
    try:
        return math.exp(v)
    except OverflowError:
        return math.inf


def _at(y, last, h, s, before):
    if s <= 0.0:
        return before
    u = s / h
    i = int(u)
    if i >= last:
        return y[last]
    w = u - i
    return y[i] + w * (y[i + 1] - y[i])


def _ahead(y, k, h, s, slope):
    if s <= k * h:
        return _at(y, k, h, s, y[0])
    return y[k] + (s - k * h) * slope


def shift_limit(kind, c0, c1, x0, theta, h, n):
    x = [0.0] * (n + 1)
    x[0] = x0
    for k in range(n):
        t = k * h
        f1 = _s(kind, c0, c1, _at(x, k, h, t - theta, x0))
        f2 = _s(kind, c0, c1, _at(x, k, h, t + 0.5 * h - theta, x0))
        f4 = _s(kind, c0, c1, _at(x, k, h, t + h - theta, x0))
        x[k + 1] = x[k] + h / 6.0 * (f1 + 4.0 * f2 + f4)
    return np.array(x)


def scale_limit(kind, c0, c1, a, x0, theta, h, n):
    x = [0.0] * (n + 1)
    x[0] = x0
    for k in range(n):
        t = k * h
        k1 = a * x[k] + _s(kind, c0, c1, _at(x, k, h, theta * t, x0))
        d2 = _s(kind, c0, c1, _ahead(x, k, h, theta * (t + 0.5 * h), k1))
        d4 = _s(kind, c0, c1, _ahead(x, k, h, theta * (t + h), k1))
        k2 = a * (x[k] + 0.5 * h * k1) + d2
        k3 = a * (x[k] + 0.5 * h * k2) + d2
        k4 = a * (x[k] + h * k3) + d4
        x[k + 1] = x[k] + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return np.array(x)


def shift_em(kind, c0, c1, x0, theta, h, eps, dw):
    n = len(dw)
    x = [0.0] * (n + 1)
    x[0] = x0
    for k in range(n):
        x[k + 1] = x[k] + _s(kind, c0, c1, _at(x, k, h, k * h - theta, x0)) * h + eps * dw[k]
    return np.array(x)


def scale_em(kind, c0, c1, a, x0, theta, h, eps, dw):
    n = len(dw)
    x = [0.0] * (n + 1)
    x[0] = x0
    for k in range(n):
        x[k + 1] = x[k] + (a * x[k] + _s(kind, c0, c1, _at(x, k, h, theta * k * h, x0))) * h + eps * dw[k]
    return np.array(x)


def _shift_var_rhs(kind, c0, c1, x0, theta, h, x, nx, z, k, t):
    u = t - theta
    if u <= 0.0:
        return _s1(kind, c0, c1, x0) * (-_s(kind, c0, c1, x0))
    xprime = _s(kind, c0, c1, _at(x, nx, h, u - theta, x0))
    return _s1(kind, c0, c1, _at(x, nx, h, u, x0)) * (_at(z, k, h, u, 0.0) - xprime)


def shift_variational(kind, c0, c1, x0, theta, h, x):
    x = list(np.asarray(x, dtype=float))
    nx = len(x) - 1
    z = [0.0] * (nx + 1)
    tol = 1e-9 * h
    for k in range(nx):
        t = k * h
        t1 = t + h
        if t1 <= theta + tol:
            z[k + 1] = 0.0
        elif t < theta - tol:
            m = 0.5 * (theta + t1)
            g0 = _shift_var_rhs(kind, c0, c1, x0, theta, h, x, nx, z, k, theta)
            g1 = _shift_var_rhs(kind, c0, c1, x0, theta, h, x, nx, z, k, m)
            g2 = _shift_var_rhs(kind, c0, c1, x0, theta, h, x, nx, z, k, t1)
            z[k + 1] = (t1 - theta) / 6.0 * (g0 + 4.0 * g1 + g2)
        else:
            g0 = _shift_var_rhs(kind, c0, c1, x0, theta, h, x, nx, z, k,
                                theta if t < theta + tol else t)
            g1 = _shift_var_rhs(kind, c0, c1, x0, theta, h, x, nx, z, k, t + 0.5 * h)
            g2 = _shift_var_rhs(kind, c0, c1, x0, theta, h, x, nx, z, k, t1)
            z[k + 1] = z[k] + h / 6.0 * (g0 + 4.0 * g1 + g2)
    return np.array(z)


def _scale_force(kind, c0, c1, a, x0, theta, h, x, nx, t):
    u = theta * t
    xu = _at(x, nx, h, u, x0)
    xprime = a * xu + _s(kind, c0, c1, _at(x, nx, h, theta * u, x0))
    return _s1(kind, c0, c1, xu) * t * xprime


def scale_variational(kind, c0, c1, a, x0, theta, h, x):
    x = list(np.asarray(x, dtype=float))
    nx = len(x) - 1
    z = [0.0] * (nx + 1)
    for k in range(nx):
        t = k * h
        tm = t + 0.5 * h
        t1 = t + h
        s0 = _s1(kind, c0, c1, _at(x, nx, h, theta * t, x0))
        sm = _s1(kind, c0, c1, _at(x, nx, h, theta * tm, x0))
        s1 = _s1(kind, c0, c1, _at(x, nx, h, theta * t1, x0))
        k1 = (a * z[k] + s0 * _at(z, k, h, theta * t, 0.0)
              + _scale_force(kind, c0, c1, a, x0, theta, h, x, nx, t))
        zm = _ahead(z, k, h, theta * tm, k1)
        z1 = _ahead(z, k, h, theta * t1, k1)
        k2 = (a * (z[k] + 0.5 * h * k1) + sm * zm
              + _scale_force(kind, c0, c1, a, x0, theta, h, x, nx, tm))
        k3 = (a * (z[k] + 0.5 * h * k2) + sm * zm
              + _scale_force(kind, c0, c1, a, x0, theta, h, x, nx, tm))
        k4 = (a * (z[k] + h * k3) + s1 * z1
              + _scale_force(kind, c0, c1, a, x0, theta, h, x, nx, t1))
        z[k + 1] = z[k] + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return np.array(z)


def shift_first_derivative(kind, c0, c1, x0, theta, h, x, dw):
    x = list(np.asarray(x, dtype=float))
    nx = len(x) - 1
    n = len(dw)
    y = [0.0] * (n + 1)
    for k in range(n):
        t = k * h
        y[k + 1] = (y[k] + _s1(kind, c0, c1, _at(x, nx, h, t - theta, x0))
                    * _at(y, k, h, t - theta, 0.0) * h + dw[k])
    return np.array(y)


def scale_first_derivative(kind, c0, c1, a, x0, theta, h, x, dw):
    x = list(np.asarray(x, dtype=float))
    nx = len(x) - 1
    n = len(dw)
    y = [0.0] * (n + 1)
    for k in range(n):
        t = k * h
        y[k + 1] = y[k] + (a * y[k] + _s1(kind, c0, c1, _at(x, nx, h, theta * t, x0))
                           * _at(y, k, h, theta * t, 0.0)) * h + dw[k]
    return np.array(y)


def _np_drift(kind, c0, c1, x):
    if kind == 0:
        return c0 + c1 * x
    with np.errstate(over="ignore"):
        return c0 + c1 / (1.0 + np.exp(-x))


def _np_at(X, h, s, before):
    # vectorised _at over an array of times s
    n = len(X) - 1
    u = s / h
    i = np.minimum(np.floor(np.maximum(u, 0.0)).astype(np.int64), n)
    i1 = np.minimum(i + 1, n)
    w = np.where(i >= n, 0.0, u - i)
    out = X[i] + w * (X[i1] - X[i])
    return np.where(s <= 0.0, before, out)


def shift_loglik_grid(kind, c0, c1, x0, X, h, thetas):
    X = np.asarray(X, dtype=float)
    n = len(X) - 1
    t = np.arange(n) * h
    dx = np.diff(X)
    out = np.empty(len(thetas))
    for j, th in enumerate(thetas):
        sk = _np_drift(kind, c0, c1, _np_at(X, h, t - th, x0))
        out[j] = float(np.sum(sk * dx)) - 0.5 * h * float(np.sum(sk * sk))
    return out


def scale_loglik_grid(kind, c0, c1, a, x0, X, h, thetas):
    X = np.asarray(X, dtype=float)
    n = len(X) - 1
    t = np.arange(n) * h
    dx = np.diff(X)
    xk = X[:-1]
    out = np.empty(len(thetas))
    for j, th in enumerate(thetas):
        sk = _np_drift(kind, c0, c1, _np_at(X, h, th * t, x0))
        out[j] = float(np.sum(sk * dx)) - 0.5 * h * float(np.sum(sk * sk + 2.0 * a * xk * sk))
    return out
