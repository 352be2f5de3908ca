# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops. Mirrors ``_pykernels`` function for function.

Drift encoding: kind 0 is ``c0 + c1*x``, kind 1 is ``c0 + c1/(1+exp(-x))``.
All grids are uniform, ``t_k = k*h``; delayed values are linearly
interpolated between nodes.
"""
import numpy as np
from libc.math cimport exp

__backend__ = "cython"


cdef inline double _s(int kind, double c0, double c1, double x) noexcept nogil:
    if kind == 0:
        return c0 + c1 * x
    return c0 + c1 / (1.0 + exp(-x))


cdef inline double _s1(int kind, double c0, double c1, double x) noexcept nogil:
    cdef double s
    if kind == 0:
        return c1
    s = 1.0 / (1.0 + exp(-x))
    return c1 * s * (1.0 - s)


cdef inline double _at(const double[::1] y, Py_ssize_t last, double h,
                       double s, double before) noexcept nogil:
    # value at time s from nodes 0..last; s <= 0 gives ``before``
    cdef double u, w
    cdef Py_ssize_t i
    if s <= 0.0:
        return before
    u = s / h
    i = <Py_ssize_t>u
    if i >= last:
        return y[last]
    w = u - i
    return y[i] + w * (y[i + 1] - y[i])


cdef inline double _ahead(const double[::1] y, Py_ssize_t k, double h,
                          double s, double slope) noexcept nogil:
    # like _at, but s may lie past node k: extrapolate with the current slope
    if s <= k * h:
        return _at(y, k, h, s, y[0])
    return y[k] + (s - k * h) * slope


def shift_limit(int kind, double c0, double c1, double x0, double theta,
                double h, Py_ssize_t n):
    """RK4 for dx/dt = S(x(t - theta)); reduces to Simpson since the
    right-hand side does not involve x(t)."""
    out = np.empty(n + 1)
    cdef double[::1] x = out
    cdef Py_ssize_t k
    cdef double t, f1, f2, f4
    x[0] = x0
    with nogil:
        for k in range(n):
            t = k * h
            f1 = _s(kind, c0, c1, _at(x, k, h, t - theta, x0))
            f2 = _s(kind, c0, c1, _at(x, k, h, t + 0.5 * h - theta, x0))
            f4 = _s(kind, c0, c1, _at(x, k, h, t + h - theta, x0))
            x[k + 1] = x[k] + h / 6.0 * (f1 + 4.0 * f2 + f4)
    return out


def scale_limit(int kind, double c0, double c1, double a, double x0,
                double theta, double h, Py_ssize_t n):
    """RK4 for dx/dt = a x(t) + S(x(theta t))."""
    out = np.empty(n + 1)
    cdef double[::1] x = out
    cdef Py_ssize_t k
    cdef double t, k1, k2, k3, k4, d2, d4
    x[0] = x0
    with nogil:
        for k in range(n):
            t = k * h
            k1 = a * x[k] + _s(kind, c0, c1, _at(x, k, h, theta * t, x0))
            d2 = _s(kind, c0, c1, _ahead(x, k, h, theta * (t + 0.5 * h), k1))
            d4 = _s(kind, c0, c1, _ahead(x, k, h, theta * (t + h), k1))
            k2 = a * (x[k] + 0.5 * h * k1) + d2
            k3 = a * (x[k] + 0.5 * h * k2) + d2
            k4 = a * (x[k] + h * k3) + d4
            x[k + 1] = x[k] + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return out


def shift_em(int kind, double c0, double c1, double x0, double theta,
             double h, double eps, const double[::1] dw):
    cdef Py_ssize_t n = dw.shape[0]
    out = np.empty(n + 1)
    cdef double[::1] x = out
    cdef Py_ssize_t k
    x[0] = x0
    with nogil:
        for k in range(n):
            x[k + 1] = x[k] + _s(kind, c0, c1, _at(x, k, h, k * h - theta, x0)) * h + eps * dw[k]
    return out


def scale_em(int kind, double c0, double c1, double a, double x0,
             double theta, double h, double eps, const double[::1] dw):
    cdef Py_ssize_t n = dw.shape[0]
    out = np.empty(n + 1)
    cdef double[::1] x = out
    cdef Py_ssize_t k
    x[0] = x0
    with nogil:
        for k in range(n):
            x[k + 1] = x[k] + (a * x[k] + _s(kind, c0, c1, _at(x, k, h, theta * k * h, x0))) * h + eps * dw[k]
    return out


cdef inline double _shift_var_rhs(int kind, double c0, double c1, double x0,
                                  double theta, double h, const double[::1] x,
                                  Py_ssize_t nx, const double[::1] z, Py_ssize_t k,
                                  double t) noexcept nogil:
    # d/dt of the theta-sensitivity at time t > theta
    cdef double u = t - theta
    cdef double xprime
    if u <= 0.0:
        # right limit at t = theta: z = 0, x = x0, x' = S(x0)
        return _s1(kind, c0, c1, x0) * (-_s(kind, c0, c1, x0))
    xprime = _s(kind, c0, c1, _at(x, nx, h, u - theta, x0))
    return _s1(kind, c0, c1, _at(x, nx, h, u, x0)) * (_at(z, k, h, u, 0.0) - xprime)


def shift_variational(int kind, double c0, double c1, double x0, double theta,
                      double h, const double[::1] x):
    """Exact theta-derivative of the shift limit trajectory ``x``.

    Solves dz/dt = S'(x(t-theta)) [z(t-theta) - x'(t-theta)], z = 0 on
    [0, theta], where x'(u) = S(x(u-theta)) for u > 0 and 0 before.
    """
    cdef Py_ssize_t nx = x.shape[0] - 1
    out = np.zeros(nx + 1)
    cdef double[::1] z = out
    cdef Py_ssize_t k
    cdef double t, t1, m, g0, g1, g2
    cdef double tol = 1e-9 * h
    with nogil:
        for k in range(nx):
            t = k * h
            t1 = t + h
            if t1 <= theta + tol:
                z[k + 1] = 0.0
            elif t < theta - tol:
                # jump of the integrand at theta: Simpson on [theta, t1] only
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
    return out


cdef inline double _scale_force(int kind, double c0, double c1, double a,
                                double x0, double theta, double h,
                                const double[::1] x, Py_ssize_t nx,
                                double t) noexcept nogil:
    # S'(x(theta t)) * t * x'(theta t), with x'(u) = a x(u) + S(x(theta u))
    cdef double u = theta * t
    cdef double xu = _at(x, nx, h, u, x0)
    cdef double xprime = a * xu + _s(kind, c0, c1, _at(x, nx, h, theta * u, x0))
    return _s1(kind, c0, c1, xu) * t * xprime


def scale_variational(int kind, double c0, double c1, double a, double x0,
                      double theta, double h, const double[::1] x):
    """Theta-derivative of the scale limit trajectory ``x`` by RK4 on
    dz/dt = a z + S'(x(theta t)) [z(theta t) + t x'(theta t)], z(0) = 0."""
    cdef Py_ssize_t nx = x.shape[0] - 1
    out = np.zeros(nx + 1)
    cdef double[::1] z = out
    cdef Py_ssize_t k
    cdef double t, tm, t1, k1, k2, k3, k4, s0, sm, s1, zm, z1
    with nogil:
        for k in range(nx):
            t = k * h
            tm = t + 0.5 * h
            t1 = t + h
            s0 = _s1(kind, c0, c1, _at(x, nx, h, theta * t, x0))
            sm = _s1(kind, c0, c1, _at(x, nx, h, theta * tm, x0))
            s1 = _s1(kind, c0, c1, _at(x, nx, h, theta * t1, x0))
            k1 = a * z[k] + s0 * _at(z, k, h, theta * t, 0.0) \
                + _scale_force(kind, c0, c1, a, x0, theta, h, x, nx, t)
            zm = _ahead(z, k, h, theta * tm, k1)
            z1 = _ahead(z, k, h, theta * t1, k1)
            k2 = a * (z[k] + 0.5 * h * k1) + sm * zm \
                + _scale_force(kind, c0, c1, a, x0, theta, h, x, nx, tm)
            k3 = a * (z[k] + 0.5 * h * k2) + sm * zm \
                + _scale_force(kind, c0, c1, a, x0, theta, h, x, nx, tm)
            k4 = a * (z[k] + h * k3) + s1 * z1 \
                + _scale_force(kind, c0, c1, a, x0, theta, h, x, nx, t1)
            z[k + 1] = z[k] + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return out


def shift_first_derivative(int kind, double c0, double c1, double x0,
                           double theta, double h, const double[::1] x,
                           const double[::1] dw):
    """Euler scheme for dy = S'(x(t-theta)) y(t-theta) dt + dW, y = 0 for t <= 0."""
    cdef Py_ssize_t n = dw.shape[0]
    cdef Py_ssize_t nx = x.shape[0] - 1
    out = np.empty(n + 1)
    cdef double[::1] y = out
    cdef Py_ssize_t k
    cdef double t
    y[0] = 0.0
    with nogil:
        for k in range(n):
            t = k * h
            y[k + 1] = y[k] + _s1(kind, c0, c1, _at(x, nx, h, t - theta, x0)) \
                * _at(y, k, h, t - theta, 0.0) * h + dw[k]
    return out


def scale_first_derivative(int kind, double c0, double c1, double a, double x0,
                           double theta, double h, const double[::1] x,
                           const double[::1] dw):
    """Euler scheme for dy = [a y + S'(x(theta t)) y(theta t)] dt + dW, y(0) = 0."""
    cdef Py_ssize_t n = dw.shape[0]
    cdef Py_ssize_t nx = x.shape[0] - 1
    out = np.empty(n + 1)
    cdef double[::1] y = out
    cdef Py_ssize_t k
    cdef double t
    y[0] = 0.0
    with nogil:
        for k in range(n):
            t = k * h
            y[k + 1] = y[k] + (a * y[k] + _s1(kind, c0, c1, _at(x, nx, h, theta * t, x0))
                               * _at(y, k, h, theta * t, 0.0)) * h + dw[k]
    return out


def shift_loglik_grid(int kind, double c0, double c1, double x0,
                      const double[::1] X, double h, const double[::1] thetas):
    """Log-likelihood sum_k S_k dX_k - 1/2 sum_k S_k^2 h with
    S_k = S(X(t_k - theta)), for each theta."""
    cdef Py_ssize_t n = X.shape[0] - 1
    cdef Py_ssize_t m = thetas.shape[0]
    out = np.empty(m)
    cdef double[::1] res = out
    cdef Py_ssize_t j, k
    cdef double th, sk, acc_dx, acc_dt
    with nogil:
        for j in range(m):
            th = thetas[j]
            acc_dx = 0.0
            acc_dt = 0.0
            for k in range(n):
                sk = _s(kind, c0, c1, _at(X, n, h, k * h - th, x0))
                acc_dx += sk * (X[k + 1] - X[k])
                acc_dt += sk * sk
            res[j] = acc_dx - 0.5 * h * acc_dt
    return out


def scale_loglik_grid(int kind, double c0, double c1, double a, double x0,
                      const double[::1] X, double h, const double[::1] thetas):
    """Theta-dependent part of the scale-model log-likelihood:
    sum S_k dX_k - 1/2 sum (S_k^2 + 2 a X_k S_k) h with S_k = S(X(theta t_k))."""
    cdef Py_ssize_t n = X.shape[0] - 1
    cdef Py_ssize_t m = thetas.shape[0]
    out = np.empty(m)
    cdef double[::1] res = out
    cdef Py_ssize_t j, k
    cdef double th, sk, acc_dx, acc_dt
    with nogil:
        for j in range(m):
            th = thetas[j]
            acc_dx = 0.0
            acc_dt = 0.0
            for k in range(n):
                sk = _s(kind, c0, c1, _at(X, n, h, th * k * h, x0))
                acc_dx += sk * (X[k + 1] - X[k])
                acc_dt += sk * sk + 2.0 * a * X[k] * sk
            res[j] = acc_dx - 0.5 * h * acc_dt
    return out
