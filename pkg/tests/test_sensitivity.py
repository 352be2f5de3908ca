import numpy as np
import pytest
from scipy.integrate import quad, simpson

from delayest.errors import DelayEstError
from delayest.limit import solve_scale_limit, solve_shift_limit
from delayest.sensitivity import (fisher_csv, fisher_pantograph, fisher_pantograph_running,
                                  fisher_scale, fisher_shift, h_kernel_scale, h_kernel_shift,
                                  h_kernel_t_derivative_scale, h_kernel_t_derivative_shift,
                                  pantograph_sensitivity, q_tau, shift_sensitivity)

from conftest import ou_model, pantograph_model, scale_model, sigmoid_shift_model

DELTA = 1e-5


def _fd_shift(m, th, h):
    up = solve_shift_limit(m, th + DELTA, h, check_window=False).values
    dn = solve_shift_limit(m, th - DELTA, h, check_window=False).values
    return (up - dn) / (2 * DELTA)


def _fd_scale(m, th, h):
    up = solve_scale_limit(m, th + DELTA, h, check_window=False).values
    dn = solve_scale_limit(m, th - DELTA, h, check_window=False).values
    return (up - dn) / (2 * DELTA)


def test_shift_sensitivity_linear_segment():
    m = ou_model(T=3.0, window=(0.2, 1.0))
    x = solve_shift_limit(m, 0.3, 1e-4)
    z = shift_sensitivity(m.drift, x, 0.3)
    assert z(0.5) == pytest.approx(-0.2, abs=1e-4)
    assert z(0.3) == 0.0
    assert z(0.1) == 0.0


def test_integral_form_agrees_before_two_theta_only():
    m = sigmoid_shift_model()
    th = 0.4
    x = solve_shift_limit(m, th, 1e-4)
    exact = shift_sensitivity(m.drift, x, th)
    printed = shift_sensitivity(m.drift, x, th, form="integral")
    t1 = np.linspace(th, 2 * th, 9)
    assert np.allclose(exact(t1), printed(t1), atol=1e-7)
    # past 2 theta the printed integral drops the feedback term
    assert abs(exact(2.9) - printed(2.9)) > 1e-3


@pytest.mark.parametrize("model", [ou_model(T=3.0, window=(0.2, 1.0)), sigmoid_shift_model()],
                         ids=["ou", "sigmoid"])
def test_shift_sensitivity_matches_finite_differences(model):
    h = 1e-4
    for th in np.linspace(0.25, 0.95, 10):
        z = shift_sensitivity(model.drift, solve_shift_limit(model, th, h), th)
        assert np.max(np.abs(z.values - _fd_shift(model, th, h))) <= 1e-4


def test_pantograph_sensitivity_matches_finite_differences():
    m = pantograph_model(a=0.3, b=1.0)
    h = 1e-4
    for th in np.linspace(0.15, 0.85, 10):
        z = pantograph_sensitivity(m, solve_scale_limit(m, th, h), th)
        assert np.max(np.abs(z.values - _fd_scale(m, th, h))) <= 1e-4


def test_pantograph_sensitivity_point_and_start():
    m = pantograph_model()
    x = solve_scale_limit(m, 0.4, 1e-4)
    z = pantograph_sensitivity(m, x, 0.4)
    assert z(0.0) == 0.0
    assert z(0.5) == pytest.approx(_fd_scale(m, 0.4, 1e-4)[5000], abs=1e-4)
    ts = np.array([0.01, 0.02, 0.04])
    assert np.allclose(z(ts) / (0.5 * ts**2), 1.0, atol=0.05)


def test_h_kernel_shift_values():
    m = ou_model(T=1.0, window=(0.2, 0.9))
    x = solve_shift_limit(m, 0.6, 1e-4)
    assert h_kernel_shift(m.drift, x, 0.6, 0.8) == pytest.approx(1.0, abs=1e-12)
    # linear drift: S'' = 0 and the indicator term is off before 2 theta
    assert h_kernel_t_derivative_shift(m.drift, x, 0.6, np.array([0.7, 0.9, 1.0])) == \
        pytest.approx([0.0, 0.0, 0.0])


def test_h_kernel_shift_derivative_matches_finite_differences():
    m = sigmoid_shift_model()
    th = 0.5
    x = solve_shift_limit(m, th, 1e-5)
    t = np.array([0.7, 0.95, 1.3, 1.8, 2.6])
    d = 1e-4
    fd = (h_kernel_shift(m.drift, x, th, t + d) - h_kernel_shift(m.drift, x, th, t - d)) / (2 * d)
    assert np.allclose(fd, h_kernel_t_derivative_shift(m.drift, x, th, t), atol=1e-4)


def test_h_kernel_scale_and_derivative():
    m = scale_model()
    th = 0.5
    x = solve_scale_limit(m, th, 1e-5)
    assert h_kernel_scale(m.drift, x, th, 0.0) == 0.0
    d = 1e-4
    fd = (h_kernel_scale(m.drift, x, th, 1 + d) - h_kernel_scale(m.drift, x, th, 1 - d)) / (2 * d)
    assert h_kernel_t_derivative_scale(m.drift, x, th, 1.0) == pytest.approx(fd, abs=1e-4)


def test_fisher_shift_closed_form():
    m = ou_model(T=1.0, window=(0.2, 0.9))
    assert fisher_shift(m, 0.6, 1e-4).value == pytest.approx(0.4, abs=1e-4)
    m2 = ou_model(x0=2.0, T=1.0, window=(0.2, 0.9))
    assert fisher_shift(m2, 0.6, 1e-4).value == pytest.approx(4 * 0.4, abs=4e-4)


def test_fisher_shift_ou_formula():
    # gamma^4 int x_{t - 2 theta}^2 dt with the series oracle
    from delayest.limit import ou_series
    g, th = 0.8, 0.5
    m = ou_model(gamma=g, T=2.0)
    f = lambda t: g**4 * (ou_series(g, th, 1.0, t - 2 * th) if t > 2 * th else 1.0) ** 2
    expected = quad(f, th, 2 * th)[0] + quad(f, 2 * th, 2.0, limit=200)[0]
    assert fisher_shift(m, th, 1e-4).value == pytest.approx(expected, rel=1e-6)


def test_fisher_empty_range_is_nonpositive():
    m = ou_model(T=1.0, window=(0.2, 0.9))
    with pytest.raises(DelayEstError) as e:
        fisher_shift(m, 1.0, 1e-3)
    assert e.value.code == "NONPOSITIVE_INFO"


def test_fisher_pantograph_against_simpson():
    m = pantograph_model(T=1.0)
    h = 1e-4
    value = fisher_pantograph(m, 0.5, 0.0, h).value
    x = solve_scale_limit(m, 0.5, 1e-5)
    t = np.linspace(0, 1, 20001)
    assert value == pytest.approx(simpson(t**2 * x(0.25 * t) ** 2, x=t), abs=1e-6)


def test_fisher_pantograph_nested_ranges():
    m = pantograph_model()
    full = fisher_pantograph(m, 0.5, 0.0, 1e-3).value
    for tau in (0.1, 0.5, 1.5):
        assert fisher_pantograph(m, 0.5, tau, 1e-3).value <= full
    with pytest.raises(DelayEstError) as e:
        fisher_pantograph(m, 0.5, m.T - 1e-9, 1e-3)
    assert e.value.code == "NONPOSITIVE_INFO"


def test_running_information_forms():
    m = pantograph_model()
    x = solve_scale_limit(m, 0.5, 1e-3)
    times = [0.5, 1.0, 2.0]
    fisher_form = fisher_pantograph_running(m, 0.5, 0.2, times, x, form="fisher")
    assert fisher_form[-1] == pytest.approx(fisher_pantograph(m, 0.5, 0.2, 1e-3, x_traj=x).value,
                                            rel=1e-12)
    running = fisher_pantograph_running(m, 0.5, 0.2, times, x)
    assert np.all(np.diff(running) > 0)


def test_fisher_scale_equals_h_squared_integral():
    m = scale_model()
    x = solve_scale_limit(m, 0.5, 1e-3)
    info = fisher_scale(m, 0.5, 1e-3, x_traj=x).value
    t = np.linspace(0, 3, 3001)
    assert info == pytest.approx(np.trapezoid(h_kernel_scale(m.drift, x, 0.5, t) ** 2, t), rel=1e-12)
    assert info > 0


def test_fisher_scale_constant_drift_is_nonpositive():
    from delayest.model import ScaleModel, ThetaWindow, lookup
    m = ScaleModel(lookup("affine", c0=1.0, c1=0.0), 1.0, 2.0, ThetaWindow(0.1, 0.9), 0.01)
    with pytest.raises(DelayEstError) as e:
        fisher_scale(m, 0.5, 1e-3)
    assert e.value.code == "NONPOSITIVE_INFO"


@pytest.mark.parametrize("model,fn", [(ou_model(), lambda m, th: fisher_shift(m, th, 1e-3)),
                                      (pantograph_model(), lambda m, th: fisher_pantograph(m, th, 0.0, 1e-3)),
                                      (scale_model(), lambda m, th: fisher_scale(m, th, 1e-3))],
                         ids=["shift", "pantograph", "scale"])
def test_information_positive_across_window(model, fn):
    thetas = np.linspace(model.window.alpha, model.window.beta, 50)
    assert min(fn(model, th).value for th in thetas) > 0


@pytest.mark.parametrize("model,fn", [(sigmoid_shift_model(), lambda m, h: fisher_shift(m, 0.45, h)),
                                      (pantograph_model(), lambda m, h: fisher_pantograph(m, 0.45, 0.1, h)),
                                      (scale_model(), lambda m, h: fisher_scale(m, 0.45, h))],
                         ids=["shift", "pantograph", "scale"])
def test_information_grid_refinement(model, fn):
    # a second-order rule has successive-difference ratio -> 4 exactly, so the
    # bound gets 1% slack for rounding and higher-order terms
    i1, i2, i4 = (fn(model, h).value for h in (2e-3, 1e-3, 5e-4))
    assert abs(i1 - i2) <= 4.04 * abs(i2 - i4) + 1e-13


def test_q_tau_small_t():
    m = pantograph_model()
    q = q_tau(m, 0.5, 0.1, 1e-5)
    assert q == pytest.approx(0.1**5 / 20, rel=0.1)
    c = m.b**2 * m.x0**2 * (m.a + m.b) ** 2 / 20 * 0.8
    for tau in (0.02, 0.05, 0.1):
        assert q_tau(m, 0.5, tau, 1e-5) >= c * tau**5
    qs = [q_tau(m, 0.5, tau, 1e-3) for tau in (0.1, 0.5, 1.0, 2.0)]
    assert np.all(np.diff(qs) >= 0)


def test_fisher_csv_format():
    text = fisher_csv([(0.5, 1.25), (0.6, 0.1)])
    assert text.splitlines() == ["theta,info", "0.5,1.25", "0.6,0.1"]
