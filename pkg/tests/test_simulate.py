import json
from dataclasses import replace

import numpy as np
import pytest

from delayest.errors import DelayEstError
from delayest.limit import Trajectory, solve_scale_limit, solve_shift_limit
from delayest.simulate import (gen_noise, noiseless_path, path_csv, read_path, simulate,
                               simulate_first_derivative, simulate_scale, simulate_shift,
                               write_path)

from conftest import ou_model, pantograph_model, scale_model, sigmoid_shift_model


def test_noise_is_deterministic_and_separated():
    a = gen_noise(11, 0, 1000, 0.01).increments
    assert np.array_equal(a, gen_noise(11, 0, 1000, 0.01).increments)
    assert not np.array_equal(a, gen_noise(11, 1, 1000, 0.01).increments)
    assert not np.array_equal(a, gen_noise(12, 0, 1000, 0.01).increments)


def test_noise_is_addressable_by_index():
    full = gen_noise(3, 4, 50, 0.1).increments
    for start in (1, 2, 3, 17):
        part = gen_noise(3, 4, 50 - start, 0.1, start=start).increments
        assert np.array_equal(full[start:], part)


def test_noise_variance():
    dw = gen_noise(2024, 0, 10**6, 0.01).increments
    assert np.var(dw) == pytest.approx(0.01, abs=2e-4)
    assert abs(np.mean(dw)) < 5 * 0.1 / 1000


def test_noise_rejects_bad_input():
    with pytest.raises(DelayEstError):
        gen_noise(1, 0, 0, 0.1)
    with pytest.raises(DelayEstError):
        gen_noise(-1, 0, 5, 0.1)


def test_path_shape_and_start():
    m = ou_model()
    p = simulate_shift(m, 0.5, 1e-3, 1, 0)
    assert p.values.size == int(np.floor(m.T / 1e-3)) + 1
    assert p.values[0] == m.x0
    assert p.envelope()["model_digest"] == p.model_digest


def test_path_is_bit_identical_on_rerun():
    m = scale_model()
    a = simulate_scale(m, 0.4, 1e-3, 5, 9)
    b = simulate_scale(m, 0.4, 1e-3, 5, 9)
    assert a.values.tobytes() == b.values.tobytes()


def test_zero_noise_shift_matches_limit():
    h = 1e-3
    for m in (ou_model(eps=0.0), sigmoid_shift_model(eps=0.0)):
        p = simulate_shift(m, 0.5, h, 0, 0)
        x = solve_shift_limit(m, 0.5, h)
        assert np.max(np.abs(p.values - x.values)) <= 5 * h


def test_zero_noise_scale_matches_limit():
    h = 1e-3
    for m in (pantograph_model(eps=0.0), scale_model(eps=0.0)):
        p = simulate_scale(m, 0.5, h, 0, 0)
        x = solve_scale_limit(m, 0.5, h)
        assert np.max(np.abs(p.values - x.values)) <= 5 * h


def test_noiseless_path_is_the_limit():
    m = pantograph_model()
    p = noiseless_path(m, 0.5, 1e-3)
    assert np.array_equal(p.values, solve_scale_limit(m, 0.5, 1e-3).values)


def test_simulation_preconditions():
    m = ou_model()
    with pytest.raises(DelayEstError) as e:
        simulate_shift(m, 0.5, 0.05, 0, 0)
    assert e.value.code == "STEP_TOO_COARSE"
    with pytest.raises(DelayEstError) as e:
        simulate_shift(m, 0.9, 1e-3, 0, 0)
    assert e.value.code == "THETA_OUT_OF_WINDOW"
    with pytest.raises(DelayEstError):
        simulate_scale(m, 0.5, 1e-3, 0, 0)


def test_sup_deviation_is_linear_in_eps():
    m = sigmoid_shift_model()
    h = 1e-3
    ref = simulate(replace(m, epsilon=0.0), 0.5, h, 0, 0).values
    eps = np.array([0.1, 0.05, 0.025])
    sups = []
    for e in eps:
        me = replace(m, epsilon=e)
        sups.append(np.mean([np.max(np.abs(simulate(me, 0.5, h, 1, r).values - ref))
                             for r in range(200)]))
    assert np.polyfit(np.log(eps), np.log(sups), 1)[0] == pytest.approx(1.0, abs=0.1)


def test_second_moment_bound():
    m = scale_model()
    h = 1e-3
    ref = simulate(replace(m, epsilon=0.0), 0.5, h, 0, 0).values[-1]

    def msq(e):
        me = replace(m, epsilon=e)
        return np.mean([(simulate(me, 0.5, h, 4, r).values[-1] - ref) ** 2 for r in range(500)])

    c = msq(0.1) / 0.1**2
    assert msq(0.05) <= c * 0.05**2


def test_first_derivative_equals_brownian_before_delay():
    m = sigmoid_shift_model()
    h = 1e-3
    x = solve_shift_limit(m, 0.5, h)
    noise = gen_noise(7, 0, 3000, h)
    x1 = simulate_first_derivative(m, 0.5, x, noise)
    w = np.concatenate(([0.0], np.cumsum(noise.increments)))
    k = int(round(0.5 / h))
    assert np.array_equal(x1.values[:k + 1], w[:k + 1])


def test_first_derivative_zero_noise():
    m = pantograph_model()
    x = solve_scale_limit(m, 0.5, 1e-3)
    noise = replace(gen_noise(1, 0, 2000, 1e-3), increments=np.zeros(2000))
    assert np.all(simulate_first_derivative(m, 0.5, x, noise).values == 0.0)


def test_first_derivative_grid_mismatch():
    m = ou_model()
    x = solve_shift_limit(m, 0.5, 1e-3)
    with pytest.raises(DelayEstError) as e:
        simulate_first_derivative(m, 0.5, x, gen_noise(1, 0, 1000, 2e-3))
    assert e.value.code == "GRID_MISMATCH"


def test_coupling_with_first_derivative():
    m = sigmoid_shift_model()
    h, n, th = 1e-3, 3000, 0.5
    ref = simulate(replace(m, epsilon=0.0), th, h, 0, 0).values
    x = Trajectory(h, ref, pre_history=m.x0)
    eps = np.array([0.1, 0.05, 0.025])
    gaps = []
    for e in eps:
        me = replace(m, epsilon=e)
        g = []
        for r in range(200):
            noise = gen_noise(1, r, n, h)
            X = simulate(me, th, h, 1, r, noise=noise).values
            x1 = simulate_first_derivative(me, th, x, noise).values
            g.append(np.mean(((X - ref) / e - x1) ** 2))
        gaps.append(np.mean(g))
    assert np.polyfit(np.log(eps), np.log(gaps), 1)[0] >= 1.8


def test_halving_step_changes_path_by_order_h():
    m = sigmoid_shift_model()
    diffs = []
    fine = gen_noise(8, 0, 12000, 0.25e-3).increments
    for h, k in ((1e-3, 4), (0.5e-3, 2)):
        coarse_dw = fine.reshape(-1, k).sum(axis=1)
        fine_dw = fine.reshape(-1, k // 2).sum(axis=1)
        n = coarse_dw.size
        noise_c = replace(gen_noise(8, 0, n, h), increments=coarse_dw)
        noise_f = replace(gen_noise(8, 0, 2 * n, h / 2), increments=fine_dw)
        pc = simulate(m, 0.5, h, 8, 0, noise=noise_c).values
        pf = simulate(m, 0.5, h / 2, 8, 0, noise=noise_f).values
        diffs.append(np.max(np.abs(pc - pf[::2])))
    assert diffs[0] / diffs[1] == pytest.approx(2.0, rel=0.25)


def test_path_files_round_trip(tmp_path):
    m = ou_model()
    p = simulate_shift(m, 0.5, 1e-3, 3, 2)
    write_path(p, tmp_path / "p.csv", tmp_path / "p.json")
    env = json.loads((tmp_path / "p.json").read_text())
    assert env == {"seed": 3, "rep": 2, "h": 1e-3, "n": 2000, "model_digest": p.model_digest}
    q = read_path(tmp_path / "p.csv", env)
    assert np.array_equal(q.values, p.values)
    assert (q.seed, q.rep, q.h) == (3, 2, 1e-3)
    assert path_csv(p).splitlines()[0] == "t,x"
