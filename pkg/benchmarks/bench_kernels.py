"""Compare the compiled kernels with the pure-Python fallback.

Run ``python3 benchmarks/bench_kernels.py``. Each kernel is timed on the
same inputs with both backends; the table reports the best of several
repeats and the speedup of the compiled version.
"""
import argparse
import timeit

import numpy as np

from delayest import _pykernels as py

try:
    from delayest import _core as core
except ImportError:  # extension not built
    core = None

SIGMOID = (1, 2.0, 1.0)


def cases(n: int, h: float):
    rng = np.random.default_rng(0)
    dw = rng.normal(0.0, np.sqrt(h), n)
    x_shift = np.asarray(py.shift_limit(*SIGMOID, 0.0, 0.5, h, n))
    x_scale = np.asarray(py.scale_limit(*SIGMOID, 0.0, 0.0, 0.5, h, n))
    X = np.asarray(py.shift_em(*SIGMOID, 0.0, 0.5, h, 0.01, dw))
    thetas = np.linspace(0.2, 0.8, 32)
    return {
        "shift_limit": (*SIGMOID, 0.0, 0.5, h, n),
        "scale_limit": (*SIGMOID, 0.0, 0.0, 0.5, h, n),
        "shift_em": (*SIGMOID, 0.0, 0.5, h, 0.01, dw),
        "scale_em": (*SIGMOID, 0.0, 0.0, 0.5, h, 0.01, dw),
        "shift_variational": (*SIGMOID, 0.0, 0.5, h, x_shift),
        "scale_variational": (*SIGMOID, 0.0, 0.0, 0.5, h, x_scale),
        "shift_first_derivative": (*SIGMOID, 0.0, 0.5, h, x_shift, dw),
        "scale_first_derivative": (*SIGMOID, 0.0, 0.0, 0.5, h, x_scale, dw),
        "shift_loglik_grid": (*SIGMOID, 0.0, X, h, thetas),
        "scale_loglik_grid": (*SIGMOID, 0.0, 0.0, X, h, thetas),
    }


def best_time(fn, args, repeat: int) -> float:
    timer = timeit.Timer(lambda: fn(*args))
    number, _ = timer.autorange()
    return min(timer.repeat(repeat=repeat, number=number)) / number


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--steps", type=int, default=3000, help="grid steps per kernel call")
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args(argv)
    h = 3.0 / args.steps
    print(f"grid steps: {args.steps}")
    print(f"{'kernel':<24}{'python [ms]':>14}{'cython [ms]':>14}{'speedup':>10}")
    for name, kargs in cases(args.steps, h).items():
        t_py = best_time(getattr(py, name), kargs, args.repeat)
        if core is None:
            print(f"{name:<24}{1e3 * t_py:>14.3f}{'n/a':>14}{'n/a':>10}")
            continue
        t_c = best_time(getattr(core, name), kargs, args.repeat)
        print(f"{name:<24}{1e3 * t_py:>14.3f}{1e3 * t_c:>14.4f}{t_py / t_c:>9.0f}x")


if __name__ == "__main__":
    main()
