"""Backend selection for the inner loops.

The compiled ``_core`` extension is used when it imports; otherwise the
pure-Python ``_pykernels`` module. Set ``DELAYEST_PURE_PYTHON=1`` to force
the fallback.
"""
import os

if os.environ.get("DELAYEST_PURE_PYTHON", "") not in ("", "0"):
    from . import _pykernels as _impl
else:
    try:
        from . import _core as _impl
    except ImportError:  # extension not built
        from . import _pykernels as _impl

BACKEND = _impl.__backend__

shift_limit = _impl.shift_limit
scale_limit = _impl.scale_limit
shift_em = _impl.shift_em
scale_em = _impl.scale_em
shift_variational = _impl.shift_variational
scale_variational = _impl.scale_variational
shift_first_derivative = _impl.shift_first_derivative
scale_first_derivative = _impl.scale_first_derivative
shift_loglik_grid = _impl.shift_loglik_grid
scale_loglik_grid = _impl.scale_loglik_grid

__all__ = [
    "BACKEND", "shift_limit", "scale_limit", "shift_em", "scale_em",
    "shift_variational", "scale_variational", "shift_first_derivative",
    "scale_first_derivative", "shift_loglik_grid", "scale_loglik_grid",
]
