"""Elementwise solver kernels with a compiled fast path.

A Cython extension provides the hot per-iteration kernels; when it is not
built (no compiler at install time) the numpy implementations are used
instead. The choice happens once at import, but tests and benchmarks can
force a backend with :func:`use_backend`.
"""

from contextlib import contextmanager

from . import _numpy

_BACKENDS = {"numpy": _numpy}
try:
    from . import _speedups

    _BACKENDS["compiled"] = _speedups
except ImportError:
    _speedups = None

_active = "compiled" if _speedups is not None else "numpy"


def active_backend() -> str:
    return _active


def available_backends() -> tuple[str, ...]:
    return tuple(_BACKENDS)


def set_backend(name: str) -> None:
    if name not in _BACKENDS:
        raise ValueError(f"unknown backend {name!r}; available: {sorted(_BACKENDS)}")
    global _active
    _active = name


@contextmanager
def use_backend(name: str):
    previous = _active
    set_backend(name)
    try:
        yield
    finally:
        set_backend(previous)


def obstacle_update(x, y, xi_x, xi_y, a, b):
    return _BACKENDS[_active].obstacle_update(x, y, xi_x, xi_y, a, b)


def accel_update(xddot, yddot, a_max):
    return _BACKENDS[_active].accel_update(xddot, yddot, a_max)


def v_update(xdot, ydot, v_min, v_max):
    return _BACKENDS[_active].v_update(xdot, ydot, v_min, v_max)


def assemble_g(xi_x, xi_y, alpha, d, alpha_a, d_a, v, psi, a, b):
    return _BACKENDS[_active].assemble_g(xi_x, xi_y, alpha, d, alpha_a, d_a, v, psi, a, b)


def residual_vectors(x, y, xdot, ydot, xddot, yddot, psi,
                     xi_x, xi_y, alpha, d, alpha_a, d_a, v, a, b):
    return _BACKENDS[_active].residual_vectors(
        x, y, xdot, ydot, xddot, yddot, psi,
        xi_x, xi_y, alpha, d, alpha_a, d_a, v, a, b,
    )


def tail_update(x, y, xdot, ydot, xddot, yddot, psi,
                xi_x, xi_y, v_min, v_max, a_max, a, b):
    return _BACKENDS[_active].tail_update(
        x, y, xdot, ydot, xddot, yddot, psi,
        xi_x, xi_y, v_min, v_max, a_max, a, b,
    )


def tail_core(x, y, xdot, ydot, xddot, yddot, psi,
              xi_x, xi_y, v_min, v_max, a_max, a, b):
    return _BACKENDS[_active].tail_core(
        x, y, xdot, ydot, xddot, yddot, psi,
        xi_x, xi_y, v_min, v_max, a_max, a, b,
    )
