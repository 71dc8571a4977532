"""Stochastic calculus via regularization on discrete paths.

Forward, backward and symmetric smoothed integrals and the
epsilon-quadratic variation, as left-endpoint Riemann sums with the
truncation ``(s - eps)+`` at the origin.  The forward-looking windows
require the integrator path to extend ``eps`` beyond the evaluation time;
drivers simulate with that margin so no boundary fudging enters the
limits under study.
"""

from __future__ import annotations

import numpy as np

from .kernels import DomainError
from .rosenblatt import SamplePath

__all__ = [
    "regularized_integral",
    "quadratic_variation",
    "pathwise_ito_residual",
    "DERIVATIVES",
]


def _as_values(x) -> np.ndarray:
    return x.values if isinstance(x, SamplePath) else np.asarray(x, dtype=float)


def _steps(path_len: int, grid, eps: float, t: float) -> tuple[int, int]:
    delta = grid.delta
    e = round(eps / delta)
    if e < 1 or abs(e * delta - eps) > 1e-9 * max(grid.T, 1.0):
        raise DomainError("eps must be a positive multiple of the grid step")
    k = round(t / delta)
    if abs(k * delta - t) > 1e-9 * max(grid.T, 1.0) or k < 0:
        raise DomainError(f"time {t} is not a grid point")
    return e, k


def regularized_integral(y, x, eps: float, mode: str, t: float,
                         grid=None) -> float:
    """Discretised ``I^-/I^+/I^0(eps, Y, dX)(t)``.

    ``y`` and ``x`` are paths on a common grid (``SamplePath`` or plain
    vectors with ``grid`` supplied).  Forward and symmetric modes read
    ``x`` up to ``t + eps``: the paths must carry that margin.
    """
    if grid is None:
        grid = y.grid if isinstance(y, SamplePath) else x.grid
    yv, xv = _as_values(y), _as_values(x)
    if yv.shape != xv.shape:
        raise DomainError("paths must share the grid")
    e, k = _steps(xv.size, grid, eps, t)
    if mode not in ("forward", "backward", "symmetric"):
        raise DomainError(f"unknown mode {mode!r}")
    delta = grid.delta
    j = np.arange(k)
    if mode in ("forward", "symmetric"):
        if k - 1 + e >= xv.size:
            raise DomainError("path must extend to t + eps for forward windows")
        fwd = float(np.sum(yv[j] * (xv[j + e] - xv[j])) * delta / eps)
        if mode == "forward":
            return fwd
    back_idx = np.maximum(j - e, 0)
    back = float(np.sum(yv[j] * (xv[j] - xv[back_idx])) * delta / eps)
    if mode == "backward":
        return back
    return 0.5 * (fwd + back)


def quadratic_variation(x, eps: float, t: float, grid=None) -> float:
    """``C_eps(X, X)(t)``: mean forward-square increments, scaled by ``1/eps``.

    The forward-difference form is the one whose expectation equals
    ``t eps^{2H-1}`` exactly for the Rosenblatt process.
    """
    if grid is None:
        grid = x.grid
    xv = _as_values(x)
    e, k = _steps(xv.size, grid, eps, t)
    if k - 1 + e >= xv.size:
        raise DomainError("path must extend to t + eps")
    j = np.arange(k)
    return float(np.sum((xv[j + e] - xv[j]) ** 2) * grid.delta / eps)


DERIVATIVES = {
    "identity": (lambda z: z, lambda z: np.ones_like(z)),
    "square": (lambda z: z ** 2, lambda z: 2.0 * z),
    "cube": (lambda z: z ** 3, lambda z: 3.0 * z ** 2),
}


def pathwise_ito_residual(f_id, z, eps: float, t: float | None = None,
                          grid=None) -> float:
    """``|f(Z_t) - f(Z_0) - int_0^t f'(Z) d^0 Z|`` at smoothing level ``eps``.

    ``f_id`` is one of ``identity``, ``square``, ``cube`` or a pair
    ``(f, f')`` of callables.  ``t`` defaults to the last grid point that
    leaves an ``eps`` margin inside the path.
    """
    if grid is None:
        grid = z.grid
    zv = _as_values(z)
    f, fprime = DERIVATIVES[f_id] if isinstance(f_id, str) else f_id
    e = round(eps / grid.delta)
    if t is None:
        t = (zv.size - 1 - e) * grid.delta
    k = round(t / grid.delta)
    sym = regularized_integral(fprime(zv), zv, eps, "symmetric", t, grid=grid)
    return float(abs(f(zv[k]) - f(zv[0]) - sym))
