"""Wiener integrals of deterministic integrands with respect to Z.

Step functions are the basic integrands: their Wiener integral is the
level-weighted sum of process increments, equivalently the double Wiener
integral of the transfer-operator image of the step function.  The inner
product behind the isometry reduces to

    <f, g>  =  H(2H-1) int int f(u) g(v) |u-v|^{2H-2} du dv,

whose restriction to rectangles is elementary, so step-function norms are
exact.  The module also carries the independence diagnostic (the sup-norm
of the one-index contraction of the two chaos kernels) and the
Langevin-equation solution driven by Z.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import chaos, rosenblatt
from .chaos import GridKernel, contraction_1
from .rosenblatt import _path_profile
from .kernels import (
    DomainError,
    HurstParams,
    TimeGrid,
    hybrid_calibration,
    prefix_tables,
)

__all__ = [
    "StepFunction",
    "norm_H",
    "norm_H_abs",
    "rectangle_weight",
    "wiener_integral",
    "grid_chaos_kernel",
    "independence_contraction",
    "ou_path",
    "ou_weights",
]


@dataclass(frozen=True)
class StepFunction:
    """Piecewise-constant ``f = sum a_i 1_{(b_i, b_{i+1}]}`` on ``[0, T]``."""

    breakpoints: tuple
    levels: tuple

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=float)
        if bp.ndim != 1 or bp.size < 2 or np.any(np.diff(bp) <= 0):
            raise DomainError("breakpoints must be strictly increasing")
        if len(self.levels) != bp.size - 1:
            raise DomainError("need one level per breakpoint interval")

    @classmethod
    def indicator(cls, a: float, b: float) -> "StepFunction":
        return cls(breakpoints=(a, b), levels=(1.0,))

    @classmethod
    def from_cells(cls, grid: TimeGrid, cell_levels) -> "StepFunction":
        vals = tuple(float(v) for v in cell_levels)
        if len(vals) != grid.n:
            raise DomainError("need one level per grid cell")
        return cls(breakpoints=tuple(grid.nodes), levels=vals)

    def cell_levels(self, grid: TimeGrid) -> np.ndarray:
        """Levels per grid cell; breakpoints must sit on the grid."""
        bp = np.asarray(self.breakpoints)
        idx = []
        for b in bp:
            k = round(b / grid.delta)
            if abs(k * grid.delta - b) > 1e-9 * max(grid.T, 1.0):
                raise DomainError(f"breakpoint {b} is off the grid")
            idx.append(int(k))
        out = np.zeros(grid.n)
        for i, lev in enumerate(self.levels):
            out[idx[i]:idx[i + 1]] = lev
        return out


def rectangle_weight(h: float, a: float, b: float, c: float, d: float) -> float:
    """``int_a^b int_c^d |u-v|^{2H-2} dv du`` in closed form."""
    def phi(x):
        return abs(x) ** (2.0 * h) / (2.0 * h * (2.0 * h - 1.0))
    return phi(b - c) + phi(a - d) - phi(b - d) - phi(a - c)


def _pair_levels(f: StepFunction):
    bp = np.asarray(f.breakpoints, dtype=float)
    return bp, np.asarray(f.levels, dtype=float)


def norm_H(params: HurstParams, f: StepFunction, g: StepFunction | None = None) -> float:
    """Squared norm ``<f, f>`` (or cross inner product with ``g``), exactly.

    ``norm_H(p, indicator(0, t))`` equals ``t^{2H}``.
    """
    h = params.h
    bp_f, lev_f = _pair_levels(f)
    bp_g, lev_g = _pair_levels(g if g is not None else f)
    acc = 0.0
    for i, ai in enumerate(lev_f):
        if ai == 0.0:
            continue
        for j, bj in enumerate(lev_g):
            if bj == 0.0:
                continue
            acc += ai * bj * rectangle_weight(h, bp_f[i], bp_f[i + 1],
                                              bp_g[j], bp_g[j + 1])
    return h * (2.0 * h - 1.0) * acc


def norm_H_abs(params: HurstParams, f: StepFunction) -> float:
    """Norm of ``|f|`` -- the function-space variant used in diagnostics."""
    bp, lev = _pair_levels(f)
    return norm_H(params, StepFunction(tuple(bp), tuple(np.abs(lev))))


def wiener_integral(params: HurstParams, f: StepFunction,
                    db: chaos.GaussianIncrements, *, method: str = "increments",
                    mode: str = "calibrated") -> float:
    """``int f dZ`` driven by the given Brownian increments.

    ``method="increments"`` sums level-weighted increments of the kernel
    path built from ``db``; ``method="chaos"`` evaluates the second-chaos
    quadratic form of the assembled grid kernel.  The two agree to
    rounding because they are the same bilinear form.
    """
    grid = db.grid
    lev = f.cell_levels(grid)
    profile = _path_profile(grid.n)
    xi = None
    if mode == "calibrated":
        xi = chaos.topup_normals(grid, db.seed)[:, None]
    if method == "increments":
        z = rosenblatt._chaos_paths(params, grid, db.values[:, None], xi,
                                    mode=mode)[:, 0]
        return float(lev @ np.diff(z))
    if method != "chaos":
        raise DomainError(f"unknown method {method!r}")
    tabs = prefix_tables(params, grid, profile)
    gam = np.ones(grid.n + 1)
    if mode == "calibrated":
        gam = hybrid_calibration(params, grid, profile).gamma_array()
    t_f = np.zeros((grid.n, grid.n))
    for m, a in enumerate(lev):
        if a != 0.0:
            t_f += a * (gam[m + 1] * tabs[m + 1] - gam[m] * tabs[m])
    b = db.values
    val = b @ t_f @ b - grid.delta * np.trace(t_f)
    if mode == "offdiag":
        val = b @ t_f @ b - np.diag(t_f) @ (b * b)
    if mode == "calibrated":
        dg = rosenblatt._topup_increments(params, grid, xi, profile)
        val = val + float(lev @ dg[:, 0])
    return float(val)


def grid_chaos_kernel(params: HurstParams, grid: TimeGrid,
                      f: StepFunction) -> GridKernel:
    """Grid version of the transfer-operator image ``I(f)`` as an order-2 kernel."""
    lev = f.cell_levels(grid)
    tabs = prefix_tables(params, grid, _path_profile(grid.n))
    t_f = np.zeros((grid.n, grid.n))
    for m, a in enumerate(lev):
        if a != 0.0:
            t_f += a * (tabs[m + 1] - tabs[m])
    return GridKernel(grid=grid, order=2, values=t_f)


def independence_contraction(params: HurstParams, grid: TimeGrid,
                             f: StepFunction, g: StepFunction) -> float:
    """Sup-norm of the one-index contraction of the two chaos kernels.

    Zero is necessary and sufficient for independence of the two Wiener
    integrals.  Disjoint supports do *not* make it vanish: the
    ``|u-v|^{2H'-2}`` coupling keeps the contraction (and the covariance)
    strictly positive for nonnegative integrands.
    """
    fk = grid_chaos_kernel(params, grid, f)
    gk = grid_chaos_kernel(params, grid, g)
    return float(np.max(np.abs(contraction_1(fk, gk).values)))


# ----------------------------------------------------------------------
# Langevin equation driven by Z


def ou_weights(lam: float, grid: TimeGrid, t_index: int) -> np.ndarray:
    """Cell weights ``e^{-lam (t_k - mid_m)}`` for the variation-of-constants sum."""
    mids = grid.midpoints[:t_index]
    return np.exp(-lam * (t_index * grid.delta - mids))


def ou_path(params: HurstParams, lam: float, sigma: float, xi: float,
            grid: TimeGrid, seed: int, *, stationary: bool = False,
            burn_in_factor: float = 10.0,
            z_values: np.ndarray | None = None) -> rosenblatt.SamplePath:
    """Langevin solution ``X(t) = e^{-lam t}(xi + sigma int_0^t e^{lam u} dZ)``.

    With ``stationary=True`` the initial condition is replaced by the
    integral over a burn-in window of length ``burn_in_factor / lam``,
    truncating the moving-average representation; the truncation error
    decays like ``e^{-burn_in_factor}``.  ``z_values`` injects a
    pre-simulated driving path sharing the grid (used by the SPDE layer).
    """
    if lam <= 0 or sigma < 0:
        raise DomainError("need lam > 0 and sigma >= 0")
    if stationary:
        n_b = int(math.ceil(burn_in_factor / lam / grid.delta))
        full = TimeGrid(grid.T + n_b * grid.delta, grid.n + n_b)
        z = rosenblatt.simulate_kernel_method(params, full, seed).values
        dz = np.diff(z)
        mids = full.midpoints - n_b * grid.delta          # time 0 at index n_b
        vals = np.empty(grid.n + 1)
        for k in range(grid.n + 1):
            t_k = k * grid.delta
            w = np.exp(-lam * (t_k - mids[: n_b + k]))
            vals[k] = sigma * float(w @ dz[: n_b + k])
        label = "ou-stationary"
    else:
        if z_values is None:
            z_values = rosenblatt.simulate_kernel_method(params, grid, seed).values
        dz = np.diff(z_values)
        grow = np.exp(lam * grid.midpoints)
        csum = np.concatenate([[0.0], np.cumsum(grow * dz)])
        decay = np.exp(-lam * grid.nodes)
        vals = decay * (xi + sigma * csum)
        label = "ou"
    return rosenblatt.SamplePath(grid=grid, values=vals, label=label, seed=seed)
