"""Sample-path generation for the Rosenblatt process and its companions.

Two independent constructions are provided:

* the kernel method -- a discrete double Wiener integral of the
  cell-averaged kernel tables against one shared vector of Brownian
  increments, including the diagonal through its Wick-ordered square and
  a deterministic per-time calibration that pins Var Z(t) to ``t^{2H}``;
* the partial-sum method -- Hermite-rank-2 transforms of a long-range
  dependent Gaussian sequence (fractional Gaussian noise at index
  ``H' = (H+1)/2``, simulated by circulant embedding), normalised by the
  exact finite-n variance of the partial sums.

Both target the same law, which the statistics layer cross-validates.
The smoothed semimartingale approximation and an fBm baseline built from
the same increments complete the set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import chaos
from ._quad import gauss_legendre, power_gauss_nodes
from . import kernels
from .kernels import (
    DomainError,
    HurstParams,
    QuadProfile,
    TimeGrid,
    transfer_blocks,
)

__all__ = [
    "SamplePath",
    "NcltConfig",
    "EmbeddingError",
    "simulate_kernel_method",
    "simulate_nclt",
    "simulate_eps",
    "simulate_fbm",
    "kernel_ensemble",
    "values_at_ensemble",
    "nclt_marginal_samples",
    "fbm_weight_table",
    "coupled_eps_gap",
]


class EmbeddingError(RuntimeError):
    """Circulant embedding produced significantly negative eigenvalues."""


@dataclass(frozen=True)
class SamplePath:
    """A time-indexed realisation on the grid; ``values[0] == 0`` unless OU."""

    grid: TimeGrid
    values: np.ndarray
    label: str
    seed: int

    def __post_init__(self):
        if self.values.shape != (self.grid.n + 1,):
            raise DomainError("path length must be n + 1")

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("t,value\n")
            for t, v in zip(self.grid.nodes, self.values):
                fh.write(f"{float(t)!r},{float(v)!r}\n")


def _path_profile(n: int) -> QuadProfile:
    return QuadProfile(depth=10, order=5) if n >= 512 else QuadProfile(depth=12, order=6)


def _topup_increments(params: HurstParams, grid: TimeGrid, xi: np.ndarray,
                      profile: QuadProfile) -> np.ndarray:
    """Per-cell increments of the self-similar Gaussian top-up.

    ``xi`` holds ``4 n`` standard normals per path; the circulant
    embedding turns them into one fGn draw at the process index, scaled
    to the variance share of the calibration plan.
    """
    plan = kernels.hybrid_calibration(params, grid, profile)
    n = grid.n
    if plan.topup_scale == 0.0:
        return np.zeros((n, xi.shape[1]))
    sq = _embedding_sqrt_eigs(params.h, n)
    z = xi[: 2 * n] + 1j * xi[2 * n: 4 * n]
    w = np.fft.fft(z * sq[:, None], axis=0) / math.sqrt(2 * n)
    fgn = w.real[:n]
    return math.sqrt(plan.topup_scale) * grid.delta ** params.h * fgn


def _topup_paths(params: HurstParams, grid: TimeGrid, xi: np.ndarray,
                 profile: QuadProfile) -> np.ndarray:
    steps = _topup_increments(params, grid, xi, profile)
    return np.vstack([np.zeros((1, xi.shape[1])), np.cumsum(steps, axis=0)])


def _chaos_paths(params: HurstParams, grid: TimeGrid, b: np.ndarray,
                 xi: np.ndarray | None = None, *, mode: str = "calibrated",
                 shift: float = 0.0,
                 profile: QuadProfile | None = None) -> np.ndarray:
    """Second-chaos paths for every increment column of ``b``.

    ``mode``: ``"calibrated"`` (Wick diagonal, cumulant-matched scaling
    plus the Gaussian variance top-up driven by ``xi`` -- the production
    simulator), ``"wick"`` (Wick diagonal only) or ``"offdiag"``
    (strictly off-diagonal sum, the raw discrete double Wiener integral
    used by the identity checks).

    Streams the transfer blocks once, so memory stays at
    ``O(n * paths)`` regardless of the grid size.
    """
    if mode not in ("calibrated", "wick", "offdiag"):
        raise DomainError(f"unknown mode {mode!r}")
    if profile is None:
        profile = _path_profile(grid.n)
    n, m_paths = b.shape
    if n != grid.n:
        raise DomainError("increment matrix does not match the grid")
    delta = grid.delta
    d_h = params.d_h
    inc = np.zeros((n, m_paths))
    b_sq = b * b
    for m, _, w, v in transfer_blocks(params, grid, profile, shift=shift):
        proj = v @ b[: m + 1, :]                       # (nodes, paths)
        row_norm = np.einsum("qi,qi->q", v, v)
        inc[m] = d_h * (w @ (proj * proj) - delta * float(w @ row_norm))
        if mode == "offdiag":
            ddiag = d_h * ((w @ (v * v)))              # (m+1,)
            inc[m] += ddiag @ (delta - b_sq[: m + 1, :])
    out = np.vstack([np.zeros((1, m_paths)), np.cumsum(inc, axis=0)])
    if mode == "calibrated":
        if shift != 0.0:
            raise DomainError("the smoothed kernel is never calibrated")
        if xi is None:
            raise DomainError("calibrated paths need the top-up normals")
        plan = kernels.hybrid_calibration(params, grid, profile)
        out = plan.gamma_array()[:, None] * out \
            + _topup_paths(params, grid, xi, profile)
    return out


def kernel_ensemble(params: HurstParams, grid: TimeGrid, seed: int, count: int, *,
                    mode: str = "calibrated", shift: float = 0.0,
                    profile: QuadProfile | None = None) -> np.ndarray:
    """``(n+1, count)`` matrix of kernel-method paths, one Philox stream each."""
    if mode == "calibrated":
        b, xi = chaos.path_matrices(grid, seed, count)
    else:
        b, xi = chaos.increment_matrix(grid, seed, count), None
    return _chaos_paths(params, grid, b, xi, mode=mode, shift=shift,
                        profile=profile)


@lru_cache(maxsize=8)
def _dense_tables(params: HurstParams, grid: TimeGrid, t_indices: tuple,
                  profile: QuadProfile):
    acc = np.zeros((grid.n, grid.n))
    want = sorted(set(t_indices))
    tabs = {0: np.zeros((grid.n, grid.n))}
    it = iter(want)
    nxt = next(it, None)
    while nxt == 0:
        nxt = next(it, None)
    for m, _, w, v in transfer_blocks(params, grid, profile):
        if nxt is None:
            break
        acc[: m + 1, : m + 1] += kernels._sym_block(params, v, w)
        while nxt == m + 1:
            tabs[nxt] = acc.copy()
            nxt = next(it, None)
    return tabs


def values_at_ensemble(params: HurstParams, grid: TimeGrid, t_indices,
                       seed: int, count: int, *, mode: str = "calibrated",
                       profile: QuadProfile | None = None) -> np.ndarray:
    """Ensemble of ``Z(t_k)`` for a few grid indices, via dense tables.

    Returns ``(len(t_indices), count)``; cheaper than full paths when only
    a handful of marginal times is needed.
    """
    if profile is None:
        profile = _path_profile(grid.n)
    t_indices = [int(k) for k in t_indices]
    tabs = _dense_tables(params, grid, tuple(t_indices), profile)
    delta = grid.delta
    if mode == "calibrated":
        b, xi = chaos.path_matrices(grid, seed, count)
        gam = kernels.hybrid_calibration(params, grid, profile).gamma_array()
        topup = _topup_paths(params, grid, xi, profile)
    else:
        b = chaos.increment_matrix(grid, seed, count)
    out = np.empty((len(t_indices), count))
    for row, k in enumerate(t_indices):
        a = tabs[k]
        quad = np.einsum("ip,ip->p", b, a @ b)
        if mode == "offdiag":
            val = quad - np.diag(a) @ (b * b)
        else:
            val = quad - delta * np.trace(a)
            if mode == "calibrated":
                val = gam[k] * val + topup[k]
        out[row] = val
    return out


def simulate_kernel_method(params: HurstParams, grid: TimeGrid, seed: int, *,
                           mode: str = "calibrated",
                           profile: QuadProfile | None = None) -> SamplePath:
    """One Rosenblatt path from the finite-interval kernel representation.

    All grid times share a single driving stream, so the path has the
    process's own covariance structure across time.
    """
    b = chaos.sample_increments(grid, seed).values[:, None]
    xi = None
    if mode == "calibrated":
        xi = chaos.topup_normals(grid, seed)[:, None]
    vals = _chaos_paths(params, grid, b, xi, mode=mode, profile=profile)[:, 0]
    return SamplePath(grid=grid, values=vals, label="rosenblatt", seed=seed)


def simulate_eps(params: HurstParams, grid: TimeGrid, eps: float, seed: int, *,
                 profile: QuadProfile | None = None) -> SamplePath:
    """Semimartingale approximation: kernel evaluated at ``u + eps``.

    Coupled to :func:`simulate_kernel_method` through the shared seed; the
    smoothed kernel is nonsingular, and the path converges to the rough
    one in L2 as ``eps`` decreases.
    """
    if eps < 0:
        raise DomainError("eps must be nonnegative")
    b = chaos.sample_increments(grid, seed).values[:, None]
    vals = _chaos_paths(params, grid, b, mode="wick", shift=eps,
                        profile=profile)[:, 0]
    return SamplePath(grid=grid, values=vals,
                      label=f"rosenblatt-eps-{eps:g}", seed=seed)


def coupled_eps_gap(params: HurstParams, grid: TimeGrid, eps: float, *,
                    profile: QuadProfile | None = None) -> float:
    """Exact ``E|Z^eps(T) - Z(T)|^2`` under seed coupling.

    Both chaos parts are Wick quadratic forms of their tables in the same
    increments, giving ``2 delta^2 ||gamma A - A_eps||_F^2``; the
    calibration top-up is independent of the smoothed path and adds its
    own variance.  A deterministic oracle for the Monte Carlo version.
    """
    if profile is None:
        profile = _path_profile(grid.n)
    plan = kernels.hybrid_calibration(params, grid, profile)
    gam_t = plan.gamma_array()[-1]
    diff = np.zeros((grid.n, grid.n))
    for m, _, w, v in transfer_blocks(params, grid, profile):
        diff[: m + 1, : m + 1] += gam_t * params.d_h * (v.T * w) @ v
    for m, _, w, v in transfer_blocks(params, grid, profile, shift=eps):
        diff[: m + 1, : m + 1] -= params.d_h * (v.T * w) @ v
    return (2.0 * grid.delta ** 2 * float(np.sum(diff * diff))
            + float(plan.topup_variance(grid.T, params.h)))


# ----------------------------------------------------------------------
# fBm baseline


@lru_cache(maxsize=8)
def fbm_weight_table(params: HurstParams, grid: TimeGrid,
                     y_order: int = 3) -> np.ndarray:
    """Cell-averaged fBm kernel weights ``W[k, i] ~ mean of K^H(t_k, .) on cell i``.

    ``B^H(t_k) = sum_i W[k, i] dB_i``.  Rows are built incrementally in
    ``t``: each s-node gets its singular first segment from the
    power-substituted rule, then smooth Gauss panels accumulate the rest.
    """
    h = params.h
    c = params.c_h
    n, delta = grid.n, grid.delta

    # s-nodes: power-substituted nodes in cell 0 (y^{1/2-h} endpoint), 3-point
    # Gauss in every other cell
    s0, w0 = power_gauss_nodes(0.0, delta, 0.5 - h, order=16)
    xg, wg = gauss_legendre(y_order)
    s_far = ((np.arange(1, n)[:, None] + xg[None, :]) * delta).ravel()
    s_all = np.concatenate([s0, s_far])

    # J(t, s) = int_s^t (u-s)^{h-3/2} u^{h-1/2} du, vectorised over s-nodes
    j_cur = np.zeros(s_all.size)
    started = np.zeros(s_all.size, dtype=bool)
    xs, ws = gauss_legendre(12)
    x1, w1 = gauss_legendre(24)
    table = np.zeros((n + 1, n))
    p = h - 0.5

    for k in range(1, n + 1):
        t_k = k * delta
        old = started & (s_all < t_k - delta)  # strictly below the new panel
        if np.any(old):
            u = (t_k - delta) + delta * xs
            vals = (u[None, :] - s_all[old, None]) ** (h - 1.5) * u[None, :] ** p
            j_cur[old] += delta * (vals @ ws)
        new = (~started) & (s_all < t_k)
        if np.any(new):
            s_new = s_all[new]
            wmax = (t_k - s_new) ** p
            u = s_new[:, None] + (wmax[:, None] * x1[None, :]) ** (1.0 / p)
            j_cur[new] = (wmax / p) * ((u ** p) @ w1)
            started[new] = True
        k_vals = c * s_all ** (0.5 - h) * j_cur * started
        row = np.zeros(n)
        row[0] = (1.0 / delta) * float(w0 @ (c * j_cur[: s0.size]))
        row[1:] = k_vals[s0.size:].reshape(n - 1, y_order) @ wg
        row[k:] = 0.0
        table[k] = row
    return table


def simulate_fbm(params: HurstParams, grid: TimeGrid, seed: int) -> SamplePath:
    """Fractional Brownian baseline from the same increment convention."""
    b = chaos.sample_increments(grid, seed).values
    vals = fbm_weight_table(params, grid) @ b
    return SamplePath(grid=grid, values=vals, label="fbm", seed=seed)


def fbm_ensemble(params: HurstParams, grid: TimeGrid, seed: int,
                 count: int) -> np.ndarray:
    b = chaos.increment_matrix(grid, seed, count)
    return fbm_weight_table(params, grid) @ b


# ----------------------------------------------------------------------
# partial-sum (limit-theorem) construction


@dataclass(frozen=True)
class NcltConfig:
    """Hermite-rank-2 partial-sum construction parameters.

    ``inner_n`` points of the long-memory Gaussian sequence per unit time;
    the underlying sequence is fGn with index ``(h+1)/2`` so its
    correlation decays like ``n^{h-1}``.
    """

    h: float
    inner_n: int
    hermite_rank: int = 2

    def __post_init__(self):
        if not 0.5 < self.h < 1.0:
            raise DomainError(f"H must lie in (1/2, 1), got {self.h}")
        if self.inner_n < 2:
            raise DomainError("inner_n must be at least 2")
        if self.hermite_rank != 2:
            raise DomainError("only Hermite rank 2 is implemented")


def _fgn_autocov(h: float, length: int) -> np.ndarray:
    k = np.arange(length + 1, dtype=float)
    return 0.5 * (np.abs(k + 1) ** (2 * h) - 2 * k ** (2 * h)
                  + np.abs(k - 1) ** (2 * h))


@lru_cache(maxsize=8)
def _embedding_sqrt_eigs(h_prime: float, length: int) -> np.ndarray:
    r = _fgn_autocov(h_prime, length)
    circ = np.concatenate([r[:-1], [r[length]], r[length - 1:0:-1]])
    eigs = np.fft.fft(circ).real
    tol = 1e-8 * eigs.max()
    if eigs.min() < -tol:
        raise EmbeddingError(
            f"circulant embedding has negative eigenvalue {eigs.min():g}")
    return np.sqrt(np.clip(eigs, 0.0, None))


@lru_cache(maxsize=32)
def _exact_sum_std(h_prime: float, length: int) -> float:
    """Std of ``sum_{j<=length} H_2(xi_j)`` for unit-variance fGn at ``h_prime``."""
    r = _fgn_autocov(h_prime, length)[:length]
    lags = np.arange(length)
    var = 2.0 * (length * r[0] ** 2 + 2.0 * float((length - lags[1:]) @ (r[1:] ** 2)))
    return math.sqrt(var)


def _fgn_batch(h_prime: float, length: int, seed: int, first_stream: int,
               count: int) -> np.ndarray:
    """(count, length) fGn draws by circulant embedding, two per FFT."""
    sq = _embedding_sqrt_eigs(h_prime, length)
    two_l = sq.size
    out = np.empty((count, length))
    for j0 in range(0, count, 2):
        gen = chaos._generator(seed, first_stream + j0 // 2)
        z = chaos._standard_normal(gen, (2, two_l))
        w = np.fft.fft((z[0] + 1j * z[1]) * sq) / math.sqrt(two_l)
        out[j0] = w.real[:length]
        if j0 + 1 < count:
            out[j0 + 1] = w.imag[:length]
    return out


def nclt_partial_sum_paths(config: NcltConfig, grid: TimeGrid, seed: int,
                           count: int, first_stream: int = 1) -> np.ndarray:
    """``(n+1, count)`` normalised Hermite-rank-2 partial-sum paths."""
    h_prime = 0.5 * (config.h + 1.0)
    length = int(math.ceil(config.inner_n * grid.T))
    xi = _fgn_batch(h_prime, length, seed, first_stream, count)
    sums = np.cumsum(xi * xi - 1.0, axis=1)
    idx = np.floor(config.inner_n * grid.nodes).astype(int)
    idx = np.clip(idx, 0, length)
    scale = 1.0 / _exact_sum_std(h_prime, config.inner_n)
    padded = np.concatenate([np.zeros((count, 1)), sums], axis=1)
    return scale * padded[:, idx].T


def simulate_nclt(config: NcltConfig, grid: TimeGrid, seed: int) -> SamplePath:
    """One path of the partial-sum construction on the grid.

    Normalised by the exact finite-n standard deviation of the Hermite
    sums, so Var at ``t = 1`` is exactly one in expectation.
    """
    vals = nclt_partial_sum_paths(config, grid, seed, 1, first_stream=0)[:, 0]
    return SamplePath(grid=grid, values=vals, label="rosenblatt-nclt", seed=seed)


def nclt_marginal_samples(config: NcltConfig, t: float, seed: int,
                          count: int) -> np.ndarray:
    """``count`` samples of the normalised partial sum at a single time."""
    h_prime = 0.5 * (config.h + 1.0)
    length = max(int(math.floor(config.inner_n * t)), 1)
    scale = 1.0 / _exact_sum_std(h_prime, config.inner_n)
    out = np.empty(count)
    batch = max(2, (int(2 ** 22 // max(length, 1)) // 2) * 2)  # even: 2 draws/FFT
    done = 0
    while done < count:
        take = min(batch, count - done)
        xi = _fgn_batch(h_prime, length, seed, 1 + done // 2, take)
        out[done:done + take] = scale * np.sum(xi * xi - 1.0, axis=1)
        done += take
    return out
