"""Discrete multiple Wiener-Ito integrals on the grid.

A kernel of order ``n`` is an ``n``-dimensional symmetric table over grid
cells; its integral is the sum of ``f[i1..in] dB_{i1} ... dB_{in}`` over
tuples with *pairwise distinct* indices, matching the no-diagonal
convention of the continuous theory.  The distinct-index sums are
evaluated through Moebius inversion over the partition lattice, which
turns them into a handful of dense contractions; a direct loop oracle in
the tests pins the combinatorics.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations

import numpy as np
from scipy.special import ndtri

from .kernels import DomainError, TimeGrid

__all__ = [
    "GaussianIncrements",
    "GridKernel",
    "sample_increments",
    "increment_matrix",
    "multiple_integral",
    "contraction_1",
]

_MAX_ORDER = 4


def _generator(seed: int, stream: int = 0) -> np.random.Generator:
    """Counter-based Philox stream; distinct (seed, stream) pairs are independent."""
    return np.random.Generator(np.random.Philox(key=(int(seed) & (2**64 - 1), int(stream))))


def _standard_normal(gen: np.random.Generator, shape) -> np.ndarray:
    # inverse-CDF sampling on the open unit interval keeps the draw
    # reproducible across numpy versions and thread schedules
    u = (gen.integers(0, 2**53, size=shape).astype(np.float64) + 0.5) / 2**53
    return ndtri(u)


@dataclass(frozen=True)
class GaussianIncrements:
    """One realisation of the driving Brownian increments on the grid."""

    grid: TimeGrid
    seed: int
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != (self.grid.n,):
            raise DomainError("increment vector length must equal the cell count")


def sample_increments(grid: TimeGrid, seed: int) -> GaussianIncrements:
    """N independent centred Gaussians of variance ``delta = T/n``.

    Deterministic given ``(seed, grid)``: regeneration is bit-identical.
    """
    vals = _standard_normal(_generator(seed), grid.n) * np.sqrt(grid.delta)
    return GaussianIncrements(grid=grid, seed=seed, values=vals)


def increment_matrix(grid: TimeGrid, seed: int, count: int,
                     first_stream: int = 1) -> np.ndarray:
    """``(n, count)`` matrix of increment vectors for an ensemble.

    Column ``j`` is drawn from the Philox stream ``(seed, first_stream + j)``,
    so the result depends only on the stream indices, never on how callers
    shard the work across threads.  ``sample_increments`` is stream 0.
    """
    out = np.empty((grid.n, count))
    for j in range(count):
        out[:, j] = _standard_normal(_generator(seed, first_stream + j), grid.n)
    return out * np.sqrt(grid.delta)


def path_matrices(grid: TimeGrid, seed: int, count: int,
                  first_stream: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Increment matrix plus the standard-normal block behind it.

    Each stream is consumed sequentially: the first ``n`` draws are the
    Brownian increments (identical to :func:`increment_matrix` /
    :func:`sample_increments`), the next ``4 n`` feed the calibration
    top-up (a circulant embedding needs a complex vector of length
    ``2 n``), keeping every path a function of a single seeded stream.
    """
    b = np.empty((grid.n, count))
    xi = np.empty((4 * grid.n, count))
    for j in range(count):
        gen = _generator(seed, first_stream + j)
        b[:, j] = _standard_normal(gen, grid.n)
        xi[:, j] = _standard_normal(gen, 4 * grid.n)
    return b * np.sqrt(grid.delta), xi


def topup_normals(grid: TimeGrid, seed: int, stream: int = 0) -> np.ndarray:
    """Top-up standard-normal block of one stream (see :func:`path_matrices`)."""
    gen = _generator(seed, stream)
    _standard_normal(gen, grid.n)
    return _standard_normal(gen, 4 * grid.n)


@dataclass(frozen=True)
class GridKernel:
    """Symmetric kernel of order ``n`` over grid cells, stored symmetrised."""

    grid: TimeGrid
    order: int
    values: np.ndarray

    def __post_init__(self):
        if not 1 <= self.order <= _MAX_ORDER:
            raise DomainError(f"order must lie in 1..{_MAX_ORDER}")
        if self.values.shape != (self.grid.n,) * self.order:
            raise DomainError("kernel table shape does not match the grid")

    @classmethod
    def from_array(cls, grid: TimeGrid, values: np.ndarray) -> "GridKernel":
        """Build from any array, symmetrising over all index permutations.

        Already-symmetric input is stored untouched, so symmetrisation is
        exactly idempotent.
        """
        vals = np.asarray(values, dtype=float)
        order = vals.ndim
        if order > 1:
            perms = list(permutations(range(order)))
            if not all(np.array_equal(vals, vals.transpose(p)) for p in perms[1:]):
                acc = np.zeros_like(vals)
                for p in perms:
                    acc += vals.transpose(p)
                acc /= len(perms)
                # reread every entry at its sorted index tuple: bitwise equal
                # under permutations despite float accumulation order
                idx = np.sort(np.indices(vals.shape).reshape(order, -1), axis=0)
                vals = acc[tuple(idx)].reshape(vals.shape)
        return cls(grid=grid, order=order, values=vals)

    def to_csv(self, path) -> None:
        flat = self.values.reshape(-1)
        idx = np.indices(self.values.shape).reshape(self.order, -1).T
        with open(path, "w", newline="") as fh:
            fh.write(",".join(f"i{k}" for k in range(self.order)) + ",value\n")
            for row, v in zip(idx, flat):
                fh.write(",".join(str(i) for i in row) + f",{float(v)!r}\n")


def _distinct_sum_2(a: np.ndarray, b: np.ndarray) -> float:
    full = b @ a @ b
    diag = np.einsum("ii,i->", a, b * b)
    return float(full - diag)


def _distinct_sum_3(t: np.ndarray, b: np.ndarray) -> float:
    b2 = b * b
    full = np.einsum("ijk,i,j,k->", t, b, b, b)
    pair = np.einsum("iik,i,k->", t, b2, b)        # equals all 3 pairings
    tri = np.einsum("iii,i->", t, b2 * b)
    return float(full - 3.0 * pair + 2.0 * tri)


def _distinct_sum_4(t: np.ndarray, b: np.ndarray) -> float:
    b2 = b * b
    full = np.einsum("ijkl,i,j,k,l->", t, b, b, b, b)
    pair = np.einsum("iikl,i,k,l->", t, b2, b, b)
    two_pair = np.einsum("iikk,i,k->", t, b2, b2)
    tri = np.einsum("iiil,i,l->", t, b2 * b, b)
    quad = np.einsum("iiii,i->", t, b2 * b2)
    return float(full - 6.0 * pair + 3.0 * two_pair + 8.0 * tri - 6.0 * quad)


def multiple_integral(f: GridKernel, db: GaussianIncrements) -> float:
    """Off-diagonal symmetrised sum of ``f`` against products of increments.

    Order 1 reduces to the Wiener Riemann sum; the expectation over the
    seed ensemble vanishes for every order.
    """
    if f.grid != db.grid:
        raise DomainError("kernel and increments live on different grids")
    b = db.values
    if f.order == 1:
        return float(f.values @ b)
    if f.order == 2:
        return _distinct_sum_2(f.values, b)
    if f.order == 3:
        return _distinct_sum_3(f.values, b)
    return _distinct_sum_4(f.values, b)


def contraction_1(f: GridKernel, g: GridKernel) -> GridKernel:
    """One-index contraction ``(f x1 g)[i, j] = delta * sum_k f[i,k] g[j,k]``."""
    if f.grid != g.grid:
        raise DomainError("kernels live on different grids")
    if f.order != 2 or g.order != 2:
        raise DomainError("contraction_1 is defined for order-2 kernels")
    vals = f.grid.delta * (f.values @ g.values.T)
    return GridKernel(grid=f.grid, order=2, values=0.5 * (vals + vals.T))
