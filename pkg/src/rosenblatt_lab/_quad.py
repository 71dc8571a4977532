"""Gauss-Legendre quadrature helpers for singular power-law integrands.

Every singular integral in the package has the form
``int_a^b (u - a)^alpha g(u) du`` with ``alpha in (-1, 0)`` and ``g``
smooth, so two schemes cover all needs:

* ``graded_nodes`` -- composite Gauss-Legendre panels geometrically
  refined toward the singular endpoint (ratio 1/2).  The leftover mass on
  the innermost sliver is recovered analytically from the frozen value of
  ``g`` at the endpoint.
* ``power_gauss_nodes`` -- the substitution ``u = a + w^{1/(alpha+1)}``
  which removes the singularity exactly; a single Gauss-Legendre rule then
  converges spectrally.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np


class QuadratureError(RuntimeError):
    """Estimated quadrature error exceeds the configured tolerance."""


@lru_cache(maxsize=64)
def gauss_legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (x + 1.0), 0.5 * w


def graded_nodes(a: float, b: float, depth: int, order: int,
                 ratio: float = 0.5) -> tuple[np.ndarray, np.ndarray, float]:
    """Panel nodes/weights on [a, b], graded toward ``a``.

    Panels are ``[a + L r^{k+1}, a + L r^k]`` for ``k = 0..depth-1`` with
    ``L = b - a``.  Returns ``(nodes, weights, sliver)`` where ``sliver``
    is the width ``L r^depth`` of the untiled interval next to ``a``;
    callers integrate the sliver analytically (see ``sliver_mass``).
    """
    if b <= a:
        return np.empty(0), np.empty(0), 0.0
    x0, w0 = gauss_legendre(order)
    span = b - a
    edges = span * ratio ** np.arange(depth + 1)          # descending
    los, his = edges[1:], edges[:-1]
    nodes = (a + los[:, None] + (his - los)[:, None] * x0[None, :]).ravel()
    weights = ((his - los)[:, None] * w0[None, :]).ravel()
    return nodes, weights, float(edges[-1])


def sliver_mass(alpha: float, a: float, width: float, g_at_a: float) -> float:
    """Analytic ``int_a^{a+width} (u-a)^alpha g(u) du`` with ``g`` frozen at ``a``."""
    if width <= 0.0:
        return 0.0
    return g_at_a * width ** (alpha + 1.0) / (alpha + 1.0)


def integrate_power_singular(g, a: float, b: float, alpha: float,
                             depth: int = 28, order: int = 12,
                             rel_tol: float | None = None) -> float:
    """Integrate ``(u - a)^alpha g(u)`` over [a, b] on a graded mesh.

    ``g`` must accept an ndarray.  When ``rel_tol`` is given the value is
    recomputed on a refined mesh and a ``QuadratureError`` is raised if the
    two estimates disagree beyond the tolerance.
    """
    if b <= a:
        return 0.0

    def run(d, o):
        u, w, sliver = graded_nodes(a, b, d, o)
        val = float(np.sum(w * (u - a) ** alpha * g(u)))
        return val + sliver_mass(alpha, a, sliver, float(g(np.array([a + sliver]))[0])
                                 if sliver > 0 else 0.0)

    coarse = run(depth, order)
    if rel_tol is None:
        return coarse
    fine = run(depth + 6, order + 4)
    scale = max(abs(fine), 1e-300)
    if abs(fine - coarse) > rel_tol * scale * 10.0:
        raise QuadratureError(
            f"graded quadrature not converged: {coarse!r} vs {fine!r}")
    return fine


def power_gauss_nodes(a: float, b: float, alpha: float,
                      order: int = 32) -> tuple[np.ndarray, np.ndarray]:
    """Nodes/weights turning ``int_a^b (u-a)^alpha g(u) du`` into ``sum w g(u)``.

    Substitution ``w = (u - a)^{alpha+1}`` absorbs the singular factor, so
    the returned weights already contain ``(u - a)^alpha du``.
    """
    p = alpha + 1.0
    if p <= 0.0:
        raise ValueError("alpha must exceed -1")
    x, w = gauss_legendre(order)
    wmax = (b - a) ** p
    u = a + (wmax * x) ** (1.0 / p)
    return u, w * wmax / p
