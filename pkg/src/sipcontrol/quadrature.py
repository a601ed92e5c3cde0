"""Composite Gauss-Legendre quadrature shared by propagation, cost and Gram integrals."""

from functools import lru_cache

import numpy as np

from .errors import NumericalError

NODES_PER_PANEL = 20


@lru_cache(maxsize=8)
def panel_rule(n_nodes: int = NODES_PER_PANEL):
    """Gauss-Legendre nodes/weights on [-1, 1]."""
    x, w = np.polynomial.legendre.leggauss(n_nodes)
    return x, w


def panel_count(n_basis: int) -> int:
    """Panels over the full horizon; resolves Fourier dictionaries up to N~51."""
    return max(16, 2 * n_basis)


def composite_nodes(a: float, b: float, panels: int, n_nodes: int = NODES_PER_PANEL):
    """Nodes and weights of the composite rule on [a, b] with `panels` equal panels.

    Returns (points, weights) flat arrays of length panels*n_nodes.
    """
    x, w = panel_rule(n_nodes)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * (edges[1:] - edges[:-1])
    mid = 0.5 * (edges[1:] + edges[:-1])
    pts = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    wts = (half[:, None] * w[None, :]).ravel()
    return pts, wts


def integrate(f, a: float, b: float, panels: int = 16, n_nodes: int = NODES_PER_PANEL):
    """Integrate a vectorized scalar/array-valued f over [a, b].

    f(points) must broadcast over the leading axis of `points`.
    """
    pts, wts = composite_nodes(a, b, panels, n_nodes)
    vals = np.asarray(f(pts))
    out = np.tensordot(wts, vals, axes=(0, 0))
    if not np.all(np.isfinite(out)):
        raise NumericalError("quadrature produced non-finite values on [%g, %g]" % (a, b))
    return out
