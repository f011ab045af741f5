"""Shared fixed-node quadrature helpers.

Panel Gauss-Legendre rules on log-spaced panels resolve integrands that are
power-singular at the origin; breakpoints force panel edges onto known kinks
(support edges, indicator boundaries) so every panel sees a smooth integrand.
"""

from __future__ import annotations

import numpy as np

__all__ = ["log_gauss_panels", "insert_breakpoints"]


def insert_breakpoints(edges: np.ndarray, breakpoints) -> np.ndarray:
    """Merge breakpoints into a sorted edge array, keeping the outer limits."""
    lo, hi = edges[0], edges[-1]
    extra = [b for b in breakpoints if lo < b < hi]
    if not extra:
        return edges
    return np.unique(np.concatenate([edges, np.asarray(extra, dtype=float)]))


def log_gauss_panels(lo: float, hi: float, panels_per_decade: int = 4,
                     nodes_per_panel: int = 12, breakpoints=()) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes/weights on log-spaced panels covering ``(lo, hi]``.

    ``lo`` must be positive. Returns flat arrays ``(x, w)`` ordered by x.
    """
    if not 0.0 < lo < hi:
        raise ValueError(f"need 0 < lo < hi, got ({lo}, {hi})")
    decades = np.log10(hi / lo)
    n_panels = max(int(np.ceil(decades * panels_per_decade)), 1)
    edges = np.geomspace(lo, hi, n_panels + 1)
    edges = insert_breakpoints(edges, breakpoints)
    gx, gw = np.polynomial.legendre.leggauss(nodes_per_panel)
    a = edges[:-1]
    b = edges[1:]
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    x = (mid[:, None] + half[:, None] * gx[None, :]).ravel()
    w = (half[:, None] * gw[None, :]).ravel()
    return x, w
