"""Discrete norms and seminorms.

All of these are grid proxies for continuum norms; reports label them
"discrete".  Integrals use trapezoid weights throughout.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations_with_replacement

import numpy as np

from .fields import ScalarField


class GridTooCoarse(ValueError):
    pass


def integrate(u: ScalarField | np.ndarray, grid=None) -> float:
    if isinstance(u, ScalarField):
        grid, u = u.grid, u.values
    return float(np.sum(grid.trapezoid_weights * u))


def l1(u: ScalarField) -> float:
    return integrate(np.abs(u.values), u.grid)


def l2(u: ScalarField) -> float:
    return float(np.sqrt(integrate(u.values**2, u.grid)))


def linf(u: ScalarField, mask=None) -> float:
    v = u.values if mask is None else u.values[mask]
    return float(np.max(np.abs(v))) if v.size else 0.0


def derivatives(u: ScalarField, order: int) -> dict[tuple[int, int], np.ndarray]:
    """All partial derivatives of exact total order ``order``, keyed by (d/dx count, d/dy count).

    Built by repeated application of the second-order ``np.gradient`` stencil.
    """
    g = u.grid
    if order > 0 and min(g.nx, g.ny) < (3 if order < 3 else 5):
        raise GridTooCoarse(f"{g.nx}x{g.ny} grid too coarse for derivatives of order {order}")
    out = {}
    for combo in combinations_with_replacement((0, 1), order):
        v = u.values
        for axis in combo:
            if axis == 0:
                v = np.gradient(v, g.hx, axis=1, edge_order=2)
            else:
                v = np.gradient(v, g.hy, axis=0, edge_order=2)
        out[(combo.count(0), combo.count(1))] = v
    return out


def sobolev(u: ScalarField, k: int) -> float:
    """Discrete H^k norm: L2 norms of all derivatives up to order k, combined in l2."""
    total = 0.0
    for order in range(k + 1):
        for d in derivatives(u, order).values():
            total += integrate(d**2, u.grid)
    return float(np.sqrt(total))


def lipschitz_seminorm(u: ScalarField) -> float:
    g, v = u.grid, u.values
    sx = np.max(np.abs(np.diff(v, axis=1))) / g.hx
    sy = np.max(np.abs(np.diff(v, axis=0))) / g.hy
    return float(max(sx, sy))


def lipschitz_norm(u: ScalarField) -> float:
    """Discrete C^{0,1} norm: sup norm plus Lipschitz seminorm."""
    return linf(u) + lipschitz_seminorm(u)


def _adjacent_pairs(grid):
    idx = np.arange(grid.size).reshape(grid.shape)
    pairs = [
        (idx[:, :-1], idx[:, 1:]),
        (idx[:-1, :], idx[1:, :]),
        (idx[:-1, :-1], idx[1:, 1:]),
        (idx[:-1, 1:], idx[1:, :-1]),
    ]
    a = np.concatenate([p[0].ravel() for p in pairs])
    b = np.concatenate([p[1].ravel() for p in pairs])
    return a, b


def holder_seminorm(u: ScalarField, beta: float, n_samples: int = 10_000, seed: int = 0,
                    exhaustive: bool = False, max_distance: float | None = None) -> float:
    """Discrete C^{0,beta} seminorm ``max |u(x)-u(y)| / |x-y|^beta`` over node pairs.

    By default the pairs are all adjacent (axis and diagonal) pairs plus
    ``n_samples`` seeded random pairs; ``exhaustive`` takes every pair, O(N^2).
    """
    if not 0 < beta <= 1:
        raise ValueError("beta must lie in (0, 1]")
    g = u.grid
    X, Y = (c.ravel() for c in g.coords)
    v = u.values.ravel()
    if exhaustive:
        a, b = np.triu_indices(g.size, k=1)
    else:
        a, b = _adjacent_pairs(g)
        rng = np.random.default_rng(seed)
        ra = rng.integers(0, g.size, n_samples)
        rb = rng.integers(0, g.size, n_samples)
        keep = ra != rb
        a = np.concatenate([a, ra[keep]])
        b = np.concatenate([b, rb[keep]])
    d = np.hypot(X[a] - X[b], Y[a] - Y[b])
    if max_distance is not None:
        sel = d <= max_distance
        a, b, d = a[sel], b[sel], d[sel]
    if d.size == 0:
        return 0.0
    return float(np.max(np.abs(v[a] - v[b]) / d**beta))


def holder_norm(u: ScalarField, beta: float, **kw) -> float:
    """Discrete C^{0,beta} norm: sup norm plus seminorm."""
    return linf(u) + holder_seminorm(u, beta, **kw)


def c1beta_norm(u: ScalarField, beta: float, **kw) -> float:
    """Discrete C^{1,beta} proxy: sup norms of u and grad u plus seminorms of grad u."""
    first = derivatives(u, 1)
    total = linf(u)
    for d in first.values():
        df = ScalarField(u.grid, d)
        total += linf(df) + holder_seminorm(df, beta, **kw)
    return float(total)


@dataclass(frozen=True)
class Norms:
    linf: float
    l2: float
    h1: float
    h2: float
    h3: float | None
    lipschitz: float
    holder: float
    beta: float
    label: str = "discrete"


def norms(u: ScalarField, beta: float = 0.5, max_order: int = 3, **holder_kw) -> Norms:
    g = u.grid
    if max_order >= 3 and min(g.nx, g.ny) < 5:
        raise GridTooCoarse(f"H^3 needs at least 5 nodes per axis, got {g.nx}x{g.ny}")
    return Norms(
        linf=linf(u),
        l2=l2(u),
        h1=sobolev(u, 1),
        h2=sobolev(u, 2),
        h3=sobolev(u, 3) if max_order >= 3 else None,
        lipschitz=lipschitz_seminorm(u),
        holder=holder_seminorm(u, beta, **holder_kw),
        beta=beta,
    )
