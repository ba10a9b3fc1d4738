"""Finite-difference operators on :class:`~hybridlab.fields.Grid`.

The diffusion operator comes from the discrete energy

    E(u) = 1/2 * sum_faces a_face (D u)^2 h_x h_y + sum_cells a12 g_x g_y h_x h_y

with arithmetic face averages of ``a11``/``a22`` and cell-averaged gradients for
the ``a12`` coupling.  Differentiating ``E`` gives a symmetric matrix whose
interior rows are ``-div(a grad u)`` in flux form.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .fields import Grid, ScalarField, as_matrix_field


def gradient(u: ScalarField) -> tuple[ScalarField, ScalarField]:
    """Central differences inside, second-order one-sided differences on the boundary."""
    g = u.grid
    uy, ux = np.gradient(u.values, g.hy, g.hx, edge_order=2)
    return ScalarField(g, ux), ScalarField(g, uy)


def gradient_magnitude(u: ScalarField) -> np.ndarray:
    ux, uy = gradient(u)
    return np.hypot(ux.values, uy.values)


def _face_pairs(grid: Grid):
    idx = np.arange(grid.size).reshape(grid.shape)
    # x-faces join (j, i) and (j, i+1); y-faces join (j, i) and (j+1, i)
    return (idx[:, :-1], idx[:, 1:]), (idx[:-1, :], idx[1:, :])


def stiffness_matrix(a) -> sp.csr_matrix:
    """Full-grid symmetric matrix ``K`` with ``(K u)_i = -div(a grad u)_i`` at interior nodes."""
    a = as_matrix_field(a)
    g = a.grid
    (xl, xr), (yb, yt) = _face_pairs(g)
    cx = 0.5 * (a.a11[:, :-1] + a.a11[:, 1:]) / g.hx**2
    cy = 0.5 * (a.a22[:-1, :] + a.a22[1:, :]) / g.hy**2

    rows = [xl, xr, xl, xr, yb, yt, yb, yt]
    cols = [xl, xr, xr, xl, yb, yt, yt, yb]
    vals = [cx, cx, -cx, -cx, cy, cy, -cy, -cy]

    if np.any(a.a12 != 0.0):
        idx = np.arange(g.size).reshape(g.shape)
        corners = [idx[:-1, :-1], idx[:-1, 1:], idx[1:, :-1], idx[1:, 1:]]
        a12c = 0.25 * (a.a12[:-1, :-1] + a.a12[:-1, 1:] + a.a12[1:, :-1] + a.a12[1:, 1:])
        dx = np.array([-1.0, 1.0, -1.0, 1.0]) / (2 * g.hx)
        dy = np.array([-1.0, -1.0, 1.0, 1.0]) / (2 * g.hy)
        coupling = np.outer(dx, dy) + np.outer(dy, dx)
        for p in range(4):
            for q in range(4):
                rows.append(corners[p])
                cols.append(corners[q])
                vals.append(a12c * coupling[p, q])

    K = sp.coo_matrix(
        (np.concatenate([v.ravel() for v in vals]),
         (np.concatenate([r.ravel() for r in rows]), np.concatenate([c.ravel() for c in cols]))),
        shape=(g.size, g.size),
    )
    return K.tocsr()


def divergence_a_grad(a, u: ScalarField) -> ScalarField:
    """``div(a grad u)`` at interior nodes; boundary nodes are set to 0."""
    a = as_matrix_field(a)
    if a.grid != u.grid:
        raise ValueError("fields live on different grids")
    out = -(stiffness_matrix(a) @ u.values.ravel()).reshape(u.grid.shape)
    out[u.grid.boundary_mask] = 0.0
    return ScalarField(u.grid, out)


def laplacian(u: ScalarField) -> ScalarField:
    """Five-point Laplacian at interior nodes; boundary nodes are set to 0."""
    g = u.grid
    v = u.values
    out = np.zeros(g.shape)
    out[1:-1, 1:-1] = ((v[1:-1, 2:] - 2 * v[1:-1, 1:-1] + v[1:-1, :-2]) / g.hx**2
                       + (v[2:, 1:-1] - 2 * v[1:-1, 1:-1] + v[:-2, 1:-1]) / g.hy**2)
    return ScalarField(g, out)


def scalar_flux_matrix(u: ScalarField) -> sp.csr_matrix:
    """Matrix ``B`` with ``B @ a = div(a grad u)`` at every node, for nodal scalar ``a``.

    The flux form is linear in the nodal diffusion values, which is what the
    least-squares coefficient recovery exploits.  Boundary rows are zero.
    """
    g = u.grid
    v = u.values.ravel()
    (xl, xr), (yb, yt) = _face_pairs(g)
    rows, cols, vals = [], [], []
    for lo, hi, h in ((xl, xr, g.hx), (yb, yt, g.hy)):
        lo, hi = lo.ravel(), hi.ravel()
        du = (v[hi] - v[lo]) / h**2
        # face flux 0.5*(a_lo + a_hi)*du enters row lo with +, row hi with -
        for node in (lo, hi):
            rows += [lo, hi]
            cols += [node, node]
            vals += [0.5 * du, -0.5 * du]
    B = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(g.size, g.size),
    ).tocsr()
    keep = sp.diags(g.interior_mask.ravel().astype(float))
    return (keep @ B).tocsr()


def face_difference_matrix(grid: Grid) -> sp.csr_matrix:
    """Scaled forward differences over every x- and y-face, ``(u_hi - u_lo)/h``."""
    (xl, xr), (yb, yt) = _face_pairs(grid)
    blocks = []
    for lo, hi, h in ((xl, xr, grid.hx), (yb, yt, grid.hy)):
        lo, hi = lo.ravel(), hi.ravel()
        m = len(lo)
        r = np.arange(m)
        blocks.append(sp.coo_matrix(
            (np.concatenate([np.full(m, -1.0 / h), np.full(m, 1.0 / h)]),
             (np.concatenate([r, r]), np.concatenate([lo, hi]))),
            shape=(m, grid.size)))
    return sp.vstack(blocks).tocsr()
