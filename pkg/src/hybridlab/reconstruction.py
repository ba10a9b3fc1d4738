"""Coefficient recovery from internal data.

* ``q`` from ``H = q u^j`` (j = 1, 2) by the Picard iteration ``q <- H / u_q^j``;
* ``q`` from the internal solution itself, pointwise;
* scalar ``a`` from ``u`` by regularized linear least squares;
* ``(a, q)`` jointly from two loads through the quotient ``w = u2 / u1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from . import norms
from .fields import BoundaryTrace, Grid, ScalarField
from .linalg import SolverError
from .operators import divergence_a_grad, face_difference_matrix, gradient_magnitude, laplacian, \
    scalar_flux_matrix
from .solver import solve

__all__ = [
    "ReconConfig", "ReconResult", "ReconstructionError",
    "recover_q_from_qu", "recover_q_from_qu2", "recover_q_power", "recover_q_direct",
    "recover_a_scalar", "recover_aq_two_loads", "interior_subdomain",
]


class ReconstructionError(RuntimeError):
    """Raised when a recovery leaves its domain of validity; ``reason`` is machine readable."""

    def __init__(self, reason: str, detail: str = ""):
        self.reason = reason
        super().__init__(f"{reason}: {detail}" if detail else reason)


@dataclass(frozen=True)
class ReconConfig:
    tol: float = 1e-10
    max_iters: int = 200
    u_floor: float = 1e-8
    reg: float = 1e-6
    interior_margin: float = 0.15
    solver_tol: float = 1e-12

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if not self.reg >= 0:
            raise ValueError("regularization weight must be non-negative")
        if not 0 < self.interior_margin < 0.5:
            raise ValueError("interior margin must lie in (0, 0.5)")
        if not self.u_floor > 0:
            raise ValueError("u_floor must be positive")


@dataclass(frozen=True, eq=False)
class ReconResult:
    fields: dict[str, ScalarField]
    iterations: int
    history: tuple[float, ...]
    refit_residual: float
    success: bool
    reason: str | None = None
    rho_hat: float | None = None
    flags: tuple[str, ...] = ()
    metrics: dict[str, float] = field(default_factory=dict)

    @property
    def q(self) -> ScalarField:
        return self.fields["q"]

    @property
    def a(self) -> ScalarField:
        return self.fields["a"]


def interior_subdomain(grid: Grid, margin: float) -> np.ndarray:
    """Nodes at distance at least ``margin`` from the boundary."""
    return grid.distance_to_boundary >= margin - 1e-12


def _check_floor(u: np.ndarray, floor: float, what: str) -> None:
    low = float(np.min(u))
    if low < floor:
        raise ReconstructionError("u_floor", f"{what} drops to {low:.3e}, below {floor:.1e}")


def _solve(a0, q, f, cfg):
    try:
        u, _ = solve(a0, q, f, tol=cfg.solver_tol)
    except SolverError as exc:
        raise ReconstructionError("solver", str(exc)) from None
    return u


def _observed_rate(history, tol) -> float | None:
    ratios = [d1 / d0 for d0, d1 in zip(history, history[1:]) if d0 > 10 * tol]
    return max(ratios) if ratios else None


def _picard(H: ScalarField, a0, f, cfg: ReconConfig, power: int) -> ReconResult:
    u = _solve(a0, ScalarField.constant(H.grid, 0.0), f, cfg)
    _check_floor(u.values, cfg.u_floor, "u_0")
    q = H / u.values**power
    history: list[float] = []
    converged = False
    for k in range(1, cfg.max_iters + 1):
        u = _solve(a0, q, f, cfg)
        _check_floor(u.values, cfg.u_floor, f"u at iteration {k}")
        q_new = H / u.values**power
        d = norms.linf(q_new - q)
        history.append(d)
        q = q_new
        if d <= cfg.tol:
            converged = True
            break
    u = _solve(a0, q, f, cfg)
    refit = norms.linf(H - q * u.values**power)
    scale = max(norms.linf(H), 1e-300)
    success = converged and refit <= 10 * cfg.tol * scale
    reason = None if success else ("max_iters" if not converged else "refit")
    return ReconResult({"q": q, "u": u}, len(history), tuple(history), refit, success, reason,
                       _observed_rate(history, cfg.tol))


def recover_q_from_qu(H: ScalarField, a0, f, cfg: ReconConfig = ReconConfig()) -> ReconResult:
    """Recover ``q`` from ``H = q u_q`` with ``u_q`` the solution for boundary data ``f``."""
    return _picard(H, a0, f, cfg, 1)


def recover_q_from_qu2(H: ScalarField, a0, f, cfg: ReconConfig = ReconConfig()) -> ReconResult:
    """Recover ``q`` from ``H = q u_q^2``."""
    return _picard(H, a0, f, cfg, 2)


def recover_q_power(H: ScalarField, a0, f, j: int, cfg: ReconConfig = ReconConfig()) -> ReconResult:
    if j not in (1, 2):
        raise ValueError("j must be 1 or 2")
    return _picard(H, a0, f, cfg, j)


def _fill_boundary_nearest(values: np.ndarray) -> np.ndarray:
    ny, nx = values.shape
    jj = np.clip(np.arange(ny), 1, ny - 2)
    ii = np.clip(np.arange(nx), 1, nx - 2)
    return values[np.ix_(jj, ii)]


def recover_q_direct(u_meas: ScalarField, cfg: ReconConfig = ReconConfig()) -> ReconResult:
    """``q = lap(u) / u`` at interior nodes (unit diffusion); boundary copies the nearest interior node."""
    g = u_meas.grid
    inner = u_meas.values[g.interior_mask]
    low = float(np.min(np.abs(inner)))
    if low < cfg.u_floor:
        raise ReconstructionError("u_floor", f"|u| drops to {low:.3e}, below {cfg.u_floor:.1e}")
    lap = laplacian(u_meas).values
    q = np.zeros(g.shape)
    q[g.interior_mask] = lap[g.interior_mask] / inner
    q = _fill_boundary_nearest(q)
    refit = float(np.max(np.abs(-lap + q * u_meas.values)[g.interior_mask]))
    return ReconResult({"q": ScalarField(g, q)}, 1, (), refit, True)


def _degenerate(u: ScalarField) -> bool:
    gm = gradient_magnitude(u)
    thresh = 1e-8 * max(norms.linf(u), 1.0)
    return bool(np.mean(gm < thresh) > 0.5)


def _boundary_values(data, grid: Grid) -> np.ndarray:
    if isinstance(data, BoundaryTrace):
        return np.asarray(data.values)
    if isinstance(data, ScalarField):
        return data.values.ravel()[grid.boundary_indices]
    return np.full(len(grid.boundary_indices), float(data))


def _least_squares_diffusion(u: ScalarField, rhs: np.ndarray, boundary: np.ndarray, reg: float
                             ) -> np.ndarray:
    """Nodal ``a`` minimizing ``|div(a grad u) - rhs|^2 + reg |grad a|^2`` with ``a`` fixed on the boundary.

    Both terms are discrete L2 norms with the same cell weight, so the weight
    cancels from the normal equations.
    """
    g = u.grid
    I, Bd = g.interior_indices, g.boundary_indices
    Bm = scalar_flux_matrix(u)[I]
    D = face_difference_matrix(g)
    BI, BB = Bm[:, I], Bm[:, Bd]
    DI, DB = D[:, I], D[:, Bd]
    r = rhs.ravel()[I] - BB @ boundary
    N = (BI.T @ BI + reg * (DI.T @ DI)).tocsc()
    b = BI.T @ r - reg * (DI.T @ (DB @ boundary))
    with np.errstate(all="ignore"):
        x = spla.spsolve(N, b)
    if not np.all(np.isfinite(x)):
        raise ReconstructionError("gradient degenerate", "normal equations are singular")
    full = np.empty(g.size)
    full[I] = x
    full[Bd] = boundary
    return full.reshape(g.shape)


def recover_a_scalar(u_meas: ScalarField, q_known: ScalarField, a_boundary,
                     cfg: ReconConfig = ReconConfig(), a_true: ScalarField | None = None
                     ) -> ReconResult:
    """Scalar ``a`` from ``div(a grad u) = q u`` with ``a`` given on the boundary.

    When ``a_true`` is supplied the sup errors over the whole grid and over the
    interior subdomain ``omega`` (distance >= ``cfg.interior_margin``) are
    reported in ``metrics``.
    """
    g = u_meas.grid
    if _degenerate(u_meas):
        raise ReconstructionError("gradient degenerate", "grad u vanishes on most of the grid")
    ab = _boundary_values(a_boundary, g)
    if np.any(ab <= 0):
        raise ValueError("boundary values of a must be positive")
    a = ScalarField(g, _least_squares_diffusion(u_meas, (q_known * u_meas).values, ab, cfg.reg))
    res = -divergence_a_grad(a, u_meas) + q_known * u_meas
    refit = norms.linf(res, g.interior_mask)
    metrics = {}
    if a_true is not None:
        omega = interior_subdomain(g, cfg.interior_margin)
        err = np.abs(a.values - a_true.values)
        metrics = {"error_linf": float(err.max()), "error_linf_omega": float(err[omega].max())}
    return ReconResult({"a": a}, 1, (), refit, True, metrics=metrics)


def recover_aq_two_loads(u1_meas: ScalarField, u2_meas: ScalarField, a_boundary, q_boundary,
                         cfg: ReconConfig = ReconConfig(), a_true: ScalarField | None = None,
                         q_true: ScalarField | None = None) -> ReconResult:
    """Recover ``(a, q)`` from two internal solutions sharing the coefficients.

    ``w = u2/u1`` solves ``div(sigma grad w) = 0`` with ``sigma = a u1^2``;
    ``sigma`` is found by least squares from its boundary values, then
    ``a = sigma / u1^2`` and ``q = div(a grad u1) / u1``.  The assumption that
    the critical points of the boundary quotient are its extrema is not checked.
    """
    g = u1_meas.grid
    _check_floor(u1_meas.values, cfg.u_floor, "u1")
    w = u2_meas / u1_meas
    if _degenerate(w):
        raise ReconstructionError("gradient degenerate", "u2/u1 is nearly constant")
    ab = _boundary_values(a_boundary, g)
    u1b = u1_meas.values.ravel()[g.boundary_indices]
    sigma = _least_squares_diffusion(w, np.zeros(g.shape), ab * u1b**2, cfg.reg)
    a = ScalarField(g, sigma / u1_meas.values**2)
    flux = divergence_a_grad(a, u1_meas).values
    q = np.empty(g.shape)
    q[g.interior_mask] = flux[g.interior_mask] / u1_meas.values[g.interior_mask]
    q.ravel()[g.boundary_indices] = _boundary_values(q_boundary, g)
    q = ScalarField(g, q)
    refits = [norms.linf(-divergence_a_grad(a, u) + q * u, g.interior_mask) for u in (u1_meas, u2_meas)]
    metrics = {"refit_load1": refits[0], "refit_load2": refits[1]}
    omega = interior_subdomain(g, cfg.interior_margin)
    for name, rec, true in (("a", a, a_true), ("q", q, q_true)):
        if true is not None:
            err = np.abs(rec.values - true.values)
            metrics[f"{name}_error_linf_omega"] = float(err[omega].max())
            metrics[f"{name}_error_linf_interior"] = float(err[g.interior_mask].max())
    return ReconResult({"a": a, "q": q, "w": w, "sigma": ScalarField(g, sigma)}, 1, (), max(refits),
                       True, flags=("extrema_assumption_unchecked",), metrics=metrics)
