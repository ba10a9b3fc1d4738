"""Interpolation inequalities and ball-energy growth of quotient fields."""

from __future__ import annotations

import math

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .. import norms
from ..admissibility import AdmissibleClass, SamplerConfig, sample_coefficient, series_field
from ..fields import Grid, MatrixField, ScalarField
from ..internal_data import quotient_transform
from ..operators import gradient
from ..solver import solve
from .report import ExperimentPlan, PlanError, StabilityReport, loglog_fit

SOLVE_TOL = 1e-12
MU_GRID = tuple(round(0.1 * k, 1) for k in range(1, 10))


def sobolev_interpolation_ratio(w: ScalarField) -> float:
    """``|w|_{H^2} / (|w|_{H^3}^{2/3} |w|_{L^2}^{1/3})`` with discrete norms."""
    h2, h3, l2 = norms.sobolev(w, 2), norms.sobolev(w, 3), norms.l2(w)
    den = h3 ** (2 / 3) * l2 ** (1 / 3)
    return h2 / den if den > 0 else math.nan


def default_weight_class() -> AdmissibleClass:
    return AdmissibleClass(q_minus=1.0, q_plus=5.0)


def weight_family(grid: Grid, cls: AdmissibleClass, seeds, amplitude: float = 0.5) -> list[ScalarField]:
    """Weights ``w = u_q^2`` for unit diffusion, ``f = 1`` and seeded ``q`` in the class."""
    out = []
    for s in seeds:
        q = sample_coefficient(SamplerConfig(seed=s, amplitude=amplitude), cls, grid, "q")
        u, _ = solve(MatrixField.identity(grid), q, 1.0, tol=SOLVE_TOL)
        out.append(u * u)
    return out


def weighted_constants(phis, weights, beta: float) -> dict[float, float]:
    """``C(mu) = max_i |phi_i|_inf / (|phi_i|_{C^{0,beta}}^{1-mu} |phi_i w_i|_{L^1}^mu)`` on the mu grid."""
    parts = []
    for phi, w in zip(phis, weights):
        parts.append((norms.linf(phi), norms.holder_norm(phi, beta), norms.l1(phi * w)))
    out = {}
    for mu in MU_GRID:
        vals = [sup / (hol ** (1 - mu) * wl1**mu) if wl1 > 0 else math.inf for sup, hol, wl1 in parts]
        out[mu] = max(vals)
    return out


def interpolation_checks(plan: ExperimentPlan) -> StabilityReport:
    """Sobolev interpolation ratio on two grids, then a weighted sup-norm bound uniform in the weight.

    Options: ``grids`` (default ``[33, plan.n]``), ``amplitude`` of the sampled
    potentials and test functions.
    """
    grids = plan.options.get("grids", [33, plan.n])
    if len(grids) != 2:
        raise PlanError("interpolation check compares exactly two grid sizes")
    cls = plan.cls if plan.cls.q_minus is not None else default_weight_class()
    amp = plan.options.get("amplitude", 0.5)
    seeds = [plan.seed * 100_003 + 2 * i for i in range(plan.samples)]
    rep = StabilityReport("interp", ["grid", "member", "sobolev_ratio", "phi_linf", "phi_holder",
                                     "phi_w_l1"],
                          norm_labels={"sobolev_ratio": "discrete H2/(H3^(2/3) L2^(1/3))",
                                       "phi_linf": "discrete L-inf",
                                       "phi_holder": f"discrete C^(0,{plan.cls.beta})",
                                       "phi_w_l1": "discrete L1 (trapezoid)"})
    chat = {}
    for n in grids:
        g = Grid.square(n)
        ws = weight_family(g, cls, seeds, amp)
        phis = [ScalarField(g, series_field(SamplerConfig(seed=s + 1, amplitude=1.0, modes=3), g)) for s in seeds]
        if all(np.ptp(p.values) == 0 for p in phis):
            raise PlanError("degenerate family: every test function is constant")
        ratios = [sobolev_interpolation_ratio(w) for w in ws]
        chat[n] = max(ratios)
        for i, (w, phi, r) in enumerate(zip(ws, phis, ratios)):
            rep.add_row({"grid": n, "member": i, "sobolev_ratio": r, "phi_linf": norms.linf(phi),
                         "phi_holder": norms.holder_norm(phi, plan.cls.beta),
                         "phi_w_l1": norms.l1(phi * w)})
        if n == grids[-1]:
            consts = weighted_constants(phis, ws, plan.cls.beta)
    mu_hat = min(consts, key=lambda m: (consts[m], m))
    change = abs(chat[grids[1]] / chat[grids[0]] - 1)
    rep.summary.update({f"sobolev_c_hat_{n}": chat[n] for n in grids})
    rep.summary.update({f"C_mu_{m}": consts[m] for m in MU_GRID})
    rep.summary.update({"mu_hat": mu_hat, "C_hat": consts[mu_hat]})
    rep.fingerprint = plan.base_fingerprint() | {"grids": ";".join(map(str, grids))}
    rep.check("sobolev_ratio_change", change, 0.25, "<=", note="relative change of c-hat between grids")
    rep.check("weighted_C_hat", consts[mu_hat], None, "finite", note=f"at mu = {mu_hat}")
    return rep


# ---------------------------------------------------------------------------
# ball energies


def ball_energies(w: ScalarField, centers, radii, supersample: int = 8) -> tuple[np.ndarray, np.ndarray]:
    """``int_{B(x, r)} |grad w|^2`` for every centre and radius.

    ``|grad w|^2`` is interpolated bilinearly onto ``supersample`` points per
    cell and axis, so the disc boundary is resolved well below the grid
    spacing.  Radii that would leave the square are clipped to the distance
    from the centre to the boundary; the second return value flags them.
    """
    g = w.grid
    gx, gy = gradient(w)
    e = gx.values**2 + gy.values**2
    xs = np.linspace(0, 1, g.nx)
    ys = np.linspace(0, 1, g.ny)
    interp = RegularGridInterpolator((ys, xs), e)
    fx = (np.arange((g.nx - 1) * supersample) + 0.5) / ((g.nx - 1) * supersample)
    fy = (np.arange((g.ny - 1) * supersample) + 0.5) / ((g.ny - 1) * supersample)
    FY, FX = np.meshgrid(fy, fx, indexing="ij")
    fine = interp(np.stack([FY.ravel(), FX.ravel()], axis=1)).reshape(FX.shape)
    cell = (g.hx / supersample) * (g.hy / supersample)
    energies = np.zeros((len(centers), len(radii)))
    clipped = np.zeros_like(energies, dtype=bool)
    for i, (cx, cy) in enumerate(centers):
        room = min(cx, 1 - cx, cy, 1 - cy)
        d2 = (FX - cx) ** 2 + (FY - cy) ** 2
        for k, r in enumerate(radii):
            if r > room:
                r, clipped[i, k] = room, True
            energies[i, k] = float(np.sum(fine[d2 <= r * r]) * cell)
    return energies, clipped


DEFAULT_CENTERS = ((0.5, 0.5), (0.3, 0.3), (0.7, 0.3), (0.3, 0.7), (0.7, 0.7))
DEFAULT_RADII = (0.05, 0.1, 0.15, 0.2)


def quotient_field(grid: Grid, q_value: float = 1.0) -> ScalarField:
    """``u2/u1`` for unit diffusion, constant ``q`` and loads ``f1 = 1``, ``f2 = 1 + x``."""
    a = MatrixField.identity(grid)
    q = ScalarField.constant(grid, q_value)
    u1, _ = solve(a, q, 1.0, tol=SOLVE_TOL)
    X, _ = grid.coords
    u2, _ = solve(a, q, ScalarField(grid, 1 + X).trace(), tol=SOLVE_TOL)
    w, _, _ = quotient_transform(u1, u2, a.scalar() if a.is_scalar else a)
    return w


def vanishing_order_scan(w: ScalarField, centers=DEFAULT_CENTERS, radii=DEFAULT_RADII,
                         supersample: int = 8) -> StabilityReport:
    """Fit ``v`` in ``|grad w|^2_{L^2(B(x, r))} ~ r^v`` at each centre."""
    if np.ptp(w.values) < 1e-14:
        raise PlanError("field is constant")
    if len(radii) < 3:
        raise PlanError("need at least 3 radii for a fit")
    energies, clipped = ball_energies(w, centers, radii, supersample)
    rep = StabilityReport("vanish", ["center", "cx", "cy", "radius", "energy", "clipped"],
                          norm_labels={"energy": "squared L2 of |grad w| over the disc"})
    orders = []
    for i, (cx, cy) in enumerate(centers):
        for k, r in enumerate(radii):
            rep.add_row({"center": i, "cx": cx, "cy": cy, "radius": r, "energy": energies[i, k],
                         "clipped": int(clipped[i, k])})
        fit = loglog_fit(np.asarray(radii)[~clipped[i]], energies[i][~clipped[i]]) \
            if np.sum(~clipped[i]) >= 3 else loglog_fit(radii, energies[i])
        orders.append(fit.slope)
        rep.summary[f"order.center{i}"] = fit.slope
    orders = np.array(orders)
    rep.summary["clipped_balls"] = int(clipped.sum())
    rep.check("all_orders_finite", float(np.max(np.abs(orders))), None, "finite")
    rep.check("min_ball_energy", float(energies.min()), 0.0, ">")
    rep.check("max_order_deviation_from_2", float(np.max(np.abs(orders - 2))), 0.2, "<=", hard=False,
              note="non-vanishing gradient gives order 2 in the plane")
    return rep


def run_vanishing(plan: ExperimentPlan) -> StabilityReport:
    g = Grid.square(plan.n)
    source = plan.options.get("field", "quotient")
    if source == "quotient":
        w = quotient_field(g, plan.options.get("q_value", 1.0))
    elif source == "x":
        w = ScalarField.from_function(g, lambda X, Y: X)
    elif source == "exp_y_minus_x":
        w = ScalarField.from_function(g, lambda X, Y: np.exp(Y - X))
    elif source == "constant":
        w = ScalarField.constant(g, 1.0)
    else:
        raise PlanError(f"unknown field {source!r}")
    centers = [tuple(c) for c in plan.options.get("centers", DEFAULT_CENTERS)]
    radii = plan.options.get("radii", DEFAULT_RADII)
    rep = vanishing_order_scan(w, centers, radii, plan.options.get("supersample", 8))
    rep.summary["field"] = source
    rep.fingerprint = {"grid": f"{plan.n}x{plan.n}", "field": source,
                       "radii": ";".join(repr(float(r)) for r in radii)}
    return rep
