"""Lipschitz-type checks: local ratios for ``H = q u^j`` and the explicit constant for ``q u^2``."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import partial

import numpy as np

from .. import norms
from ..admissibility import AdmissibleClass, first_dirichlet_eigenvalue, sample_coefficient, series_field
from ..fields import Grid, MatrixField, ScalarField
from ..operators import stiffness_matrix
from ..solver import estimate_delta, solve
from .report import ExperimentPlan, PlanError, StabilityReport, loglog_fit, run_map

SOLVE_TOL = 1e-12


def _normalized(field: np.ndarray) -> np.ndarray:
    peak = np.max(np.abs(field))
    return field / peak if peak > 0 else field


# ---------------------------------------------------------------------------
# local Lipschitz ratio


def _lipschitz_sample(plan: ExperimentPlan, j: int, delta: float, index: int) -> list[dict]:
    g = Grid.square(plan.n)
    a = MatrixField.identity(g)
    f = plan.illumination.trace(g)
    base_scale = plan.options.get("base_fraction", 0.4) * delta
    if index == 0:
        q = ScalarField.constant(g, 0.0)
    else:
        frac = index / max(plan.samples - 1, 1)
        q = ScalarField(g, base_scale * frac * _normalized(series_field(plan.sampler_for(2 * index), g)))
    p = 1.0 + 0.5 * _normalized(series_field(plan.sampler_for(2 * index + 1), g))
    u, _ = solve(a, q, f, tol=SOLVE_TOL)
    H = q * u.values**j
    rows = []
    for t in plan.ladder:
        qt = q + t * p
        ut, _ = solve(a, qt, f, tol=SOLVE_TOL)
        Ht = qt * ut.values**j
        num = norms.linf(q - qt)
        den = norms.linf(H - Ht)
        rows.append({"sample": index, "t": float(t), "dq_linf": num, "dH_linf": den,
                     "ratio": num / den if den > 0 else math.inf, "q_sup": norms.linf(q)})
    return rows


def lipschitz_ratio_j(j: int, plan: ExperimentPlan) -> StabilityReport:
    """Ratios ``|q - q~|_inf / |q u^j - q~ u~^j|_inf`` along a ladder ``q~ = q + t p``.

    Sample 0 starts from ``q = 0``; the others from seeded potentials with
    sup norm up to ``base_fraction * delta`` (default 0.4), so every pair stays
    well inside ``0.9 * delta``.
    """
    if j not in (1, 2):
        raise PlanError("j must be 1 or 2")
    g = Grid.square(plan.n)
    delta = estimate_delta(MatrixField.identity(g), ScalarField.constant(g, 0.0))
    if plan.t0 * 1.5 + plan.options.get("base_fraction", 0.4) * delta > 0.9 * delta:
        raise PlanError("ladder leaves the 0.9*delta neighbourhood")
    rows = [r for chunk in run_map(partial(_lipschitz_sample, plan, j, delta), range(plan.samples),
                                   plan.jobs) for r in chunk]
    rep = StabilityReport(f"lip_j{j}", ["sample", "t", "dq_linf", "dH_linf", "ratio", "q_sup"],
                          norm_labels={"dq_linf": "discrete L-inf", "dH_linf": "discrete L-inf"})
    for r in rows:
        rep.add_row(r)
    ratios = rep.column("ratio")
    rep.summary.update({"delta_est": delta, "max_ratio": float(ratios.max()), "j": j})
    rep.fingerprint = plan.base_fingerprint() | {"solver_tol": repr(SOLVE_TOL)}
    rep.check("max_ratio_finite", ratios.max(), None, "finite")
    worst_fit, worst_trend = 1.0, 0.0
    samples = rep.column("sample")
    for s in range(plan.samples):
        sel = samples == s
        fit = loglog_fit(rep.column("dH_linf")[sel], rep.column("dq_linf")[sel])
        trend = loglog_fit(rep.column("t")[sel], ratios[sel]).slope
        if abs(fit.slope - 1) > abs(worst_fit - 1):
            worst_fit = fit.slope
        if abs(trend) > abs(worst_trend):
            worst_trend = trend
    rep.check("worst_numerator_vs_denominator_slope", worst_fit, (0.9, 1.1), "in")
    rep.check("worst_log_ratio_trend", worst_trend, (-0.2, 0.2), "in",
              note="slope of log ratio against log t")
    return rep


# ---------------------------------------------------------------------------
# explicit constant for H = q u^2 on the bounded positive class


@dataclass(frozen=True)
class Mt3Constants:
    """Constants of the explicit chain, evaluated with a given first eigenvalue."""

    lambda1: float
    c_u_from_sqrt_v: float      # |u - u~| <= c |sqrt v~ - sqrt v|
    c_sqrtq_from_u: float       # coefficient of |u - u~| in the sqrt q bound
    c_sqrtq_from_sqrt_v: float  # coefficient of |sqrt v~ - sqrt v|
    c_sqrt: float               # |sqrt q~ - sqrt q| <= c_sqrt |sqrt v~ - sqrt v|
    c_sqrt_v_from_v: float      # |sqrt v~ - sqrt v| <= c |v~ - v|
    K: float                    # |q - q~| <= K |q u^2 - q~ u~^2|


def mt3_constants(mu: float, q_low: float, q_high: float, m: float, lambda1: float) -> Mt3Constants:
    if not q_high < lambda1 / mu:
        raise PlanError(f"upper bound {q_high} must stay below lambda_1/mu = {lambda1 / mu:.6g}")
    c5 = 2 * math.sqrt(q_high) * mu / (lambda1 - mu * q_high)
    c6u = q_high / (math.sqrt(q_low) * m)
    c6v = math.sqrt(q_high) / (math.sqrt(q_low) * m)
    C = c6u * c5 + c6v
    cv = 1.0 / (2 * math.sqrt(q_low) * m)
    K = 2 * math.sqrt(q_high) * C * cv
    return Mt3Constants(lambda1, c5, c6u, c6v, C, cv, K)


def _mt3_pair(plan: ExperimentPlan, consts: Mt3Constants, index: int) -> dict:
    g = Grid.square(plan.n)
    cls = plan.cls
    amp = plan.options.get("amplitude", 0.5)
    q = sample_coefficient(plan.sampler_for(2 * index, amplitude=amp), cls, g, "q")
    qt = sample_coefficient(plan.sampler_for(2 * index + 1, amplitude=amp), cls, g, "q")
    if cls.mu > 1:
        a = sample_coefficient(plan.sampler_for(10_000 + index, amplitude=amp), cls, g, "a")
    else:
        a = MatrixField.identity(g)
    f = plan.illumination.trace(g)
    u, _ = solve(a, q, f, tol=SOLVE_TOL)
    ut, _ = solve(a, qt, f, tol=SOLVE_TOL)
    v, vt = q * u * u, qt * ut * ut
    sv, svt = np.sqrt(v.values), np.sqrt(vt.values)
    e = u - ut
    dq = norms.l2(q - qt)
    dv = norms.l2(v - vt)
    dsv = norms.l2(ScalarField(g, svt - sv))
    dsq = norms.l2(ScalarField(g, np.sqrt(qt.values) - np.sqrt(q.values)))
    du = norms.l2(e)

    # energy identity with the discrete Dirichlet form
    ev = e.values.ravel()
    area = g.hx * g.hy
    energy = float(ev @ (stiffness_matrix(a) @ ev)) * area
    mass = float(np.sum(np.sqrt(q.values * qt.values) * e.values**2)) * area
    rhs = float(np.sum((np.sqrt(q.values) + np.sqrt(qt.values)) * (svt - sv) * e.values)) * area
    lhs = energy - mass
    gap = abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-300)

    return {
        "pair": index, "dq_l2": dq, "dH_l2": dv, "K_theory": consts.K,
        "bound": consts.K * dv, "main_ratio": dq / (consts.K * dv) if dv > 0 else 0.0,
        "du_l2": du, "dsqrtv_l2": dsv, "link5_ratio": du / (consts.c_u_from_sqrt_v * dsv) if dsv > 0 else 0.0,
        "dsqrtq_l2": dsq,
        "link6_ratio": dsq / (consts.c_sqrtq_from_u * du + consts.c_sqrtq_from_sqrt_v * dsv)
        if dsv > 0 else 0.0,
        "sqrt_step_ratio": dsv / (consts.c_sqrt_v_from_v * dv) if dv > 0 else 0.0,
        "energy_identity_gap": gap,
        "min_u_over_m": min(float(u.values.min()), float(ut.values.min())) / cls.m,
    }


MT3_COLUMNS = ["pair", "dq_l2", "dH_l2", "K_theory", "bound", "main_ratio", "du_l2", "dsqrtv_l2",
               "link5_ratio", "dsqrtq_l2", "link6_ratio", "sqrt_step_ratio", "energy_identity_gap",
               "min_u_over_m"]


def default_mt3_class() -> AdmissibleClass:
    return AdmissibleClass(mu=1.0, q_low=0.5, q_high=1.0, m=1.0)


def certify_mt3_constant(plan: ExperimentPlan) -> StabilityReport:
    """Pairwise check of ``|q - q~|_2 <= K |q u^2 - q~ u~^2|_2`` with the closed-form ``K``.

    ``K`` uses the discrete first eigenvalue.  The two intermediate links are
    checked separately, and the energy identity they rest on is checked as an
    equality.  The lower bound ``u >= m`` and the final square-root step are
    reported for information only: for positive ``q`` the solution dips below
    ``m`` inside the domain, so neither is guaranteed pointwise.
    """
    cls = plan.cls
    if cls.q_low is None or cls.m is None:
        raise PlanError("mt3 needs a class with q_low, q_high and m")
    g = Grid.square(plan.n)
    if plan.illumination.trace(g).min() < cls.m - 1e-12:
        raise PlanError(f"illumination drops below m = {cls.m}")
    lam1 = first_dirichlet_eigenvalue(g)
    consts = mt3_constants(cls.mu, cls.q_low, cls.q_high, cls.m, lam1)
    rows = run_map(partial(_mt3_pair, plan, consts), range(plan.samples), plan.jobs)
    rep = StabilityReport("mt3", MT3_COLUMNS,
                          norm_labels={c: "discrete L2 (trapezoid)" for c in
                                       ("dq_l2", "dH_l2", "du_l2", "dsqrtv_l2", "dsqrtq_l2")})
    for r in rows:
        rep.add_row(r)
    rep.summary.update({"lambda1_discrete": lam1, "K_theory": consts.K, "C_sqrt": consts.c_sqrt,
                        "c_link5": consts.c_u_from_sqrt_v, "c_link6_u": consts.c_sqrtq_from_u,
                        "c_link6_v": consts.c_sqrtq_from_sqrt_v})
    rep.fingerprint = plan.base_fingerprint() | {"solver_tol": repr(SOLVE_TOL)}
    rep.check("max_main_ratio", rep.column("main_ratio").max(), 1.0, "<=")
    rep.check("max_link5_ratio", rep.column("link5_ratio").max(), 1.0, "<=")
    rep.check("max_link6_ratio", rep.column("link6_ratio").max(), 1.0, "<=")
    rep.check("max_energy_identity_gap", rep.column("energy_identity_gap").max(), 1e-6, "<=")
    rep.check("min_u_over_m", rep.column("min_u_over_m").min(), 1.0, ">=", hard=False,
              note="lower bound u >= m does not hold inside for q > 0")
    rep.check("max_sqrt_step_ratio", rep.column("sqrt_step_ratio").max(), 1.0, "<=", hard=False,
              note="relies on u >= m")
    return rep
