"""Boundary gradient lower bounds and positivity / Harnack checks."""

from __future__ import annotations

from dataclasses import dataclass
from functools import partial

import numpy as np

from ..admissibility import AdmissibleClass, Illumination, SamplerConfig, sample_coefficient
from ..fields import Grid, MatrixField, ScalarField
from ..operators import gradient_magnitude
from ..solver import solve
from .report import ExperimentPlan, PlanError, StabilityReport, run_map

SOLVE_TOL = 1e-12


# ---------------------------------------------------------------------------
# gradient lower bound on the boundary


def boundary_gradient_min(u: ScalarField) -> float:
    """Smallest ``|grad u|`` over boundary nodes.

    ``np.gradient`` with ``edge_order=2`` uses one-sided second-order stencils
    in the normal direction and central ones along the boundary.
    """
    gm = gradient_magnitude(u)
    return float(gm[u.grid.boundary_mask].min())


def _glb_sample(plan: ExperimentPlan, bounds: tuple[float, float], index: int) -> dict:
    g = Grid.square(plan.n)
    if index == 0:
        sigma = ScalarField.constant(g, 1.0)
    else:
        cfg = plan.sampler_for(index, amplitude=plan.options.get("amplitude", 0.5), clamp=bounds)
        sigma = sample_coefficient(cfg, AdmissibleClass(mu=max(bounds[1], 1.0 / bounds[0])), g,
                                   "a").scalar()
    u, _ = solve(sigma, ScalarField.constant(g, 0.0), plan.illumination.trace(g), tol=SOLVE_TOL)
    return {"sample": index, "reference": int(index == 0), "sigma_min": float(sigma.values.min()),
            "sigma_max": float(sigma.values.max()), "eta": boundary_gradient_min(u)}


def gradient_lower_bound_scan(plan: ExperimentPlan) -> StabilityReport:
    """``eta = min |grad u_sigma|`` over the boundary, for ``div(sigma grad u) = 0``, ``u = phi``.

    Row 0 is the reference ``sigma = 1``; rows 1..samples draw ``sigma`` in
    ``[sigma_low, sigma_high]`` (options, default ``[0.5, 2]``).
    """
    g = Grid.square(plan.n)
    phi = plan.illumination.trace(g)
    if np.ptp(phi.values) < 1e-12:
        raise PlanError("boundary profile must be non-constant")
    bounds = (plan.options.get("sigma_low", 0.5), plan.options.get("sigma_high", 2.0))
    if not 0 < bounds[0] <= 1 <= bounds[1]:
        raise PlanError("need 0 < sigma_low <= 1 <= sigma_high")
    eta_min = plan.options.get("eta_min", 1e-3)
    rows = run_map(partial(_glb_sample, plan, bounds), range(plan.samples + 1), plan.jobs)
    rep = StabilityReport("glb", ["sample", "reference", "sigma_min", "sigma_max", "eta"],
                          norm_labels={"eta": "discrete boundary min of |grad u|"})
    for r in rows:
        rep.add_row(r)
    eta = rep.column("eta")
    family = eta[1:]
    spread = float((family.max() - family.min()) / np.median(family))
    rep.summary.update({"eta_reference": float(eta[0]), "eta_family_min": float(family.min()),
                        "eta_family_max": float(family.max()), "profile": plan.illumination.profile})
    rep.fingerprint = plan.base_fingerprint() | {"sigma_bounds": f"{bounds[0]!r};{bounds[1]!r}"}
    rep.check("eta_min", float(eta.min()), eta_min, ">=")
    rep.check("family_spread", spread, 0.2, "<=", hard=False,
              note="(max - min) / median over sampled sigma, i.e. within +/-10%")
    if plan.illumination.profile == "x":
        rep.check("reference_eta_error", abs(eta[0] - 1.0), 1e-6, "<=")
    return rep


# ---------------------------------------------------------------------------
# positivity and Harnack ratio


@dataclass(frozen=True, eq=False)
class PositivityCase:
    name: str
    a: MatrixField
    q: ScalarField
    illumination: Illumination


def positivity_harnack_check(a, q: ScalarField, f, band: float = 0.1, name: str = "case",
                             report: StabilityReport | None = None) -> StabilityReport:
    """Positivity floor, near-boundary bound ``min u >= m/2`` and Harnack ratio for one case.

    ``band`` is the width of the boundary strip where ``u >= m/2`` is checked;
    the Harnack ratio ``sup/inf`` is measured on nodes at distance at least
    ``band/2``.
    """
    g = q.grid
    if q.values.min() < 0:
        raise PlanError("positivity check needs q >= 0")
    u, _ = solve(a, q, f, tol=SOLVE_TOL)
    m = float(u.values[g.boundary_mask].min())
    near = g.distance_to_boundary <= band + 1e-12
    far = g.distance_to_boundary >= band / 2 - 1e-12
    inner = u.values[far]
    row = {
        "case": name, "m": m, "eps_hat": float(u.values.min()),
        "band_min": float(u.values[near].min()),
        "harnack_ratio": float(inner.max() / inner.min()) if inner.min() > 0 else float("inf"),
        "positive": int(bool(np.all(u.values > 0))),
    }
    rep = report or StabilityReport("pos", ["case", "m", "eps_hat", "band_min", "harnack_ratio", "positive"],
                                    norm_labels={"eps_hat": "nodal min", "band_min": "nodal min over band"})
    rep.add_row(row)
    return rep


def positivity_catalog(grid: Grid, seed: int = 0, samples: int = 3) -> list[PositivityCase]:
    """Default cases: trivial ones plus seeded pairs in the Hoelder class with ``a >= 0.5``."""
    one = Illumination("constant", value=1.0)
    cases = [
        PositivityCase("q0_f1", MatrixField.identity(grid), ScalarField.constant(grid, 0.0), one),
        PositivityCase("q1_f1", MatrixField.identity(grid), ScalarField.constant(grid, 1.0), one),
        PositivityCase("q1_bilinear_half", MatrixField.identity(grid), ScalarField.constant(grid, 1.0),
                       Illumination("linear", alpha=0.5, beta=0.5, gamma=0.5)),
    ]
    cls = AdmissibleClass(mu=2.0, kappa=0.5, Lambda=4.0)
    for s in range(samples):
        a = sample_coefficient(SamplerConfig(seed=seed * 1000 + 2 * s, amplitude=0.3), cls, grid, "a")
        q = sample_coefficient(SamplerConfig(seed=seed * 1000 + 2 * s + 1, amplitude=0.3, clamp=(0.0, 2.0)),
                               cls, grid, "q")
        cases.append(PositivityCase(f"holder_class_{s}", a, q, one))
    return cases


def run_positivity(plan: ExperimentPlan) -> StabilityReport:
    g = Grid.square(plan.n)
    band = plan.options.get("band", 0.1)
    rep = None
    for case in positivity_catalog(g, plan.seed, plan.samples):
        rep = positivity_harnack_check(case.a, case.q, case.illumination.trace(g), band, case.name, rep)
    m = rep.column("m")
    rep.summary.update({"band": band, "cases": len(rep.rows)})
    rep.fingerprint = plan.base_fingerprint() | {"band": repr(band)}
    rep.check("all_positive", rep.column("positive").min(), 1, ">=")
    rep.check("min_band_ratio", float(np.min(rep.column("band_min") / m)), 0.5, ">=",
              note="min over the boundary band divided by m")
    rep.check("max_harnack_ratio", float(rep.column("harnack_ratio").max()), None, "finite")
    return rep
