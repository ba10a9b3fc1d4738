"""Observed contraction of the perturbative fixed-point solve."""

from __future__ import annotations

from functools import partial

import numpy as np

from ..admissibility import series_field
from ..fields import Grid, MatrixField, ScalarField
from ..solver import ContractionError, estimate_delta, estimate_operator_norm_inverse, solve_perturbative
from .report import ExperimentPlan, StabilityReport, run_map

DEFAULT_MAGNITUDES = (0.0, 0.1, 0.5, 0.9, 2.0)
IN_HYPOTHESIS = 0.9
RHO_LIMIT = 0.55
NORM_FACTOR_LIMIT = 2.2


def _shape(plan: ExperimentPlan, index: int, g: Grid) -> np.ndarray:
    if index == 0:
        return np.ones(g.shape)
    field = series_field(plan.sampler_for(index, amplitude=1.0), g)
    return field / np.max(np.abs(field))


def _audit_one(plan: ExperimentPlan, delta: float, base_norm: float, task) -> dict:
    index, magnitude, sign = task
    g = Grid.square(plan.n)
    a0 = MatrixField.identity(g)
    q0 = ScalarField.constant(g, 0.0)
    q_pert = ScalarField(g, sign * magnitude * delta * _shape(plan, index, g))
    inside = magnitude <= IN_HYPOTHESIS
    row = {"shape": index, "magnitude": magnitude, "sign": sign, "in_hypothesis": int(inside),
           "iterations": 0, "max_ratio": 0.0, "converged": 0, "norm_factor": float("nan")}
    try:
        _, hist = solve_perturbative(a0, q0, q_pert, plan.illumination.trace(g), delta=delta,
                                     force=not inside, fail_on_ratio=False,
                                     max_iter=plan.options.get("max_iter", 200))
        row.update(iterations=hist.iterations, max_ratio=hist.max_ratio, converged=1)
    except ContractionError as exc:
        hist = exc.history
        row.update(iterations=hist.iterations if hist else 0,
                   max_ratio=hist.max_ratio if hist and hist.ratios else float("inf"))
    if inside:
        pert_norm = estimate_operator_norm_inverse(a0, q0 + q_pert)
        row["norm_factor"] = pert_norm / base_norm
    return row


def contraction_audit(plan: ExperimentPlan) -> StabilityReport:
    """Run the perturbative solve over ``+/- magnitude * delta`` for several perturbation shapes.

    Shape 0 is constant; the others are seeded smooth fields scaled to unit sup
    norm.  Magnitudes above 0.9 are outside the contraction hypothesis: they
    are recorded but never fail the run.
    """
    g = Grid.square(plan.n)
    a0, q0 = MatrixField.identity(g), ScalarField.constant(g, 0.0)
    base_norm = estimate_operator_norm_inverse(a0, q0)
    delta = estimate_delta(a0, q0)
    mags = tuple(plan.options.get("magnitudes", DEFAULT_MAGNITUDES))
    tasks = [(s, m, sg) for s in range(plan.samples) for m in mags for sg in ((1,) if m == 0 else (-1, 1))]
    rows = run_map(partial(_audit_one, plan, delta, base_norm), tasks, plan.jobs)
    rep = StabilityReport("contract", ["shape", "magnitude", "sign", "in_hypothesis", "iterations",
                                       "max_ratio", "converged", "norm_factor"],
                          norm_labels={"max_ratio": "discrete L2 successive-difference ratio",
                                       "norm_factor": "discrete L2 operator-norm proxy ratio"})
    for r in rows:
        rep.add_row(r)
    inside = rep.column("in_hypothesis") == 1
    rho = rep.column("max_ratio")
    rep.summary.update({"delta_est": delta, "base_inverse_norm": base_norm,
                        "max_ratio_outside": float(rho[~inside].max()) if np.any(~inside) else "none"})
    rep.fingerprint = plan.base_fingerprint() | {"magnitudes": ";".join(repr(float(m)) for m in mags)}
    rep.check("max_ratio_in_hypothesis", float(rho[inside].max()), RHO_LIMIT, "<=")
    rep.check("all_converged_in_hypothesis", float(rep.column("converged")[inside].min()), 1, ">=")
    rep.check("max_norm_factor", float(np.nanmax(rep.column("norm_factor")[inside])), NORM_FACTOR_LIMIT, "<=")
    zero = rep.column("magnitude") == 0
    if np.any(zero):
        rep.check("zero_perturbation_iterations", float(rep.column("iterations")[zero].max()), 1, "<=")
    return rep
