"""Desk-scale certification of the stability inequalities.

Every experiment takes an :class:`ExperimentPlan` and returns a
:class:`StabilityReport`; :data:`EXPERIMENTS` maps the CLI keys to runners and
:func:`default_plan` gives the plan used when a config leaves fields out.
"""

from __future__ import annotations

import dataclasses

from ..admissibility import AdmissibleClass, Illumination
from .boundary import gradient_lower_bound_scan, positivity_catalog, positivity_harnack_check, run_positivity
from .contraction import contraction_audit
from .holder import default_hs1_class, default_hs3_illumination, holder_fit_hs1, holder_fit_hs3, sign_identity
from .interpolation import (ball_energies, interpolation_checks, run_vanishing, sobolev_interpolation_ratio,
                            vanishing_order_scan)
from .lipschitz import certify_mt3_constant, default_mt3_class, lipschitz_ratio_j, mt3_constants
from .report import Criterion, ExperimentPlan, PlanError, StabilityReport, loglog_fit, run_map

EXPERIMENTS = {
    "lip_j1": lambda plan: lipschitz_ratio_j(1, plan),
    "lip_j2": lambda plan: lipschitz_ratio_j(2, plan),
    "mt3": certify_mt3_constant,
    "hs1": holder_fit_hs1,
    "hs3": holder_fit_hs3,
    "glb": gradient_lower_bound_scan,
    "pos": run_positivity,
    "interp": interpolation_checks,
    "vanish": run_vanishing,
    "contract": contraction_audit,
}

_DEFAULTS = {
    "lip_j1": dict(samples=5, t0=0.1, ratio=0.1, n_scales=4),
    "lip_j2": dict(samples=5, t0=0.1, ratio=0.1, n_scales=4),
    "mt3": dict(samples=20, cls=default_mt3_class()),
    "hs1": dict(samples=3, t0=4.0, ratio=0.5, n_scales=4, cls=default_hs1_class()),
    "hs3": dict(samples=3, t0=0.2, ratio=0.5, n_scales=4,
                cls=AdmissibleClass(mu=2.0, lam=1.0, nonpositive=True, rho=20.0),
                illumination=default_hs3_illumination()),
    "glb": dict(samples=20, illumination=Illumination("x")),
    "pos": dict(samples=3),
    "interp": dict(samples=10),
    "vanish": dict(samples=1),
    "contract": dict(samples=3),
}


def default_plan(kind: str, **overrides) -> ExperimentPlan:
    if kind not in EXPERIMENTS:
        raise PlanError(f"unknown experiment kind {kind!r}")
    kw = dict(_DEFAULTS[kind])
    kw.update(overrides)
    return ExperimentPlan(kind=kind, **kw)


def run_experiment(plan: ExperimentPlan) -> StabilityReport:
    return EXPERIMENTS[plan.kind](plan)


def replace(plan: ExperimentPlan, **changes) -> ExperimentPlan:
    return dataclasses.replace(plan, **changes)


__all__ = [
    "EXPERIMENTS", "default_plan", "run_experiment", "replace",
    "Criterion", "ExperimentPlan", "PlanError", "StabilityReport", "loglog_fit", "run_map",
    "lipschitz_ratio_j", "certify_mt3_constant", "mt3_constants", "default_mt3_class",
    "holder_fit_hs1", "holder_fit_hs3", "sign_identity", "default_hs1_class", "default_hs3_illumination",
    "gradient_lower_bound_scan", "positivity_harnack_check", "positivity_catalog", "run_positivity",
    "interpolation_checks", "sobolev_interpolation_ratio", "vanishing_order_scan", "ball_energies",
    "run_vanishing", "contraction_audit",
]
