import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybridlab.admissibility import Illumination
from hybridlab.fields import Grid, MatrixField, ScalarField
from hybridlab.solver import solve
from hybridlab.stability import (Criterion, ExperimentPlan, PlanError, StabilityReport, default_plan,
                                 loglog_fit, mt3_constants, run_experiment, run_map, sign_identity,
                                 sobolev_interpolation_ratio, vanishing_order_scan)
from hybridlab.stability.boundary import boundary_gradient_min, positivity_harnack_check
from hybridlab.stability.holder import compact_bump
from hybridlab.stability.interpolation import ball_energies

# ---------------------------------------------------------------------------
# report plumbing


@pytest.mark.parametrize("value,threshold,comparison,expected", [
    (1.0, 1.0, "<=", True), (1.0, 1.0, "<", False), (2.0, 1.0, ">=", True), (1.0, 1.0, ">", False),
    (0.5, (0.0, 1.0), "in", True), (0.0, (0.0, 1.0), "(]", False), (1.0, (0.0, 1.0), "(]", True),
    (math.inf, None, "finite", False), (3.0, None, "finite", True), (math.nan, 1.0, "<=", False),
])
def test_criterion_comparisons(value, threshold, comparison, expected):
    assert Criterion("c", value, threshold, comparison).passed is expected


def test_soft_criteria_do_not_fail_report():
    rep = StabilityReport("x", ["a"])
    rep.check("hard_ok", 1.0, 2.0, "<=")
    rep.check("soft_bad", 3.0, 2.0, "<=", hard=False)
    assert rep.passed
    rep.check("hard_bad", 3.0, 2.0, "<=")
    assert not rep.passed


def test_loglog_fit_exact_power():
    x = np.array([1.0, 0.1, 0.01, 0.001])
    fit = loglog_fit(x, 3 * x**0.5)
    assert fit.slope == pytest.approx(0.5, abs=1e-12)
    assert math.exp(fit.intercept) == pytest.approx(3.0, rel=1e-12)
    assert fit.r2 == pytest.approx(1.0)
    assert fit.ci_low <= 0.5 <= fit.ci_high


def test_loglog_fit_needs_three_points():
    with pytest.raises(PlanError):
        loglog_fit([1.0, 0.1, 0.0], [1.0, 0.1, 0.5])


@settings(max_examples=25, deadline=None)
@given(slope=st.floats(0.1, 3.0), c=st.floats(0.01, 100.0))
def test_loglog_fit_recovers_slope(slope, c):
    x = 2.0 ** -np.arange(5)
    assert loglog_fit(x, c * x**slope).slope == pytest.approx(slope, abs=1e-9)


def test_report_csv_and_write(tmp_path):
    rep = StabilityReport("demo", ["i", "v"])
    rep.add_row({"i": 0, "v": 0.1})
    rep.add_row({"i": 1, "v": 1 / 3})
    rep.check("max_v", 1 / 3, 0.5, "<=")
    assert rep.samples_csv().splitlines() == ["i,v", "0,0.1", f"1,{1 / 3!r}"]
    with pytest.raises(KeyError):
        rep.add_row({"i": 2})
    rep.write(tmp_path)
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == ["demo_criteria.csv", "demo_samples.csv", "demo_summary.txt"]
    assert "max_v" in (tmp_path / "demo_criteria.csv").read_text()


def test_body_digest_ignores_timestamp():
    rep = StabilityReport("demo", ["i"])
    rep.add_row({"i": 0})
    assert "generated" in rep.summary_text()
    assert "generated" not in rep.summary_text(timestamp=False)
    assert rep.body_digest() == rep.body_digest()


@pytest.mark.parametrize("kw", [dict(n=4), dict(samples=0), dict(n_scales=2), dict(ratio=1.0), dict(jobs=0)])
def test_plan_validation(kw):
    with pytest.raises(PlanError):
        ExperimentPlan(kind="hs1", **kw)


def test_plan_ladder_and_seeds():
    plan = ExperimentPlan(kind="hs1", t0=1.0, ratio=0.5, n_scales=3, seed=2)
    np.testing.assert_allclose(plan.ladder, [1.0, 0.5, 0.25])
    assert plan.sampler_for(1).seed == 2 * 100_003 + 1
    assert plan.sampler_for(1, amplitude=3.0).amplitude == 3.0


def test_unknown_kind():
    with pytest.raises(PlanError):
        default_plan("nope")


def _square(x):
    return x * x


def test_run_map_preserves_order():
    assert run_map(_square, range(6), jobs=2) == [0, 1, 4, 9, 16, 25]
    assert run_map(_square, range(3), jobs=1) == [0, 1, 4]


# ---------------------------------------------------------------------------
# closed forms


def test_mt3_constant_hand_value():
    # c5 = 2/(lambda1 - 1), C = sqrt2 * (c5 + 1), K = 2 * C / (2 sqrt(0.5)) with lambda1 = 19.7352...
    k = mt3_constants(1.0, 0.5, 1.0, 1.0, 19.73524553445552)
    assert k.K == pytest.approx(2.2135, abs=1e-4)
    assert k.c_sqrt_v_from_v == pytest.approx(1 / math.sqrt(2), rel=1e-12)


def test_mt3_constant_requires_gap():
    with pytest.raises(PlanError):
        mt3_constants(2.0, 0.5, 10.0, 1.0, 19.7)


def test_compact_bump_support():
    g = Grid.square(33)
    b = compact_bump(g, (0.5, 0.5), 0.25)
    assert b.max() == pytest.approx(1.0)
    X, Y = g.coords
    assert np.all(b[np.hypot(X - 0.5, Y - 0.5) >= 0.25] == 0)


def test_sign_identity_closes():
    g = Grid.square(33)
    q = ScalarField.constant(g, -1.0)
    a = ScalarField.constant(g, 1.0)
    at = a - 0.2 * ScalarField(g, compact_bump(g, (0.5, 0.5), 0.3))
    f = Illumination("linear", alpha=1.0, beta=0.5, gamma=1.0).trace(g)
    u, _ = solve(a, q, f, tol=1e-13)
    ut, _ = solve(at, q, f, tol=1e-13)
    lhs, rhs, _ = sign_identity(a, at, q, u, ut)
    assert abs(lhs - rhs) <= 5e-2 * abs(lhs)


def test_boundary_gradient_of_linear():
    g = Grid.square(17)
    u = ScalarField.from_function(g, lambda X, Y: 2 * X + 1)
    assert boundary_gradient_min(u) == pytest.approx(2.0, rel=1e-10)


def test_sobolev_ratio_constant_and_sine():
    g = Grid.square(65)
    assert sobolev_interpolation_ratio(ScalarField.constant(g, 2.0)) == pytest.approx(1.0)
    w = ScalarField.from_function(g, lambda X, Y: np.sin(np.pi * X) * np.sin(np.pi * Y))
    # continuum value (||w||_H1 / (||w||_H3^(2/3) ||w||_L2^(1/3))) is 1.100; discrete is within 2%
    assert sobolev_interpolation_ratio(w) == pytest.approx(1.100, rel=0.02)


def test_ball_energy_of_linear_field():
    # |grad x|^2 = 1 integrates to pi r^2 on each ball
    g = Grid.square(65)
    w = ScalarField.from_function(g, lambda X, Y: X)
    centers = [(0.5, 0.5)]
    radii = np.array([0.1, 0.2])
    energies, clipped = ball_energies(w, centers, radii)
    assert not clipped.any()
    np.testing.assert_allclose(np.ravel(energies), np.pi * radii**2, rtol=1e-2)


def test_vanishing_order_of_linear_field_is_two():
    g = Grid.square(65)
    rep = vanishing_order_scan(ScalarField.from_function(g, lambda X, Y: X))
    assert rep.passed
    orders = [v for k, v in rep.summary.items() if k.startswith("order.center")]
    np.testing.assert_allclose(orders, 2.0, atol=0.05)


def test_positivity_check_on_constant_illumination():
    g = Grid.square(33)
    rep = positivity_harnack_check(MatrixField.identity(g), ScalarField.constant(g, 1.0), 1.0)
    assert rep.passed


# ---------------------------------------------------------------------------
# experiments at reduced size


@pytest.mark.parametrize("kind,overrides", [
    ("lip_j1", dict(n=17, samples=2)),
    ("lip_j2", dict(n=17, samples=2)),
    ("mt3", dict(n=17, samples=3)),
    ("hs1", dict(n=33, samples=1)),
    ("hs3", dict(n=33, samples=1)),
    ("glb", dict(n=33, samples=3)),
    ("pos", dict(n=17, samples=1)),
    ("interp", dict(n=33, samples=3)),
    ("vanish", dict(n=33)),
    ("contract", dict(n=17, samples=1)),
])
def test_experiments_small(kind, overrides):
    rep = run_experiment(default_plan(kind, **overrides))
    assert rep.rows and rep.criteria
    failed = [c.name for c in rep.criteria if c.hard and not c.passed]
    assert not failed, failed


def test_mt3_reports_k_theory():
    rep = run_experiment(default_plan("mt3", n=17, samples=2))
    assert "K_theory" in rep.columns
    assert np.all(rep.column("K_theory") > 0)


def test_glb_constant_profile_is_plan_error():
    with pytest.raises(PlanError):
        run_experiment(default_plan("glb", n=17, samples=1, illumination=Illumination("constant")))


def test_experiment_parallel_matches_serial():
    plan = default_plan("lip_j1", n=17, samples=3)
    serial = run_experiment(plan)
    parallel = run_experiment(default_plan("lip_j1", n=17, samples=3, jobs=2))
    assert serial.body_digest() == parallel.body_digest()


def test_hs1_with_relative_noise():
    from hybridlab.internal_data import NoiseSpec

    rep = run_experiment(default_plan("hs1", samples=2, noise=NoiseSpec("relative-gaussian", 1e-3, 1)))
    failed = [c.name for c in rep.criteria if c.hard and not c.passed]
    assert not failed, failed
