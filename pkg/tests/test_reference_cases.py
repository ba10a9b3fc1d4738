"""Small worked cases with hand-derived or closed-form answers."""

import json
import warnings

import numpy as np
import pytest

from hybridlab import cli, hif, norms
from hybridlab.admissibility import (AdmissibleClass, Illumination, SamplerConfig, first_dirichlet_eigenvalue,
                                     manufactured_case, sample_coefficient, validate)
from hybridlab.fields import BoundaryTrace, Grid, MatrixField, ScalarField
from hybridlab.internal_data import DataKind, NoiseSpec, add_noise, quotient_transform, synthesize
from hybridlab.operators import divergence_a_grad, gradient, laplacian
from hybridlab.reconstruction import (ReconConfig, recover_a_scalar, recover_aq_two_loads, recover_q_direct,
                                      recover_q_power)
from hybridlab.solver import estimate_delta, estimate_operator_norm_inverse, solve, solve_perturbative
from hybridlab.stability import PlanError, sign_identity, vanishing_order_scan
from hybridlab.stability.boundary import positivity_harnack_check

NS = (17, 33, 65)


def _orders(errors):
    e = np.asarray(errors)
    return np.log2(e[:-1] / e[1:])


# operators ---------------------------------------------------------------


def test_gradient_of_sine_converges_second_order():
    errs = []
    for n in NS:
        g = Grid.square(n)
        u = ScalarField.from_function(g, lambda X, Y: np.sin(np.pi * X))
        ux, _ = gradient(u)
        errs.append(np.max(np.abs(ux.values - np.pi * np.cos(np.pi * g.coords[0]))))
    assert np.all(_orders(errs) > 1.8)
    # err ~ K h^2 with the same K on both refinements
    assert errs[1] * 32**2 == pytest.approx(errs[2] * 64**2, rel=0.1)


def test_divergence_of_exponential_converges():
    errs = []
    for n in NS:
        g = Grid.square(n)
        u = ScalarField.from_function(g, lambda X, Y: np.exp(X))
        d = divergence_a_grad(MatrixField.identity(g), u)
        errs.append(norms.linf(d - u, g.interior_mask))
    assert np.all(_orders(errs) > 1.9)


def test_anisotropic_divergence_of_quadratic():
    g = Grid.square(9)
    a = MatrixField.diagonal(g, np.full(g.shape, 2.0), np.ones(g.shape))
    u = ScalarField.from_function(g, lambda X, Y: X**2 + Y**2)
    np.testing.assert_allclose(divergence_a_grad(a, u).values[g.interior_mask], 6.0, atol=1e-10)


def test_laplacian_of_linear_and_exponential():
    g = Grid.square(33)
    lin = ScalarField.from_function(g, lambda X, Y: X + Y)
    assert norms.linf(laplacian(lin)) < 1e-10
    ex = ScalarField.from_function(g, lambda X, Y: np.exp(X))
    # truncation error h^2/12 * u'''' <= e/(12*32^2) = 2.2e-4
    assert norms.linf(laplacian(ex) - ex, g.interior_mask) <= np.e / (12 * 32**2) * 1.01


# norms and files ---------------------------------------------------------


def test_norms_of_one():
    g = Grid.square(9)
    one = ScalarField.constant(g, 1.0)
    assert norms.l2(one) == pytest.approx(1.0, rel=1e-14)
    assert norms.linf(one) == 1.0
    assert norms.lipschitz_seminorm(one) == 0.0
    assert norms.holder_seminorm(one, 0.5) == 0.0


def test_constant_file_bytes_survive_round_trip(tmp_path):
    f = ScalarField.constant(Grid.square(9), 0.3)
    hif.write_field(f, tmp_path / "c.hif")
    raw = (tmp_path / "c.hif").read_bytes()
    assert raw == hif.encode(hif.read_field(tmp_path / "c.hif"))


def test_three_by_three_payload():
    f = ScalarField(Grid.square(3), np.arange(1.0, 10.0).reshape(3, 3))
    data = hif.encode(f)
    assert len(data) - 20 == 72
    np.testing.assert_array_equal(np.frombuffer(data[20:], "<f8"), np.arange(1.0, 10.0))


# classes, eigenvalues, cases ---------------------------------------------


def test_eigenvalue_hand_values():
    # (8/h^2) sin^2(pi h/2) summed over both axes with h = 1/8
    assert first_dirichlet_eigenvalue(Grid.square(9)) == pytest.approx(2 * 256 * np.sin(np.pi / 16)**2, rel=1e-9)
    assert first_dirichlet_eigenvalue(Grid.square(65)) == pytest.approx(19.72, abs=0.02)


def test_validate_unit_and_deep_negative_potential():
    g = Grid.square(9)
    a = MatrixField.identity(g)
    assert validate(a, ScalarField.constant(g, 0.0), AdmissibleClass(mu=1.0, lam=0.0)).passed
    rep = validate(a, ScalarField.constant(g, -25.0), AdmissibleClass(mu=1.0, lam=25.0))
    assert "coercive_mu_lambda" in rep.failures


def test_zero_amplitude_sample_is_class_midpoint():
    g = Grid.square(9)
    q = sample_coefficient(SamplerConfig(amplitude=0.0), AdmissibleClass(q_low=0.5, q_high=1.0), g)
    np.testing.assert_array_equal(q.values, 0.75)


@pytest.mark.parametrize("name,c", [("exp", 1.0), ("helmholtz", np.pi**2)])
def test_manufactured_cases_satisfy_equation(name, c):
    # continuum residual -lap u + q u = 0, checked with the five-point stencil at O(h^2)
    res = []
    for n in NS:
        case = manufactured_case(name, Grid.square(n), c=c)
        r = -laplacian(case.u_exact) + case.q * case.u_exact
        res.append(norms.linf(r, case.u_exact.grid.interior_mask))
    assert np.all(_orders(res) > 1.9)


def test_linear_case_is_x():
    g = Grid.square(9)
    case = manufactured_case("linear", g, alpha=1.0, beta=0.0, gamma=0.0)
    np.testing.assert_array_equal(case.u_exact.values, g.coords[0])


# solver proxies ------------------------------------------------------------


def test_inverse_norm_proxy_scaling():
    g = Grid.square(9)
    zero = ScalarField.constant(g, 0.0)
    p1 = estimate_operator_norm_inverse(MatrixField.identity(g), zero, tol=1e-10)
    p2 = estimate_operator_norm_inverse(MatrixField.identity(g, 2.0), zero, tol=1e-10)
    assert p2 == pytest.approx(p1 / 2, rel=1e-8)
    shifted = [estimate_operator_norm_inverse(MatrixField.identity(g), ScalarField.constant(g, c), tol=1e-10)
               for c in (0.0, 1.0, 5.0)]
    assert shifted[0] > shifted[1] > shifted[2]
    # eigenvalue shift: 1 / (lambda_1 + c)
    assert shifted[2] == pytest.approx(1 / (1 / p1 + 5.0), rel=1e-8)


def test_delta_scaling_and_monotonicity():
    g = Grid.square(9)
    zero = ScalarField.constant(g, 0.0)
    d1 = estimate_delta(MatrixField.identity(g), zero, tol=1e-10)
    assert d1 == pytest.approx(9.7434, abs=1e-4)
    assert estimate_delta(MatrixField.identity(g, 2.0), zero, tol=1e-10) == pytest.approx(2 * d1, rel=1e-8)
    assert estimate_delta(MatrixField.identity(g), ScalarField.constant(g, 5.0)) > d1


def test_tenth_delta_perturbation_contracts_by_half():
    g = Grid.square(33)
    a0, q0 = MatrixField.identity(g), ScalarField.constant(g, 0.0)
    delta = estimate_delta(a0, q0)
    qp = ScalarField.constant(g, 0.1 * delta)
    u_fp, hist = solve_perturbative(a0, q0, qp, 1.0, tol=1e-10)
    assert hist.max_ratio <= 0.55
    u_dir, _ = solve(a0, qp, 1.0, tol=1e-13)
    assert norms.linf(u_fp - u_dir) <= 10 * 1e-10


# internal data -------------------------------------------------------------


def test_zero_potential_gives_zero_data():
    g = Grid.square(9)
    u = ScalarField.from_function(g, lambda X, Y: 1 + X)
    assert norms.linf(synthesize(DataKind.QU, None, ScalarField.constant(g, 0.0), u)) == 0.0


def test_qu2_of_exponential_case():
    g = Grid.square(9)
    case = manufactured_case("exp", g)
    H = synthesize(DataKind.QU2, case.a, case.q, case.u_exact)
    np.testing.assert_allclose(H.values, np.exp(2 * g.coords[0]), rtol=1e-14)


def test_equal_loads_give_unit_quotient():
    g = Grid.square(9)
    u = ScalarField.from_function(g, lambda X, Y: np.exp(X) + Y)
    w, _, res = quotient_transform(u, u, ScalarField.constant(g, 1.0))
    np.testing.assert_array_equal(w.values, 1.0)
    assert res < 1e-10


def test_symbolic_quotient_fields():
    g = Grid.square(17)
    X, Y = g.coords
    u1 = ScalarField(g, np.exp(X))
    u2 = ScalarField(g, np.exp(Y))
    w, sigma, _ = quotient_transform(u1, u2, ScalarField.constant(g, 1.0))
    np.testing.assert_allclose(w.values, np.exp(Y - X), rtol=1e-14)
    np.testing.assert_allclose(sigma.values, np.exp(2 * X), rtol=1e-14)


def test_additive_noise_standard_deviation():
    g = Grid.square(65)
    zero = ScalarField.constant(g, 0.0)
    assert add_noise(zero, NoiseSpec("additive-gaussian", 0.0, 1)).values.tobytes() == zero.values.tobytes()
    noisy = add_noise(zero, NoiseSpec("additive-gaussian", 0.02, 1))
    assert np.std(noisy.values, ddof=1) == pytest.approx(0.02, rel=0.05)


# reconstruction ------------------------------------------------------------


@pytest.mark.parametrize("j", [1, 2])
def test_zero_data_recovers_zero_potential(j):
    g = Grid.square(17)
    res = recover_q_power(ScalarField.constant(g, 0.0), MatrixField.identity(g), 1.0, j)
    assert res.success and res.iterations == 1
    assert norms.linf(res.q) == 0.0


def test_bold_class_round_trip_logs_iterations():
    g = Grid.square(33)
    a = MatrixField.identity(g)
    q = sample_coefficient(SamplerConfig(seed=5, amplitude=0.5), AdmissibleClass(q_low=0.5, q_high=1.0, m=1.0), g)
    u, _ = solve(a, q, 1.0, tol=1e-13)
    res = recover_q_power(synthesize(DataKind.QU2, a, q, u), a, 1.0, 2)
    assert res.success and res.iterations > 1 and len(res.history) == res.iterations
    assert norms.linf(res.q - q) <= 1e-6


def test_direct_potential_cases():
    g = Grid.square(65)
    assert norms.linf(recover_q_direct(ScalarField.constant(g, 3.0)).q) == 0.0
    s = ScalarField.from_function(g, lambda X, Y: np.sin(np.pi * X) + 0 * Y)
    q = recover_q_direct(s).q
    assert norms.linf(q + np.pi**2, g.interior_mask) < 1e-2


def test_linear_solution_forces_constant_diffusion():
    g = Grid.square(17)
    u = ScalarField.from_function(g, lambda X, Y: X + 0.0 * Y + 1.0)
    res = recover_a_scalar(u, ScalarField.constant(g, 0.0), 1.0)
    np.testing.assert_allclose(res.a.values, 1.0, atol=1e-8)


def test_diffusion_bump_on_fine_grid():
    g = Grid.square(65)
    a_true = ScalarField.from_function(g, lambda X, Y: 1 + 0.3 * np.exp(-20 * ((X - .5)**2 + (Y - .5)**2)))
    q = ScalarField.constant(g, -1.0)
    u, _ = solve(a_true, q, BoundaryTrace.from_function(g, lambda X, Y: 1 + X + 0.5 * Y), tol=1e-13)
    res = recover_a_scalar(u, q, a_true.trace(), ReconConfig(reg=1e-6), a_true=a_true)
    assert res.metrics["error_linf_omega"] <= 1e-3


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_two_loads_round_trip_in_holder_class(seed):
    g = Grid.square(65)
    cls = AdmissibleClass(mu=2.0, kappa=0.5, Lambda=2.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        a = sample_coefficient(SamplerConfig(seed=seed, amplitude=0.2, clamp=(0.5, 1.0)), cls, g, "a")
        q = sample_coefficient(SamplerConfig(seed=100 + seed, amplitude=0.2, clamp=(0.0, 0.5)), cls, g, "q")
    assert validate(a, q, cls).passed
    u1, _ = solve(a, q, 1.0, tol=1e-13)
    u2, _ = solve(a, q, Illumination("x").trace(g), tol=1e-13)
    res = recover_aq_two_loads(u1, u2, a.scalar().trace(), q.trace(), a_true=a.scalar(), q_true=q)
    assert res.metrics["a_error_linf_omega"] < 1e-3
    assert res.metrics["q_error_linf_omega"] < 1e-3


# stability helpers ---------------------------------------------------------


def test_identity_vanishes_for_equal_diffusion():
    g = Grid.square(17)
    a = ScalarField.constant(g, 1.0)
    q = ScalarField.constant(g, -1.0)
    u, _ = solve(a, q, 1.0)
    lhs, rhs, literal = sign_identity(a, a, q, u, u)
    assert lhs == 0.0 and rhs == 0.0 and literal == 0.0


def test_trivial_positivity_case():
    g = Grid.square(33)
    rep = positivity_harnack_check(MatrixField.identity(g), ScalarField.constant(g, 0.0), 1.0)
    eps = rep.column("eps_hat")[0]
    assert eps == pytest.approx(1.0, abs=1e-10)
    assert rep.column("harnack_ratio")[0] == pytest.approx(1.0, abs=1e-10)


def test_half_illumination_band_bound():
    g = Grid.square(65)
    f = Illumination("linear", alpha=0.5, beta=0.5, gamma=0.5).trace(g)
    rep = positivity_harnack_check(MatrixField.identity(g), ScalarField.constant(g, 1.0), f)
    assert rep.column("band_min")[0] >= 0.25


def test_constant_field_rejected_for_vanishing_scan():
    with pytest.raises(PlanError):
        vanishing_order_scan(ScalarField.constant(Grid.square(17), 1.0))


def test_vanishing_order_of_smooth_quotient():
    g = Grid.square(65)
    rep = vanishing_order_scan(ScalarField.from_function(g, lambda X, Y: np.exp(Y - X)))
    orders = [v for k, v in rep.summary.items() if k.startswith("order.center")]
    assert len(orders) == 5
    np.testing.assert_allclose(orders, 2.0, atol=0.2)


# command line ----------------------------------------------------------------


def _cli(tmp_path, command, cfg, *extra):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(cfg))
    return cli.main([command, "--config", str(p), "--out", str(tmp_path / "out"), *extra])


def _row(path):
    header, row = path.read_text().splitlines()
    return dict(zip(header.split(","), row.split(",")))


def test_cli_linear_solve_residual(tmp_path):
    assert _cli(tmp_path, "solve", {"n": 17, "solve": {"problem": {"case": {"name": "linear"}}}}) == 0
    row = _row(tmp_path / "out" / "solve.csv")
    assert float(row["residual"]) < 1e-12
    u = hif.read_field(tmp_path / "out" / "u.hif")
    np.testing.assert_allclose(u.values, u.grid.coords[0], atol=1e-12)


def test_cli_exp_solve_error(tmp_path):
    assert _cli(tmp_path, "solve", {"solve": {"problem": {"case": {"name": "exp"}}}}) == 0
    assert float(_row(tmp_path / "out" / "solve.csv")["error_linf"]) <= 1e-3


def test_cli_synth_zero_potential(tmp_path):
    cfg = {"n": 9, "synth": {"kind": "qu", "problem": {"q_value": 0.0}}}
    assert _cli(tmp_path, "synth", cfg) == 0
    assert norms.linf(hif.read_field(tmp_path / "out" / "H.hif")) == 0.0


def test_cli_synth_qu2_exp(tmp_path):
    assert _cli(tmp_path, "synth", {"n": 33, "synth": {"kind": "qu2"}}) == 0
    H = hif.read_field(tmp_path / "out" / "H.hif")
    np.testing.assert_allclose(H.values, np.exp(2 * H.grid.coords[0]), atol=1e-3)


def test_cli_qu_round_trip(tmp_path):
    cfg = {"reconstruct": {"method": "qu", "problem": {"case": {"name": "exp"}}}}
    assert _cli(tmp_path, "reconstruct", cfg) == 0
    assert float(_row(tmp_path / "out" / "reconstruct.csv")["q_error_linf"]) <= 1e-6


def test_cli_two_loads_degenerate(tmp_path, capsys):
    g = Grid.square(9)
    u = ScalarField.from_function(g, lambda X, Y: np.exp(X))
    hif.write_field(u, tmp_path / "u1.hif")
    hif.write_field(2.0 * u, tmp_path / "u2.hif")
    cfg = {"n": 9, "reconstruct": {"method": "two_loads", "data": str(tmp_path / "u1.hif"),
                                   "data2": str(tmp_path / "u2.hif")}}
    assert _cli(tmp_path, "reconstruct", cfg) == 5
    assert json.loads(capsys.readouterr().err.strip())["reason"] == "gradient degenerate"


def test_cli_contraction_in_hypothesis(tmp_path):
    cfg = {"n": 17, "stability": {"kind": "contract", "samples": 1, "options": {"magnitudes": [0.0, 0.1, 0.5, 0.9]}}}
    assert _cli(tmp_path, "stability", cfg) == 0


def test_cli_eig_65(tmp_path, capsys):
    assert _cli(tmp_path, "eig", {"n": 65}) == 0
    lam = float(capsys.readouterr().out.splitlines()[1].split(",")[1])
    assert lam == pytest.approx(19.72, abs=0.02)
