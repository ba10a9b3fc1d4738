import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybridlab import norms
from hybridlab.admissibility import manufactured_case
from hybridlab.fields import BoundaryTrace, Grid, MatrixField, ScalarField
from hybridlab.internal_data import synthesize
from hybridlab.reconstruction import (ReconConfig, ReconstructionError, interior_subdomain, recover_a_scalar,
                                      recover_aq_two_loads, recover_q_direct, recover_q_from_qu,
                                      recover_q_from_qu2, recover_q_power)
from hybridlab.solver import solve


@pytest.fixture(scope="module")
def exp33():
    g = Grid.square(33)
    c = manufactured_case("exp", g)
    u, _ = solve(c.a, c.q, c.f, tol=1e-13)
    return g, c, u


@pytest.mark.parametrize("j,kind", [(1, "qu"), (2, "qu2")])
def test_picard_round_trip(exp33, j, kind):
    g, c, u = exp33
    H = synthesize(kind, c.a, c.q, u)
    res = recover_q_power(H, c.a, c.f, j)
    assert res.success and res.reason is None
    assert norms.linf(res.q - c.q) < 1e-9
    assert 0 < res.rho_hat < 1
    assert list(res.history) == sorted(res.history, reverse=True)


def test_named_wrappers_agree(exp33):
    g, c, u = exp33
    H1 = synthesize("qu", c.a, c.q, u)
    H2 = synthesize("qu2", c.a, c.q, u)
    assert recover_q_from_qu(H1, c.a, c.f).q.values.tobytes() == recover_q_power(H1, c.a, c.f, 1).q.values.tobytes()
    assert norms.linf(recover_q_from_qu2(H2, c.a, c.f).q - c.q) < 1e-9


@settings(max_examples=8, deadline=None)
@given(t=st.floats(0.2, 5.0))
def test_picard_scale_equivariance(t):
    # scaling the illumination by t scales qu by t and leaves q unchanged
    g = Grid.square(17)
    a, q = MatrixField.identity(g), ScalarField.from_function(g, lambda X, Y: 1 + X * Y)
    f = BoundaryTrace.from_function(g, lambda X, Y: 1 + 0.5 * X)
    u, _ = solve(a, q, f, tol=1e-13)
    H = synthesize("qu", a, q, u)
    r1 = recover_q_power(H, a, f, 1)
    r2 = recover_q_power(t * H, a, BoundaryTrace(g, t * f.values), 1)
    assert norms.linf(r1.q - r2.q) < 1e-8


def test_picard_max_iters_reported(exp33):
    g, c, u = exp33
    H = synthesize("qu", c.a, c.q, u)
    res = recover_q_power(H, c.a, c.f, 1, ReconConfig(max_iters=2))
    assert not res.success and res.reason == "max_iters"


def test_picard_floor():
    g = Grid.square(17)
    f = BoundaryTrace.from_function(g, lambda X, Y: X)
    H = ScalarField.constant(g, 0.1)
    with pytest.raises(ReconstructionError) as exc:
        recover_q_power(H, MatrixField.identity(g), f, 1)
    assert exc.value.reason == "u_floor"


def test_direct_q_second_order():
    errs = []
    for n in (17, 33, 65):
        g = Grid.square(n)
        u = ScalarField.from_function(g, lambda X, Y: np.exp(X))
        errs.append(norms.linf(recover_q_direct(u).q - 1.0))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders > 1.8), orders


def test_direct_q_exact_on_discrete_solution(exp33):
    g, c, u = exp33
    assert norms.linf(recover_q_direct(u).q - c.q) < 1e-7


def test_direct_q_floor():
    g = Grid.square(9)
    u = ScalarField.from_function(g, lambda X, Y: X - 0.5)
    with pytest.raises(ReconstructionError):
        recover_q_direct(u)


@pytest.fixture(scope="module")
def bump_case():
    g = Grid.square(33)
    a_true = ScalarField.from_function(g, lambda X, Y: 1 + 0.3 * np.exp(-20 * ((X - .5)**2 + (Y - .5)**2)))
    q = ScalarField.constant(g, -1.0)
    f = BoundaryTrace.from_function(g, lambda X, Y: 1 + X + 0.5 * Y)
    u, _ = solve(a_true, q, f, tol=1e-13)
    return g, a_true, q, u


def test_a_scalar_error_decreases_with_regularization(bump_case):
    g, a_true, q, u = bump_case
    errs = [recover_a_scalar(u, q, a_true.trace(), ReconConfig(reg=r), a_true=a_true).metrics["error_linf"]
            for r in (1e-4, 1e-5, 1e-6)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-4


def test_a_scalar_gradient_degenerate():
    g = Grid.square(9)
    with pytest.raises(ReconstructionError) as exc:
        recover_a_scalar(ScalarField.constant(g, 1.0), ScalarField.constant(g, 0.0), 1.0)
    assert exc.value.reason == "gradient degenerate"


def test_a_scalar_rejects_nonpositive_boundary(bump_case):
    g, a_true, q, u = bump_case
    with pytest.raises(ValueError):
        recover_a_scalar(u, q, -1.0)


def test_two_loads_symbolic():
    g = Grid.square(33)
    u1 = ScalarField.from_function(g, lambda X, Y: np.exp(X))
    u2 = ScalarField.from_function(g, lambda X, Y: np.exp(Y))
    one = ScalarField.constant(g, 1.0)
    res = recover_aq_two_loads(u1, u2, 1.0, 1.0, a_true=one, q_true=one)
    assert "extrema_assumption_unchecked" in res.flags
    assert res.metrics["a_error_linf_omega"] < 2e-3
    assert res.metrics["q_error_linf_omega"] < 1e-2


def test_two_loads_degenerate_quotient():
    g = Grid.square(9)
    u = ScalarField.from_function(g, lambda X, Y: np.exp(X))
    with pytest.raises(ReconstructionError) as exc:
        recover_aq_two_loads(u, 2.0 * u, 1.0, 1.0)
    assert exc.value.reason == "gradient degenerate"


def test_interior_subdomain():
    g = Grid.square(21)
    m = interior_subdomain(g, 0.25)
    X, Y = g.coords
    assert X[m].min() == pytest.approx(0.25) and X[m].max() == pytest.approx(0.75)


@pytest.mark.parametrize("kw", [dict(tol=0), dict(max_iters=0), dict(reg=-1), dict(interior_margin=0.5),
                                dict(u_floor=0)])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        ReconConfig(**kw)
