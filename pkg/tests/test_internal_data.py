import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybridlab.fields import Grid, MatrixField, ScalarField
from hybridlab.internal_data import (DataKind, FloorViolation, NoiseSpec, add_noise, quotient_transform,
                                     synthesize)

G9 = Grid.square(9)


def _u(scale=1.0):
    return ScalarField.from_function(G9, lambda X, Y: scale * (1 + X + Y**2))


def test_kinds_and_exponents():
    assert DataKind("qu").exponent == 1
    assert DataKind.QU2.exponent == 2
    assert DataKind.POWER.exponent is None
    with pytest.raises(ValueError):
        DataKind("nope")


def test_power_density_of_linear_solution():
    # u = 2x + y, a = diag(1, 3): grad u . a grad u = 4 + 3
    u = ScalarField.from_function(G9, lambda X, Y: 2 * X + Y)
    a = MatrixField.diagonal(G9, np.ones(G9.shape), 3 * np.ones(G9.shape))
    H = synthesize("power", a, ScalarField.constant(G9, 0.0), u)
    np.testing.assert_allclose(H.values, 7.0, atol=1e-12)


def test_raw_u_is_copy():
    u = _u()
    H = synthesize(DataKind.RAW_U, None, ScalarField.constant(G9, 1.0), u)
    np.testing.assert_array_equal(H.values, u.values)


@settings(max_examples=30, deadline=None)
@given(t=st.floats(0.01, 100.0), c=st.floats(-5.0, 5.0))
def test_data_scaling_in_u(t, c):
    q = ScalarField.constant(G9, c)
    for kind, power in (("qu", 1), ("qu2", 2)):
        np.testing.assert_allclose(synthesize(kind, None, q, _u(t)).values,
                                   t**power * synthesize(kind, None, q, _u()).values, rtol=1e-12, atol=1e-300)
    a = MatrixField.identity(G9)
    np.testing.assert_allclose(synthesize("power", a, q, _u(t)).values,
                               t**2 * synthesize("power", a, q, _u()).values, rtol=1e-12, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 1000))
def test_qu2_nonnegative_for_nonnegative_q(seed):
    rng = np.random.default_rng(seed)
    q = ScalarField(G9, rng.random(G9.shape))
    u = ScalarField(G9, rng.standard_normal(G9.shape))
    assert synthesize("qu2", None, q, u).values.min() >= 0


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31), level=st.floats(1e-6, 1.0),
       model=st.sampled_from(["additive-gaussian", "relative-gaussian"]))
def test_noise_reproducible(seed, level, model):
    H = _u()
    spec = NoiseSpec(model, level, seed)
    assert add_noise(H, spec).values.tobytes() == add_noise(H, spec).values.tobytes()


def test_noise_statistics():
    H = ScalarField.constant(Grid.square(129), 2.0)
    noisy = add_noise(H, NoiseSpec("relative-gaussian", 1e-2, 3))
    rel = noisy.values / 2.0 - 1.0
    assert abs(rel.mean()) < 1e-3
    assert rel.std() == pytest.approx(1e-2, rel=0.05)
    assert add_noise(H, NoiseSpec()).values.tobytes() == H.values.tobytes()


def test_noise_spec_validation():
    with pytest.raises(ValueError):
        NoiseSpec("pink", 0.1)
    with pytest.raises(ValueError):
        NoiseSpec("additive-gaussian", -1.0)


def test_quotient_floor():
    u1 = ScalarField.from_function(G9, lambda X, Y: X)
    with pytest.raises(FloorViolation) as exc:
        quotient_transform(u1, _u(), ScalarField.constant(G9, 1.0))
    assert exc.value.reason == "u_floor"


def test_quotient_needs_scalar_a():
    a = MatrixField.diagonal(G9, np.ones(G9.shape), 2 * np.ones(G9.shape))
    with pytest.raises(ValueError):
        quotient_transform(_u(), _u(2.0), a)


def _quotient_residual(n):
    g = Grid.square(n)
    u1 = ScalarField.from_function(g, lambda X, Y: np.exp(X))
    u2 = ScalarField.from_function(g, lambda X, Y: np.exp(Y))
    w, sigma, res = quotient_transform(u1, u2, ScalarField.constant(g, 1.0))
    np.testing.assert_allclose(sigma.values, np.exp(2 * g.coords[0]))
    return res


def test_quotient_residual_second_order():
    # e^x and e^y both solve -lap u + u = 0, so div(sigma grad w) = 0 up to O(h^2)
    res = [_quotient_residual(n) for n in (17, 33, 65)]
    orders = np.log2(np.array(res[:-1]) / np.array(res[1:]))
    assert np.all(orders >= 1.8), orders
