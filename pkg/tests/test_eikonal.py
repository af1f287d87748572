import numpy as np
import pytest
from scipy.optimize import brentq

from lognls import ContractionError, PolyGaussPhase, TrigPhase, invert_characteristic, solve_eikonal
from lognls.experiments import eikonal_defects, fit_rate

COS = TrigPhase(1, [(1.0, "cos", (1,))])
HALF_COS = TrigPhase(1, [(0.5, "cos", (1,))])


def test_affine_inversion_exact():
    phi = PolyGaussPhase.linear([0.0, -0.8])
    x = np.array([[0.3, 1.0], [-2.0, 0.5]])
    np.testing.assert_allclose(invert_characteristic(phi, 0.4, x), x + 0.4 * np.array([0.0, 0.8]), atol=1e-14)


def test_inversion_at_zero():
    x = np.array([[1.3]])
    np.testing.assert_array_equal(invert_characteristic(COS, 0.0, x), x)


def test_inversion_matches_bisection():
    y = invert_characteristic(COS, 0.1, np.array([[1.0]]))[0, 0]
    ref = brentq(lambda t: t - 0.1 * np.sin(t) - 1.0, 0.0, 2.0, xtol=1e-14)
    assert y == pytest.approx(ref, abs=1e-12)


def test_inversion_refuses_beyond_contraction():
    with pytest.raises(ContractionError):
        invert_characteristic(COS, 0.95, np.array([[0.0]]))


def test_linear_phase_solution():
    alpha, s = 0.6, 0.7
    sol = solve_eikonal(PolyGaussPhase.linear([-alpha]), 2.0)
    x = np.linspace(-3, 3, 7)[:, None]
    np.testing.assert_allclose(sol.value(s, x), -alpha * x[:, 0] - 0.5 * alpha**2 * s, atol=1e-13)


def test_quadratic_phase_closed_form():
    # phi = c x^2/2 has phi(s, x) = c x^2 / (2(1 + c s))
    c, s = 0.8, 0.5
    sol = solve_eikonal(PolyGaussPhase(1, [(0.5 * c, (2,), 0.0)]), 1.0)
    x = np.linspace(-2, 2, 9)[:, None]
    np.testing.assert_allclose(sol.value(s, x), c * x[:, 0] ** 2 / (2 * (1 + c * s)), atol=1e-12)
    np.testing.assert_allclose(sol.grad(s, x)[:, 0], c * x[:, 0] / (1 + c * s), atol=1e-12)
    np.testing.assert_allclose(sol.hess(s, x)[:, 0, 0], c / (1 + c * s), atol=1e-12)


def test_value_at_zero_is_source():
    sol = solve_eikonal(HALF_COS, 1.0)
    x = np.linspace(0, 6, 11)[:, None]
    np.testing.assert_allclose(sol.value(0.0, x), HALF_COS.value(x))


def test_hamilton_jacobi_residual():
    sol = solve_eikonal(HALF_COS, 1.5)
    rng = np.random.default_rng(0)
    h = 1e-4
    for s in rng.uniform(0.1, 1.3, 5):
        x = rng.uniform(0, 2 * np.pi, (8, 1))
        ds = (sol.value(s + h, x) - sol.value(s - h, x)) / (2 * h)
        assert np.max(np.abs(ds + 0.5 * np.sum(sol.grad(s, x) ** 2, axis=-1))) < 1e-6


def test_characteristic_invariance():
    sol = solve_eikonal(HALF_COS, 1.5)
    x = np.linspace(0, 2 * np.pi, 50)[:, None]
    for s in (0.3, 1.0, 1.4):
        moved = x + s * HALF_COS.grad(x)
        assert np.max(np.abs(sol.grad(s, moved) - HALF_COS.grad(x))) < 1e-10


def test_jacobian_positive_in_window():
    sol = solve_eikonal(HALF_COS, 1.9)
    y = np.linspace(0, 2 * np.pi, 200)[:, None]
    assert np.all(1 + 1.9 * HALF_COS.hess(y)[:, 0, 0] > 0)
    assert sol.hess_bound(1.9) == pytest.approx(0.5 / (1 - 0.95))


def test_estimate_rates():
    x = np.linspace(0, 2 * np.pi, 128, endpoint=False)[:, None]
    ss = np.array([0.2, 0.1, 0.05, 0.025]) / HALF_COS.hess_bound
    res = [eikonal_defects(HALF_COS, s, x) for s in ss]
    assert fit_rate(ss, [r[0] for r in res])[0] == pytest.approx(2.0, abs=0.2)
    assert fit_rate(ss, [r[1] for r in res])[0] == pytest.approx(1.0, abs=0.2)


def test_preconditions():
    with pytest.raises(ContractionError):
        solve_eikonal(HALF_COS, 2.0)
    with pytest.raises(ValueError):
        solve_eikonal(HALF_COS, 1.0, quadrature_nodes=4)
    sol = solve_eikonal(HALF_COS, 1.0)
    with pytest.raises(ContractionError):
        sol.grad(1.5, np.array([[0.0]]))


def test_vector_field_matches_gradient():
    sol = solve_eikonal(HALF_COS, 1.0)
    f = sol.vector_field(0.5)
    x = np.linspace(0, 6, 5)[:, None]
    np.testing.assert_allclose(f(x), sol.grad(0.5, x))
    assert f.lipschitz == pytest.approx(0.5 / 0.75)
