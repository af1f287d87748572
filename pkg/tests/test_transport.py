import numpy as np
import pytest

from lognls import (ConstantField, GradientField, LinearField, TrigPhase, build_grid,
                    field_from_function, flow_map, inner, pushforward, transport_apply)
from lognls.transport import cubic_interpolate, spectral_interpolate

NEG_SIN = GradientField(TrigPhase(1, [(1.0, "cos", (1,))]))  # grad cos x = -sin x


def smooth_state(g):
    return field_from_function(g, lambda x: np.exp(np.cos(x[..., 0] - 0.4) + 0.3j * np.sin(2 * x[..., 0])))


def test_transport_of_plane_wave_constant_field():
    g = build_grid("torus", 32)
    psi = field_from_function(g, lambda x: np.exp(3j * x[..., 0]))
    out = transport_apply(ConstantField([0.7]), psi)
    np.testing.assert_allclose(out.values, 0.7 * 3j * psi.values, atol=1e-12)


def test_transport_matches_finite_differences():
    g = build_grid("torus", 128)
    psi = smooth_state(g)
    x, h = g.axis, 1e-4
    fn = lambda y: np.exp(np.cos(y - 0.4) + 0.3j * np.sin(2 * y))  # noqa: E731
    scale = psi.values[0] / fn(x[0])
    ref = scale * (-np.sin(x) * (fn(x + h) - fn(x - h)) / (2 * h) - 0.5 * np.cos(x) * fn(x))
    np.testing.assert_allclose(transport_apply(NEG_SIN, psi).values, ref, atol=1e-5)


def test_transport_is_skew_adjoint():
    g = build_grid("torus", 64)
    psi = smooth_state(g)
    f = GradientField(TrigPhase(1, [(0.5, "cos", (1,)), (0.2, "sin", (2,))]))
    assert abs(inner(g, transport_apply(f, psi).values, psi.values).real) < 1e-12


def test_flow_constant_and_linear():
    P, J = flow_map(ConstantField([0.5]), 0.8, np.array([[0.1], [1.0]]))
    np.testing.assert_allclose(P[:, 0], [0.5, 1.4])
    np.testing.assert_allclose(J, 1.0)
    P, J = flow_map(LinearField([[1.0]]), 0.7, np.array([[2.0]]))
    assert P[0, 0] == pytest.approx(2 * np.exp(0.7), rel=1e-10)
    assert J[0] == pytest.approx(np.exp(0.7), rel=1e-10)


def test_flow_neg_sin_closed_form():
    # x' = -sin x has tan(x/2) = tan(x0/2) e^{-t}; J = dx/dx0
    P, J = flow_map(NEG_SIN, 0.3, np.array([[1.0]]))
    exact = 2 * np.arctan(np.tan(0.5) * np.exp(-0.3))
    assert P[0, 0] == pytest.approx(exact, abs=1e-10)
    t2 = np.tan(0.5) ** 2
    e = np.exp(-0.3)
    assert J[0] == pytest.approx(e * (1 + t2) / (1 + t2 * e * e), abs=1e-9)


def test_flow_group_property():
    x = np.linspace(-2, 2, 9)[:, None]
    a, Ja = flow_map(NEG_SIN, 0.4, x)
    b, Jb = flow_map(NEG_SIN, 0.25, a)
    c, Jc = flow_map(NEG_SIN, 0.65, x)
    np.testing.assert_allclose(b, c, atol=1e-8)
    np.testing.assert_allclose(Ja * Jb, Jc, atol=1e-8)


def test_spectral_interpolation_exact_for_band_limited():
    g = build_grid("torus", 16)
    vals = (np.cos(3 * g.axis) + 0.5j * np.sin(g.axis)).astype(complex)
    pts = np.random.default_rng(0).uniform(0, 2 * np.pi, (25, 1))
    np.testing.assert_allclose(spectral_interpolate(g, vals, pts),
                               np.cos(3 * pts[:, 0]) + 0.5j * np.sin(pts[:, 0]), atol=1e-13)


def test_cubic_interpolation_close():
    g = build_grid("torus", 256)
    vals = np.exp(np.cos(g.axis)).astype(complex)
    pts = np.random.default_rng(1).uniform(0, 2 * np.pi, (25, 1))
    np.testing.assert_allclose(cubic_interpolate(g, vals, pts), np.exp(np.cos(pts[:, 0])), atol=1e-6)


def test_pushforward_identity_and_translation():
    g = build_grid("torus", 64)
    psi = smooth_state(g)
    assert pushforward(NEG_SIN, 0.0, psi) is psi
    moved = pushforward(ConstantField([0.3]), 1.0, psi)
    ref = field_from_function(g, lambda x: np.exp(np.cos(x[..., 0] + 0.3 - 0.4)
                                                  + 0.3j * np.sin(2 * (x[..., 0] + 0.3))), normalize=False)
    np.testing.assert_allclose(moved.values, ref.values / np.linalg.norm(ref.values)
                               * np.linalg.norm(psi.values), atol=1e-12)


@pytest.mark.parametrize("seed", range(4))
def test_pushforward_preserves_norm_random_fields(seed):
    rng = np.random.default_rng(seed)
    g = build_grid("torus", 128)
    phase = TrigPhase(1, [(rng.uniform(-0.5, 0.5), "cos", (1,)), (rng.uniform(-0.3, 0.3), "sin", (2,))])
    out = pushforward(GradientField(phase), rng.uniform(-1, 1), smooth_state(g))
    assert abs(out.norm() - 1.0) < 1e-6


def test_pushforward_group_law():
    g = build_grid("torus", 128)
    psi = smooth_state(g)
    two = pushforward(NEG_SIN, 0.3, pushforward(NEG_SIN, 0.2, psi))
    one = pushforward(NEG_SIN, 0.5, psi)
    assert np.sqrt(g.cell_volume) * np.linalg.norm(two.values - one.values) < 2e-6


def test_generator_consistency_first_order():
    from lognls.experiments import fit_rate
    g = build_grid("torus", 128)
    psi = smooth_state(g)
    T = transport_apply(NEG_SIN, psi).values
    hs = [0.1, 0.05, 0.025]
    errs = [np.linalg.norm((pushforward(NEG_SIN, h, psi).values - psi.values) / h - T) for h in hs]
    assert fit_rate(hs, errs)[0] == pytest.approx(1.0, abs=0.2)
