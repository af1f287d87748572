import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lognls import (BoundaryMassError, UnderResolvedError, WaveField, aligned_distance,
                    build_grid, field_from_function, inner, norm, sigma_norm, standard_potentials)
from lognls.grid import check_boundary, check_resolved, fft, ifft, spectral_gradient


def test_torus_lattice():
    g = build_grid("torus", 8)
    assert g.spacing == pytest.approx(2 * np.pi / 8)
    assert sorted(g.axis_wavenumbers) == list(range(-4, 4))


def test_box_lattice():
    g = build_grid("box", 16, 1, 10.0)
    assert g.spacing == 1.25
    np.testing.assert_allclose(g.axis, np.arange(-10, 10, 1.25))


def test_torus_2d_small():
    g = build_grid("torus", 4, 2)
    assert g.points.reshape(-1, 2).shape == (16, 2)
    assert set(np.unique(g.wavenumbers)) == {-2.0, -1.0, 0.0, 1.0}


@pytest.mark.parametrize("args", [("torus", 12), ("torus", 4), ("box", 16, 1, 0.0), ("sphere", 8)])
def test_bad_grids(args):
    with pytest.raises(ValueError):
        build_grid(*args)


def test_standard_potentials_torus():
    fam = standard_potentials(build_grid("torus", 16), "TorusTrig")
    x = fam.grid.axis
    assert fam.m == 2
    np.testing.assert_allclose(fam.controls[0], np.sin(x), atol=1e-15)
    np.testing.assert_allclose(fam.controls[1], np.cos(x), atol=1e-15)


def test_standard_potentials_torus_2d_directions():
    fam = standard_potentials(build_grid("torus", 8, 2), "TorusTrig")
    assert fam.m == 4
    x = fam.grid.points
    np.testing.assert_allclose(fam.controls[2], np.sin(x[..., 0] + x[..., 1]), atol=1e-14)
    assert all(np.isrealobj(c) for c in fam.controls)


def test_standard_potentials_box():
    fam = standard_potentials(build_grid("box", 32, 1, 8.0), "EuclideanLinearGauss")
    x = fam.grid.axis
    np.testing.assert_allclose(fam.controls[0], x)
    np.testing.assert_allclose(fam.controls[1], np.exp(-x**2 / 2))
    assert not np.any(fam.drift)


def test_family_geometry_mismatch():
    with pytest.raises(ValueError):
        standard_potentials(build_grid("box", 16, 1, 5.0), "TorusTrig")
    with pytest.raises(ValueError):
        standard_potentials(build_grid("torus", 16), "EuclideanLinearGauss")


def test_aligned_distance_examples():
    g = build_grid("torus", 64)
    psi = field_from_function(g, lambda x: np.exp(np.cos(x[..., 0])))
    assert aligned_distance(psi, psi) < 1e-14
    assert aligned_distance(psi, psi * np.exp(0.7j)) < 1e-7
    a = field_from_function(g, lambda x: np.exp(1j * x[..., 0]))
    b = field_from_function(g, lambda x: np.exp(2j * x[..., 0]))
    assert aligned_distance(a, b) == pytest.approx(np.sqrt(2), abs=1e-12)


def test_aligned_distance_grid_mismatch():
    a = field_from_function(build_grid("torus", 16), lambda x: 1 + 0 * x[..., 0])
    b = field_from_function(build_grid("torus", 32), lambda x: 1 + 0 * x[..., 0])
    with pytest.raises(ValueError):
        aligned_distance(a, b)


def _random_unit(g, rng):
    v = rng.normal(size=g.shape) + 1j * rng.normal(size=g.shape)
    return WaveField(g, v).normalized()


def test_triangle_inequality_random():
    g = build_grid("torus", 32)
    rng = np.random.default_rng(3)
    for _ in range(50):
        a, b, c = (_random_unit(g, rng) for _ in range(3))
        assert aligned_distance(a, c) <= aligned_distance(a, b) + aligned_distance(b, c) + 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_parseval_roundtrip(seed):
    rng = np.random.default_rng(seed)
    v = rng.normal(size=(16, 8)) + 1j * rng.normal(size=(16, 8))
    assert np.linalg.norm(ifft(fft(v)) - v) / np.linalg.norm(v) < 1e-12


def test_sigma_norm_examples():
    g = build_grid("torus", 64)
    const = WaveField(g, np.full(g.shape, (2 * np.pi) ** -0.5, dtype=complex))
    assert sigma_norm(const) == pytest.approx(1.0, abs=1e-12)
    wave = WaveField(g, np.exp(3j * g.axis) / np.sqrt(2 * np.pi))
    assert sigma_norm(wave) == pytest.approx(4.0, abs=1e-12)


def test_sigma_norm_gaussian_moments():
    # unit Gaussian: ||grad psi|| = ||x psi|| = 1/sqrt(2)
    g = build_grid("box", 256, 1, 12.0)
    psi = WaveField(g, np.pi**-0.25 * np.exp(-g.axis**2 / 2))
    assert sigma_norm(psi) == pytest.approx(1 + np.sqrt(2), abs=1e-6)


def test_inner_and_norm():
    g = build_grid("torus", 32)
    one = np.ones(g.shape, dtype=complex)
    assert norm(g, one) == pytest.approx(np.sqrt(2 * np.pi))
    assert inner(g, one, np.exp(1j * g.axis)) == pytest.approx(0, abs=1e-13)


def test_spectral_gradient_exact():
    g = build_grid("torus", 32)
    grad = spectral_gradient(g, np.sin(2 * g.axis).astype(complex))
    np.testing.assert_allclose(grad[..., 0].real, 2 * np.cos(2 * g.axis), atol=1e-12)


def test_resolution_guard():
    g = build_grid("torus", 64)
    check_resolved(g, np.exp(np.cos(g.axis)).astype(complex))
    with pytest.raises(UnderResolvedError):
        check_resolved(g, np.exp(30j * g.axis))


def test_boundary_guard():
    g = build_grid("box", 128, 1, 6.0)
    check_boundary(field_from_function(g, lambda x: np.exp(-x[..., 0] ** 2)))
    with pytest.raises(BoundaryMassError):
        check_boundary(field_from_function(g, lambda x: np.exp(-(x[..., 0] - 5.5) ** 2)))
