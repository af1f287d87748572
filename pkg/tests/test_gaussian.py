import numpy as np
import pytest

from lognls import (ControlSchedule, GaussianParams, PolyGaussPhase, SolverContext, WaveField,
                    build_grid, classical_trajectory, dist_to_gaussian, evolve, gaussian_field,
                    integrate_gaussian, norm, quadratic_family)
from lognls.errors import BoundaryMassError

BOX = build_grid("box", 256, 1, 12.0)


def test_free_riccati_closed_form():
    for T in (0.3, 1.0, 2.5):
        p = integrate_gaussian(GaussianParams.standard(1), None, None, 0.0, T, 1e-3)
        assert p.a == pytest.approx(1 / (1 + 1j * T), abs=1e-10)


def test_harmonic_fixed_point():
    omega = 1.7
    u0 = ControlSchedule.constant(1.0, [omega**2])
    p = integrate_gaussian(GaussianParams.standard(1, omega), u0, None, 0.0, 1.0, 1e-3)
    assert p.a == pytest.approx(omega, abs=1e-12)


def test_mass_conserved_nonlinear():
    rng = np.random.default_rng(4)
    sched = ControlSchedule.from_durations([0.2, 0.3], rng.uniform(-1, 1, (2, 2)))
    lin = ControlSchedule(sched.breakpoints, sched.values[:, :1])
    quad = ControlSchedule(sched.breakpoints, sched.values[:, 1:])
    for T in (0.1, 0.25, 0.5):
        p = integrate_gaussian(GaussianParams.standard(1), quad, lin, -1.0, T, 1e-4)
        assert p.mass() == pytest.approx(1.0, abs=1e-6)
        assert gaussian_field(p, BOX).norm() == pytest.approx(1.0, abs=1e-6)


def test_standard_gaussian_unit_norm():
    assert gaussian_field(GaussianParams.standard(1), BOX).norm() == pytest.approx(1.0, abs=1e-12)
    g2 = build_grid("box", 64, 2, 8.0)
    assert gaussian_field(GaussianParams.standard(2), g2).norm() == pytest.approx(1.0, abs=1e-10)


def test_imaginary_c_keeps_modulus():
    p = GaussianParams(1.3 + 0.2j, [0.4 - 0.1j], -0.3)
    q = GaussianParams(p.a, p.b, p.c + 0.9j)
    np.testing.assert_allclose(np.abs(gaussian_field(p, BOX).values), np.abs(gaussian_field(q, BOX).values))


def test_random_params_norm_closed_form():
    rng = np.random.default_rng(7)
    for _ in range(10):
        p = GaussianParams(rng.uniform(0.5, 2) + 1j * rng.uniform(-1, 1),
                           rng.uniform(-1, 1, 1) + 1j * rng.uniform(-2, 2, 1), rng.normal()).normalized()
        assert gaussian_field(p, BOX).norm() == pytest.approx(1.0, abs=1e-8)


def test_gaussian_field_guards():
    with pytest.raises(ValueError):
        gaussian_field(GaussianParams.standard(1), build_grid("torus", 64))
    with pytest.raises(BoundaryMassError):
        gaussian_field(GaussianParams(1.0, [9.0], 0.0), BOX)
    with pytest.raises(ValueError):
        GaussianParams(-1.0, [0.0], 0.0)


def test_pde_tracks_ode_second_order():
    V = PolyGaussPhase(1, [(0.5, (2,), 0.0)])
    fam = quadratic_family(BOX, drift=V)
    sched = ControlSchedule.from_durations([0.1, 0.1], [[0.8, -0.5], [-0.3, 1.2]])
    lin = ControlSchedule(sched.breakpoints, sched.values[:, :1])
    quad = ControlSchedule(sched.breakpoints, sched.values[:, 1:])
    ref = gaussian_field(integrate_gaussian(GaussianParams.standard(1), quad, lin, -1.0, 0.2, 1e-5,
                                            potential=(0.5, None, 0.0)), BOX)
    psi0 = gaussian_field(GaussianParams.standard(1), BOX)
    errs = [norm(BOX, evolve(psi0, sched, SolverContext(fam, lam=-1.0, dt=dt)).values - ref.values)
            for dt in (2e-3, 1e-3)]
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.15)


def test_distance_of_gaussian_is_zero():
    p = GaussianParams(1.4 + 0.3j, [0.5 + 0.7j], 0.0).normalized()
    psi = gaussian_field(p, BOX)
    assert dist_to_gaussian(psi).distance < 1e-6
    assert dist_to_gaussian(psi * np.exp(1.1j)).distance < 1e-6


def test_distance_two_bumps():
    # overlap with either bump is 1/sqrt(2)
    x = BOX.axis
    psi = WaveField(BOX, np.exp(-0.5 * (x - 5) ** 2) + np.exp(-0.5 * (x + 5) ** 2)).normalized()
    fit = dist_to_gaussian(psi)
    assert fit.distance == pytest.approx(np.sqrt(2 - np.sqrt(2)), abs=1e-4)
    assert fit.params.mass() == pytest.approx(1.0, abs=1e-8)
    assert abs(fit.params.center()[0]) == pytest.approx(5.0, abs=1e-3)


def test_distance_is_deterministic():
    x = BOX.axis
    psi = WaveField(BOX, np.exp(-0.5 * x**2) * (1 + 0.3 * np.cos(2 * x))).normalized()
    assert dist_to_gaussian(psi, seed=3).distance == dist_to_gaussian(psi, seed=3).distance


def test_classical_free_and_constant_force():
    traj = classical_trajectory(None, ControlSchedule.zero(1.0, 1), 1.0, 1e-2)
    assert np.all(traj.q == 0) and np.all(traj.p == 0) and np.all(traj.theta == 0)
    traj = classical_trajectory(None, ControlSchedule.constant(1.0, [-1.0]), 1.0, 1e-2)
    np.testing.assert_allclose(traj.p[:, 0], traj.times, atol=1e-12)
    np.testing.assert_allclose(traj.q[:, 0], traj.times**2 / 2, atol=1e-12)


def test_classical_driven_oscillator():
    V = PolyGaussPhase(1, [(0.5, (2,), 0.0)])
    traj = classical_trajectory(V, ControlSchedule.constant(2.0, [-1.0]), 2.0, 1e-3)
    t = traj.times
    np.testing.assert_allclose(traj.q[:, 0], 1 - np.cos(t), atol=1e-8)
    np.testing.assert_allclose(traj.p[:, 0], np.sin(t), atol=1e-8)
    np.testing.assert_allclose(traj.theta, 0.5 * (t - 2 * np.sin(t) + 0.5 * np.sin(2 * t)), atol=1e-8)


def test_taylor_remainder_W():
    V = PolyGaussPhase(1, [(0.5, (2,), 0.0)])
    traj = classical_trajectory(V, ControlSchedule.constant(1.0, [-1.0]), 1.0, 1e-2)
    y = np.linspace(-1, 1, 5)[:, None]
    np.testing.assert_allclose(traj.W(V, -1, y), 0.5 * y[:, 0] ** 2, atol=1e-12)
