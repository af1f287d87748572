"""
Transport operators along vector fields.

``transport_apply`` evaluates ``f . grad(psi) + div(f) psi / 2``, a skew-adjoint
generator; ``pushforward`` realizes its exponential as the unitary
``psi -> J^{1/2} psi(P)`` where ``P`` is the time-t flow of ``f`` and ``J`` its
Jacobian determinant.
"""
from __future__ import annotations

import math
import string

import numpy as np
from scipy import ndimage

from .grid import Grid, WaveField, check_resolved, spectral_gradient
from .phases import SmoothPhase

# RK4 substep cap for flows, well inside the 0.1/Lip stability requirement.
MAX_FLOW_STEP = 0.01


class VectorField:
    dim: int
    lipschitz: float

    def __call__(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def div(self, x: np.ndarray) -> np.ndarray:
        return np.trace(self.jac(x), axis1=-2, axis2=-1)

    def jac(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class ConstantField(VectorField):
    def __init__(self, alpha):
        self.alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
        self.dim = len(self.alpha)
        self.lipschitz = 0.0

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(self.alpha, x.shape).copy()

    def div(self, x):
        return np.zeros(np.asarray(x).shape[:-1])

    def jac(self, x):
        return np.zeros(np.asarray(x).shape[:-1] + (self.dim, self.dim))


class LinearField(VectorField):
    """f(x) = A x."""

    def __init__(self, A):
        self.A = np.atleast_2d(np.asarray(A, dtype=float))
        self.dim = self.A.shape[0]
        self.lipschitz = float(np.linalg.norm(self.A, 2))

    def __call__(self, x):
        return np.asarray(x, dtype=float) @ self.A.T

    def div(self, x):
        return np.full(np.asarray(x).shape[:-1], np.trace(self.A))

    def jac(self, x):
        return np.broadcast_to(self.A, np.asarray(x).shape[:-1] + self.A.shape).copy()


class GradientField(VectorField):
    """f = grad(phi) for a closed-form phase; div f is the Laplacian of phi."""

    def __init__(self, phase: SmoothPhase, scale: float = 1.0):
        self.phase = phase
        self.scale = float(scale)
        self.dim = phase.dim
        self.lipschitz = abs(self.scale) * phase.hess_bound

    def __call__(self, x):
        return self.scale * self.phase.grad(x)

    def div(self, x):
        return self.scale * self.phase.laplacian(x)

    def jac(self, x):
        return self.scale * self.phase.hess(x)


class CallableField(VectorField):
    def __init__(self, dim, f, jac, lipschitz, div=None):
        self.dim = dim
        self._f, self._jac, self._div = f, jac, div
        self.lipschitz = float(lipschitz)

    def __call__(self, x):
        return self._f(np.asarray(x, dtype=float))

    def jac(self, x):
        return self._jac(np.asarray(x, dtype=float))

    def div(self, x):
        if self._div is not None:
            return self._div(np.asarray(x, dtype=float))
        return super().div(x)


def _points(x, dim):
    x = np.asarray(x, dtype=float)
    if dim == 1 and (x.ndim == 0 or x.shape[-1] != 1):
        x = x[..., None]
    return x


def flow_map(f: VectorField, t: float, x, max_step: float = MAX_FLOW_STEP):
    """Time-t flow of ``f`` from the points ``x`` and the Jacobian determinant there.

    RK4 on the augmented system ``x' = f(x)``, ``(log J)' = div f(x)``.
    Returns ``(points, J)`` with ``points`` shaped like ``x``.
    """
    x = _points(x, f.dim).copy()
    logj = np.zeros(x.shape[:-1])
    if t == 0:
        return x, np.ones_like(logj)
    h_cap = max_step if f.lipschitz == 0 else min(max_step, 0.1 / f.lipschitz)
    n = max(1, math.ceil(abs(t) / h_cap - 1e-12))
    h = t / n

    def rhs(y):
        return f(y), f.div(y)

    for _ in range(n):
        k1, l1 = rhs(x)
        k2, l2 = rhs(x + 0.5 * h * k1)
        k3, l3 = rhs(x + 0.5 * h * k2)
        k4, l4 = rhs(x + h * k3)
        x = x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        logj = logj + (h / 6.0) * (l1 + 2 * l2 + 2 * l3 + l4)
    return x, np.exp(logj)


def transport_apply(f: VectorField, psi: WaveField) -> WaveField:
    """``f . grad(psi) + div(f) psi / 2`` with a spectral gradient."""
    g = psi.grid
    check_resolved(g, psi.values)
    grad = spectral_gradient(g, psi.values)
    pts = g.points
    out = np.sum(f(pts) * grad, axis=-1) + 0.5 * f.div(pts) * psi.values
    return psi.with_values(out)


def spectral_interpolate(grid: Grid, values: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Evaluate the trigonometric interpolant of ``values`` at scattered points.

    ``pts`` has shape ``(..., d)``. The Nyquist mode is taken as a cosine so real
    data interpolate to real values.
    """
    d, N = grid.d, grid.N
    pts = np.asarray(pts, dtype=float)
    flat = pts.reshape(-1, d)
    theta = (flat - grid.origin) * (2.0 * np.pi / grid.period)
    coef = np.fft.fftn(values) / values.size
    k = np.fft.fftfreq(N) * N
    mats = []
    for j in range(d):
        E = np.exp(1j * np.outer(theta[:, j], k))
        E[:, N // 2] = np.cos(0.5 * N * theta[:, j])
        mats.append(E)
    letters = string.ascii_lowercase[:d]
    subs = ",".join(f"m{c}" for c in letters) + f",{letters}->m"
    out = np.einsum(subs, *mats, coef, optimize=True)
    return out.reshape(pts.shape[:-1])


def cubic_interpolate(grid: Grid, values: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Periodic cubic-spline interpolation at scattered points."""
    pts = np.asarray(pts, dtype=float)
    coords = np.moveaxis((pts - grid.origin) / grid.spacing, -1, 0)
    kw = dict(order=3, mode="grid-wrap", prefilter=True)
    re = ndimage.map_coordinates(values.real, coords, **kw)
    im = ndimage.map_coordinates(values.imag, coords, **kw)
    return re + 1j * im


INTERPOLATORS = {"spectral": spectral_interpolate, "cubic": cubic_interpolate}


def pushforward(f: VectorField, t: float, psi: WaveField, method: str = "spectral",
                check: bool = True) -> WaveField:
    """``exp(t T_f) psi = J^{1/2} * (psi o P)`` with ``P`` the time-t flow of ``f``."""
    if t == 0:
        return psi
    g = psi.grid
    if check:
        check_resolved(g, psi.values)
    P, J = flow_map(f, t, g.points)
    vals = INTERPOLATORS[method](g, psi.values, P)
    return psi.with_values(np.sqrt(J) * vals)
