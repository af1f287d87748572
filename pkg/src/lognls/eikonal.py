"""
Eikonal equation ``d_s phi + |grad phi|^2 / 2 = 0`` by characteristics.

Characteristics are straight lines ``x + s grad(phi)(x)`` along which the gradient
is constant, so with ``y = f_s^{-1}(x)``

    grad phi(s, x) = grad phi(y)
    phi(s, x)      = phi(x) - 1/2 int_0^s |grad phi(f_r^{-1}(x))|^2 dr

The inversion is a contraction while ``s * sup|D^2 phi| < 1``.
"""
from __future__ import annotations

import numpy as np

from .errors import ContractionError
from .phases import SmoothPhase, _as_points
from .transport import CallableField

MAX_CONTRACTION = 0.9
FIXED_POINT_ITERS = 3
MAX_NEWTON_ITERS = 50


def invert_characteristic(phase: SmoothPhase, s: float, x, tol: float = 1e-12) -> np.ndarray:
    """Solve ``y + s grad(phi)(y) = x`` pointwise; ``x`` has a trailing axis of length d."""
    x = _as_points(x, phase.dim)
    if s == 0:
        return x.copy()
    if abs(s) * phase.hess_bound > MAX_CONTRACTION:
        raise ContractionError(
            f"s*|D2 phi| = {abs(s) * phase.hess_bound:.3f} exceeds {MAX_CONTRACTION}")
    y = x.copy()
    for _ in range(FIXED_POINT_ITERS):
        y = x - s * phase.grad(y)
    eye = np.eye(phase.dim)
    for _ in range(MAX_NEWTON_ITERS):
        resid = y + s * phase.grad(y) - x
        if np.max(np.abs(resid), initial=0.0) < tol:
            return y
        jac = eye + s * phase.hess(y)
        y = y - np.linalg.solve(jac, resid[..., None])[..., 0]
    resid = np.max(np.abs(y + s * phase.grad(y) - x), initial=0.0)
    if resid < tol:
        return y
    raise ContractionError(f"characteristic inversion stalled at residual {resid:.2e}")


class EikonalSolution:
    """Pointwise evaluators for the eikonal solution issued from ``source``."""

    def __init__(self, source: SmoothPhase, s_max: float, quadrature_nodes: int = 16,
                 tol: float = 1e-12):
        self.source = source
        self.dim = source.dim
        self.s_max = float(s_max)
        self.tol = tol
        nodes, weights = np.polynomial.legendre.leggauss(quadrature_nodes)
        # mapped to [0, 1]
        self._nodes = 0.5 * (nodes + 1.0)
        self._weights = 0.5 * weights

    def _check(self, s):
        if not 0 <= s <= self.s_max:
            raise ContractionError(f"s={s} outside [0, {self.s_max}]")

    def foot(self, s, x):
        self._check(s)
        return invert_characteristic(self.source, s, x, self.tol)

    def value(self, s, x):
        x = _as_points(x, self.dim)
        out = self.source.value(x)
        if s == 0:
            return out
        integral = np.zeros(x.shape[:-1])
        for r, w in zip(self._nodes, self._weights):
            g = self.source.grad(self.foot(s * r, x))
            integral += w * np.sum(g**2, axis=-1)
        return out - 0.5 * s * integral

    def grad(self, s, x):
        return self.source.grad(self.foot(s, x))

    def hess(self, s, x):
        y = self.foot(s, x)
        H = self.source.hess(y)
        eye = np.eye(self.dim)
        # D^2 phi(y) (I + s D^2 phi(y))^{-1}; symmetric since both factors commute
        return np.linalg.solve(eye + s * H, H)

    def ds(self, s, x):
        return -0.5 * np.sum(self.grad(s, x) ** 2, axis=-1)

    def hess_bound(self, s):
        h = self.source.hess_bound
        return h / (1.0 - s * h)

    def vector_field(self, s) -> CallableField:
        """``grad phi(s, .)`` as a vector field for the transport sub-step."""
        return CallableField(self.dim, lambda x: self.grad(s, x), lambda x: self.hess(s, x),
                             self.hess_bound(s))

    def describe(self):
        return f"eikonal[{self.source.describe()}; s_max={self.s_max!r}]"


def solve_eikonal(phase: SmoothPhase, s_max: float, quadrature_nodes: int = 16) -> EikonalSolution:
    if quadrature_nodes < 8:
        raise ValueError("need at least 8 quadrature nodes")
    if s_max < 0:
        raise ValueError("s_max must be nonnegative")
    if s_max * phase.hess_bound >= 1.0:
        raise ContractionError(
            f"s_max*|D2 phi| = {s_max * phase.hess_bound:.3f} is past the caustic")
    return EikonalSolution(phase, s_max, quadrature_nodes)
