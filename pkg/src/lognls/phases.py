"""
Closed-form smooth phases: values, gradients and Hessians at arbitrary points.

Points are arrays whose last axis holds the d coordinates, so a phase can be
evaluated on a whole grid (``grid.points``) or on a scattered cloud alike.

Two algebraic families cover the built-in control potentials and the
generators used by the synthesis code:

* ``TrigPhase``: sums of ``a*cos(<b,x>)`` and ``a*sin(<b,x>)`` (torus).
* ``PolyGaussPhase``: sums of ``c * x**beta * exp(-gamma*|x|^2)`` (box).

Both are closed under scaling and addition, and the families provide the
operations the saturation recursions need (``grad_dot`` for trig phases,
``derivative`` for poly-Gauss phases).
"""
from __future__ import annotations

import math
from typing import Callable, Iterable

import numpy as np
from scipy import optimize


class SmoothPhase:
    """Base class. Subclasses implement value, grad and hess."""

    dim: int

    def value(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def grad(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def hess(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def laplacian(self, x: np.ndarray) -> np.ndarray:
        return np.trace(self.hess(x), axis1=-2, axis2=-1)

    @property
    def grad_bound(self) -> float:
        raise NotImplementedError

    @property
    def hess_bound(self) -> float:
        raise NotImplementedError

    def describe(self) -> str:
        raise NotImplementedError

    def __repr__(self):
        return self.describe()

    def __mul__(self, c):
        return SumPhase([(float(c), self)])

    __rmul__ = __mul__

    def __truediv__(self, c):
        return self * (1.0 / c)

    def __neg__(self):
        return self * -1.0

    def __add__(self, other):
        return SumPhase([(1.0, self), (1.0, other)])

    def __sub__(self, other):
        return self + (-other)


def _as_points(x, dim):
    x = np.asarray(x, dtype=float)
    if dim == 1 and (x.ndim == 0 or x.shape[-1] != 1):
        x = x[..., None]
    if x.shape[-1] != dim:
        raise ValueError(f"points must have trailing axis of length {dim}, got {x.shape}")
    return x


# --------------------------------------------------------------------------- trig


def _canon(kind, b):
    """Canonical key for a trig monomial; returns (sign, kind, b) or None for zero."""
    b = tuple(int(v) for v in b)
    if all(v == 0 for v in b):
        return (1.0, "cos", b) if kind == "cos" else None
    first = next(v for v in b if v != 0)
    if first < 0:
        b = tuple(-v for v in b)
        return (1.0, kind, b) if kind == "cos" else (-1.0, kind, b)
    return (1.0, kind, b)


def _product(k1, b1, k2, b2):
    """Expand trig(k1, b1) * trig(k2, b2) into (coef, kind, b) terms."""
    bp = tuple(p + q for p, q in zip(b1, b2))
    bm = tuple(p - q for p, q in zip(b1, b2))
    if k1 == "cos" and k2 == "cos":
        return [(0.5, "cos", bm), (0.5, "cos", bp)]
    if k1 == "sin" and k2 == "sin":
        return [(0.5, "cos", bm), (-0.5, "cos", bp)]
    if k1 == "sin" and k2 == "cos":
        return [(0.5, "sin", bp), (0.5, "sin", bm)]
    return [(0.5, "sin", bp), (-0.5, "sin", bm)]


class TrigPhase(SmoothPhase):
    """Trigonometric polynomial ``sum a * cos|sin(<b, x>)`` with integer b."""

    def __init__(self, dim: int, terms: Iterable[tuple[float, str, tuple]] = ()):
        self.dim = int(dim)
        coeffs: dict[tuple, float] = {}
        for amp, kind, b in terms:
            if kind not in ("cos", "sin"):
                raise ValueError(f"unknown trig kind {kind!r}")
            if len(b) != self.dim:
                raise ValueError("wavevector length does not match dimension")
            canon = _canon(kind, b)
            if canon is None:
                continue
            sign, kind, b = canon
            key = (kind, b)
            coeffs[key] = coeffs.get(key, 0.0) + sign * float(amp)
        self.coeffs = {k: v for k, v in coeffs.items() if v != 0.0}

    @classmethod
    def constant(cls, dim, c=1.0):
        return cls(dim, [(c, "cos", (0,) * dim)])

    def _parts(self):
        if not self.coeffs:
            return np.zeros(0), np.zeros((0, self.dim)), np.zeros(0, dtype=bool)
        keys = list(self.coeffs)
        amps = np.array([self.coeffs[k] for k in keys])
        bs = np.array([k[1] for k in keys], dtype=float).reshape(len(keys), self.dim)
        is_cos = np.array([k[0] == "cos" for k in keys])
        return amps, bs, is_cos

    def value(self, x):
        x = _as_points(x, self.dim)
        amps, bs, is_cos = self._parts()
        theta = x @ bs.T
        return np.where(is_cos, np.cos(theta), np.sin(theta)) @ amps

    def grad(self, x):
        x = _as_points(x, self.dim)
        amps, bs, is_cos = self._parts()
        theta = x @ bs.T
        dtrig = np.where(is_cos, -np.sin(theta), np.cos(theta)) * amps
        return dtrig @ bs

    def hess(self, x):
        x = _as_points(x, self.dim)
        amps, bs, is_cos = self._parts()
        theta = x @ bs.T
        trig = -np.where(is_cos, np.cos(theta), np.sin(theta)) * amps
        return np.einsum("...t,ti,tj->...ij", trig, bs, bs)

    @property
    def grad_bound(self):
        amps, bs, _ = self._parts()
        return float(np.sum(np.abs(amps) * np.linalg.norm(bs, axis=1)))

    @property
    def hess_bound(self):
        amps, bs, _ = self._parts()
        return float(np.sum(np.abs(amps) * np.sum(bs**2, axis=1)))

    def grad_dot(self, other: "TrigPhase") -> "TrigPhase":
        """The trig polynomial ``<grad self, grad other>``."""
        out = []
        for (k1, b1), a1 in self.coeffs.items():
            d1 = ("sin", -a1) if k1 == "cos" else ("cos", a1)
            for (k2, b2), a2 in other.coeffs.items():
                d2 = ("sin", -a2) if k2 == "cos" else ("cos", a2)
                dot = float(np.dot(b1, b2))
                if dot == 0.0:
                    continue
                for c, kind, b in _product(d1[0], b1, d2[0], b2):
                    out.append((c * d1[1] * d2[1] * dot, kind, b))
        return TrigPhase(self.dim, out)

    def __mul__(self, c):
        return TrigPhase(self.dim, [(a * float(c), k, b) for (k, b), a in self.coeffs.items()])

    __rmul__ = __mul__

    def __add__(self, other):
        if isinstance(other, TrigPhase) and other.dim == self.dim:
            terms = [(a, k, b) for (k, b), a in self.coeffs.items()]
            terms += [(a, k, b) for (k, b), a in other.coeffs.items()]
            return TrigPhase(self.dim, terms)
        return SumPhase([(1.0, self), (1.0, other)])

    def describe(self):
        if not self.coeffs:
            return f"trig(d={self.dim})[0]"
        parts = [f"{a:.17g}*{k}{list(b)}" for (k, b), a in sorted(self.coeffs.items())]
        return f"trig(d={self.dim})[" + " + ".join(parts) + "]"


# ---------------------------------------------------------------------- poly-gauss


class PolyGaussPhase(SmoothPhase):
    """Sum of ``c * prod(x_j**beta_j) * exp(-gamma*|x|^2)`` terms (gamma >= 0)."""

    def __init__(self, dim: int, terms: Iterable[tuple[float, tuple, float]] = ()):
        self.dim = int(dim)
        coeffs: dict[tuple, float] = {}
        for c, beta, gamma in terms:
            beta = tuple(int(v) for v in beta)
            if len(beta) != self.dim or min(beta, default=0) < 0:
                raise ValueError(f"bad multi-index {beta}")
            if gamma < 0:
                raise ValueError("gamma must be nonnegative")
            key = (beta, float(gamma))
            coeffs[key] = coeffs.get(key, 0.0) + float(c)
        self.coeffs = {k: v for k, v in coeffs.items() if v != 0.0}
        self._deriv_cache: dict[int, PolyGaussPhase] = {}
        self._bounds = None

    @classmethod
    def linear(cls, coeffs, const=0.0):
        coeffs = np.atleast_1d(np.asarray(coeffs, dtype=float))
        d = len(coeffs)
        terms = [(const, (0,) * d, 0.0)]
        for j, c in enumerate(coeffs):
            terms.append((c, tuple(int(i == j) for i in range(d)), 0.0))
        return cls(d, terms)

    @classmethod
    def gaussian(cls, dim, coef=1.0, gamma=0.5, beta=None):
        beta = (0,) * dim if beta is None else beta
        return cls(dim, [(coef, beta, gamma)])

    def value(self, x):
        x = _as_points(x, self.dim)
        r2 = np.sum(x**2, axis=-1)
        out = np.zeros(x.shape[:-1])
        for (beta, gamma), c in self.coeffs.items():
            mono = np.ones(x.shape[:-1])
            for j, p in enumerate(beta):
                if p:
                    mono = mono * x[..., j] ** p
            out = out + c * mono * (np.exp(-gamma * r2) if gamma else 1.0)
        return out

    def derivative(self, k: int) -> "PolyGaussPhase":
        if k not in self._deriv_cache:
            terms = []
            for (beta, gamma), c in self.coeffs.items():
                if beta[k]:
                    lower = tuple(p - (j == k) for j, p in enumerate(beta))
                    terms.append((c * beta[k], lower, gamma))
                if gamma:
                    upper = tuple(p + (j == k) for j, p in enumerate(beta))
                    terms.append((-2.0 * gamma * c, upper, gamma))
            self._deriv_cache[k] = PolyGaussPhase(self.dim, terms)
        return self._deriv_cache[k]

    def grad(self, x):
        x = _as_points(x, self.dim)
        return np.stack([self.derivative(k).value(x) for k in range(self.dim)], axis=-1)

    def hess(self, x):
        x = _as_points(x, self.dim)
        rows = [
            np.stack([self.derivative(k).derivative(l).value(x) for l in range(self.dim)], axis=-1)
            for k in range(self.dim)
        ]
        return np.stack(rows, axis=-2)

    def _poly_degree(self):
        degs = [sum(beta) for (beta, gamma) in self.coeffs if gamma == 0.0]
        return max(degs, default=-1)

    def _estimate(self):
        if self._bounds is None:
            gammas = [g for (_, g) in self.coeffs if g > 0]
            radius = 7.0 / math.sqrt(min(gammas)) if gammas else 1.0
            deg = self._poly_degree()
            gb = math.inf if deg >= 2 else estimate_sup(
                lambda p: np.linalg.norm(self.grad(p), axis=-1), self.dim, radius)
            hb = math.inf if deg >= 3 else estimate_sup(
                lambda p: np.linalg.norm(self.hess(p), ord=2, axis=(-2, -1)), self.dim, radius)
            self._bounds = (gb, hb)
        return self._bounds

    @property
    def grad_bound(self):
        return self._estimate()[0]

    @property
    def hess_bound(self):
        return self._estimate()[1]

    def __mul__(self, c):
        return PolyGaussPhase(self.dim, [(v * float(c), b, g) for (b, g), v in self.coeffs.items()])

    __rmul__ = __mul__

    def __add__(self, other):
        if isinstance(other, PolyGaussPhase) and other.dim == self.dim:
            terms = [(v, b, g) for (b, g), v in self.coeffs.items()]
            terms += [(v, b, g) for (b, g), v in other.coeffs.items()]
            return PolyGaussPhase(self.dim, terms)
        return SumPhase([(1.0, self), (1.0, other)])

    def describe(self):
        if not self.coeffs:
            return f"polygauss(d={self.dim})[0]"
        parts = [f"{c:.17g}*x^{list(b)}*exp(-{g:.17g}|x|^2)"
                 for (b, g), c in sorted(self.coeffs.items())]
        return f"polygauss(d={self.dim})[" + " + ".join(parts) + "]"


# ---------------------------------------------------------------------- generic


class SumPhase(SmoothPhase):
    """Weighted sum of arbitrary phases; bounds add up."""

    def __init__(self, terms):
        terms = [(float(c), p) for c, p in terms]
        dims = {p.dim for _, p in terms}
        if len(dims) != 1:
            raise ValueError("cannot mix phases of different dimension")
        self.dim = dims.pop()
        flat = []
        for c, p in terms:
            if isinstance(p, SumPhase):
                flat.extend((c * c2, p2) for c2, p2 in p.terms)
            else:
                flat.append((c, p))
        self.terms = flat

    def value(self, x):
        return sum(c * p.value(x) for c, p in self.terms)

    def grad(self, x):
        return sum(c * p.grad(x) for c, p in self.terms)

    def hess(self, x):
        return sum(c * p.hess(x) for c, p in self.terms)

    @property
    def grad_bound(self):
        return float(sum(abs(c) * p.grad_bound for c, p in self.terms))

    @property
    def hess_bound(self):
        return float(sum(abs(c) * p.hess_bound for c, p in self.terms))

    def __mul__(self, c):
        return SumPhase([(c * c2, p) for c2, p in self.terms])

    __rmul__ = __mul__

    def describe(self):
        return "sum[" + " + ".join(f"{c:.17g}*({p.describe()})" for c, p in self.terms) + "]"


class CallablePhase(SmoothPhase):
    """User-supplied phase. Missing bounds are estimated on ``[-radius, radius]^d``."""

    def __init__(self, dim, value, grad, hess, grad_bound=None, hess_bound=None,
                 radius=2 * math.pi, name="custom"):
        self.dim = dim
        self._value, self._grad, self._hess = value, grad, hess
        self._gb, self._hb = grad_bound, hess_bound
        self.radius = radius
        self.name = name

    def value(self, x):
        return self._value(_as_points(x, self.dim))

    def grad(self, x):
        return self._grad(_as_points(x, self.dim))

    def hess(self, x):
        return self._hess(_as_points(x, self.dim))

    @property
    def grad_bound(self):
        if self._gb is None:
            self._gb = estimate_sup(lambda p: np.linalg.norm(self.grad(p), axis=-1),
                                    self.dim, self.radius)
        return self._gb

    @property
    def hess_bound(self):
        if self._hb is None:
            self._hb = estimate_sup(lambda p: np.linalg.norm(self.hess(p), ord=2, axis=(-2, -1)),
                                    self.dim, self.radius)
        return self._hb

    def describe(self):
        return f"custom[{self.name}]"


def estimate_sup(fn: Callable[[np.ndarray], np.ndarray], dim: int, radius: float,
                 samples: int = 64, safety: float = 1.05) -> float:
    """Sup of a nonnegative function over a cube: dense sample, local polish, safety factor."""
    axis = np.linspace(-radius, radius, samples)
    pts = np.stack(np.meshgrid(*([axis] * dim), indexing="ij"), axis=-1).reshape(-1, dim)
    vals = fn(pts)
    best = float(np.max(vals))
    for idx in np.argsort(vals)[-3:]:
        res = optimize.minimize(lambda p: -float(fn(p[None, :])[0]), pts[idx],
                                method="Nelder-Mead",
                                options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 2000})
        best = max(best, -float(res.fun))
    return safety * best
