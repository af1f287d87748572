"""
Uniform periodic grids for the torus and for a truncated box, complex fields on
them, the standard control-potential families, and the norms/distances used
throughout the package.

The box ``[-L, L)^d`` is treated as a large torus: fast transforms wrap
around, so states must carry negligible mass near the boundary
(see ``boundary_mass``).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import BoundaryMassError, UnderResolvedError
from .phases import PolyGaussPhase, SmoothPhase, TrigPhase

DEFAULT_HALF_WIDTH = 12.0
BOUNDARY_MASS_TOL = 1e-8
NYQUIST_TOL = 1e-6


@dataclass(frozen=True)
class Grid:
    geometry: str  # "torus" or "box"
    d: int
    N: int
    L: float | None = None

    def __post_init__(self):
        if self.geometry not in ("torus", "box"):
            raise ValueError(f"unknown geometry {self.geometry!r}")
        if self.d < 1:
            raise ValueError("dimension must be positive")
        if self.N < 4 or self.N & (self.N - 1) or self.N**self.d < 8:
            raise ValueError(f"N must be a power of two >= 4 with at least 8 nodes, got {self.N}")
        if self.geometry == "box":
            if self.L is None or not self.L > 0:
                raise ValueError("box half-width L must be positive")
        elif self.L is not None:
            raise ValueError("torus grids take no half-width")

    @property
    def is_box(self) -> bool:
        return self.geometry == "box"

    @property
    def period(self) -> float:
        return 2.0 * self.L if self.is_box else 2.0 * np.pi

    @property
    def origin(self) -> float:
        return -self.L if self.is_box else 0.0

    @property
    def spacing(self) -> float:
        return self.period / self.N

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.d

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.N,) * self.d

    @cached_property
    def axis(self) -> np.ndarray:
        """1D node coordinates shared by every direction."""
        return self.origin + self.spacing * np.arange(self.N)

    @cached_property
    def points(self) -> np.ndarray:
        """Node coordinates, shape ``(N,)*d + (d,)``."""
        mesh = np.meshgrid(*([self.axis] * self.d), indexing="ij")
        return np.stack(mesh, axis=-1)

    @cached_property
    def axis_wavenumbers(self) -> np.ndarray:
        """1D wavenumbers in FFT order (integers on the torus)."""
        return 2.0 * np.pi * np.fft.fftfreq(self.N, d=self.spacing)

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """Wavevector lattice, shape ``(N,)*d + (d,)``, FFT ordering."""
        mesh = np.meshgrid(*([self.axis_wavenumbers] * self.d), indexing="ij")
        return np.stack(mesh, axis=-1)

    @cached_property
    def k2(self) -> np.ndarray:
        return np.sum(self.wavenumbers**2, axis=-1)

    @cached_property
    def _derivative_symbols(self) -> list[np.ndarray]:
        # Nyquist column zeroed for first derivatives.
        k = self.axis_wavenumbers.copy()
        k[self.N // 2] = 0.0
        out = []
        for j in range(self.d):
            shape = [1] * self.d
            shape[j] = self.N
            out.append(1j * k.reshape(shape))
        return out

    @cached_property
    def top_octave(self) -> np.ndarray:
        idx = np.abs(np.fft.fftfreq(self.N) * self.N)
        mesh = np.meshgrid(*([idx] * self.d), indexing="ij")
        return np.max(np.stack(mesh), axis=0) > self.N // 4

    @cached_property
    def outer_shell(self) -> np.ndarray:
        if not self.is_box:
            return np.zeros(self.shape, dtype=bool)
        return np.max(np.abs(self.points), axis=-1) > 0.9 * self.L


def build_grid(geometry: str, N: int, d: int = 1, L: float | None = None) -> Grid:
    """Build a torus grid on ``[0, 2pi)^d`` or a box grid on ``[-L, L)^d``."""
    if geometry == "box" and L is None:
        L = DEFAULT_HALF_WIDTH
    return Grid(geometry, int(d), int(N), None if L is None or geometry == "torus" else float(L))


@dataclass(frozen=True, eq=False)
class WaveField:
    """Complex amplitudes on the nodes of a grid."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex)
        if values.shape != self.grid.shape:
            raise ValueError(f"values shape {values.shape} does not match grid {self.grid.shape}")
        object.__setattr__(self, "values", values)

    def with_values(self, values) -> "WaveField":
        return WaveField(self.grid, values)

    def norm(self) -> float:
        return norm(self.grid, self.values)

    def normalized(self) -> "WaveField":
        return WaveField(self.grid, self.values / self.norm())

    def __mul__(self, other):
        if isinstance(other, WaveField):
            _check_same_grid(self, other)
            other = other.values
        return WaveField(self.grid, self.values * other)

    __rmul__ = __mul__

    def __add__(self, other):
        _check_same_grid(self, other)
        return WaveField(self.grid, self.values + other.values)

    def __sub__(self, other):
        _check_same_grid(self, other)
        return WaveField(self.grid, self.values - other.values)


def field_from_function(grid: Grid, fn, normalize: bool = True) -> WaveField:
    """Sample ``fn(points)`` on the grid nodes; points have a trailing axis of length d."""
    psi = WaveField(grid, fn(grid.points))
    return psi.normalized() if normalize else psi


def _check_same_grid(a: WaveField, b: WaveField):
    if a.grid != b.grid:
        raise ValueError("fields live on different grids")


def inner(grid: Grid, psi: np.ndarray, chi: np.ndarray) -> complex:
    """Discrete ``<psi, chi>`` (antilinear in the first slot)."""
    return complex(np.vdot(psi, chi) * grid.cell_volume)


def norm(grid: Grid, psi: np.ndarray) -> float:
    return float(np.sqrt(np.sum(np.abs(psi) ** 2) * grid.cell_volume))


def fft(psi: np.ndarray) -> np.ndarray:
    return np.fft.fftn(psi)


def ifft(psi_hat: np.ndarray) -> np.ndarray:
    return np.fft.ifftn(psi_hat)


def spectral_gradient(grid: Grid, psi: np.ndarray) -> np.ndarray:
    """Spectral gradient, shape ``(N,)*d + (d,)``."""
    psi_hat = fft(psi)
    return np.stack([ifft(sym * psi_hat) for sym in grid._derivative_symbols], axis=-1)


def top_octave_fraction(grid: Grid, psi_hat: np.ndarray) -> float:
    power = np.abs(psi_hat) ** 2
    total = power.sum()
    return float(power[grid.top_octave].sum() / total) if total > 0 else 0.0


def check_resolved(grid: Grid, psi: np.ndarray, psi_hat: np.ndarray | None = None,
                   tol: float = NYQUIST_TOL):
    """Raise UnderResolvedError if the top spectral octave carries > tol of the energy."""
    if psi_hat is None:
        psi_hat = fft(psi)
    frac = top_octave_fraction(grid, psi_hat)
    if frac >= tol:
        raise UnderResolvedError(
            f"top-octave spectral fraction {frac:.3e} >= {tol:.0e} on N={grid.N} grid")


def boundary_mass(psi: WaveField) -> float:
    """Mass in the outer 10% shell of a box grid (0 on the torus)."""
    g = psi.grid
    return float(np.sum(np.abs(psi.values[g.outer_shell]) ** 2) * g.cell_volume)


def check_boundary(psi: WaveField, tol: float = BOUNDARY_MASS_TOL):
    mass = boundary_mass(psi)
    if mass >= tol:
        raise BoundaryMassError(f"boundary-shell mass {mass:.3e} >= {tol:.0e}")


def aligned_distance(psi: WaveField, chi: WaveField) -> float:
    """``min_theta ||psi - exp(i theta) chi||``, evaluated without cancellation."""
    _check_same_grid(psi, chi)
    overlap = inner(psi.grid, chi.values, psi.values)
    phase = overlap / abs(overlap) if abs(overlap) > 0 else 1.0
    return norm(psi.grid, psi.values - phase * chi.values)


def sigma_norm(psi: WaveField) -> float:
    """``||psi|| + ||grad psi||`` plus ``|| |x| psi ||`` on the box."""
    g = psi.grid
    grad = spectral_gradient(g, psi.values)
    total = norm(g, psi.values) + float(np.sqrt(np.sum(np.abs(grad) ** 2) * g.cell_volume))
    if g.is_box:
        r = np.linalg.norm(g.points, axis=-1)
        total += norm(g, r * psi.values)
    return total


@dataclass(frozen=True, eq=False)
class PotentialFamily:
    """Drift potential V and control potentials W_1..W_m sampled on a grid.

    ``control_phases`` keeps the closed-form expression of each W_j when one is
    known; the synthesis code needs it to decide which phases are imprintable.
    """

    grid: Grid
    drift: np.ndarray
    controls: tuple[np.ndarray, ...]
    family_tag: str
    control_phases: tuple[SmoothPhase, ...] | None = None
    drift_phase: SmoothPhase | None = None
    names: tuple[str, ...] = field(default=())

    @property
    def m(self) -> int:
        return len(self.controls)

    def control_potential(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape != (self.m,):
            raise ValueError(f"control vector must have length {self.m}")
        out = np.zeros(self.grid.shape)
        for uj, w in zip(u, self.controls):
            if uj:
                out = out + uj * w
        return out

    def with_drift(self, drift_phase: SmoothPhase) -> "PotentialFamily":
        return PotentialFamily(self.grid, drift_phase.value(self.grid.points), self.controls,
                               self.family_tag, self.control_phases, drift_phase, self.names)


def trig_directions(d: int) -> list[tuple[int, ...]]:
    """b_1..b_{d-1} unit coordinate vectors, b_d the all-ones vector."""
    dirs = [tuple(int(i == j) for i in range(d)) for j in range(d - 1)]
    dirs.append((1,) * d)
    return dirs


def standard_potentials(grid: Grid, family_tag: str, drift: SmoothPhase | None = None,
                        custom: list[SmoothPhase] | None = None) -> PotentialFamily:
    """Control families: ``TorusTrig``, ``EuclideanLinearGauss`` or ``Custom``."""
    d = grid.d
    if family_tag == "TorusTrig":
        if grid.is_box:
            raise ValueError("TorusTrig family needs a torus grid")
        phases, names = [], []
        for j, b in enumerate(trig_directions(d), start=1):
            phases += [TrigPhase(d, [(1.0, "sin", b)]), TrigPhase(d, [(1.0, "cos", b)])]
            names += [f"sin<b{j},x>", f"cos<b{j},x>"]
    elif family_tag == "EuclideanLinearGauss":
        if not grid.is_box:
            raise ValueError("EuclideanLinearGauss family needs a box grid")
        phases = [PolyGaussPhase.linear([float(i == j) for i in range(d)]) for j in range(d)]
        phases.append(PolyGaussPhase.gaussian(d, 1.0, 0.5))
        names = [f"x{j + 1}" for j in range(d)] + ["exp(-|x|^2/2)"]
    elif family_tag == "Custom":
        if not custom:
            raise ValueError("Custom family needs explicit control phases")
        phases, names = list(custom), [p.describe() for p in custom]
    else:
        raise ValueError(f"unknown family {family_tag!r}")
    controls = tuple(np.asarray(p.value(grid.points), dtype=float) for p in phases)
    drift_values = np.zeros(grid.shape) if drift is None else np.asarray(drift.value(grid.points), float)
    return PotentialFamily(grid, drift_values, controls, family_tag, tuple(phases), drift, tuple(names))
