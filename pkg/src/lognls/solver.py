"""
Strang split-step solver for the controlled logarithmic Schrodinger equation

    i d_t psi = -(tau/2) Lap psi + tau (V + sum_j u_j W_j) psi
                + tau lam psi log(eps + |psi|^2) - i T_{grad phi(t)} psi

The nonlinear sub-flow is solved exactly (it keeps |psi| fixed pointwise), the
kinetic sub-flow is a Fourier multiplier, and the optional transport sub-flow is
a pushforward along grad phi. Every piece is unitary, so the symmetric
composition conserves the L2 norm and is second order in dt.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from typing import Any

import numpy as np

from .errors import ContractionError
from .grid import (PotentialFamily, WaveField, aligned_distance, check_boundary,
                   check_resolved, fft, ifft, sigma_norm)
from .transport import GradientField, pushforward

DEFAULT_STEPS_PER_INTERVAL = 200


@dataclass(frozen=True)
class ControlSchedule:
    """Piecewise-constant controls: ``values[k]`` holds on ``[breakpoints[k], breakpoints[k+1])``."""

    breakpoints: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=float).ravel()
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim == 1:
            vals = vals.reshape(len(bp) - 1, -1) if len(bp) > 1 else vals.reshape(0, -1)
        if len(bp) < 1 or bp[0] != 0.0:
            raise ValueError("breakpoints must start at 0")
        if np.any(np.diff(bp) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        if vals.shape[0] != len(bp) - 1:
            raise ValueError(f"{len(bp) - 1} intervals but {vals.shape[0]} control values")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)

    @classmethod
    def zero(cls, duration: float, m: int) -> "ControlSchedule":
        if duration == 0:
            return cls(np.array([0.0]), np.zeros((0, m)))
        return cls(np.array([0.0, duration]), np.zeros((1, m)))

    @classmethod
    def constant(cls, duration: float, u) -> "ControlSchedule":
        u = np.atleast_1d(np.asarray(u, dtype=float))
        if duration == 0:
            return cls(np.array([0.0]), np.zeros((0, len(u))))
        return cls(np.array([0.0, duration]), u[None, :])

    @classmethod
    def from_durations(cls, durations, values) -> "ControlSchedule":
        bp = np.concatenate([[0.0], np.cumsum(durations)])
        return cls(bp, np.asarray(values, dtype=float).reshape(len(durations), -1))

    @property
    def m(self) -> int:
        return self.values.shape[1]

    @property
    def duration(self) -> float:
        return float(self.breakpoints[-1])

    @property
    def durations(self) -> np.ndarray:
        return np.diff(self.breakpoints)

    def intervals(self):
        for k in range(len(self.values)):
            yield float(self.breakpoints[k]), float(self.breakpoints[k + 1]), self.values[k]

    def value_at(self, t: float) -> np.ndarray:
        k = int(np.searchsorted(self.breakpoints, t, side="right")) - 1
        return self.values[min(max(k, 0), len(self.values) - 1)]

    def then(self, other: "ControlSchedule") -> "ControlSchedule":
        """Concatenation ``self # other``."""
        if other.m != self.m:
            raise ValueError("control dimensions differ")
        bp = np.concatenate([self.breakpoints, self.duration + other.breakpoints[1:]])
        return ControlSchedule(bp, np.vstack([self.values, other.values]))

    __add__ = then

    def refine(self, times) -> "ControlSchedule":
        """Insert extra breakpoints (values unchanged) at the given interior times."""
        extra = [t for t in np.atleast_1d(times) if 0 < t < self.duration]
        bp = np.unique(np.concatenate([self.breakpoints, extra]))
        vals = np.array([self.value_at(0.5 * (a + b)) for a, b in zip(bp[:-1], bp[1:])])
        return ControlSchedule(bp, vals.reshape(len(bp) - 1, self.m))

    @classmethod
    def stack(cls, *schedules: "ControlSchedule") -> "ControlSchedule":
        """Side-by-side union of control channels over merged breakpoints."""
        T = schedules[0].duration
        if any(abs(s.duration - T) > 1e-12 for s in schedules):
            raise ValueError("schedules must share a duration")
        bp = np.unique(np.concatenate([s.breakpoints for s in schedules]))
        mids = 0.5 * (bp[:-1] + bp[1:])
        vals = np.hstack([np.array([s.value_at(t) for t in mids]).reshape(len(mids), s.m)
                          for s in schedules])
        return cls(bp, vals)


@dataclass(frozen=True)
class SolverContext:
    """Physics and numerics for a run.

    ``phase_provider`` enables the transport sub-step: a ``SmoothPhase`` gives a
    static field, an ``EikonalSolution`` a time-dependent one.
    """

    potentials: PotentialFamily
    lam: float = 0.0
    eps: float = 0.0
    tau: float = 1.0
    phase_provider: Any = None
    dt: float | None = None
    min_steps: int = 1
    interpolation: str = "spectral"
    guard_every: int = 1
    boundary_guard: bool = True

    def __post_init__(self):
        if self.eps < 0:
            raise ValueError("eps must be nonnegative")
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if self.dt is not None and not self.dt > 0:
            raise ValueError("dt must be positive")

    @property
    def grid(self):
        return self.potentials.grid


def log_phase_step(psi: np.ndarray, dt_eff: float, V_total, lam: float, eps: float) -> np.ndarray:
    """Exact flow of ``i d_t psi = (V + lam log(eps + |psi|^2)) psi`` over ``dt_eff``.

    With eps = 0, nodes where psi vanishes stay zero (0 log 0 := 0).
    """
    potential = np.zeros(psi.shape) if V_total is None else V_total
    if lam:
        mod2 = np.abs(psi) ** 2 + eps
        with np.errstate(divide="ignore"):
            logs = np.where(mod2 > 0, np.log(np.where(mod2 > 0, mod2, 1.0)), 0.0)
        potential = potential + lam * logs
    return psi * np.exp(-1j * dt_eff * potential)


def _transport_field(provider, s):
    if hasattr(provider, "vector_field"):
        return provider.vector_field(s)
    return GradientField(provider)


class _Stepper:
    """Caches kinetic multipliers per step size; operates on raw arrays."""

    def __init__(self, ctx: SolverContext):
        self.ctx = ctx
        self.grid = ctx.grid
        self._kin = {}
        self.count = 0

    def half_kinetic(self, dt):
        key = float(dt)
        if key not in self._kin:
            self._kin[key] = np.exp(-0.25j * self.ctx.tau * dt * self.grid.k2)
            if len(self._kin) > 64:
                self._kin.pop(next(iter(self._kin)))
        return self._kin[key]

    def step(self, psi, t, dt, V_total):
        ctx = self.ctx
        K = self.half_kinetic(dt)
        psi_hat = fft(psi)
        if ctx.guard_every and self.count % ctx.guard_every == 0:
            check_resolved(self.grid, psi, psi_hat)
        self.count += 1
        psi = ifft(K * psi_hat)
        if ctx.phase_provider is None:
            psi = log_phase_step(psi, ctx.tau * dt, V_total, ctx.lam, ctx.eps)
        else:
            half = 0.5 * ctx.tau * dt
            psi = log_phase_step(psi, half, V_total, ctx.lam, ctx.eps)
            f = _transport_field(ctx.phase_provider, t + 0.5 * dt)
            psi = pushforward(f, -dt, WaveField(self.grid, psi), ctx.interpolation,
                              check=False).values
            psi = log_phase_step(psi, half, V_total, ctx.lam, ctx.eps)
        return ifft(K * fft(psi))


def strang_step(psi: WaveField, t: float, ctx: SolverContext, u_now, dt: float | None = None) -> WaveField:
    """One kinetic/potential/kinetic step of size ``dt`` (default ``ctx.dt``)."""
    dt = ctx.dt if dt is None else dt
    if dt is None:
        raise ValueError("no step size given")
    V_total = ctx.potentials.drift + ctx.potentials.control_potential(u_now)
    return psi.with_values(_Stepper(ctx).step(psi.values, t, dt, V_total))


def _step_size(schedule: ControlSchedule, ctx: SolverContext) -> float | None:
    if ctx.dt is not None:
        return ctx.dt
    if len(schedule.values) == 0:
        return None
    return float(np.min(schedule.durations)) / DEFAULT_STEPS_PER_INTERVAL


def _run(psi, schedule, ctx, stepper, t0=0.0, on_sample=None, samples=()):
    dt = _step_size(schedule, ctx)
    family = ctx.potentials
    sample_set = set(float(s) for s in samples)
    for a, b, u in schedule.intervals():
        n = max(ctx.min_steps, math.ceil((b - a) / dt - 1e-9))
        h = (b - a) / n
        V_total = family.drift + family.control_potential(u)
        for i in range(n):
            psi = stepper.step(psi, t0 + a + i * h, h, V_total)
        if on_sample is not None and b in sample_set:
            on_sample(b, psi)
    return psi


def evolve(psi0: WaveField, schedule: ControlSchedule, ctx: SolverContext) -> WaveField:
    """Solution at ``schedule.duration`` of the controlled equation from ``psi0``.

    Each interval is cut into ``max(min_steps, ceil(len/dt))`` equal steps, so the
    discrete map of an interval depends only on that interval.
    """
    if psi0.grid != ctx.grid:
        raise ValueError("initial state and context live on different grids")
    if schedule.m != ctx.potentials.m:
        raise ValueError("schedule and potential family disagree on the number of controls")
    psi = _run(psi0.values, schedule, ctx, _Stepper(ctx))
    out = psi0.with_values(psi)
    if ctx.boundary_guard and ctx.grid.is_box:
        check_boundary(out)
    return out


@dataclass
class TrajectoryRow:
    t: float
    norm: float
    sigma_norm: float
    aligned_distance: float | None = None


def evolve_trajectory(psi0: WaveField, schedule: ControlSchedule, ctx: SolverContext,
                      sample_times, reference: WaveField | None = None):
    """Like ``evolve`` but also records norm, sigma-norm and distance to ``reference``
    at each requested time. Returns ``(final_state, rows)``."""
    times = sorted(float(t) for t in sample_times)
    if times and (times[0] < 0 or times[-1] > schedule.duration + 1e-12):
        raise ValueError("sample times must lie inside the schedule")
    rows: list[TrajectoryRow] = []

    def record(t, vals):
        st = psi0.with_values(vals)
        dist = aligned_distance(st, reference) if reference is not None else None
        rows.append(TrajectoryRow(t, st.norm(), sigma_norm(st), dist))

    refined = schedule.refine(times)
    stepper = _Stepper(ctx)
    if times and times[0] == 0.0:
        record(0.0, psi0.values)
    if ctx.dt is None:
        ctx = replace(ctx, dt=_step_size(schedule, ctx))
        stepper.ctx = ctx
    psi = _run(psi0.values, refined, ctx, stepper, on_sample=record, samples=times)
    out = psi0.with_values(psi)
    if ctx.boundary_guard and ctx.grid.is_box:
        check_boundary(out)
    return out, rows


def write_trajectory_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "norm", "sigma_norm", "aligned_distance"])
        for r in rows:
            w.writerow([repr(r.t), repr(r.norm), repr(r.sigma_norm),
                        "" if r.aligned_distance is None else repr(r.aligned_distance)])


def solve_R(psi0: WaveField, s_end: float, tau: float, phase_provider, ctx: SolverContext) -> WaveField:
    """Solve the transported equation up to ``s_end`` at semiclassical scale ``tau``.

    ``phase_provider`` is None (no transport), a static ``SmoothPhase``, or an
    ``EikonalSolution`` whose gradient drives a time-dependent transport.
    """
    s_max = getattr(phase_provider, "s_max", None)
    if s_max is not None and s_end >= s_max:
        raise ContractionError(f"s_end={s_end} is outside the eikonal window s < {s_max}")
    sub = replace(ctx, tau=tau, phase_provider=phase_provider)
    if ctx.dt is None:
        sub = replace(sub, dt=s_end / DEFAULT_STEPS_PER_INTERVAL if s_end > 0 else None)
    return evolve(psi0, ControlSchedule.zero(s_end, ctx.potentials.m), sub)
