"""
Control plans for small-time reachable maps.

A plan is a tree of primitives executed left to right in time:

* ``ControlSegment(u, duration)``: constant controls for a while (``u = 0`` is free evolution).
* ``Imprint(phase, factor)``: the map ``psi -> exp(i factor phase) psi``. In exact mode it
  is applied as a multiplication taking no time; in synthesized mode it is replaced
  by control segments using the saturation spaces H_0 (span of 1 and the control
  potentials) and H_1 (torus: squared gradients, box: partial derivatives).
* ``TransportRef``: bookkeeping only.

Each builder attaches the ideal ``TargetMap`` the plan approximates; ``run_and_score``
executes the plan and reports the phase-aligned distance to the target.
"""
from __future__ import annotations

import ast
import math
import re
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np

from .errors import ContractionError, SynthesisError
from .grid import PotentialFamily, WaveField, aligned_distance, fft, ifft
from .phases import CallablePhase, PolyGaussPhase, SmoothPhase, SumPhase, TrigPhase
from .solver import ControlSchedule, SolverContext, evolve, solve_R
from .transport import GradientField, pushforward

FIT_TOL = 1e-9


# ---------------------------------------------------------------- plan nodes


@dataclass(frozen=True)
class ControlSegment:
    u: tuple
    duration: float


@dataclass(frozen=True)
class FreeEvolve:
    duration: float


@dataclass(frozen=True)
class Imprint:
    phase: SmoothPhase
    factor: float = 1.0
    mode: str | None = None  # None inherits the compile mode
    time: float | None = None  # synthesized-mode control time


@dataclass(frozen=True)
class TransportRef:
    field_phase: SmoothPhase
    t: float


@dataclass(frozen=True)
class Sequence:
    children: tuple
    label: str = ""


# ------------------------------------------------------------------- targets


class TargetMap:
    def apply(self, psi: WaveField, ctx: SolverContext | None = None) -> WaveField:
        raise NotImplementedError

    def describe(self) -> str:
        raise NotImplementedError


def _multiply(psi, phase, factor=1.0):
    return psi * np.exp(1j * factor * phase.value(psi.grid.points))


@dataclass(frozen=True)
class PhaseMultiply(TargetMap):
    phase: SmoothPhase
    factor: float = 1.0

    def apply(self, psi, ctx=None):
        return _multiply(psi, self.phase, self.factor)

    def describe(self):
        return f"phase-multiply factor={self.factor!r} phase={self.phase.describe()}"


@dataclass(frozen=True)
class Translate(TargetMap):
    """``psi -> psi(. + alpha e_j)``, by an exact Fourier shift."""

    j: int
    alpha: float

    def apply(self, psi, ctx=None):
        g = psi.grid
        k = g.wavenumbers[..., self.j]
        return psi.with_values(ifft(np.exp(1j * k * self.alpha) * fft(psi.values)))

    def describe(self):
        return f"translate j={self.j} alpha={self.alpha!r}"


@dataclass(frozen=True)
class GradSquarePhase(TargetMap):
    """``psi -> exp(-(i/2)|grad phi|^2) psi``."""

    phase: SmoothPhase

    def apply(self, psi, ctx=None):
        gr = self.phase.grad(psi.grid.points)
        return psi * np.exp(-0.5j * np.sum(gr**2, axis=-1))

    def describe(self):
        return f"grad-square phase={self.phase.describe()}"


@dataclass(frozen=True)
class DerivativePhase(TargetMap):
    """``psi -> exp(-i d_j phi) psi``."""

    j: int
    phase: SmoothPhase

    def apply(self, psi, ctx=None):
        return psi * np.exp(-1j * self.phase.grad(psi.grid.points)[..., self.j])

    def describe(self):
        return f"derivative-phase j={self.j} phase={self.phase.describe()}"


@dataclass(frozen=True)
class GradientFlow(TargetMap):
    """``exp(-t T_{grad phi})``: pushforward along grad phi for time -t."""

    phase: SmoothPhase
    t: float = 1.0

    def apply(self, psi, ctx=None):
        method = ctx.interpolation if ctx is not None else "spectral"
        return pushforward(GradientField(self.phase), -self.t, psi, method)

    def describe(self):
        return f"gradient-flow t={self.t!r} phase={self.phase.describe()}"


@dataclass(frozen=True)
class TransportedEvolution(TargetMap):
    """``R(s; tau, phi)`` with a static phase, the intermediate Trotter limit."""

    phase: SmoothPhase
    tau: float
    s: float = 1.0
    dt: float | None = None

    def apply(self, psi, ctx=None):
        if ctx is None:
            raise ValueError("transported evolution needs a solver context")
        sub = replace(ctx, dt=self.dt) if self.dt is not None else replace(ctx, dt=None)
        return solve_R(psi, self.s, self.tau, self.phase, sub)

    def describe(self):
        return f"transported-evolution tau={self.tau!r} s={self.s!r} phase={self.phase.describe()}"


@dataclass(frozen=True)
class Composite(TargetMap):
    """Targets applied left to right."""

    parts: tuple = ()

    def apply(self, psi, ctx=None):
        for p in self.parts:
            psi = p.apply(psi, ctx)
        return psi

    def describe(self):
        if not self.parts:
            return "identity"
        return "composite[" + "; ".join(p.describe() for p in self.parts) + "]"


IDENTITY = Composite(())


# ---------------------------------------------------------------------- plans


@dataclass(frozen=True)
class Plan:
    root: Sequence
    target: TargetMap
    tau: float = 0.0
    mode: str = "exact"
    intermediate: TargetMap | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def nodes(self):
        """Leaves in execution order (depth-first, left to right)."""
        return list(_leaves(self.root))

    def total_duration(self, imprint_mode: str | None = None, family: PotentialFamily | None = None,
                       options: "SynthesisOptions | None" = None) -> float:
        mode = imprint_mode or self.mode
        if mode == "exact" and not any(isinstance(n, Imprint) and n.mode == "synthesized"
                                       for n in self.nodes()):
            return float(sum(getattr(n, "duration", 0.0) for n in self.nodes()))
        return compile_plan(self, mode, family, options).schedule.duration

    def then(self, other: "Plan") -> "Plan":
        return compose(self, other)

    def to_text(self) -> str:
        lines = [f"plan tau={self.tau!r} mode={self.mode}", f"target {self.target.describe()}"]
        _dump(self.root, 0, lines)
        return "\n".join(lines) + "\n"


def _leaves(node):
    if isinstance(node, Sequence):
        for c in node.children:
            yield from _leaves(c)
    else:
        yield node


def _dump(node, depth, lines):
    pad = "  " * depth
    if isinstance(node, Sequence):
        lines.append(f"{pad}sequence label={node.label!r}")
        for c in node.children:
            _dump(c, depth + 1, lines)
    elif isinstance(node, ControlSegment):
        lines.append(f"{pad}control duration={float(node.duration)!r} u={[float(v) for v in node.u]!r}")
    elif isinstance(node, FreeEvolve):
        lines.append(f"{pad}free duration={float(node.duration)!r}")
    elif isinstance(node, Imprint):
        time = None if node.time is None else float(node.time)
        lines.append(f"{pad}imprint factor={float(node.factor)!r} mode={node.mode} time={time!r} "
                     f"phase={node.phase.describe()}")
    elif isinstance(node, TransportRef):
        lines.append(f"{pad}transport-ref t={float(node.t)!r} phase={node.field_phase.describe()}")


def compose(*plans: Plan) -> Plan:
    """Run the plans one after the other; the target is the composite of their targets."""
    root = Sequence(tuple(p.root for p in plans), "compose")
    target = Composite(tuple(p.target for p in plans))
    mode = "synthesized" if any(p.mode == "synthesized" for p in plans) else "exact"
    return Plan(root, target, max(p.tau for p in plans), mode)


def empty_plan() -> Plan:
    return Plan(Sequence((), "empty"), IDENTITY)


# ------------------------------------------------------------------ builders


def phase_imprint_plan(alpha, tau: float, family: PotentialFamily) -> Plan:
    """Controls ``u = -alpha/tau`` on ``[0, tau]`` approximate ``exp(i sum alpha_j W_j)``."""
    if not tau > 0:
        raise ValueError("tau must be positive")
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    root = Sequence((ControlSegment(tuple(-alpha / tau), tau),), "phase-imprint")
    if len(alpha) != family.m:
        raise ValueError(f"need {family.m} coefficients, got {len(alpha)}")
    phase = _combine(family.control_phases, alpha)
    target = PhaseMultiply(phase) if np.any(alpha) else IDENTITY
    return Plan(root, target, tau, "exact", meta={"alpha": alpha})


def _axis_phase(d, j, slope, const=0.0):
    return PolyGaussPhase.linear([slope * (i == j) for i in range(d)], const)


def translation_plan(j: int, alpha: float, tau: float, d: int = 1, geometry: str = "box",
                     imprint_time: float | None = None) -> Plan:
    """``exp(-i alpha x_j / tau)``, free evolution ``tau``, ``exp(i(alpha^2/2 + alpha x_j)/tau)``."""
    if geometry != "box":
        raise SynthesisError("translations need the coordinate controls of the box geometry")
    if not tau > 0:
        raise ValueError("tau must be positive")
    it = tau**2 if imprint_time is None else imprint_time
    first = Imprint(_axis_phase(d, j, -alpha), 1.0 / tau, time=it)
    last = Imprint(_axis_phase(d, j, alpha, 0.5 * alpha**2), 1.0 / tau, time=it)
    root = Sequence((first, FreeEvolve(tau), last), f"translate j={j}")
    target = Translate(j, alpha) if alpha else IDENTITY
    return Plan(root, target, tau)


def grad_square_plan(phase: SmoothPhase, tau: float, imprint_time: float | None = None) -> Plan:
    """``exp(i phi/tau)``, free evolution ``tau^2``, ``exp(-i phi/tau)`` approximate
    ``exp(-(i/2)|grad phi|^2)``."""
    if not tau > 0:
        raise ValueError("tau must be positive")
    if tau * phase.hess_bound >= 0.9:
        raise ContractionError(f"tau*|D2 phi| = {tau * phase.hess_bound:.3f} >= 0.9")
    it = tau**2 if imprint_time is None else imprint_time
    root = Sequence((Imprint(phase, 1.0 / tau, time=it), FreeEvolve(tau**2),
                     Imprint(phase, -1.0 / tau, time=it)), "grad-square")
    return Plan(root, GradSquarePhase(phase), tau)


def symmetric_grad_square_plan(phase: SmoothPhase, tau: float,
                               imprint_time: float | None = None) -> Plan:
    """Grad-square maps of ``h`` and ``-h`` back to back, ``h = phase/sqrt(2)``.

    Their first-order transport errors have opposite signs and cancel, leaving a
    bounded multiplication error instead of one that grows with the state's gradient.
    The middle imprints merge into one.
    """
    if not tau > 0:
        raise ValueError("tau must be positive")
    h = phase * (1.0 / math.sqrt(2.0))
    if tau * h.hess_bound >= 0.9:
        raise ContractionError(f"tau*|D2 h| = {tau * h.hess_bound:.3f} >= 0.9")
    it = tau**2 if imprint_time is None else imprint_time
    root = Sequence((Imprint(h, 1.0 / tau, time=it), FreeEvolve(tau**2),
                     Imprint(h, -2.0 / tau, time=it), FreeEvolve(tau**2),
                     Imprint(h, 1.0 / tau, time=it)), "symmetric grad-square")
    return Plan(root, GradSquarePhase(phase), tau)


def conjugated_derivative_plan(phase: SmoothPhase, j: int, tau: float,
                               translation_tau: float | None = None,
                               imprint_time: float | None = None) -> Plan:
    """``exp(i phi/tau) exp(tau d_j) exp(-i phi/tau)`` approximates ``exp(-i d_j phi)``.

    The shift runs over ``translation_tau`` (default ``tau**2.5``). The conjugated
    state carries momentum ``grad(phi)/tau``, which drifts it by ``t grad(phi)/tau``
    during a shift of duration t; the outer imprint divides that by tau again, so
    t must be o(tau^2). Synthesized imprints of ``phi/tau`` get ``imprint_time``
    (default ``tau**3``) for the same reason.
    """
    if not tau > 0:
        raise ValueError("tau must be positive")
    it = tau**3 if imprint_time is None else imprint_time
    ttau = tau**2.5 if translation_tau is None else translation_tau
    shift = translation_plan(j, tau, ttau, d=phase.dim, imprint_time=it)
    root = Sequence((Imprint(phase, -1.0 / tau, time=it), shift.root,
                     Imprint(phase, 1.0 / tau, time=it)), f"conjugated-derivative j={j}")
    return Plan(root, DerivativePhase(j, phase), tau)


def trotter_plan(phase: SmoothPhase, tau: float, n: int, imprint_mode: str = "exact",
                 imprint_time: float | None = None, reference_dt: float | None = None) -> Plan:
    """n Trotter blocks ``exp(i phi/tau)``, free ``tau/n``, ``exp(-i phi/tau)``,
    ``exp(i|grad phi|^2/(2 n tau))``; targets ``exp(-T_{grad phi})``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if not tau > 0:
        raise ValueError("tau must be positive")
    it = tau**2 if imprint_time is None else imprint_time
    g2 = _grad_square_phase(phase)
    block = (Imprint(phase, 1.0 / tau, time=it), FreeEvolve(tau / n),
             Imprint(phase, -1.0 / tau, time=it), Imprint(g2, 1.0 / (2 * n * tau), time=it))
    root = Sequence(tuple(Sequence(block, f"block {k}") for k in range(n)), f"trotter n={n}")
    return Plan(root, GradientFlow(phase, 1.0), tau, imprint_mode,
                intermediate=TransportedEvolution(phase, tau, 1.0, reference_dt),
                meta={"n": n})


def _grad_square_phase(phase: SmoothPhase) -> SmoothPhase:
    """``|grad phi|^2`` in closed form when the family allows it."""
    if isinstance(phase, TrigPhase):
        return phase.grad_dot(phase)
    if isinstance(phase, PolyGaussPhase):
        out = PolyGaussPhase(phase.dim)
        for k in range(phase.dim):
            dk = phase.derivative(k)
            out = out + _polygauss_product(dk, dk)
        return out
    def value(x):
        return np.sum(phase.grad(x) ** 2, axis=-1)

    def grad(x):
        return 2 * np.einsum("...ij,...j->...i", phase.hess(x), phase.grad(x))

    def hess(x):
        h = phase.hess(x)
        return 2 * np.einsum("...ik,...kj->...ij", h, h)

    return CallablePhase(phase.dim, value, grad, hess, name=f"|grad {phase.describe()}|^2")


def _polygauss_product(p: PolyGaussPhase, q: PolyGaussPhase) -> PolyGaussPhase:
    terms = []
    for (b1, g1), c1 in p.coeffs.items():
        for (b2, g2), c2 in q.coeffs.items():
            terms.append((c1 * c2, tuple(x + y for x, y in zip(b1, b2)), g1 + g2))
    return PolyGaussPhase(p.dim, terms)


# ----------------------------------------------------------------- synthesis


@dataclass(frozen=True)
class SynthesisOptions:
    """Knobs for synthesized imprints.

    depth: number of saturation levels available (2 means H_0 and H_1).
    imprint_time: override for every top-level imprint's control time.
    gradsq_tau: scale of the grad-square sub-plans realizing torus H_1 terms
        (default: the imprint's control time).
    derivative_tau: scale of the conjugated-derivative sub-plans for box H_1 terms.
    inner_time: control time of the H_0 imprints inside those sub-plans
        (default: the sub-plan scale squared).
    symmetric: realize torus H_1 terms with ``symmetric_grad_square_plan``.
    fuse: merge adjacent synthesized imprints into a single imprint of the summed
        phase, and neighbouring control segments with equal values into one.
    """

    depth: int = 2
    imprint_time: float | None = None
    gradsq_tau: float | None = None
    derivative_tau: float | None = None
    inner_time: float | None = None
    fuse: bool = False
    symmetric: bool = True


def _design(family: PotentialFamily):
    pts = family.grid.points.reshape(-1, family.grid.d)
    cols = [np.ones(len(pts))] + [w.ravel() for w in family.controls]
    return np.stack(cols, axis=1)


def _lstsq(A, y):
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = np.linalg.norm(A @ coef - y)
    return coef, resid <= FIT_TOL * max(1.0, np.linalg.norm(y))


def decompose_level0(family: PotentialFamily, values: np.ndarray):
    """``values = c0 + sum alpha_j W_j`` on the grid, or None."""
    coef, ok = _lstsq(_design(family), values.ravel())
    return (float(coef[0]), _clean(coef[1:], values)) if ok else None


def _clean(alpha, values):
    # lstsq leaves roundoff in coefficients that should vanish
    alpha = np.array(alpha, dtype=float)
    alpha[np.abs(alpha) < 1e-12 * max(1.0, float(np.abs(values).max()))] = 0.0
    return alpha


def _level1_torus(family, values):
    phases = family.control_phases
    if phases is None:
        return None
    pts = family.grid.points.reshape(-1, family.grid.d)
    m = family.m
    grads = [p.grad(pts) for p in phases]
    pairs = [(i, j) for i in range(m) for j in range(i, m)]
    cols = [np.sum(grads[i] * grads[j], axis=-1) for i, j in pairs]
    A = np.hstack([_design(family), np.stack(cols, axis=1)])
    coef, ok = _lstsq(A, values.ravel())
    if not ok:
        return None
    c0, alpha, cq = float(coef[0]), _clean(coef[1:m + 1], values), coef[m + 1:]
    M = np.zeros((m, m))
    for (i, j), c in zip(pairs, cq):
        if i == j:
            M[i, i] += c
        else:
            M[i, j] += 0.5 * c
            M[j, i] += 0.5 * c
    w, vecs = np.linalg.eigh(M)
    scale = max(np.abs(w).max(initial=0.0), 1.0)
    mu = max(float(w.max(initial=0.0)), 0.0)
    if mu > 1e-14 * scale:
        total = np.sum([np.sum(g**2, axis=-1) for g in grads], axis=0)
        if np.ptp(total) > 1e-10 * max(1.0, abs(total).max()):
            return None
        c0 += mu * float(total.mean())
    gs = []
    for lam_k, v in zip(w - mu, vecs.T):
        if abs(lam_k) <= 1e-14 * scale:
            continue
        amp = math.sqrt(2.0 * abs(lam_k))
        gs.append(_combine(phases, amp * v))
    return c0, alpha, gs


def _combine(phases, coeffs):
    if all(isinstance(p, TrigPhase) for p in phases):
        out = TrigPhase(phases[0].dim)
        for c, p in zip(coeffs, phases):
            out = out + p * float(c)
        return out
    if all(isinstance(p, PolyGaussPhase) for p in phases):
        out = PolyGaussPhase(phases[0].dim)
        for c, p in zip(coeffs, phases):
            out = out + p * float(c)
        return out
    return SumPhase([(float(c), p) for c, p in zip(coeffs, phases)])


def _level1_box(family, values):
    phases = family.control_phases
    if phases is None or not all(isinstance(p, PolyGaussPhase) for p in phases):
        return None
    pts = family.grid.points.reshape(-1, family.grid.d)
    derived = []
    for p in phases:
        for k in range(family.grid.d):
            dp = p.derivative(k)
            if any(g > 0 or sum(b) > 0 for (b, g) in dp.coeffs):
                derived.append((p, k, dp.value(pts)))
    if not derived:
        return None
    A = np.hstack([_design(family), np.stack([v for _, _, v in derived], axis=1)])
    coef, ok = _lstsq(A, values.ravel())
    if not ok:
        return None
    m = family.m
    terms = [(p, k, float(c)) for (p, k, _), c in zip(derived, coef[m + 1:])
             if abs(c) > 1e-14 * max(1.0, np.abs(coef).max())]
    return float(coef[0]), _clean(coef[1:m + 1], values), terms


def synthesize_imprint(phase: SmoothPhase, factor: float, time: float, family: PotentialFamily,
                       options: SynthesisOptions | None = None, depth: int | None = None):
    """Replace ``exp(i factor phase)`` by control segments.

    Returns ``(nodes, global_phase)``: nodes contain only control segments and free
    evolutions; ``global_phase`` collects the constants the controls cannot see.
    """
    options = options or SynthesisOptions()
    depth = options.depth if depth is None else depth
    if depth < 1:
        raise SynthesisError("synthesis depth exhausted")
    if not time > 0:
        raise ValueError("imprint time must be positive")
    values = factor * phase.value(family.grid.points)
    lvl0 = decompose_level0(family, values)
    if lvl0 is not None:
        c0, alpha = lvl0
        return [ControlSegment(tuple(-alpha / time), time)], c0
    if depth < 2:
        raise SynthesisError(f"phase {phase.describe()} is not in the span of the controls")
    nodes: list = []
    if family.grid.is_box:
        fit = _level1_box(family, values)
        if fit is None:
            raise SynthesisError(f"phase {phase.describe()} is not reachable at depth {depth}")
        c0, alpha, terms = fit
        if np.any(alpha):
            nodes.append(ControlSegment(tuple(-alpha / time), time))
        sub_tau = options.derivative_tau or time
        for p, k, c in terms:
            sub = conjugated_derivative_plan(p * (-c), k, sub_tau, imprint_time=options.inner_time)
            inner, ph = _flatten_synth(sub.root, family, options, depth - 1)
            nodes += inner
            c0 += ph
        return nodes, c0
    fit = _level1_torus(family, values)
    if fit is None:
        raise SynthesisError(f"phase {phase.describe()} is not reachable at depth {depth}")
    c0, alpha, gs = fit
    if np.any(alpha):
        nodes.append(ControlSegment(tuple(-alpha / time), time))
    sub_tau = options.gradsq_tau or time
    for g in gs:
        if options.symmetric:
            sub = symmetric_grad_square_plan(g, sub_tau, imprint_time=options.inner_time)
        else:
            sub = grad_square_plan(g, sub_tau, imprint_time=options.inner_time)
        inner, ph = _flatten_synth(sub.root, family, options, depth - 1)
        nodes += inner
        c0 += ph
    return nodes, c0


def _flatten_synth(node, family, options, depth):
    out, total = [], 0.0
    for leaf in _leaves(node):
        if isinstance(leaf, Imprint):
            t = leaf.time if leaf.time is not None else 1.0
            sub, ph = synthesize_imprint(leaf.phase, leaf.factor, t, family, options, depth)
            out += sub
            total += ph
        elif isinstance(leaf, (ControlSegment, FreeEvolve)):
            out.append(leaf)
    return out, total


# ------------------------------------------------------------------- compile


@dataclass(frozen=True)
class EvolveStep:
    schedule: ControlSchedule


@dataclass(frozen=True)
class ApplyStep:
    phase: SmoothPhase
    factor: float

    def __call__(self, psi: WaveField) -> WaveField:
        return _multiply(psi, self.phase, self.factor)


@dataclass(frozen=True)
class CompiledPlan:
    steps: tuple
    schedule: ControlSchedule
    expected_phase: float

    @property
    def n_segments(self) -> int:
        return sum(len(s.schedule.values) for s in self.steps if isinstance(s, EvolveStep))

    @property
    def n_applications(self) -> int:
        return sum(isinstance(s, ApplyStep) for s in self.steps)

    def __iter__(self):
        # unpacks as (schedule, expected_phase)
        return iter((self.schedule, self.expected_phase))


def compile_plan(plan: Plan, imprint_mode: str | None = None, family: PotentialFamily | None = None,
                 options: SynthesisOptions | None = None) -> CompiledPlan:
    """Flatten the plan depth-first, left to right.

    Exact imprints become zero-duration operator applications between schedule
    segments; synthesized imprints become control segments. The returned object
    unpacks as ``(schedule, expected_phase)``.
    """
    mode = imprint_mode or plan.mode
    options = options or SynthesisOptions()
    m = family.m if family is not None else None
    steps: list = []
    pending: list[ControlSegment | FreeEvolve] = []
    expected = 0.0

    def flush():
        nonlocal pending
        if pending:
            steps.append(EvolveStep(_segments_to_schedule(pending, m, options.fuse)))
            pending = []

    leaves = plan.nodes()
    if options.fuse:
        leaves = _fuse_imprints(leaves, mode)
    for leaf in leaves:
        if isinstance(leaf, (ControlSegment, FreeEvolve)):
            if leaf.duration > 0:
                pending.append(leaf)
        elif isinstance(leaf, Imprint):
            leaf_mode = leaf.mode or mode
            if leaf_mode == "exact":
                flush()
                steps.append(ApplyStep(leaf.phase, leaf.factor))
            elif leaf_mode == "synthesized":
                if family is None:
                    raise SynthesisError("synthesized imprints need a potential family")
                t = options.imprint_time or leaf.time
                if t is None:
                    t = plan.tau**2
                nodes, ph = synthesize_imprint(leaf.phase, leaf.factor, t, family, options)
                expected += ph
                pending += [n for n in nodes if n.duration > 0]
            else:
                raise ValueError(f"unknown imprint mode {leaf_mode!r}")
    flush()
    segs = [s.schedule for s in steps if isinstance(s, EvolveStep)]
    if m is None:
        m = segs[0].m if segs else 1
    schedule = ControlSchedule.zero(0.0, m)
    for s in segs:
        schedule = schedule.then(s)
    return CompiledPlan(tuple(steps), schedule, expected)


def _fuse_imprints(leaves, mode):
    out, run = [], []

    def close():
        if len(run) == 1:
            out.append(run[0])
        elif run:
            phase = _combine([n.phase for n in run], [n.factor for n in run])
            times = [n.time for n in run if n.time is not None]
            out.append(Imprint(phase, 1.0, "synthesized", min(times) if times else None))
        run.clear()

    for leaf in leaves:
        if isinstance(leaf, Imprint) and (leaf.mode or mode) == "synthesized":
            run.append(leaf)
        elif isinstance(leaf, TransportRef):
            continue
        else:
            close()
            out.append(leaf)
    close()
    return out


def _segments_to_schedule(segs, m, fuse=False):
    if m is None:
        m = next((len(s.u) for s in segs if isinstance(s, ControlSegment)), 1)
    durs, vals = [], []
    for s in segs:
        u = np.zeros(m) if isinstance(s, FreeEvolve) else np.asarray(s.u, dtype=float)
        if len(u) != m:
            raise ValueError(f"control segment has {len(u)} channels, family has {m}")
        if fuse and vals and np.array_equal(vals[-1], u):
            durs[-1] += s.duration
            continue
        durs.append(s.duration)
        vals.append(u)
    return ControlSchedule.from_durations(durs, np.array(vals))


def run_compiled(compiled: CompiledPlan, psi0: WaveField, ctx: SolverContext) -> WaveField:
    psi = psi0
    for step in compiled.steps:
        if isinstance(step, ApplyStep):
            psi = step(psi)
        else:
            psi = evolve(psi, step.schedule, ctx)
    return psi


@dataclass
class ScoreReport:
    error: float
    target_error_breakdown: dict
    durations: dict
    state: Any = None


def run_and_score(plan: Plan, psi0: WaveField, ctx: SolverContext, imprint_mode: str | None = None,
                  options: SynthesisOptions | None = None, score_intermediate: bool = False) -> ScoreReport:
    """Execute the plan and measure the aligned distance to ``target(psi0)``."""
    if abs(psi0.norm() - 1.0) > 1e-6:
        raise ValueError("initial state must have unit norm")
    compiled = compile_plan(plan, imprint_mode, ctx.potentials, options)
    out = run_compiled(compiled, psi0, ctx)
    target = plan.target.apply(psi0, ctx)
    breakdown = {"target": aligned_distance(out, target)}
    if score_intermediate and plan.intermediate is not None:
        breakdown["intermediate"] = aligned_distance(out, plan.intermediate.apply(psi0, ctx))
    free = sum(float(np.sum(s.schedule.durations[np.all(s.schedule.values == 0, axis=1)]))
               for s in compiled.steps if isinstance(s, EvolveStep))
    durations = {"control_time": compiled.schedule.duration, "free_time": free,
                 "operator_applications": compiled.n_applications}
    return ScoreReport(breakdown["target"], breakdown, durations, out)


def imprint_errors(plan: Plan, psi0: WaveField, ctx: SolverContext,
                   options: SynthesisOptions | None = None) -> list[float]:
    """Error of each synthesized imprint, applied to the exact-mode state it meets.

    Running the plan with exact imprints and swapping one imprint at a time, the
    gap between the two modes is at most the sum of these (times the Lipschitz
    factor of whatever follows).
    """
    state, out = psi0, []
    for leaf in plan.nodes():
        if isinstance(leaf, Imprint):
            single = Plan(Sequence((replace(leaf, mode="synthesized"),), "imprint"),
                          PhaseMultiply(leaf.phase, leaf.factor), plan.tau, "synthesized")
            out.append(run_and_score(single, state, ctx, options=options).error)
            state = state * np.exp(1j * leaf.factor * leaf.phase.value(state.grid.points))
        elif isinstance(leaf, (ControlSegment, FreeEvolve)) and leaf.duration > 0:
            u = leaf.u if isinstance(leaf, ControlSegment) else np.zeros(ctx.potentials.m)
            state = evolve(state, ControlSchedule.constant(leaf.duration, u), ctx)
    return out


# --------------------------------------------------------------- text format


_NUM = r"[-+0-9.eEinfa]+"


def parse_phase(text: str) -> SmoothPhase:
    """Inverse of ``describe`` for trig, poly-Gauss and sum phases."""
    text = text.strip()
    m = re.fullmatch(r"trig\(d=(\d+)\)\[(.*)\]", text)
    if m:
        d, body = int(m.group(1)), m.group(2)
        terms = []
        for a, kind, b in re.findall(rf"({_NUM})\*(cos|sin)\[([-0-9, ]*)\]", body):
            terms.append((float(a), kind, tuple(int(v) for v in b.split(",") if v.strip())))
        return TrigPhase(d, terms)
    m = re.fullmatch(r"polygauss\(d=(\d+)\)\[(.*)\]", text)
    if m:
        d, body = int(m.group(1)), m.group(2)
        terms = []
        for c, beta, g in re.findall(rf"({_NUM})\*x\^\[([0-9, ]*)\]\*exp\(-({_NUM})\|x\|\^2\)", body):
            terms.append((float(c), tuple(int(v) for v in beta.split(",") if v.strip()), float(g)))
        return PolyGaussPhase(d, terms)
    if text.startswith("sum[") and text.endswith("]"):
        body = text[4:-1]
        parts, depth, start = [], 0, 0
        for i, ch in enumerate(body):
            if ch in "([":
                depth += 1
            elif ch in ")]":
                depth -= 1
            elif body.startswith(" + ", i) and depth == 0:
                parts.append(body[start:i])
                start = i + 3
        parts.append(body[start:])
        terms = []
        for part in parts:
            c, rest = part.split("*(", 1)
            terms.append((float(c), parse_phase(rest[:-1])))
        return SumPhase(terms)
    raise ValueError(f"cannot parse phase {text!r}")


def _kv(line):
    head, _, rest = line.partition(" phase=")
    out = dict(re.findall(r"(\w[\w-]*)=(\S+)", head))
    if rest:
        out["phase"] = rest
    return out


def plan_from_text(text: str, target: TargetMap | None = None) -> Plan:
    """Rebuild the node tree written by ``Plan.to_text``.

    Targets are not parsed back; pass one explicitly or get the identity.
    """
    lines = [ln for ln in text.splitlines() if ln.strip()]
    header = _kv(lines[0])
    stack: list[tuple[int, list, str]] = [(-1, [], "root")]
    for ln in lines[2:]:
        depth = (len(ln) - len(ln.lstrip(" "))) // 2
        body = ln.strip()
        kind = body.split(" ", 1)[0]
        kv = _kv(body)
        while stack[-1][0] >= depth:
            d0, kids, label = stack.pop()
            stack[-1][1].append(Sequence(tuple(kids), label))
        if kind == "sequence":
            m = re.search(r"label=('(?:[^'\\]|\\.)*'|\"[^\"]*\")", body)
            stack.append((depth, [], ast.literal_eval(m.group(1)) if m else ""))
            continue
        if kind == "control":
            m = re.search(r"u=(\[.*\])", body)
            node = ControlSegment(tuple(float(v) for v in ast.literal_eval(m.group(1))),
                                  float(kv["duration"]))
        elif kind == "free":
            node = FreeEvolve(float(kv["duration"]))
        elif kind == "imprint":
            mode = None if kv["mode"] == "None" else kv["mode"]
            time = None if kv["time"] == "None" else float(kv["time"])
            node = Imprint(parse_phase(kv["phase"]), float(kv["factor"]), mode, time)
        elif kind == "transport-ref":
            node = TransportRef(parse_phase(kv["phase"]), float(kv["t"]))
        else:
            raise ValueError(f"unknown node {kind!r}")
        stack[-1][1].append(node)
    while len(stack) > 1:
        _, kids, label = stack.pop()
        stack[-1][1].append(Sequence(tuple(kids), label))
    roots = stack[0][1]
    root = roots[0] if len(roots) == 1 and isinstance(roots[0], Sequence) else Sequence(tuple(roots))
    return Plan(root, target or IDENTITY, float(header["tau"]), header["mode"])

