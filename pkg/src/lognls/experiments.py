"""
Scenario registry, configuration files, rate fitting and CSV reporting.

A scenario evaluates one error per sweep point, then judges the whole sweep
(usually by a log-log slope window). Configs are flat ``key = value`` files;
sweeps are comma lists. All randomness flows from one 64-bit seed through
``numpy.random.Philox`` streams, one per sweep point, so output does not depend
on thread scheduling.
"""
from __future__ import annotations

import ast
import configparser
import csv
import io
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .eikonal import solve_eikonal
from .errors import GuardError
from .gaussian import (GaussianParams, classical_trajectory, dist_to_gaussian, gaussian_field,
                       integrate_gaussian, quadratic_family)
from .grid import (WaveField, aligned_distance, build_grid, field_from_function, norm,
                   standard_potentials)
from .phases import PolyGaussPhase, SumPhase, TrigPhase
from .solver import ControlSchedule, SolverContext, evolve, solve_R
from .synthesis import (Imprint, Plan, PhaseMultiply, Sequence, SynthesisOptions, compose,
                        conjugated_derivative_plan, grad_square_plan, imprint_errors, phase_imprint_plan,
                        run_and_score, translation_plan, trotter_plan)

COMMON_DEFAULTS = {"seed": 0, "threads": 1, "out": None, "timing": False}
CSV_COLUMNS = ["sweep_param", "sweep_value", "error", "duration_control_time", "wall_ms"]


class ConfigError(ValueError):
    pass


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Counter-based stream ``stream`` of the run seed (Philox, jumped ``stream`` times)."""
    bitgen = np.random.Philox(int(seed) & (2**64 - 1))
    return np.random.Generator(bitgen.jumped(stream) if stream else bitgen)


# ---------------------------------------------------------------- rate fitting


def fit_rate(xs, ys):
    """Least-squares line through ``(log x, log y)``: ``(slope, intercept, residual)``.

    The residual is the root-mean-square misfit in log space.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape or xs.size < 3:
        raise ValueError("need at least 3 matching points")
    if np.any(xs <= 0) or np.any(ys <= 0) or not np.all(np.isfinite(ys)):
        raise ValueError("rate fitting needs positive finite data")
    lx, ly = np.log(xs), np.log(ys)
    A = np.stack([lx, np.ones_like(lx)], axis=1)
    (slope, intercept), *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = float(np.sqrt(np.mean((A @ [slope, intercept] - ly) ** 2)))
    return float(slope), float(intercept), resid


@dataclass
class RateReport:
    scenario: str
    sweep_param: str
    values: list
    errors: list
    slope: float | None = None
    intercept: float | None = None
    residual: float | None = None
    window: tuple | None = None
    passed: bool = False
    summary: str = ""
    metrics: dict = field(default_factory=dict)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        slope = "" if self.slope is None else f" slope={self.slope:.3f}"
        return f"[{status}] {self.scenario}:{slope} {self.summary}".rstrip()


@dataclass
class ScenarioConfig:
    name: str
    params: dict
    seed: int = 0
    threads: int = 1
    out: str | None = None
    timing: bool = False

    def __getitem__(self, key):
        return self.params[key]

    def get(self, key, default=None):
        return self.params.get(key, default)

    @property
    def sweep_param(self) -> str:
        return self.params["sweep_param"]

    @property
    def sweep_values(self) -> list:
        return list(self.params["sweep_values"])


@dataclass
class Scenario:
    name: str
    description: str
    defaults: dict
    evaluate: Callable  # (cfg, value, shared, rng) -> row dict
    judge: Callable  # (cfg, rows, shared) -> RateReport
    prepare: Callable | None = None  # (cfg) -> shared


REGISTRY: dict[str, Scenario] = {}


def register(name, description, defaults, prepare=None):
    def wrap(fn):
        evaluate, judge = fn()
        REGISTRY[name] = Scenario(name, description, defaults, evaluate, judge, prepare)
        return fn
    return wrap


# --------------------------------------------------------------------- config


def _coerce(text: str):
    text = text.strip()
    if "," in text:
        return [_coerce(t) for t in text.split(",") if t.strip()]
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    if low in ("none", ""):
        return None
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text


def parse_config(text: str, overrides: dict | None = None) -> ScenarioConfig:
    """Parse a flat ``key = value`` config; a section header is optional."""
    if not text.lstrip().startswith("["):
        text = "[scenario]\n" + text
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.optionxform = str  # keys are case sensitive (N vs n)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"unreadable config: {exc}") from exc
    raw = {}
    for section in cp.sections():
        raw.update({k: _coerce(v) for k, v in cp[section].items()})
    name = raw.pop("scenario", None) or raw.pop("name", None)
    if name not in REGISTRY:
        raise ConfigError(f"unknown scenario {name!r}; see `list`")
    return build_config(name, raw, overrides)


def build_config(name: str, values: dict | None = None, overrides: dict | None = None) -> ScenarioConfig:
    if name not in REGISTRY:
        raise ConfigError(f"unknown scenario {name!r}")
    sc = REGISTRY[name]
    merged = dict(COMMON_DEFAULTS)
    merged.update(sc.defaults)
    for src in (values or {}, overrides or {}):
        for k, v in src.items():
            if v is None and k in COMMON_DEFAULTS:
                continue
            if k not in merged:
                raise ConfigError(f"unknown key {k!r} for scenario {name}")
            merged[k] = v
    if not isinstance(merged["sweep_values"], list):
        merged["sweep_values"] = [merged["sweep_values"]]
    try:
        seed, threads = int(merged.pop("seed")), int(merged.pop("threads"))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad seed/threads: {exc}") from exc
    if threads < 1:
        raise ConfigError("threads must be positive")
    out, timing = merged.pop("out"), bool(merged.pop("timing"))
    return ScenarioConfig(name, merged, seed, threads, out, timing)


# ---------------------------------------------------------------------- runner


@dataclass
class ScenarioResult:
    report: RateReport
    rows: list
    csv_text: str


def _format(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (np.floating, np.integer)):
        return repr(v.item())
    return str(v)


def rows_to_csv(cfg: ScenarioConfig, rows: list) -> str:
    extras = []
    for r in rows:
        for k in r:
            if k not in ("sweep_value", "error", "duration_control_time", "wall_ms") and k not in extras:
                extras.append(k)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS + extras)
    for r in rows:
        w.writerow([cfg.sweep_param, _format(r["sweep_value"]), _format(r.get("error")),
                    _format(r.get("duration_control_time", 0.0)), _format(r.get("wall_ms"))]
                   + [_format(r.get(k)) for k in extras])
    return buf.getvalue()


def run_scenario(cfg: ScenarioConfig | str, write: bool = True) -> ScenarioResult:
    """Run every sweep point (in a worker pool), judge the sweep, write the CSV."""
    if isinstance(cfg, str):
        cfg = build_config(cfg)
    sc = REGISTRY[cfg.name]
    shared = sc.prepare(cfg) if sc.prepare else None

    def task(item):
        idx, value = item
        rng = make_rng(cfg.seed, idx + 1)
        t0 = time.perf_counter()
        try:
            row = sc.evaluate(cfg, value, shared, rng)
        except GuardError as exc:
            row = {"error": math.nan, "guard": f"{type(exc).__name__} at "
                   f"{cfg.sweep_param}={value}: {exc}"}
        row["sweep_value"] = value
        if cfg.timing:
            row["wall_ms"] = round(1e3 * (time.perf_counter() - t0), 3)
        return row

    items = list(enumerate(cfg.sweep_values))
    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            rows = list(pool.map(task, items))
    else:
        rows = [task(it) for it in items]
    guards = [r["guard"] for r in rows if "guard" in r]
    if guards:
        report = RateReport(cfg.name, cfg.sweep_param, cfg.sweep_values,
                            [r["error"] for r in rows], passed=False,
                            summary="guard violation: " + "; ".join(guards))
    else:
        report = sc.judge(cfg, rows, shared)
    text = rows_to_csv(cfg, rows)
    if write and cfg.out:
        os.makedirs(os.path.dirname(os.path.abspath(cfg.out)), exist_ok=True)
        with open(cfg.out, "w", newline="") as fh:
            fh.write(text)
    return ScenarioResult(report, rows, text)


def write_plot(result: ScenarioResult, stem: str) -> tuple[str, str]:
    """gnuplot data + script pair for the sweep (log-log error vs sweep value)."""
    data, script = stem + ".dat", stem + ".gp"
    r = result.report
    with open(data, "w") as fh:
        fh.write(f"# {r.sweep_param} error\n")
        for v, e in zip(r.values, r.errors):
            fh.write(f"{_format(float(v))} {_format(float(e))}\n")
    with open(script, "w") as fh:
        fh.write(f"set title '{r.scenario}'\nset logscale xy\nset xlabel '{r.sweep_param}'\n"
                 "set ylabel 'error'\nset key top left\n")
        fit = "" if r.slope is None else (
            f", exp({r.intercept!r})*x**({r.slope!r}) title 'slope {r.slope:.3f}'")
        fh.write(f"plot '{os.path.basename(data)}' using 1:2 with linespoints title 'error'{fit}\n")
    return data, script


def _rate_report(cfg, rows, lo=-math.inf, hi=math.inf, monotone=False, extra_ok=True,
                 summary="", metrics=None):
    xs = [float(v) for v in cfg.sweep_values]
    ys = [float(r["error"]) for r in rows]
    slope, intercept, resid = fit_rate(xs, ys)
    ok = lo <= slope <= hi and extra_ok
    if monotone:
        order = np.argsort(xs)[::-1]
        seq = np.array(ys)[order]
        ok = ok and bool(np.all(np.diff(seq) < 0))
    return RateReport(cfg.name, cfg.sweep_param, cfg.sweep_values, ys, slope, intercept, resid,
                      (lo, hi), ok, summary, metrics or {})


# ------------------------------------------------------------------- fixtures


def _torus(cfg):
    g = build_grid("torus", cfg.get("N", 256), cfg.get("d", 1))
    return g, standard_potentials(g, "TorusTrig")


def _box(cfg):
    g = build_grid("box", cfg.get("N", 256), cfg.get("d", 1), cfg.get("L", 12.0))
    return g, standard_potentials(g, "EuclideanLinearGauss")


def smooth_torus_state(g):
    return field_from_function(g, lambda x: np.exp(np.cos(x[..., 0] - 0.4) + 0.3j * np.sin(2 * x[..., 0])))


def bump_state(g, center=1.5, width=0.3):
    def fn(x):
        r = np.angle(np.exp(1j * (x[..., 0] - center)))
        return np.exp(-r**2 / (2 * width**2))
    return field_from_function(g, fn)


def gaussian_state(g, center=0.0):
    return field_from_function(g, lambda x: np.exp(-0.5 * np.sum((x - center) ** 2, axis=-1)))


def random_schedule(rng, T, m, pieces, scale=1.0):
    cuts = np.sort(rng.uniform(0.15, 0.85, pieces - 1)) * T
    bp = np.concatenate([[0.0], cuts, [T]])
    # snap to a 1e-3 lattice so every interval is a whole number of steps
    bp = np.unique(np.round(bp, 3))
    vals = rng.uniform(-scale, scale, (len(bp) - 1, m))
    return ControlSchedule(bp, vals)


def cos_phase(amp, d=1):
    return TrigPhase(d, [(amp, "cos", (1,) + (0,) * (d - 1))])


def sin_phase(amp, d=1):
    return TrigPhase(d, [(amp, "sin", (1,) + (0,) * (d - 1))])


# ------------------------------------------------------------------ scenarios


@register("conservation", "L2 norm conservation of the split-step solver (with and without transport).",
          {"sweep_param": "lam", "sweep_values": [-1.0, 0.5, 0.0], "N": 256, "steps": 1000, "dt": 1e-3,
           "transport_steps": 100, "tol": 1e-10, "transport_tol": 1e-6})
def _conservation():
    def evaluate(cfg, lam, shared, rng):
        g, fam = _torus(cfg)
        psi = smooth_torus_state(g)
        u = rng.uniform(-1, 1, fam.m)
        T = cfg["steps"] * cfg["dt"]
        out = evolve(psi, ControlSchedule.constant(T, u), SolverContext(fam, lam=lam, dt=cfg["dt"]))
        drift = abs(out.norm() - psi.norm())
        Tt = cfg["transport_steps"] * cfg["dt"]
        ctx_t = SolverContext(fam, lam=lam, tau=0.1, phase_provider=cos_phase(0.5), dt=cfg["dt"])
        out_t = evolve(psi, ControlSchedule.zero(Tt, fam.m), ctx_t)
        return {"error": drift, "duration_control_time": T, "transport_drift": abs(out_t.norm() - psi.norm())}

    def judge(cfg, rows, shared):
        worst = max(r["error"] for r in rows)
        worst_t = max(r["transport_drift"] for r in rows)
        ok = worst < cfg["tol"] and worst_t < cfg["transport_tol"]
        return RateReport(cfg.name, cfg.sweep_param, cfg.sweep_values, [r["error"] for r in rows],
                          passed=ok, summary=f"max drift {worst:.2e}, with transport {worst_t:.2e}",
                          metrics={"max_drift": worst, "max_transport_drift": worst_t})
    return evaluate, judge


def _lipschitz_ratio(cfg, lam, rng):
    g, fam = _torus(cfg)
    T = cfg["T"]
    base = smooth_torus_state(g)
    ctx = SolverContext(fam, lam=lam, dt=cfg["dt"])
    worst = 0.0
    for _ in range(cfg["pairs"]):
        sched = random_schedule(rng, T, fam.m, 4, cfg["control_scale"])
        size = 10 ** rng.uniform(-3, -1)
        noise = rng.normal(size=g.shape) + 1j * rng.normal(size=g.shape)
        smooth = np.fft.ifft(np.fft.fft(noise) * (np.abs(g.axis_wavenumbers) <= 16))
        pert = base.values + size * smooth / norm(g, smooth)
        other = WaveField(g, pert).normalized()
        a = evolve(base, sched, ctx)
        b = evolve(other, sched, ctx)
        ratio = norm(g, a.values - b.values) / norm(g, base.values - other.values)
        worst = max(worst, ratio / math.exp(2 * abs(lam) * T))
    return worst


@register("lipschitz", "Lipschitz stability of the solution map: ratio / exp(2|lam|T) over random pairs.",
          {"sweep_param": "lam", "sweep_values": [-1.0, 0.5], "N": 256, "T": 0.5, "dt": 1e-3,
           "pairs": 20, "control_scale": 2.0, "slack": 1.05})
def _lipschitz():
    def evaluate(cfg, lam, shared, rng):
        return {"error": _lipschitz_ratio(cfg, lam, rng), "duration_control_time": cfg["T"]}

    def judge(cfg, rows, shared):
        worst = max(r["error"] for r in rows)
        return RateReport(cfg.name, cfg.sweep_param, cfg.sweep_values, [r["error"] for r in rows],
                          passed=worst <= cfg["slack"],
                          summary=f"max ratio/exp(2|lam|T) = {worst:.4f} (limit {cfg['slack']})")
    return evaluate, judge


def log_lemma_violations(z1, z2):
    """Count pairs breaking ``|Im((z2-z1)^* (z2 log|z2|^2 - z1 log|z1|^2))| <= 2|z1-z2|^2``."""
    def zlog(z):
        m2 = np.abs(z) ** 2
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(m2 > 0, z * np.log(np.where(m2 > 0, m2, 1.0)), 0.0)
    lhs = np.abs(np.imag(np.conj(z2 - z1) * (zlog(z2) - zlog(z1))))
    rhs = 2 * np.abs(z1 - z2) ** 2
    return int(np.sum(lhs > rhs)), float(np.max(np.where(rhs > 0, lhs / np.where(rhs > 0, rhs, 1), 0)))


@register("lemma-ch-fuzz", "Pointwise inequality for the logarithmic nonlinearity on random complex pairs.",
          {"sweep_param": "batch", "sweep_values": [0], "pairs": 100000})
def _lemma():
    def evaluate(cfg, _, shared, rng):
        n = cfg["pairs"]
        mag = np.exp(rng.normal(0, 2, (2, n)))
        ang = rng.uniform(0, 2 * np.pi, (2, n))
        z = mag * np.exp(1j * ang)
        z1, z2 = z[0], z[1].copy()
        # a slice of near-coincident pairs and exact zeros
        k = n // 10
        z2[:k] = z1[:k] * (1 + 10 ** rng.uniform(-8, -1, k) * np.exp(1j * ang[1, :k]))
        z1[k:k + 100] = 0.0
        bad, worst = log_lemma_violations(z1, z2)
        return {"error": float(bad), "max_ratio": worst}

    def judge(cfg, rows, shared):
        bad = sum(r["error"] for r in rows)
        return RateReport(cfg.name, cfg.sweep_param, cfg.sweep_values, [r["error"] for r in rows],
                          passed=bad == 0, summary=f"{int(bad)} violations, max lhs/rhs "
                          f"{max(r['max_ratio'] for r in rows):.4f}")
    return evaluate, judge


def _gaussian_setup(cfg, rng):
    g = build_grid("box", cfg.get("N", 256), 1, cfg.get("L", 12.0))
    V = PolyGaussPhase(1, [(0.5 * cfg["omega"] ** 2, (2,), 0.0)])
    fam = quadratic_family(g, drift=V)
    sched = random_schedule(rng, cfg["T"], 2, cfg.get("pieces", 5), cfg.get("control_scale", 1.0))
    return g, fam, sched


def _gaussian_reference(cfg, sched, T=None):
    T = cfg["T"] if T is None else T
    p0 = GaussianParams.standard(1)
    lin = ControlSchedule(sched.breakpoints, sched.values[:, :1])
    quad = ControlSchedule(sched.breakpoints, sched.values[:, 1:])
    return integrate_gaussian(p0, quad, lin, cfg["lam"], T, cfg.get("ode_dt", 1e-5),
                              potential=(0.5 * cfg["omega"] ** 2, None, 0.0))


def _prepare_splitting(cfg):
    g, fam, sched = _gaussian_setup(cfg, make_rng(cfg.seed, 0))
    return g, fam, sched, gaussian_field(_gaussian_reference(cfg, sched), g)


@register("splitting-order", "Global error of Strang splitting against the Gaussian ODE reference.",
          {"sweep_param": "dt", "sweep_values": [4e-4, 2e-4, 1e-4, 5e-5], "N": 256, "L": 12.0,
           "lam": -1.0, "omega": 1.0, "T": 0.5, "ode_dt": 1e-5, "slope_lo": 1.7, "slope_hi": 2.3},
          prepare=_prepare_splitting)
def _splitting():
    def evaluate(cfg, dt, shared, rng):
        g, fam, sched, chi = shared
        out = evolve(gaussian_field(GaussianParams.standard(1), g), sched,
                     SolverContext(fam, lam=cfg["lam"], dt=dt))
        return {"error": norm(g, out.values - chi.values), "duration_control_time": sched.duration}

    def judge(cfg, rows, shared):
        return _rate_report(cfg, rows, cfg["slope_lo"], cfg["slope_hi"],
                            summary=f"window [{cfg['slope_lo']}, {cfg['slope_hi']}]")
    return evaluate, judge


@register("phase-imprint-rate", "Imprint by strong controls u = -alpha/tau on torus and box.",
          {"sweep_param": "tau", "sweep_values": [0.2, 0.1, 0.05, 0.025], "N": 256, "L": 12.0,
           "lam": -1.0, "dt": 1e-3, "min_steps": 50, "alpha_torus": 0.7, "alpha_box": 0.5,
           "slope_lo": 0.4})
def _imprint():
    def evaluate(cfg, tau, shared, rng):
        g, fam = _torus(cfg)
        psi = smooth_torus_state(g)
        ctx = SolverContext(fam, lam=cfg["lam"], dt=cfg["dt"], min_steps=cfg["min_steps"])
        e_t = run_and_score(phase_imprint_plan([cfg["alpha_torus"], 0.0], tau, fam), psi, ctx).error
        gb, fb = _box(cfg)
        cb = SolverContext(fb, lam=cfg["lam"], dt=cfg["dt"], min_steps=cfg["min_steps"])
        e_b = run_and_score(phase_imprint_plan([cfg["alpha_box"], 0.0], tau, fb),
                            gaussian_state(gb), cb).error
        return {"error": max(e_t, e_b), "duration_control_time": tau, "error_torus": e_t, "error_box": e_b}

    def judge(cfg, rows, shared):
        xs = [float(v) for v in cfg.sweep_values]
        st = fit_rate(xs, [r["error_torus"] for r in rows])[0]
        sb = fit_rate(xs, [r["error_box"] for r in rows])[0]
        mono = all(np.all(np.diff([r[k] for r in rows]) < 0) for k in ("error_torus", "error_box"))
        rep = _rate_report(cfg, rows, cfg["slope_lo"], extra_ok=min(st, sb) >= cfg["slope_lo"] and mono,
                           summary=f"torus slope {st:.3f}, box slope {sb:.3f} (>= {cfg['slope_lo']})",
                           metrics={"slope_torus": st, "slope_box": sb})
        return rep
    return evaluate, judge


@register("translation-rate", "Translation by imprint / free evolution / imprint on the box.",
          {"sweep_param": "tau", "sweep_values": [0.2, 0.1, 0.05, 0.025], "N": 512, "L": 12.0,
           "lam": -1.0, "alpha": 0.5, "dt": 1e-3, "min_steps": 50, "slope_lo": 0.4})
def _translation():
    def evaluate(cfg, tau, shared, rng):
        g, fam = _box(cfg)
        psi = gaussian_state(g)
        plan = translation_plan(0, cfg["alpha"], tau, d=g.d)
        r = run_and_score(plan, psi, SolverContext(fam, lam=cfg["lam"], dt=cfg["dt"],
                                                    min_steps=cfg["min_steps"]))
        lin = run_and_score(plan, psi, SolverContext(fam, lam=0.0, dt=cfg["dt"], min_steps=cfg["min_steps"]))
        return {"error": r.error, "duration_control_time": r.durations["control_time"],
                "error_linear": lin.error}

    def judge(cfg, rows, shared):
        ratio = max(max(r["error"] / r["error_linear"], r["error_linear"] / r["error"]) for r in rows)
        return _rate_report(cfg, rows, cfg["slope_lo"], monotone=True, extra_ok=ratio <= 2.0,
                            summary=f"(>= {cfg['slope_lo']}), nonlinear/linear error ratio <= {ratio:.3f}",
                            metrics={"linear_ratio": ratio})
    return evaluate, judge


@register("gradsq-rate", "Squared-gradient phase exp(-(i/2)|grad phi|^2) on the torus.",
          {"sweep_param": "tau", "sweep_values": [0.2, 0.1, 0.05, 0.025], "N": 256, "lam": -1.0,
           "amp": 0.5, "dt": 1e-3, "min_steps": 50, "slope_lo": 0.2})
def _gradsq():
    def evaluate(cfg, tau, shared, rng):
        g, fam = _torus(cfg)
        psi = smooth_torus_state(g)
        plan = grad_square_plan(sin_phase(cfg["amp"]), tau)
        r = run_and_score(plan, psi, SolverContext(fam, lam=cfg["lam"], dt=cfg["dt"],
                                                    min_steps=cfg["min_steps"]))
        lin = run_and_score(plan, psi, SolverContext(fam, lam=0.0, dt=cfg["dt"], min_steps=cfg["min_steps"]))
        return {"error": r.error, "duration_control_time": r.durations["control_time"],
                "error_linear": lin.error}

    def judge(cfg, rows, shared):
        xs = [float(v) for v in cfg.sweep_values]
        return _rate_report(cfg, rows, math.nextafter(cfg["slope_lo"], math.inf), monotone=True,
                            summary=f"monotone, slope > {cfg['slope_lo']}",
                            metrics={"slope_linear": fit_rate(xs, [r["error_linear"] for r in rows])[0]})
    return evaluate, judge


@register("conj-derivative-rate", "Conjugated translation exp(i phi/tau) e^{tau d_j} exp(-i phi/tau) "
          "approximating exp(-i d_j phi) on the box.",
          {"sweep_param": "tau", "sweep_values": [0.2, 0.14, 0.1, 0.07, 0.05], "N": 2048, "L": 12.0,
           "lam": -1.0, "dt": 1e-3, "min_steps": 50, "slope_lo": 0.4, "synth_tau": 0.1})
def _conj():
    def evaluate(cfg, tau, shared, rng):
        g, fam = _box(cfg)
        psi = gaussian_state(g)
        ctx = SolverContext(fam, lam=cfg["lam"], dt=cfg["dt"], min_steps=cfg["min_steps"])
        plan = conjugated_derivative_plan(PolyGaussPhase.gaussian(1, 1.0, 0.5), 0, tau)
        r = run_and_score(plan, psi, ctx)
        row = {"error": r.error, "duration_control_time": r.durations["control_time"]}
        if tau == cfg["synth_tau"]:
            s = run_and_score(plan, psi, ctx, imprint_mode="synthesized")
            row.update(error_synthesized=s.error, mode_gap=aligned_distance(s.state, r.state),
                       imprint_error_sum=sum(imprint_errors(plan, psi, ctx)))
        return row

    def judge(cfg, rows, shared):
        synth = [r for r in rows if "mode_gap" in r]
        gap_ok = all(r["mode_gap"] <= r["imprint_error_sum"] for r in synth)
        note = "".join(f"; mode gap {r['mode_gap']:.3f} <= imprint errors {r['imprint_error_sum']:.3f}"
                       for r in synth)
        return _rate_report(cfg, rows, cfg["slope_lo"], monotone=True, extra_ok=gap_ok,
                            summary=f"monotone, slope >= {cfg['slope_lo']}{note}")
    return evaluate, judge


def _prepare_trotter_n(cfg):
    g, fam = _torus(cfg)
    psi = smooth_torus_state(g)
    ctx = SolverContext(fam, lam=cfg["lam"], dt=cfg["dt"], min_steps=cfg["min_steps"])
    ref = solve_R(psi, 1.0, cfg["tau"], cos_phase(cfg["amp"]),
                  SolverContext(fam, lam=cfg["lam"], dt=cfg["ref_dt"]))
    return psi, ctx, ref


@register("trotter-n-rate", "Trotter blocks vs the transported evolution R(1; tau, phi) as n grows.",
          {"sweep_param": "n", "sweep_values": [2, 4, 8, 16, 32], "N": 256, "lam": -1.0, "tau": 0.1,
           "amp": 0.5, "dt": 1e-3, "min_steps": 10, "ref_dt": 1e-3, "slope_hi": -0.9},
          prepare=_prepare_trotter_n)
def _trotter_n():
    def evaluate(cfg, n, shared, rng):
        psi, ctx, ref = shared
        plan = trotter_plan(cos_phase(cfg["amp"]), cfg["tau"], int(n))
        r = run_and_score(plan, psi, ctx)
        return {"error": aligned_distance(r.state, ref), "duration_control_time": r.durations["control_time"],
                "error_to_flow": r.error}

    def judge(cfg, rows, shared):
        rep = _rate_report(cfg, rows, hi=cfg["slope_hi"], summary=f"(<= {cfg['slope_hi']}; measured exponent)")
        return rep
    return evaluate, judge


@register("trotter-tau-rate", "Trotter plan at large n vs the gradient flow exp(-T_{grad phi}) as tau -> 0.",
          {"sweep_param": "tau", "sweep_values": [0.2, 0.1, 0.05, 0.025], "N": 256, "lam": -1.0,
           "amp": 0.5, "n": 1024, "dt": 1e-3, "min_steps": 2, "slope_lo": 0.9})
def _trotter_tau():
    def evaluate(cfg, tau, shared, rng):
        g, fam = _torus(cfg)
        psi = smooth_torus_state(g)
        ctx = SolverContext(fam, lam=cfg["lam"], dt=cfg["dt"], min_steps=cfg["min_steps"])
        r = run_and_score(trotter_plan(cos_phase(cfg["amp"]), tau, int(cfg["n"])), psi, ctx)
        return {"error": r.error, "duration_control_time": r.durations["control_time"]}

    def judge(cfg, rows, shared):
        return _rate_report(cfg, rows, cfg["slope_lo"], summary=f"(>= {cfg['slope_lo']})")
    return evaluate, judge


def eikonal_defects(phase, s, pts):
    """Sup-norm defect ``phi(s) - phi - s d_s phi(0)`` and W^{1,inf} gradient deviation."""
    sol = solve_eikonal(phase, s)
    defect = sol.value(s, pts) - phase.value(pts) - s * sol.ds(0.0, pts)
    grad_dev = np.max(np.linalg.norm(sol.grad(s, pts) - phase.grad(pts), axis=-1))
    hess_dev = np.max(np.linalg.norm(sol.hess(s, pts) - phase.hess(pts), ord=2, axis=(-2, -1)))
    feet = pts + s * phase.grad(pts)
    invariance = np.max(np.abs(sol.grad(s, feet) - phase.grad(pts)))
    return float(np.max(np.abs(defect))), float(grad_dev + hess_dev), float(invariance)


@register("eikonal-rates", "Eikonal estimates: value defect O(s^2), gradient deviation O(s), invariance.",
          {"sweep_param": "s_scaled", "sweep_values": [0.2, 0.1, 0.05, 0.025], "amp": 0.5, "samples": 256,
           "defect_window": [1.8, 2.2], "grad_window": [0.8, 1.2], "invariance_tol": 1e-8})
def _eikonal():
    def evaluate(cfg, s_scaled, shared, rng):
        phase = cos_phase(cfg["amp"])
        s = s_scaled / phase.hess_bound
        pts = np.concatenate([np.linspace(0, 2 * np.pi, cfg["samples"], endpoint=False),
                              rng.uniform(0, 2 * np.pi, 64)])[:, None]
        defect, grad_dev, inv = eikonal_defects(phase, s, pts)
        return {"error": defect, "grad_deviation": grad_dev, "invariance": inv}

    def judge(cfg, rows, shared):
        xs = [float(v) for v in cfg.sweep_values]
        sd = fit_rate(xs, [r["error"] for r in rows])
        sg = fit_rate(xs, [r["grad_deviation"] for r in rows])[0]
        inv = max(r["invariance"] for r in rows)
        (dlo, dhi), (glo, ghi) = cfg["defect_window"], cfg["grad_window"]
        ok = dlo <= sd[0] <= dhi and glo <= sg <= ghi and inv < cfg["invariance_tol"]
        return RateReport(cfg.name, cfg.sweep_param, cfg.sweep_values, [r["error"] for r in rows],
                          sd[0], sd[1], sd[2], (dlo, dhi), ok,
                          f"defect slope {sd[0]:.3f}, gradient slope {sg:.3f}, invariance {inv:.1e}",
                          {"grad_slope": sg, "invariance": inv})
    return evaluate, judge


@register("wkb-representation", "psi(tau s; 0, e^{i phi/tau} psi0) = a(s) e^{i phi(s)/tau} with a from solve_R.",
          {"sweep_param": "s_scaled", "sweep_values": [0.125, 0.25, 0.5], "N": 256, "lam": -1.0,
           "tau": 0.1, "amp": 0.5, "dt": 1e-4, "transport_dt": 1e-3, "tol": 5e-3})
def _wkb():
    def evaluate(cfg, s_scaled, shared, rng):
        g, fam = _torus(cfg)
        psi = smooth_torus_state(g)
        phase = cos_phase(cfg["amp"])
        s = s_scaled / phase.hess_bound
        tau = cfg["tau"]
        eik = solve_eikonal(phase, min(0.95 / phase.hess_bound, 2 * s))
        lhs = evolve(_mul(psi, phase, 1 / tau), ControlSchedule.zero(tau * s, fam.m),
                     SolverContext(fam, lam=cfg["lam"], dt=cfg["dt"]))
        a = solve_R(psi, s, tau, eik, SolverContext(fam, lam=cfg["lam"], dt=cfg["transport_dt"]))
        rhs = a * np.exp(1j * eik.value(s, g.points) / tau)
        return {"error": aligned_distance(lhs, rhs), "duration_control_time": tau * s}

    def judge(cfg, rows, shared):
        worst = max(r["error"] for r in rows)
        return RateReport(cfg.name, cfg.sweep_param, cfg.sweep_values, [r["error"] for r in rows],
                          passed=worst < cfg["tol"], summary=f"max aligned error {worst:.2e} (< {cfg['tol']})")
    return evaluate, judge


def _mul(psi, phase, factor):
    return psi * np.exp(1j * factor * phase.value(psi.grid.points))


@register("gaussian-match", "Split-step PDE vs Gaussian ODE under quadratic drift and linear+quadratic controls.",
          {"sweep_param": "trial", "sweep_values": [0, 1, 2], "N": 256, "L": 12.0, "lam": -1.0,
           "omega": 1.0, "T": 0.5, "dt": 1e-4, "ode_dt": 1e-5, "tol": 1e-4})
def _gauss_match():
    def evaluate(cfg, trial, shared, rng):
        g, fam, sched = _gaussian_setup(cfg, rng)
        chi = gaussian_field(_gaussian_reference(cfg, sched), g)
        out = evolve(gaussian_field(GaussianParams.standard(1), g), sched,
                     SolverContext(fam, lam=cfg["lam"], dt=cfg["dt"]))
        return {"error": norm(g, out.values - chi.values), "duration_control_time": sched.duration}

    def judge(cfg, rows, shared):
        worst = max(r["error"] for r in rows)
        return RateReport(cfg.name, cfg.sweep_param, cfg.sweep_values, [r["error"] for r in rows],
                          passed=worst < cfg["tol"], summary=f"max L2 error {worst:.2e} (< {cfg['tol']})")
    return evaluate, judge


def _distance_track(cfg, fam, psi0, sched, times, lam, extra=None):
    """dist_to_gaussian of the evolved state at each sample time."""
    ctx = SolverContext(fam, lam=lam, dt=cfg["dt"])
    out, prev, psi = [], 0.0, psi0
    for t in times:
        if t > prev:
            psi = evolve(psi, _slice(sched, prev, t), ctx)
        guesses = extra(t) if extra else ()
        out.append(dist_to_gaussian(psi, cfg["multistarts"], extra_guesses=guesses).distance)
        prev = t
    return out


def _slice(sched: ControlSchedule, a: float, b: float) -> ControlSchedule:
    bp = [a] + [t for t in sched.breakpoints if a < t < b] + [b]
    vals = [sched.value_at(0.5 * (x + y)) for x, y in zip(bp[:-1], bp[1:])]
    return ControlSchedule(np.array(bp) - a, np.array(vals).reshape(len(vals), sched.m))


@register("gaussian-invariance", "Gaussian set stays invariant: dist_to_gaussian along a controlled run.",
          {"sweep_param": "t", "sweep_values": [0.0, 0.2, 0.4, 0.6, 0.8, 1.0], "N": 256, "L": 12.0,
           "lam": -1.0, "omega": 1.0, "T": 1.0, "dt": 1e-3, "multistarts": 8, "tol": 5e-4},
          prepare=lambda cfg: _gaussian_setup(cfg, make_rng(cfg.seed, 0)))
def _gauss_inv():
    def evaluate(cfg, t, shared, rng):
        g, fam, sched = shared
        psi0 = gaussian_field(GaussianParams.standard(1), g)
        d = _distance_track(cfg, fam, psi0, sched, [t], cfg["lam"])[0]
        return {"error": d, "duration_control_time": t}

    def judge(cfg, rows, shared):
        worst = max(r["error"] for r in rows)
        return RateReport(cfg.name, cfg.sweep_param, cfg.sweep_values, [r["error"] for r in rows],
                          passed=worst < cfg["tol"], summary=f"max distance {worst:.2e} (< {cfg['tol']})",
                          metrics={"max_distance": worst})
    return evaluate, judge


def _coherent_setup(cfg, quadratic):
    g = build_grid("box", cfg["N"], 1, cfg["L"])
    terms = [(0.5, (2,), 0.0)]
    V = PolyGaussPhase(1, terms)
    if not quadratic:
        V = SumPhase([(1.0, V), (cfg["cos_amp"], cos_phase(1.0))])
    ctrl = [PolyGaussPhase.linear([1.0])]
    fam = standard_potentials(g, "Custom", drift=V, custom=ctrl)
    psi0 = field_from_function(g, lambda x: np.pi ** -0.25 * np.exp(-0.5 * x[..., 0] ** 2), normalize=False)
    return g, fam, V, psi0


def _prepare_coherent(cfg):
    rng = make_rng(cfg.seed, 0)
    sched = random_schedule(rng, max(cfg.sweep_values), 1, 3, cfg["control_scale"])
    return sched


@register("coherent-distance", "Coherent-state bound dist(psi(t), G) <= C t for a non-quadratic drift.",
          {"sweep_param": "t", "sweep_values": [0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5],
           "N": 256, "L": 12.0, "lam": -1.0, "cos_amp": 1.0, "dt": 1e-3, "multistarts": 8,
           "control_scale": 1.0, "separation": 10.0, "slope_lo": 0.9},
          prepare=_prepare_coherent)
def _coherent():
    def evaluate(cfg, t, shared, rng):
        sched = shared
        rows = {}
        for label, quad in (("error", False), ("quadratic_distance", True)):
            g, fam, V, psi0 = _coherent_setup(cfg, quad)
            traj = classical_trajectory(V, _slice(sched, 0.0, t), t, cfg["dt"])

            def guess(_t):
                q, p = traj.q[-1], traj.p[-1]
                return [GaussianParams(1.0, q + 1j * p, 0.0).normalized()]
            rows[label] = _distance_track(cfg, fam, psi0, _slice(sched, 0.0, t), [t], cfg["lam"], guess)[0]
        rows["duration_control_time"] = t
        return rows

    def judge(cfg, rows, shared):
        ts = np.array([float(v) for v in cfg.sweep_values])
        ds = np.array([r["error"] for r in rows])
        # one constant for the whole range; dist/t stays bounded as t -> 0 iff dist
        # decays at least linearly, which the log-log slope checks
        C = float(np.max(ds / ts))
        slope = fit_rate(ts, ds)
        quad_max = max(r["quadratic_distance"] for r in rows)
        d_end = float(ds[np.argmax(ts)])
        sep = math.inf if quad_max == 0 else d_end / quad_max
        ok = slope[0] >= cfg["slope_lo"] and sep >= cfg["separation"]
        return RateReport(cfg.name, cfg.sweep_param, cfg.sweep_values, [float(d) for d in ds],
                          slope[0], slope[1], slope[2], (cfg["slope_lo"], math.inf), ok,
                          f"dist <= {C:.4f} t on [{ts.min()}, {ts.max()}] (slope >= {cfg['slope_lo']}); "
                          f"dist(end) {d_end:.3e} vs quadratic max {quad_max:.3e}",
                          {"C": C, "quadratic_max": quad_max, "separation": sep})
    return evaluate, judge


def random_plan(rng, fam, kind=None):
    """A small random torus plan: a phase imprint or a squared-gradient map."""
    kind = kind or ("imprint" if rng.uniform() < 0.5 else "gradsq")
    tau = float(rng.choice([0.2, 0.1, 0.05]))
    if kind == "imprint":
        return phase_imprint_plan(rng.uniform(-1, 1, fam.m), tau, fam)
    amp = rng.uniform(0.2, 0.6)
    phase = TrigPhase(1, [(amp, "sin", (1,)), (rng.uniform(-0.3, 0.3), "cos", (1,))])
    return grad_square_plan(phase, tau)


@register("composition-bound", "Composite plan error <= exp(2|lam|T2) err1 + err2 over random pairs.",
          {"sweep_param": "pair", "sweep_values": list(range(10)), "N": 256, "lam": -1.0, "dt": 1e-3,
           "min_steps": 20, "tol": 1e-6})
def _composition():
    def evaluate(cfg, pair, shared, rng):
        g, fam = _torus(cfg)
        psi = smooth_torus_state(g)
        ctx = SolverContext(fam, lam=cfg["lam"], dt=cfg["dt"], min_steps=cfg["min_steps"])
        p1, p2 = random_plan(rng, fam), random_plan(rng, fam)
        e1 = run_and_score(p1, psi, ctx).error
        mid = p1.target.apply(psi, ctx)
        e2 = run_and_score(p2, mid, ctx).error
        T2 = p2.total_duration()
        ec = run_and_score(compose(p1, p2), psi, ctx).error
        bound = math.exp(2 * abs(cfg["lam"]) * T2) * e1 + e2 + cfg["tol"]
        return {"error": ec, "duration_control_time": p1.total_duration() + T2, "bound": bound,
                "err1": e1, "err2": e2}

    def judge(cfg, rows, shared):
        bad = sum(r["error"] > r["bound"] for r in rows)
        worst = max(r["error"] / r["bound"] for r in rows)
        return RateReport(cfg.name, cfg.sweep_param, cfg.sweep_values, [r["error"] for r in rows],
                          passed=bad == 0, summary=f"{bad} violations, max error/bound {worst:.3f}")
    return evaluate, judge


def steering_plan(cfg):
    phase = cos_phase(cfg["amp"])
    kick = sin_phase(cfg["kick"])
    flow = trotter_plan(phase, cfg["tau"], int(cfg["n"]), "synthesized", imprint_time=cfg["imprint_time"])
    imprint = Plan(Sequence((Imprint(kick, 1.0, "synthesized", cfg["imprint_time"]),), "kick"),
                   PhaseMultiply(kick), cfg["tau"], "synthesized")
    return compose(flow, imprint)


@register("steering-demo", "Synthesized gradient flow + imprint steering a torus bump toward a displaced target.",
          {"sweep_param": "n", "sweep_values": [24], "N": 512, "lam": -1.0, "amp": 0.8, "kick": 1.0,
           "tau": 0.07, "imprint_time": 5e-4, "gradsq_tau": 0.01, "inner_time": 5e-5, "center": 1.5,
           "width": 0.3, "dt": 1e-3, "min_steps": 10, "reduction": 0.5, "max_time": 0.5})
def _steering():
    def evaluate(cfg, n, shared, rng):
        g, fam = _torus(cfg)
        psi = bump_state(g, cfg["center"], cfg["width"])
        plan = steering_plan({**cfg.params, "n": n})
        ctx = SolverContext(fam, lam=cfg["lam"], dt=cfg["dt"], min_steps=cfg["min_steps"])
        opts = SynthesisOptions(gradsq_tau=cfg["gradsq_tau"], inner_time=cfg["inner_time"], fuse=True)
        r = run_and_score(plan, psi, ctx, options=opts)
        d0 = aligned_distance(psi, plan.target.apply(psi, ctx))
        return {"error": r.error, "duration_control_time": r.durations["control_time"],
                "initial_distance": d0, "reduction": 1 - r.error / d0}

    def judge(cfg, rows, shared):
        ok = all(r["reduction"] >= cfg["reduction"] and r["duration_control_time"] <= cfg["max_time"]
                 for r in rows)
        r = rows[0]
        return RateReport(cfg.name, cfg.sweep_param, cfg.sweep_values, [x["error"] for x in rows],
                          passed=ok, summary=f"distance {r['initial_distance']:.3f} -> {r['error']:.3f} "
                          f"({100 * r['reduction']:.0f}% reduction) in control time "
                          f"{r['duration_control_time']:.3f}")
    return evaluate, judge
