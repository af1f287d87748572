"""The sixteen acceptance criteria, each at its stated tolerance and time budget.

Every criterion runs the corresponding registered scenario with the criterion's
parameters pinned explicitly, so a change of scenario defaults cannot loosen it.
One PASS/FAIL line per criterion is printed in the terminal summary.
"""
import time

import pytest

from conftest import ACCEPTANCE_LINES
from lognls.experiments import build_config, run_scenario

TAUS = [0.2, 0.1, 0.05, 0.025]

CRITERIA = [
    (1, "unitarity", "conservation", {"sweep_values": [-1.0], "N": 256, "steps": 1000, "tol": 1e-10}, 5),
    (2, "nonlinearity inequality fuzz", "lemma-ch-fuzz", {"pairs": 100000}, 1),
    (3, "Lipschitz stability", "lipschitz",
     {"sweep_values": [-1.0, 0.5], "pairs": 20, "slack": 1.05}, 30),
    (4, "splitting order", "splitting-order",
     {"sweep_values": [4e-4, 2e-4, 1e-4, 5e-5], "slope_lo": 1.7, "slope_hi": 2.3}, 60),
    (5, "phase-imprint rate (torus and box)", "phase-imprint-rate",
     {"sweep_values": TAUS, "alpha_torus": 0.7, "alpha_box": 0.5, "slope_lo": 0.4}, 60),
    (6, "translation rate", "translation-rate", {"sweep_values": TAUS, "alpha": 0.5, "slope_lo": 0.4}, 60),
    (7, "squared-gradient map", "gradsq-rate", {"sweep_values": TAUS, "amp": 0.5, "slope_lo": 0.2}, 60),
    (8, "eikonal estimates", "eikonal-rates",
     {"sweep_values": TAUS, "amp": 0.5, "defect_window": [1.8, 2.2], "grad_window": [0.8, 1.2],
      "invariance_tol": 1e-8}, 10),
    (9, "Trotter n-rate", "trotter-n-rate",
     {"sweep_values": [2, 4, 8, 16, 32], "tau": 0.1, "amp": 0.5, "slope_hi": -0.9}, 120),
    (10, "Trotter tau-limit", "trotter-tau-rate", {"sweep_values": TAUS, "amp": 0.5, "slope_lo": 0.9}, 120),
    (11, "WKB representation", "wkb-representation",
     {"sweep_values": [0.125, 0.25, 0.5], "tau": 0.1, "amp": 0.5, "tol": 5e-3}, 60),
    (12, "Gaussian ODE/PDE match", "gaussian-match",
     {"lam": -1.0, "T": 0.5, "dt": 1e-4, "tol": 1e-4}, 60),
    (13, "Gaussian invariance", "gaussian-invariance",
     {"sweep_values": [0.0, 0.2, 0.4, 0.6, 0.8, 1.0], "T": 1.0, "tol": 5e-4}, 120),
    (14, "coherent-state bound", "coherent-distance",
     {"sweep_values": [0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5], "separation": 10.0}, 120),
    (15, "composition bound", "composition-bound", {"sweep_values": list(range(10)), "tol": 1e-6}, 60),
    (16, "steering demo", "steering-demo", {"reduction": 0.5, "max_time": 0.5}, 120),
]


@pytest.mark.parametrize("number,title,scenario,params,budget", CRITERIA,
                         ids=[f"c{c[0]:02d}-{c[2]}" for c in CRITERIA])
def test_criterion(number, title, scenario, params, budget):
    t0 = time.perf_counter()
    report = run_scenario(build_config(scenario, params), write=False).report
    elapsed = time.perf_counter() - t0
    ok = report.passed and elapsed < budget
    status = "PASS" if ok else "FAIL"
    ACCEPTANCE_LINES.append(f"criterion {number}: {status} {title} [{scenario}] {report.summary} "
                            f"({elapsed:.1f} s of {budget} s)")
    assert report.passed, report.summary
    assert elapsed < budget, f"took {elapsed:.1f} s, budget {budget} s"
