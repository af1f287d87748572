"""Simulation and control synthesis for the bilinearly controlled logarithmic Schrodinger equation."""
from .errors import (BoundaryMassError, ContractionError, GuardError, SynthesisError,
                     UnderResolvedError)
from .grid import (Grid, PotentialFamily, WaveField, aligned_distance, boundary_mass, build_grid,
                   field_from_function, inner, norm, sigma_norm, standard_potentials)
from .phases import CallablePhase, PolyGaussPhase, SmoothPhase, SumPhase, TrigPhase
from .solver import (ControlSchedule, SolverContext, evolve, evolve_trajectory, log_phase_step,
                     solve_R, strang_step, write_trajectory_csv)
from .transport import (CallableField, ConstantField, GradientField, LinearField, VectorField,
                        flow_map, pushforward, transport_apply)
from .eikonal import EikonalSolution, invert_characteristic, solve_eikonal
from .gaussian import (ClassicalTrajectory, GaussianFit, GaussianParams, classical_trajectory,
                       dist_to_gaussian, gaussian_field, integrate_gaussian, quadratic_family)
from .synthesis import (Plan, SynthesisOptions, compile_plan, compose, conjugated_derivative_plan,
                        grad_square_plan, imprint_errors, phase_imprint_plan, plan_from_text,
                        run_and_score, symmetric_grad_square_plan, translation_plan, trotter_plan)
from .experiments import REGISTRY, ConfigError, RateReport, fit_rate, parse_config, run_scenario

__version__ = "0.1.0"

__all__ = [
    "BoundaryMassError",
    "ContractionError",
    "GuardError",
    "SynthesisError",
    "UnderResolvedError",
    "Grid",
    "PotentialFamily",
    "WaveField",
    "aligned_distance",
    "boundary_mass",
    "build_grid",
    "field_from_function",
    "inner",
    "norm",
    "sigma_norm",
    "standard_potentials",
    "CallablePhase",
    "PolyGaussPhase",
    "SmoothPhase",
    "SumPhase",
    "TrigPhase",
    "ControlSchedule",
    "SolverContext",
    "evolve",
    "evolve_trajectory",
    "log_phase_step",
    "solve_R",
    "strang_step",
    "write_trajectory_csv",
    "CallableField",
    "ConstantField",
    "GradientField",
    "LinearField",
    "VectorField",
    "flow_map",
    "pushforward",
    "transport_apply",
    "EikonalSolution",
    "invert_characteristic",
    "solve_eikonal",
    "ClassicalTrajectory",
    "GaussianFit",
    "GaussianParams",
    "classical_trajectory",
    "dist_to_gaussian",
    "gaussian_field",
    "integrate_gaussian",
    "quadratic_family",
    "Plan",
    "SynthesisOptions",
    "compile_plan",
    "compose",
    "conjugated_derivative_plan",
    "grad_square_plan",
    "imprint_errors",
    "phase_imprint_plan",
    "plan_from_text",
    "run_and_score",
    "symmetric_grad_square_plan",
    "translation_plan",
    "trotter_plan",
    "REGISTRY",
    "ConfigError",
    "RateReport",
    "fit_rate",
    "parse_config",
    "run_scenario",
    "__version__",
]
