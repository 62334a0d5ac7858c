"""Langevin dynamics on the d-torus in the overdamped scaling regime.

The library simulates the scaled kinetic Langevin system and its overdamped
limit, implements the perturbed-test-function calculus for finite Fourier
observables, and estimates the statistics (weak errors, rest terms, moment
suprema, tightness moduli, martingale-ladder defects) that witness the limit
empirically.  The `overdamp` CLI packages the standard experiments.
"""

__version__ = "0.1.0"

from .config import (
    ConfigError,
    ExperimentConfig,
    config_hash,
    parse_config,
    parse_config_text,
    parse_function,
    serialize_config,
)
from .corrector import (
    HamiltonianFunction,
    PerturbedTestFunction,
    PositionFunction,
    apply_langevin_generator,
    apply_overdamped_generator,
    generator_gap_closed,
    generator_gap_direct,
    perturb,
    residual_R1,
    residual_R2,
)
from .diagnostics import (
    LadderSpec,
    ModulusReport,
    MomentReport,
    RestTermReport,
    WeakErrorTable,
    ka_modulus,
    ladder_statistic,
    make_overdamped_generator,
    moment_report,
    rest_term_report,
    weak_error,
)
from .fourier import (
    FourierFunction,
    TorusPosition,
    eval_derivatives,
    from_text,
    to_text,
    wrap_coords,
)
from .integrators import (
    LANGEVIN,
    OVERDAMPED,
    Ensemble,
    GaussianMomentum,
    PhaseState,
    PointMomentum,
    PointStart,
    ScalingParams,
    UniformStart,
    ZeroMomentum,
    default_langevin_dt,
    langevin_step,
    overdamped_step,
    read_ensemble_csv,
    simulate_ensemble,
    write_ensemble_csv,
)
from .potentials import (
    CrystalPotential,
    Potential,
    oscillation,
    shift_to_zero_min,
    sup_grad_distance,
    sup_hessian_norm,
)
from .rng import make_stream

__all__ = [
    "__version__",
    "ConfigError", "ExperimentConfig", "config_hash", "parse_config",
    "parse_config_text", "parse_function", "serialize_config",
    "HamiltonianFunction", "PerturbedTestFunction", "PositionFunction",
    "apply_langevin_generator", "apply_overdamped_generator",
    "generator_gap_closed", "generator_gap_direct", "perturb",
    "residual_R1", "residual_R2",
    "LadderSpec", "ModulusReport", "MomentReport", "RestTermReport",
    "WeakErrorTable", "ka_modulus", "ladder_statistic",
    "make_overdamped_generator", "moment_report", "rest_term_report",
    "weak_error",
    "FourierFunction", "TorusPosition", "eval_derivatives", "from_text",
    "to_text", "wrap_coords",
    "LANGEVIN", "OVERDAMPED", "Ensemble", "GaussianMomentum", "PhaseState",
    "PointMomentum", "PointStart", "ScalingParams", "UniformStart",
    "ZeroMomentum", "default_langevin_dt", "langevin_step", "overdamped_step",
    "read_ensemble_csv", "simulate_ensemble", "write_ensemble_csv",
    "CrystalPotential", "Potential", "oscillation", "shift_to_zero_min",
    "sup_grad_distance", "sup_hessian_norm",
    "make_stream",
]
