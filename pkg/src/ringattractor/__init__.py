"""Simulation and verification toolkit for ReLU ring-attractor networks."""

from .config import RingConfig, cue_vector
from .deterministic import (ActiveRegion, BumpMoments, BumpProfile, Equilibrium, Trajectory,
                            compute_moments, detect_crossing, equilibria_n2, integrate,
                            make_region, moment_ode_residual, my_decay_rate, region_at,
                            stationary_bump, step_exact)
from .ergodics import (EmpiricalMeasure, ModeReport, detect_modes, empirical_measure,
                       ergodic_agreement, invariance_residual, time_average)
from .estimators import InvariantMeasureEstimator, RingNetwork
from .exceptions import ConfigError, DivergenceError, NumericalError, PreconditionError
from .experiments import ExperimentSpec, RunReport, preset_spec, run_experiment, validate_config
from .model import active_set, bitstring, build_connectivity, drift, lipschitz_bound, relu
from .stochastic import (HybridState, LyapunovCertificate, SdePath, SwitchChain, TestFunction,
                         apply_generator, certify_beta, generator_mc_check, lyapunov_drift,
                         moment_bound_check, sample_jump_times, simulate_sde)

__version__ = "0.1.0"

__all__ = [
    "active_set", "ActiveRegion", "apply_generator", "bitstring", "build_connectivity",
    "BumpMoments", "BumpProfile", "certify_beta", "compute_moments", "ConfigError",
    "cue_vector", "detect_crossing", "detect_modes", "DivergenceError", "drift",
    "empirical_measure", "EmpiricalMeasure", "equilibria_n2", "Equilibrium",
    "ergodic_agreement", "ExperimentSpec", "generator_mc_check", "HybridState", "integrate",
    "invariance_residual", "InvariantMeasureEstimator", "lipschitz_bound", "lyapunov_drift",
    "LyapunovCertificate", "make_region", "ModeReport", "moment_bound_check",
    "moment_ode_residual", "my_decay_rate", "NumericalError", "PreconditionError",
    "preset_spec", "region_at", "relu", "RingConfig", "RingNetwork", "run_experiment",
    "RunReport", "sample_jump_times", "SdePath", "simulate_sde", "stationary_bump",
    "step_exact", "SwitchChain", "TestFunction", "time_average", "Trajectory",
    "validate_config",
]
