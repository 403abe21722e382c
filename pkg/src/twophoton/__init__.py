"""Simulator for a two-level atom driven by two counter-propagating photons.

Library layout:

    operators  small dense complex-matrix primitives
    pulses     photon wave packets xi(t), tail mass w(t), couplings
    slh        network triples, composition products, the mixed network
    filters    conditioned component equations for both detection schemes
    oracle     independent 8x8 augmented-model propagator and extraction
    engine     grids, noise streams, trajectories, ensembles, master curves
    presets    ready-made scenario configurations
    cli        command-line runner writing CSV curves, figures and reports
"""

from .engine import (
    EnsembleResult,
    SimulationConfig,
    TrajectoryResult,
    compare_with_oracle,
    integrate_master,
    peak_stats,
    run_ensemble,
    simulate_trajectory,
)
from .filters import (
    FilterState,
    MeasurementScheme,
    ModelParams,
    excitation_probability,
    homodyne_photocount,
    two_homodyne,
)
from .pulses import delayed_rising_exp, gaussian, rising_exp, vacuum

__version__ = "0.1.0"

__all__ = [
    "EnsembleResult",
    "FilterState",
    "MeasurementScheme",
    "ModelParams",
    "SimulationConfig",
    "TrajectoryResult",
    "compare_with_oracle",
    "delayed_rising_exp",
    "excitation_probability",
    "gaussian",
    "homodyne_photocount",
    "integrate_master",
    "peak_stats",
    "rising_exp",
    "run_ensemble",
    "simulate_trajectory",
    "two_homodyne",
    "vacuum",
    "__version__",
]
