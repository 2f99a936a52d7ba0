"""Relaxation of non-reciprocal dissipative chains.

Lindblad chains with diagonal Hamiltonians and incoherent nearest-neighbour
hops: exact spectra via population/coherence sectors, steady states,
dynamics, relaxation times, localization, parameter sweeps and the
trapped-ion realization through adiabatic elimination.
"""

from .errors import (
    ConditioningError,
    DisconnectedChainError,
    GapUndefinedError,
    RegimeError,
    RelaxationTimeout,
    SaturationError,
    SizeCapError,
    SkinRelaxError,
    SpectrumError,
    StiffnessError,
    TruncationLeakError,
)
from .model import Model, ModelParams, build_model, model_from_arrays
from .liouvillian import (
    Spectrum,
    build_full_superoperator,
    build_population_generator,
    coherence_eigenvalue,
    full_spectrum,
    liouvillian_gap,
    model_gap,
    population_eigensystem,
    steady_state,
)
from .dynamics import evolve_eigen, evolve_integrate, evolve_populations, trajectory
from .relaxation import (
    localization_length,
    mode_overlap_metric,
    relaxation_time,
    relaxation_time_integrated,
)
from .elimination import (
    Laser,
    PhysicalParams,
    build_full_ion_generator,
    effective_rates,
    validate_elimination,
)
from .sweep import SweepConfig, fit_power_law, run_sweep
from .units import parse_frequency

__version__ = "0.1.0"
