"""adiaphase: phase-interference timing and error-scaling analysis for
adiabatic quantum state transfer."""

from .analysis import (
    PerturbationSpec,
    Prediction,
    ScalingFit,
    fit_power_law,
    predict_amplitude_general,
    predict_amplitude_m0,
    standard_bound,
    tolerance_sweep,
    transition_amplitudes,
)
from .harness import SweepSpec, build_model, prepare_sweep, run_sweep
from .models import (
    HamiltonianModel,
    hamiltonian_derivative,
    reduce_search_to_2level,
    search_hamiltonian,
    tabulated_model,
)
from .propagator import EvolutionResult, evolve
from .schedules import (
    BetaInterpolation,
    Linear,
    LocalAdiabatic,
    Schedule,
    eval_schedule,
    parse_schedule,
    schedule_derivative,
)
from .spectral import (
    SpectralTrajectory,
    build_trajectory,
    coupling_beta,
    diagonalize,
    find_coupled_tracks,
    gap_integral,
)
from .timing import (
    BoundaryQuantity,
    TimingTable,
    boundary_quantity,
    estimate_theta,
    gap_defect,
    optimal_times,
    refine_time_by_beats,
    symmetry_defect,
    timing_defect,
)

__version__ = "0.1.0"
