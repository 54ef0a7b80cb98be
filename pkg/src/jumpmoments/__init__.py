"""Exact moment dynamics for bosonic modes under Poisson unitary squeeze
jumps, with two independent cross-checks: truncated Fock-space integration of
the master equation and Monte Carlo averaging of the classical jump process.
"""

__version__ = "0.1.0"

from .errors import (
    AccuracyError,
    CapacityError,
    ConditioningError,
    ConfigurationError,
    DimensionError,
    InvalidInputError,
    JumpMomentsError,
    LeakageError,
    MarginError,
    RangeOverflowError,
    SymmetryViolationError,
    TildeViolationError,
)
from .symplectic import (
    IndexScheme,
    QuadraticGenerator,
    StructMatrices,
    apply_kron,
    build_struct_matrices,
    kron_power,
    mat_exp,
    tilde_mat,
    tilde_vec,
    validate_generator,
)
from .propagator import (
    ChannelSet,
    MomentGenerator,
    MomentTensor,
    build_generator,
    first_second_moments,
    propagate,
    propagate_series,
)
from .states import (
    StateSpec,
    coherent_state,
    first_two_moments,
    fock_state,
    gaussian_moments,
    gaussian_pure_state,
    initial_moments,
    mean_vector,
    pair_covariance,
    vacuum_state,
)
from .fock import (
    FockSpace,
    FockState,
    build_jump_unitary,
    build_quadratic_hamiltonian,
    density,
    extract_moments,
    gksl_rhs,
    integrate,
    standard_form_rhs,
    state_from_spec,
    vectorized_generator,
)
from .montecarlo import (
    McConfig,
    TrajectoryEstimate,
    estimate,
    sample_trajectory,
    trajectory_moment,
    trajectory_rng,
)
from .config import RunConfig, config_hash, emit_config, parse_config, parse_config_dict

__all__ = [name for name in dir() if not name.startswith("_")]
