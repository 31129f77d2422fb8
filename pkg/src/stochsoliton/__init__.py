"""Numerical laboratory for stochastic multi-soliton dynamics of the
mass-supercritical 1D NLS with linear multiplicative noise.

The package builds approximating solutions backward from modulated final
data, tracks the geometric decomposition into modulated solitons plus a
remainder, controls the backward-unstable spectral direction by shooting,
and verifies the noise-dictated decay rates at desk scale.
"""

from .spectral_grid import Field, Grid, derivative, inner_product, norm
from .ground_state import (
    GroundState,
    SolitonParams,
    closed_form_profile,
    rescale,
    solve_ground_state,
    soliton,
)
from .linearized_spectrum import (
    Eigenpair,
    apply_linearized,
    coercivity_gap,
    quadratic_form,
    solve_eigenpair,
)
from .noise_path import (
    BrownianPath,
    ControlledPath,
    NoiseRealization,
    NoiseSpec,
    RoughEnhancement,
    build_realization,
    coefficients,
    ito_enhancement,
    phase_field_W,
    rough_integral,
    sample_brownian,
    tail_processes,
)
from .rnls_solver import SolverConfig, evolve, rhs, step, to_physical
from .modulation import (
    ModulationState,
    aminus_ode_residual,
    decompose,
    modulated_eigenfunction,
    modulated_profile,
    modulation_residual,
    unstable_directions,
)
from .construction import (
    MultiSolitonProblem,
    ShootingResult,
    Trajectory,
    TubeSpec,
    backward_run,
    compute_delta_tilde,
    construct,
    final_data,
    shoot,
    solve_final_b,
)
from .diagnostics import (
    LocalizationSet,
    decay_fit,
    lyapunov,
    quadratic_H,
    remainder_control_report,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
