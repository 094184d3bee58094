"""Stochastic coadjoint motion driven through momentum maps.

Lie algebra arithmetic from structure constants, action charts with
cotangent-lift momentum maps, reproducible Brownian grids, Stratonovich and
Ito integrators for the phase-space / mixed / collective dynamics, the
process generator with its Kolmogorov solvers, and diagnostics for the
conservation and convergence properties the equations promise.
"""

from .algebra import (
    LieAlgebraSpec,
    abelian,
    ad_star,
    bracket,
    builtin,
    jacobi_residual,
    load_algebra_json,
)
from .actions import (
    ActionChart,
    PhaseState,
    action_field,
    builtin_chart,
    canonical_poisson,
    equivariance_residual,
    hamiltonian_vector_field,
    momentum_map,
    register_chart,
)
from .diagnostics import DriftSeries, empirical_order, observable_series, strong_error
from .dynamics import (
    Potential,
    QuadraticLagrangian,
    ReducedHamiltonian,
    casimir,
    hamel_system,
    ito_correction_phase,
    legendre,
    lie_poisson_system,
    linear_potential,
    momentum_pairing_field,
    phase_space_system,
    quadratic_potential,
    reconstruct_momentum,
    zero_potential,
)
from .fields import (
    CanonicalBracket,
    HamelBracket,
    LiePoissonBracket,
    ScalarField,
    double_bracket,
)
from .integrators import (
    IntegrationDiverged,
    SdeSystem,
    Trajectory,
    euler_ito_step,
    heun_stratonovich_step,
    integrate,
    rk4_step,
    write_trajectory_csv,
)
from .kolmogorov import (
    DensityGrid,
    GeneratorSpec,
    GridGeometry,
    adjoint_apply,
    backward_solve,
    forward_solve,
    generator_apply,
    hamel_generator,
    lie_poisson_generator,
    mc_expectation,
)
from .noise import (
    BrownianGrid,
    NoiseSpec,
    coarsen,
    read_grid,
    sample_grid,
    time_grid,
    write_grid,
)

__version__ = "0.1.0"
