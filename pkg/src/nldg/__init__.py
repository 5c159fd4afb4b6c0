"""Discontinuous Galerkin solver for the 1D periodic nonlocal wave equation.

The equation  u_tt + L_delta u = f  couples each point to a horizon of
radius delta through a radial power-law kernel.  An auxiliary
difference-quotient field reduces the problem to a first-order-in-space
system; its elimination yields  M u'' + S u = F  with a constant symmetric
positive semidefinite stiffness S, integrated in time by an
energy-conserving Crank-Nicolson scheme.
"""

from .assembly import (
    OperatorMatrix,
    SchemeVariant,
    SQuadConfig,
    dense_stiffness_oracle,
    dump_matrix,
    ldg_stiffness,
    shift_matrix_H,
    shift_matrix_K,
    stiffness_matrix,
)
from .cn import CnState, EnergySample, cn_step, discrete_energy, init_state, solve_to
from .quadrature import (
    KernelSpec,
    QuadRule,
    forcing_coefficient,
    gauss_jacobi_weighted,
    gauss_legendre,
    gauss_lobatto,
    kernel_moment,
    make_kernel,
)
from .space import (
    DgSpace,
    FieldCoeffs,
    MassOperator,
    basis_moments,
    eval_field,
    l2_error,
    l2_project,
    linf_error,
    make_space,
)
from .studies import (
    DeltaSpec,
    ErrorTable,
    StudyConfig,
    manufactured_forcing,
    observed_orders,
    run_convergence,
    run_delta_limit,
    run_energy,
)

__version__ = "0.1.0"
