"""Reduction of k-local spin Hamiltonians to 2-local form.

Pipeline: fermionic coefficient tables -> qubit Hamiltonian (Jordan-Wigner)
-> per-term locality reduction in an ancilla-enlarged register, either
through the analytic perturbative gadget or by direct numerical
optimization of the 2-local coefficients.
"""

from .errors import (
    GapCollapseError,
    LocredError,
    NonHermitianError,
    ResourceLimitError,
    StructureError,
    UnconvergedError,
)
from .fermion import (
    SecondQuantizedProblem,
    jw_map,
    jw_map_operator,
    locality_histogram,
)
from .gadgets import (
    GadgetCoefficients,
    GadgetSpec,
    build_gadget,
    delta_sweep,
    embedding_basis,
    gadget_coefficients,
    gadget_error,
    pauli_basis_of_gadget,
)
from .pauli import (
    DensityMatrix,
    HermitianOperator,
    PauliHamiltonian,
    PauliString,
    PauliTerm,
    Spectrum,
    assemble,
    eig,
    multiply,
    partial_trace,
    subspace_projector,
    to_dense,
)
from .reduction import (
    CostBreakdown,
    InitStrategy,
    LadderConfig,
    ReductionProblem,
    ReductionReport,
    StabilityReport,
    classify_branches,
    cost,
    density_validation,
    greedy_extend,
    optimize,
    reduce_ladder,
    spread,
    stability_sweep,
    two_local_pool,
)

__version__ = "0.1.0"
