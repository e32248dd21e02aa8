"""Hybrid classical-quantum dynamics in the Koopman picture.

Classical densities on a phase-space grid become wavefunctions evolved by a
Hermitian Liouvillian; hybrid states are families of quantum density
matrices over the grid, lifted to density matrices on the product space and
evolved by admissible hybrid Hamiltonians.
"""

from ._kernels import BACKEND
from .classical_koopman import (
    KoopmanLiouvillian,
    build_liouvillian,
    check_multiplicative,
    classical_gns_dm,
    koopman_propagate,
    momentum_operator,
    represent_multiplicative,
)
from .dynamics import (
    HybridHamiltonian,
    LinearGenerator,
    back_reaction_probe,
    build_hybrid_hamiltonian,
    canonical_stationarity,
    check_algebra_preservation,
    evolve_observable,
    evolve_state,
    validate_linear_generator,
)
from .errors import HybridKoopmanError
from .hybrid_algebra import (
    HybridDensityMatrix,
    HybridOperator,
    HybridState,
    classical_marginal,
    entropy_equivalence_report,
    hybrid_entropy,
    hybrid_expectation,
    hybrid_involution,
    hybrid_product,
    lift_block_diagonal,
    lift_coherent,
    maxent_canonical_state,
    partial_trace_power,
    quantum_marginal,
)
from .phase_space import (
    ClassicalDensity,
    PhaseSpaceGrid,
    build_grid,
    hamiltonian_field,
    liouville_oracle,
)
from .quantum import purity, validate_density_matrix, von_neumann_entropy

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ClassicalDensity",
    "HybridDensityMatrix",
    "HybridHamiltonian",
    "HybridKoopmanError",
    "HybridOperator",
    "HybridState",
    "KoopmanLiouvillian",
    "LinearGenerator",
    "PhaseSpaceGrid",
    "back_reaction_probe",
    "build_grid",
    "build_hybrid_hamiltonian",
    "build_liouvillian",
    "canonical_stationarity",
    "check_algebra_preservation",
    "check_multiplicative",
    "classical_gns_dm",
    "classical_marginal",
    "entropy_equivalence_report",
    "evolve_observable",
    "evolve_state",
    "hamiltonian_field",
    "hybrid_entropy",
    "hybrid_expectation",
    "hybrid_involution",
    "hybrid_product",
    "koopman_propagate",
    "lift_block_diagonal",
    "lift_coherent",
    "liouville_oracle",
    "maxent_canonical_state",
    "momentum_operator",
    "partial_trace_power",
    "purity",
    "quantum_marginal",
    "represent_multiplicative",
    "validate_density_matrix",
    "validate_linear_generator",
    "von_neumann_entropy",
]
