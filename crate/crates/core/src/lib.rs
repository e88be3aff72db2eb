//! Pure-state quantum statistical mechanics on finite-dimensional systems:
//! dense linear algebra, states, random ensembles, unitary dynamics and a
//! catalog of typicality and equilibration bounds.

pub mod bounds;
pub mod dynamics;
pub mod eigen;
pub mod ensembles;
pub mod error;
pub mod hamiltonian;
pub mod linalg;
pub mod states;

pub use bounds::{
    check_bound, evaluate_bound, max_pairing, max_pairing_offdiagonal_sum, BoundContext,
    BoundReport, Estimate, Pairing, Relation, TheoremId,
};
pub use eigen::{hermitian_eig, hermitian_eigenvalues, EigenDecomposition};
pub use error::{Error, Result};
pub use hamiltonian::{gap_report, CompositeHamiltonian, GapReport, Hamiltonian};
pub use linalg::{
    commutator, partial_trace, schatten_norm, swap_operator, tensor_product,
    unitary_from_hamiltonian, ComplexMatrix, NormKind, Subsystem,
};
pub use num_complex::Complex64;
pub use states::{
    canonical_state, effective_dimension, macro_pseudo_distance, max_projector_distinguishability,
    microcanonical_state, mutual_information, purity, trace_distance, von_neumann_entropy,
    DensityMatrix, Dims, MacroObservableSet, PureState, QuantumState, Subspace,
};
