//! Exact reference solutions in a truncated Fock basis.

pub mod basis;
pub mod identities;
pub mod master;
pub mod mcw;
pub mod sparse;
pub mod system;

pub use basis::{HilbertBasis, SiteLabel, DEFAULT_DIMENSION_LIMIT};
pub use identities::{verify_bosonic_identities, verify_coherent_state_identities, IdentityCheck, IdentityReport};
pub use master::{evolve_master_dense, projector, MasterDiagnostics, MasterOptions, MasterSolution, DEFAULT_DENSE_LIMIT};
pub use mcw::{mcw_trajectory, run_mcw, McwEnsemble, McwOptions, McwTrajectory};
pub use sparse::CsrMatrix;
pub use system::{build_hamiltonian, OracleSystem, SiteOperators};
