//! Boundary phase diagram of an infinite two-dimensional cluster state whose
//! bulk and lower-boundary qubits are measured along `cos θ Z + sin θ X` with
//! post-selection.
//!
//! The pipeline: the cluster-state PEPS tensor ([`model`]) is contracted with
//! the measurement, which turns every bulk row into an infinite matrix-product
//! operator `Ĥ` acting on the virtual boundary state. The boundary state after
//! many rows is the dominant eigenvector of `Ĥ`, found by repeated application
//! ([`solvers::power_fixed_point`]) or variationally
//! ([`solvers::vumps_fixed_point`]), and characterised through its
//! entanglement spectrum, transfer-matrix spectrum and correlators
//! ([`umps`]). Finite chains ([`finite`]) give the level crossing at the
//! transition, and [`oracle`] checks every construction against brute-force
//! state vectors.

extern crate blas_src;

pub mod eigs;
pub mod error;
pub mod finite;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod solvers;
pub mod tensor;
pub mod umps;

pub use eigs::{dominant_eigs, eigs, EigenPair, EigsOptions, EigsResult, Which};
pub use error::{Error, Result};
pub use finite::{gap_scan, locate_crossing, BoundaryCondition, Branch, FiniteMPS, SpectrumPair};
pub use oracle::{run_suite, OracleCheck, PureState};
pub use linalg::{svd_truncate, TruncationReport};
pub use model::{
    build_bulk_mpo, build_lower_boundary_imps, build_projector, build_site_tensor, build_upper_boundary_map,
    finite_row_matrix, BoundaryMap, MeasurementAngle, Projector, RowOperator, SiteRole, SiteTensor,
};
pub use solvers::{
    diagnostics, find_theta_c, noisy_trajectory, power_fixed_point, power_step, vumps_fixed_point,
    CriticalPointResult, Diagnostics, FixedPointResult, NoiseSpec, SolverKind, TrajectoryRecord,
};
pub use tensor::{contract, Tensor, C64};
pub use umps::{
    canonicalize, cat_decompose, correlator, entanglement_spectrum, transfer_spectrum, truncate_to, CanonicalForm,
    CatDecomposition, CorrelationSeries, Pauli, SchmidtSpectrum, TransferSpectrum, UniformMPS,
};
