//! Local passivity of bipartite quantum states: the passivity operator, its
//! spectral test, the extraction SDP, analytic sufficient conditions and
//! temperature scans over Hamiltonian families.

pub mod bounds;
pub mod classical;
pub mod config;
pub mod error;
pub mod models;
pub mod operators;
pub mod passivity;
pub mod random;
pub mod scan;
pub mod sdp;

pub use bounds::{spectral_data, threshold_population, threshold_temperature_bound, SpectralData};
pub use classical::{solve_classical, ClassicalInstance, ClassicalResult};
pub use config::Tolerances;
pub use error::{Error, Result};
pub use operators::{BipartiteSpace, CMatrix, CVector, DensityMatrix, HermitianOperator, Subsystem, C64};
pub use passivity::{build_c_operator, check_theorem1, extraction_bound, COperator, PassivityReport};
pub use sdp::{apply_choi, solve_extraction, verify_certificate, ChoiMatrix, SdpSolution};
pub use scan::{sweep, threshold_temperature, ScanResult, ThermalFamily};
