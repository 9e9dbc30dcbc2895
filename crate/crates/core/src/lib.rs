//! Discrete quantum observables on finite-dimensional spaces: POVM modelling,
//! minimal Naimark dilations, optimality certificates (rank-1, informational
//! completeness, extremality, norm-1 / eigenvalue-1, pre- and post-processing
//! cleanness), classical and quantum processing, instruments, and joint /
//! sequential measurement conversions.

pub mod certify;
pub mod dilation;
pub mod error;
pub mod generate;
pub mod instrument;
pub mod numerics;
pub mod observable;
pub mod process;
pub mod schema;

pub use error::{Error, Result};
pub use numerics::{ComplexMatrix, Tolerances};
pub use observable::{DiscretePovm, State};
