//! Spectral factorization of rank-deficient nonnegative-definite Laurent
//! polynomial matrices and completion of unit-norm polynomial rows to
//! paraunitary matrices.

pub mod error;
pub mod fullrank;
pub mod instances;
pub mod paraunitary;
pub(crate) mod linalg;
pub mod polylaurent;
pub mod rankdef;
pub mod roots;

pub use error::{Error, Result};
pub use polylaurent::{AnalyticPolyMatrix, CMatrix, ComplexScalar, LaurentMatrix, LaurentPoly};
