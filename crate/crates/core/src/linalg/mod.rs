//! Sparse matrix storage and a quasi-definite LDLᵀ factorization.

pub mod ldl;
pub mod sparse;

pub use ldl::{FactorError, LdlFactor};
pub use sparse::SparseMatrix;
