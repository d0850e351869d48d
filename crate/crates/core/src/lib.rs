//! Post-selection inference (POSI) confidence intervals that stay valid
//! whatever model selection procedure picked the working model.
//!
//! The crate covers homoskedastic and heteroskedastic linear models and
//! binary regression with logit, probit, cloglog and loglog links, the
//! critical values K₁₋α(Γ) and B_α(q, N), the selection procedures used in
//! the coverage studies, and a simulation harness for those studies.

pub mod binreg;
pub mod ci;
pub mod constants;
pub mod design;
pub mod error;
pub mod hetlm;
pub mod linalg;
pub mod lm;
pub mod selectors;
pub mod sim;
pub mod special;

pub use ci::{assemble_generic_ci, ConfidenceSet, ConstantKind, Interval};
pub use constants::{b_alpha, k_quantile, upper_bound_k, ConstantMethod, CorrelationMatrix, PosiConstant};
pub use design::{enumerate_subsets, read_response_csv, CandidateModel, CandidateSet, DesignMatrix};
pub use error::{PosiError, Result};
