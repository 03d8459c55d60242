//! Khintchine-type norms for homogeneous polynomials in free-group
//! generators: matricization-based intersection/sum norms, exact even-p
//! free L_p norms via a moment oracle, operator-norm lower bounds by
//! compression to word balls, and absorption-invariance transforms.

pub mod error;
pub mod freelp;
pub mod schatten;
pub mod suites;
pub mod tensors;
pub mod words;

pub use error::{Error, Result};

pub use freelp::{FreeOperator, Group, GroupWord, KhintchineReport, TruncOptions, TruncResult};
pub use schatten::{Exponent, NormReport, SumCertificate};
pub use tensors::{Alphabet, CoeffTensor, PartitionSplit};
pub use words::{ProductWord, ReducedWord};
