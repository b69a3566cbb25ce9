// Negated float comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotic;
pub mod calculus;
pub mod deriv;
pub mod error;
pub mod expr;
pub mod field;
pub mod geodesic;
pub mod grid;
pub mod interp;
pub mod poisson;
pub mod report;
pub mod spectral;
pub mod surface;
pub mod transport;

pub use error::{Error, Result};
pub use field::{ScalarField, VectorField};
pub use report::{NormKind, ResidualEntry, ResidualReport};
pub use surface::{Chart, ChartKind, SurfaceChart};
