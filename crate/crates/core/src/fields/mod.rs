//! Charts, expressions, jets, fields and boundary extrapolation.

pub mod chart;
pub mod expr;
pub mod extrapolate;
pub mod jet;
pub mod tensor;

pub use chart::Chart;
pub use expr::{parse_expr, Expr, Func, ParseError, Rational};
pub use extrapolate::{
    boundary_ray_samples, extrapolate, extrapolate_ray, extrapolate_with, loglog_slope,
    BoundaryLimit, ExtrapolationOptions, RayLimits, RayOptions,
};
pub use jet::Jet;
pub use tensor::{OneForm, ScalarField, Symmetry, TensorField};
