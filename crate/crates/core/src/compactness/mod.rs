//! Projective compactness of order α: the checker, order estimation, and the
//! asymptotic form `g = h/ρ^{2/α} + C dρ⊙dρ/ρ^{4/α}`.

mod asymptotic;
mod check;

pub use asymptotic::{build_asymptotic_metric, decompose_metric, Decomposition, DecompositionRay};
pub use check::{
    check_compactness, estimate_order, hat_connection, CompactnessReport, DivergentComponent,
    OrderEstimate, Verdict, DIVERGENCE_R2, DIVERGENCE_SLOPE,
};
