//! Model geometries, curved orbits, normalization of defining functions and
//! boundary asymptotics.

pub mod asymptotics;
pub mod fundamental;
pub mod models;
pub mod normalize;
pub mod orbits;

pub use asymptotics::{
    conformal_comparison, einstein_asymptotics, ricci_flat_asymptotics, ConformalComparison,
    EinsteinAsymptotics, RicciFlatAsymptotics,
};
pub use fundamental::{second_fundamental_form, SecondFundamentalForm, SffPoint, SFF_TOL};
pub use models::{
    make_bumped_hyperbolic, make_conformal_toy, make_flat_hemisphere, make_hyperbolic, ModelKind,
    ModelMetric, Provenance,
};
pub use normalize::{normalize_defining_function, Normalization, NormalizeOptions, NormalizedNode};
pub use orbits::{
    classify_boundary_point, orbit_tensors, OrbitClass, OrbitPoint, OrbitReport, OrbitSign,
};
