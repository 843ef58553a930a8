//! Metrics, connections, curvature, densities and volume growth.

pub mod connection;
pub mod curvature;
pub mod density;
pub mod metric;
pub mod volume;

pub use connection::{Connection, ConnectionKind};
pub use curvature::{
    ricci_jets, riemann_jets, riemann_ricci, scalar_curvature, schouten, schouten_jets, ScaleAt,
};
pub use density::{density_derivative, own_coefficient, own_factor_jet, scale_density};
pub use metric::Metric;
pub use volume::{volume_asymptotics_order, VolumeOrder};
