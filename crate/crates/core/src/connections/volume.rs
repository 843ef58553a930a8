use rayon::prelude::*;
use serde::Serialize;

use super::connection::Connection;
use crate::error::{Error, Result};
use crate::fields::extrapolate::{boundary_ray_samples, loglog_slope, RayOptions};
use crate::fields::ScalarField;

/// Power-law exponent β of the parallel volume, `ν ~ ρ^{-β}`.
#[derive(Debug, Clone, Serialize)]
pub struct VolumeOrder {
    pub beta: f64,
    /// Smallest coefficient of determination over the rays.
    pub r2: f64,
    pub power_law: bool,
    pub rays: Vec<RaySlope>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RaySlope {
    pub base: Vec<f64>,
    pub slope: f64,
    pub r2: f64,
}

pub const POWER_LAW_R2: f64 = 0.999;

/// Log-log slope of the parallel volume against the defining function `rho`,
/// averaged over rays above `bases` (boundary points).
pub fn volume_asymptotics_order(
    conn: &Connection,
    rho: &ScalarField,
    bases: &[Vec<f64>],
    opts: &RayOptions,
) -> Result<VolumeOrder> {
    conn.require_special("volume asymptotics")?;
    if bases.is_empty() {
        return Err(Error::invalid("no boundary base points"));
    }
    let chart = conn.chart();
    chart.require_boundary()?;
    let nu = conn.parallel_volume().unwrap();
    let rays = bases
        .par_iter()
        .map(|base| {
            let pts = boundary_ray_samples(chart, base, opts.eps0, opts.k)?;
            let samples = pts
                .iter()
                .map(|p| Ok((rho.value(p)?, nu.value(p)?.abs())))
                .collect::<Result<Vec<_>>>()?;
            let (slope, r2) = loglog_slope(&samples)?;
            Ok(RaySlope {
                base: base.clone(),
                slope,
                r2,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let beta = -rays.iter().map(|r| r.slope).sum::<f64>() / rays.len() as f64;
    let r2 = rays.iter().map(|r| r.r2).fold(1.0, f64::min);
    Ok(VolumeOrder {
        beta,
        r2,
        power_law: r2 >= POWER_LAW_R2,
        rays,
    })
}
