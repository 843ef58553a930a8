use rayon::prelude::*;
use serde::Serialize;

use crate::connections::{volume_asymptotics_order, Connection, VolumeOrder};
use crate::error::{Error, Result};
use crate::fields::extrapolate::{extrapolate_ray, linear_fit, RayLimits, RayOptions};
use crate::fields::{OneForm, ScalarField};

/// `∇̂ = ∇ + dρ/(αρ)`, realized as the exact form `d(log ρ / α)`.
pub fn hat_connection(conn: &Connection, rho: &ScalarField, alpha: f64) -> Result<Connection> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::invalid(format!(
            "order alpha = {alpha} must be positive"
        )));
    }
    Ok(conn.projective_change(OneForm::exact(rho.ln().scale(1.0 / alpha))))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Compact,
    NotCompact,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct DivergentComponent {
    pub ray: usize,
    /// `(c, a, b)` of `Γ̂^c_ab`.
    pub component: [usize; 3],
    /// Log-log slope of `|Γ̂|` on the deepest window.
    pub slope: f64,
    pub r2: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompactnessReport {
    pub alpha: f64,
    pub verdict: Verdict,
    pub rays: Vec<RayLimits>,
    /// Largest residual among converged limits.
    pub worst_residual: f64,
    pub divergent: Vec<DivergentComponent>,
    pub errors: Vec<String>,
}

/// Growth exponent and fit quality required to call a component divergent.
pub const DIVERGENCE_SLOPE: f64 = -0.9;
pub const DIVERGENCE_R2: f64 = 0.999;

/// Extrapolates every `Γ̂^c_ab` along the rays above `bases` (boundary points).
pub fn check_compactness(
    conn: &Connection,
    rho: &ScalarField,
    alpha: f64,
    bases: &[Vec<f64>],
    opts: &RayOptions,
) -> Result<CompactnessReport> {
    if bases.is_empty() {
        return Err(Error::invalid("no boundary base points"));
    }
    let hat = hat_connection(conn, rho, alpha)?;
    let chart = conn.chart().clone();
    let n = conn.dim();
    let results: Vec<Result<RayLimits>> = bases
        .par_iter()
        .map(|base| extrapolate_ray(&chart, base, opts, |p| hat.christoffel(p)))
        .collect();
    let mut rays = Vec::new();
    let mut errors = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(r) => rays.push(r),
            Err(e) => errors.push(format!("ray {i}: {e}")),
        }
    }
    let mut divergent = Vec::new();
    let mut worst_residual: f64 = 0.0;
    let mut all_converged = errors.is_empty();
    for (i, ray) in rays.iter().enumerate() {
        for (k, l) in ray.limits.iter().enumerate() {
            if l.converged {
                worst_residual = worst_residual.max(l.residual);
                continue;
            }
            all_converged = false;
            if !l.divergent {
                continue;
            }
            let series = ray.series(k);
            let tail = &series[series.len().saturating_sub(opts.k)..];
            if tail.iter().any(|s| s.1 == 0.0) {
                continue;
            }
            let pts: Vec<(f64, f64)> = tail.iter().map(|s| (s.0.ln(), s.1.abs().ln())).collect();
            let (slope, r2) = linear_fit(&pts);
            if slope <= DIVERGENCE_SLOPE && r2 > DIVERGENCE_R2 {
                divergent.push(DivergentComponent {
                    ray: i,
                    component: [k / (n * n), (k / n) % n, k % n],
                    slope,
                    r2,
                });
            }
        }
    }
    let verdict = if all_converged {
        Verdict::Compact
    } else if !divergent.is_empty() {
        Verdict::NotCompact
    } else {
        Verdict::Inconclusive
    };
    Ok(CompactnessReport {
        alpha,
        verdict,
        rays,
        worst_residual,
        divergent,
        errors,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct OrderEstimate {
    pub alpha: f64,
    pub beta: f64,
    pub r2: f64,
    /// β within 1% of n+1, the growth of conformally compact metrics.
    pub conformal_signature: bool,
    pub volume: VolumeOrder,
}

/// `α = (n+2)/β` from the parallel-volume growth.
pub fn estimate_order(
    conn: &Connection,
    rho: &ScalarField,
    bases: &[Vec<f64>],
    opts: &RayOptions,
) -> Result<OrderEstimate> {
    let volume = volume_asymptotics_order(conn, rho, bases, opts)?;
    if !volume.power_law {
        return Err(Error::precondition(format!(
            "parallel volume is not a power law of rho (r2 = {})",
            volume.r2
        )));
    }
    let n = (conn.dim() - 1) as f64;
    let beta = volume.beta;
    if beta <= 0.0 {
        return Err(Error::precondition(format!(
            "volume does not blow up (beta = {beta})"
        )));
    }
    Ok(OrderEstimate {
        alpha: (n + 2.0) / beta,
        beta,
        r2: volume.r2,
        conformal_signature: ((beta - (n + 1.0)) / (n + 1.0)).abs() < 0.01,
        volume,
    })
}
