//! Boundary tensors of Ricci-flat metrics and the curved-orbit decomposition
//! of the boundary.

use rayon::prelude::*;
use serde::Serialize;

use crate::compactness::{check_compactness, Verdict};
use crate::connections::{riemann_ricci, Connection, Metric};
use crate::error::{Error, Result};
use crate::fields::extrapolate::{extrapolate_ray, RayLimits, RayOptions};
use crate::fields::{Chart, ScalarField};
use crate::linalg::{null_space, rank_signature, sym_eigenvalues};
use crate::tractor::RANK_TOL;
use nalgebra::DMatrix;

/// Absolute tolerance on Ricci components for the Ricci-flat gate.
pub const RICCI_FLAT_TOL: f64 = 1e-8;
/// Constraint tolerance relative to the largest entry of `τ^{ab}`.
pub const CONSTRAINT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OrbitClass {
    PlusMinus,
    Zero,
    /// Rank outside `{n, n−1}`.
    Inconsistent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OrbitSign {
    Plus,
    Minus,
}

#[derive(Debug, Clone, Serialize)]
pub struct OrbitPoint {
    pub coords: Vec<f64>,
    /// Boundary value of `ρ⁻²g^{ab}`, row-major.
    pub tau: Vec<f64>,
    /// Boundary value of `ρ⁻³g^{ab}ρ_b`.
    pub lambda: Vec<f64>,
    /// Boundary value of `ρ⁻⁴g^{ab}ρ_aρ_b`.
    pub nu: f64,
    pub rank: usize,
    pub class: OrbitClass,
    /// Sign of `τ` on `ker dρ` when it is definite there.
    pub sign: Option<OrbitSign>,
    /// `max|τ^{ab}ρ_b|` relative to `max|τ|`.
    pub tau_constraint: f64,
    /// `|λ^aρ_a|` relative to `max|τ|`.
    pub lambda_constraint: f64,
    pub converged: bool,
    /// Failed extrapolation, violated constraint, or inconsistent rank.
    pub flagged: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct OrbitReport {
    pub n: usize,
    pub points: Vec<OrbitPoint>,
}

impl OrbitReport {
    pub fn count(&self, class: OrbitClass) -> usize {
        self.points.iter().filter(|p| p.class == class).count()
    }
}

/// `(τ, λ, ν, dρ)` concatenated, for the ray extrapolation.
fn orbit_values(g: &Metric, rho: &ScalarField, p: &[f64]) -> Result<Vec<f64>> {
    let d = g.dim();
    let inv = g.inverse(p)?;
    let r = rho.jet(p, 1)?;
    let (rv, dr) = (r.value(), r.gradient());
    let mut out: Vec<f64> = inv.iter().map(|x| x / (rv * rv)).collect();
    let mut nu = 0.0;
    for a in 0..d {
        let s: f64 = (0..d).map(|b| inv[a * d + b] * dr[b]).sum();
        out.push(s / rv.powi(3));
        nu += s * dr[a];
    }
    out.push(nu / rv.powi(4));
    out.extend_from_slice(dr);
    Ok(out)
}

/// Class by the rank of `τ^{ab}` on the boundary, with the sign of `τ` on
/// `ker dρ` when definite.
pub fn classify_boundary_point(
    n: usize,
    tau: &[f64],
    drho: &[f64],
) -> (usize, OrbitClass, Option<OrbitSign>) {
    let d = n + 1;
    let (rank, _) = rank_signature(d, tau, RANK_TOL);
    let class = if rank == n {
        OrbitClass::PlusMinus
    } else if rank + 1 == n {
        OrbitClass::Zero
    } else {
        OrbitClass::Inconsistent
    };
    let sign = if class == OrbitClass::PlusMinus {
        let basis = null_space(&DMatrix::from_row_slice(1, d, drho), 1e-12);
        let k = basis.len();
        let m = DMatrix::from_row_slice(d, d, tau);
        let mut restricted = vec![0.0; k * k];
        for i in 0..k {
            for j in 0..k {
                restricted[i * k + j] = (basis[i].transpose() * &m * &basis[j])[(0, 0)];
            }
        }
        let ev = sym_eigenvalues(k, &restricted);
        let big = ev.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        if ev.iter().all(|x| *x > RANK_TOL * big) {
            Some(OrbitSign::Plus)
        } else if ev.iter().all(|x| *x < -RANK_TOL * big) {
            Some(OrbitSign::Minus)
        } else {
            None
        }
    } else {
        None
    };
    (rank, class, sign)
}

fn orbit_point(n: usize, base: &[f64], limits: &RayLimits) -> OrbitPoint {
    let d = n + 1;
    let lim = limits.limit_values();
    let tau = lim[..d * d].to_vec();
    let lambda = lim[d * d..d * d + d].to_vec();
    let nu = lim[d * d + d];
    let drho = &lim[d * d + d + 1..];
    let scale = tau
        .iter()
        .fold(0.0f64, |a, x| a.max(x.abs()))
        .max(f64::MIN_POSITIVE);
    let tau_constraint = (0..d)
        .map(|a| (0..d).map(|b| tau[a * d + b] * drho[b]).sum::<f64>().abs())
        .fold(0.0, f64::max)
        / scale;
    let lambda_constraint = (0..d).map(|a| lambda[a] * drho[a]).sum::<f64>().abs() / scale;
    let (rank, class, sign) = classify_boundary_point(n, &tau, drho);
    let converged = limits.all_converged();
    OrbitPoint {
        coords: base.to_vec(),
        flagged: !converged
            || tau_constraint > CONSTRAINT_TOL
            || lambda_constraint > CONSTRAINT_TOL
            || class == OrbitClass::Inconsistent,
        tau,
        lambda,
        nu,
        rank,
        class,
        sign,
        tau_constraint,
        lambda_constraint,
        converged,
    }
}

/// Interior probe points a third of the way up the boundary coordinate.
fn probes(chart: &Chart, bases: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let b = chart.require_boundary()?;
    let (lo, hi) = chart.domain()[b];
    Ok(bases
        .iter()
        .take(4)
        .map(|p| {
            let mut q = p.clone();
            q[b] = lo + 0.3 * (hi - lo);
            q
        })
        .collect())
}

pub(crate) fn require_ricci_flat(conn: &Connection, pts: &[Vec<f64>]) -> Result<()> {
    for p in pts {
        let (_, ric) = riemann_ricci(conn, p)?;
        let worst = ric.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        if worst > RICCI_FLAT_TOL {
            return Err(Error::precondition(format!(
                "metric is not Ricci flat: |Ric| = {worst:e} at {p:?}"
            )));
        }
    }
    Ok(())
}

/// Extrapolates `ρ⁻²g^{ab}`, `ρ⁻³g^{ab}ρ_b` and `ρ⁻⁴g^{ab}ρ_aρ_b` to the
/// boundary points `bases` and classifies each point.
pub fn orbit_tensors(
    g: &Metric,
    rho: &ScalarField,
    bases: &[Vec<f64>],
    opts: &RayOptions,
) -> Result<OrbitReport> {
    if bases.is_empty() {
        return Err(Error::invalid("no boundary base points"));
    }
    let chart = g.chart();
    let conn = Connection::levi_civita(g);
    require_ricci_flat(&conn, &probes(chart, bases)?)?;
    let sample: Vec<Vec<f64>> = bases
        .iter()
        .step_by((bases.len() / 3).max(1))
        .cloned()
        .collect();
    let report = check_compactness(&conn, rho, 1.0, &sample, opts)?;
    if report.verdict != Verdict::Compact {
        return Err(Error::precondition(format!(
            "metric is not projectively compact of order 1 ({:?})",
            report.verdict
        )));
    }
    let n = g.dim() - 1;
    let points = bases
        .par_iter()
        .map(|base| {
            let limits = extrapolate_ray(chart, base, opts, |p| orbit_values(g, rho, p))?;
            Ok(orbit_point(n, base, &limits))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OrbitReport { n, points })
}
