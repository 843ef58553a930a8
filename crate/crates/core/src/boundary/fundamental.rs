//! Second fundamental form of the boundary of an order-1 compactification.

use rayon::prelude::*;
use serde::Serialize;

use crate::compactness::{check_compactness, hat_connection, Verdict};
use crate::connections::{scale_density, schouten, Connection};
use crate::error::{Error, Result};
use crate::fields::extrapolate::{extrapolate_ray, RayOptions};
use crate::fields::ScalarField;
use crate::linalg::null_space;
use nalgebra::DMatrix;

/// Threshold for a totally geodesic boundary and for agreement.
pub const SFF_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Serialize)]
pub struct SffPoint {
    pub coords: Vec<f64>,
    /// Boundary value of `P_abσ` on `ker dρ`, row-major in the tangent basis.
    pub from_schouten: Vec<f64>,
    /// Boundary value of `σ̂∇̂_a dρ_b` on `ker dρ`.
    pub from_hessian: Vec<f64>,
    pub tangent_basis: Vec<Vec<f64>>,
    pub converged: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SecondFundamentalForm {
    pub points: Vec<SffPoint>,
    /// Largest `|P σ − σ̂∇̂dρ|` on tangent directions.
    pub agreement: f64,
    /// Largest entry of the form on tangent directions.
    pub max_abs: f64,
    pub totally_geodesic: bool,
    pub converged: bool,
}

/// Boundary values of `P_abσ` and `σ̂∇̂_a dρ_b` restricted to boundary-tangent
/// directions, `σ` the connection's scale and `σ̂ = σ/ρ`.
pub fn second_fundamental_form(
    conn: &Connection,
    rho: &ScalarField,
    bases: &[Vec<f64>],
    opts: &RayOptions,
) -> Result<SecondFundamentalForm> {
    if bases.is_empty() {
        return Err(Error::invalid("no boundary base points"));
    }
    let report = check_compactness(conn, rho, 1.0, bases, opts)?;
    if report.verdict != Verdict::Compact {
        return Err(Error::precondition(format!(
            "connection is not projectively compact of order 1 ({:?})",
            report.verdict
        )));
    }
    let sigma = scale_density(conn, 1.0)?;
    let hat = hat_connection(conn, rho, 1.0)?;
    let chart = conn.chart().clone();
    let d = chart.dim();
    let points = bases
        .par_iter()
        .map(|base| -> Result<SffPoint> {
            let limits = extrapolate_ray(&chart, base, opts, |p| {
                let s = sigma.value(p)?;
                let r = rho.jet(p, 2)?;
                let mut out: Vec<f64> = schouten(conn, p)?.iter().map(|x| x * s).collect();
                let gamma = hat.christoffel(p)?;
                let shat = s / r.value();
                for a in 0..d {
                    for b in 0..d {
                        let g: f64 = (0..d).map(|c| gamma[(c * d + a) * d + b] * r.d1(c)).sum();
                        out.push(shat * (r.d2(a, b) - g));
                    }
                }
                out.extend_from_slice(r.gradient());
                Ok(out)
            })?;
            let lim = limits.limit_values();
            let drho = &lim[2 * d * d..];
            let basis = null_space(&DMatrix::from_row_slice(1, d, drho), 1e-12);
            let k = basis.len();
            let restrict = |m: &[f64]| -> Vec<f64> {
                let mut out = vec![0.0; k * k];
                for i in 0..k {
                    for j in 0..k {
                        let mut s = 0.0;
                        for x in 0..d {
                            for y in 0..d {
                                s += basis[i][x] * m[x * d + y] * basis[j][y];
                            }
                        }
                        out[i * k + j] = s;
                    }
                }
                out
            };
            Ok(SffPoint {
                coords: base.clone(),
                from_schouten: restrict(&lim[..d * d]),
                from_hessian: restrict(&lim[d * d..2 * d * d]),
                tangent_basis: basis.iter().map(|v| v.iter().copied().collect()).collect(),
                converged: limits.all_converged(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let agreement = points
        .iter()
        .flat_map(|p| {
            p.from_schouten
                .iter()
                .zip(&p.from_hessian)
                .map(|(a, b)| (a - b).abs())
        })
        .fold(0.0, f64::max);
    let max_abs = points
        .iter()
        .flat_map(|p| p.from_schouten.iter().map(|x| x.abs()))
        .fold(0.0, f64::max);
    Ok(SecondFundamentalForm {
        agreement,
        max_abs,
        totally_geodesic: max_abs < SFF_TOL,
        converged: points.iter().all(|p| p.converged),
        points,
    })
}
