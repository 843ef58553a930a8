//! Asymptotic form of Ricci-flat and Einstein metrics near the boundary.

use serde::Serialize;

use super::orbits::require_ricci_flat;
use crate::compactness::{build_asymptotic_metric, decompose_metric, Decomposition};
use crate::connections::{riemann_ricci, scalar_curvature, Connection, Metric};
use crate::error::{Error, Result};
use crate::fields::extrapolate::RayOptions;
use crate::fields::{Chart, ScalarField};

/// Tolerance of the Einstein check, relative to `max(1, |R|)`.
pub const EINSTEIN_TOL: f64 = 1e-8;
/// `|R|` below this is treated as Ricci flat.
pub const RICCI_FLAT_SCALAR: f64 = 1e-8;

#[derive(Debug, Clone, Serialize)]
pub struct RicciFlatAsymptotics {
    pub decomposition: Decomposition,
    /// Largest `|g − g_rebuilt|` relative to `max|g|` at the probe points.
    pub round_trip_error: f64,
    /// Largest `|h_ab g^{bc}ρ_c|` relative to `ρ²|dρ|`.
    pub orthogonality: f64,
    #[serde(skip)]
    pub c: ScalarField,
}

#[derive(Debug, Clone, Serialize)]
pub struct EinsteinAsymptotics {
    pub scalar_curvature: f64,
    /// `−n(n+1)/(4R)`.
    pub c: f64,
    /// Largest `|Ric − R g/(n+1)|` relative to `max(1, |R|)`.
    pub einstein_defect: f64,
    pub decomposition: Decomposition,
}

/// Interior probe points at a few depths and tangential positions.
fn probes(chart: &Chart) -> Result<Vec<Vec<f64>>> {
    let b = chart.require_boundary()?;
    let mut out = Vec::new();
    for depth in [0.05, 0.2, 0.5] {
        for f in [0.3, 0.5, 0.65] {
            out.push(
                chart
                    .domain()
                    .iter()
                    .enumerate()
                    .map(|(i, (lo, hi))| {
                        if i == b {
                            lo + depth * (hi - lo)
                        } else {
                            lo + f * (hi - lo)
                        }
                    })
                    .collect(),
            );
        }
    }
    Ok(out)
}

/// `C = ρ⁴/(g^{ab}ρ_aρ_b) = 1/ν` as a derived field.
fn inverse_nu(g: &Metric, rho: &ScalarField) -> ScalarField {
    let (g, rho) = (g.clone(), rho.clone());
    ScalarField::derived("1/nu", move |p, order| {
        let d = g.dim();
        let inv = g.inverse_jets(p, order)?;
        let r = rho.jet(p, order + 1)?;
        let dr: Vec<_> = (0..d).map(|a| r.partial(a)).collect();
        let mut s = &inv[0] * &(&dr[0] * &dr[0]);
        for a in 0..d {
            for b in 0..d {
                if a + b > 0 {
                    s = &s + &(&inv[a * d + b] * &(&dr[a] * &dr[b]));
                }
            }
        }
        if s.value() == 0.0 {
            return Err(Error::Degenerate {
                what: "g^{ab} rho_a rho_b".into(),
                point: p.to_vec(),
            });
        }
        Ok(&r.truncate(order).powi(4) * &s.recip())
    })
}

/// `h = ρ²g − C dρ⊙dρ/ρ²` with `C = 1/ν` for a normalized defining function
/// of a Ricci-flat metric, extended to the boundary above `bases`.
pub fn ricci_flat_asymptotics(
    g: &Metric,
    rho_tilde: &ScalarField,
    bases: &[Vec<f64>],
    opts: &RayOptions,
) -> Result<RicciFlatAsymptotics> {
    let chart = g.chart().clone();
    let pts = probes(&chart)?;
    require_ricci_flat(&Connection::levi_civita(g), &pts)?;
    let c = inverse_nu(g, rho_tilde);
    let decomposition = decompose_metric(g, rho_tilde, 1.0, &c, bases, opts)?;
    if !decomposition.converged {
        return Err(Error::Extrapolation(
            "h does not extend to the boundary".into(),
        ));
    }
    let rebuilt = build_asymptotic_metric(&decomposition.h, &c, rho_tilde, 1.0)?;
    let d = chart.dim();
    let mut round_trip_error: f64 = 0.0;
    let mut orthogonality: f64 = 0.0;
    for p in &pts {
        let gv = g.values(p)?;
        let rv = rebuilt.values(p)?;
        let scale = gv.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        let err = gv
            .iter()
            .zip(&rv)
            .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        round_trip_error = round_trip_error.max(err / scale);
        let h = decomposition.h.values(p)?;
        let inv = g.inverse(p)?;
        let r = rho_tilde.jet(p, 1)?;
        let dr = r.gradient();
        let up: Vec<f64> = (0..d)
            .map(|b| (0..d).map(|c| inv[b * d + c] * dr[c]).sum())
            .collect();
        let norm = dr.iter().fold(0.0f64, |a, x| a.max(x.abs())) * r.value().powi(2);
        for a in 0..d {
            let v: f64 = (0..d).map(|b| h[a * d + b] * up[b]).sum();
            orthogonality = orthogonality.max(v.abs() / norm);
        }
    }
    Ok(RicciFlatAsymptotics {
        decomposition,
        round_trip_error,
        orthogonality,
        c,
    })
}

/// Order-2 asymptotics of an Einstein metric with `R ≠ 0`:
/// `h = ρg − C dρ⊙dρ/ρ` with `C = −n(n+1)/(4R)`.
pub fn einstein_asymptotics(
    g: &Metric,
    rho: &ScalarField,
    bases: &[Vec<f64>],
    opts: &RayOptions,
) -> Result<EinsteinAsymptotics> {
    let chart = g.chart().clone();
    let d = chart.dim();
    let n = (d - 1) as f64;
    let pts = probes(&chart)?;
    let conn = Connection::levi_civita(g);
    let rs = pts
        .iter()
        .map(|p| scalar_curvature(g, p))
        .collect::<Result<Vec<_>>>()?;
    let r = rs[0];
    if r.abs() < RICCI_FLAT_SCALAR {
        return Err(Error::precondition(
            "scalar curvature vanishes; use the Ricci-flat asymptotics instead",
        ));
    }
    let scale = r.abs().max(1.0);
    let mut defect = rs.iter().fold(0.0f64, |a, x| a.max((x - r).abs())) / scale;
    for p in &pts {
        let (_, ric) = riemann_ricci(&conn, p)?;
        let gv = g.values(p)?;
        for (x, y) in ric.iter().zip(&gv) {
            defect = defect.max((x - r / (n + 1.0) * y).abs() / scale);
        }
    }
    if defect > EINSTEIN_TOL {
        return Err(Error::precondition(format!(
            "metric is not Einstein (defect {defect:e})"
        )));
    }
    let c = -n * (n + 1.0) / (4.0 * r);
    let decomposition = decompose_metric(g, rho, 2.0, &ScalarField::constant(c), bases, opts)?;
    Ok(EinsteinAsymptotics {
        scalar_curvature: r,
        c,
        einstein_defect: defect,
        decomposition,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ConformalComparison {
    /// Ratio `h₂/h₁` on boundary-tangent directions, per ray.
    pub ratios: Vec<f64>,
    /// Largest deviation from a pointwise multiple, relative to `max|h₂|`.
    pub max_defect: f64,
}

/// Whether two decompositions over the same bases have pointwise proportional
/// boundary `h` on the tangent space of the boundary.
pub fn conformal_comparison(
    first: &Decomposition,
    second: &Decomposition,
) -> Result<ConformalComparison> {
    if first.rays.len() != second.rays.len() {
        return Err(Error::shape(
            "decompositions have different numbers of rays",
        ));
    }
    let mut ratios = Vec::with_capacity(first.rays.len());
    let mut max_defect: f64 = 0.0;
    for (a, b) in first.rays.iter().zip(&second.rays) {
        let d = (a.h_boundary.len() as f64).sqrt() as usize;
        let basis = &a.tangent_basis;
        let k = basis.len();
        let restrict = |h: &[f64]| -> Vec<f64> {
            let mut out = vec![0.0; k * k];
            for i in 0..k {
                for j in 0..k {
                    out[i * k + j] = (0..d)
                        .flat_map(|x| (0..d).map(move |y| (x, y)))
                        .map(|(x, y)| basis[i][x] * h[x * d + y] * basis[j][y])
                        .sum();
                }
            }
            out
        };
        let (h1, h2) = (restrict(&a.h_boundary), restrict(&b.h_boundary));
        let num: f64 = h1.iter().zip(&h2).map(|(x, y)| x * y).sum();
        let den: f64 = h1.iter().map(|x| x * x).sum();
        if den == 0.0 {
            return Err(Error::Degenerate {
                what: "boundary h".into(),
                point: a.base.clone(),
            });
        }
        let ratio = num / den;
        let scale = h2
            .iter()
            .fold(0.0f64, |m, x| m.max(x.abs()))
            .max(f64::MIN_POSITIVE);
        let defect = h1
            .iter()
            .zip(&h2)
            .fold(0.0f64, |m, (x, y)| m.max((y - ratio * x).abs()));
        max_defect = max_defect.max(defect / scale);
        ratios.push(ratio);
    }
    Ok(ConformalComparison { ratios, max_defect })
}
