//! Tractor connections, splitting operators, BGG residuals and normality.

use rayon::prelude::*;
use serde::Serialize;

use super::slots::{
    matrix_rank_signature_floor, max_abs, Cotractor, FormRank, S2Cotractor, S2Form, S2Tractor,
    S2TractorForm, StdForm,
};
use crate::connections::{scalar_curvature, scale_density, Connection, Metric, ScaleAt};
use crate::error::{Error, Result};
use crate::fields::jet::Jet;
use crate::fields::ScalarField;

fn values(js: &[Jet]) -> Vec<f64> {
    js.iter().map(Jet::value).collect()
}

/// `∇^{T*}_a(σ, μ_b) = (∇_aσ − μ_a, ∇_aμ_b + P_abσ)`.
pub fn tractor_derivative(at: &ScaleAt, s: &Cotractor) -> Result<StdForm> {
    let n = at.dim;
    let p = at.schouten()?;
    let ds = at.covariant(std::slice::from_ref(&s.sigma), 0, 0, 1.0);
    let dm = at.covariant(&s.mu, 0, 1, 1.0);
    let sigma = s.sigma.value();
    Ok(StdForm {
        degree: 1,
        dim: n,
        top: (0..n).map(|a| ds[a].value() - s.mu[a].value()).collect(),
        bottom: (0..n * n)
            .map(|k| dm[k].value() + p[k].value() * sigma)
            .collect(),
    })
}

/// `∇^{S²T*}_a(τ, ν_b, ρ_bc) = (∇_aτ − 2ν_a, ∇_aν_b + P_abτ − ρ_ab,
/// ∇_aρ_bc + P_abν_c + P_acν_b)`.
pub fn s2_tractor_derivative(at: &ScaleAt, s: &S2Cotractor) -> Result<S2Form> {
    let n = at.dim;
    let p = values(at.schouten()?);
    let dt = values(&at.covariant(std::slice::from_ref(&s.tau), 0, 0, 2.0));
    let dn = values(&at.covariant(&s.nu, 0, 1, 2.0));
    let dr = values(&at.covariant(&s.rho, 0, 2, 2.0));
    let (tau, nu, rho) = (s.tau.value(), values(&s.nu), values(&s.rho));
    let mut bottom = dr;
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                bottom[(a * n + b) * n + c] += p[a * n + b] * nu[c] + p[a * n + c] * nu[b];
            }
        }
    }
    Ok(S2Form {
        degree: 1,
        dim: n,
        top: (0..n).map(|a| dt[a] - 2.0 * nu[a]).collect(),
        middle: (0..n * n).map(|k| dn[k] + p[k] * tau - rho[k]).collect(),
        bottom,
    })
}

/// The dual connection on `S²T`:
/// `(∇_aτ^{bc} + δ^b_aλ^c + δ^c_aλ^b, ∇_aλ^b + δ^b_aν − P_acτ^{cb}, ∇_aν − 2P_abλ^b)`.
pub fn s2_dual_tractor_derivative(at: &ScaleAt, s: &S2Tractor) -> Result<S2TractorForm> {
    let n = at.dim;
    let p = values(at.schouten()?);
    let mut top = values(&at.covariant(&s.tau, 2, 0, -2.0));
    let mut middle = values(&at.covariant(&s.lambda, 1, 0, -2.0));
    let mut bottom = values(&at.covariant(std::slice::from_ref(&s.nu), 0, 0, -2.0));
    let (tau, lambda, nu) = (values(&s.tau), values(&s.lambda), s.nu.value());
    for a in 0..n {
        for b in 0..n {
            top[(a * n + a) * n + b] += lambda[b];
            top[(a * n + b) * n + a] += lambda[b];
            for c in 0..n {
                middle[a * n + b] -= p[a * n + c] * tau[c * n + b];
            }
            bottom[a] -= 2.0 * p[a * n + b] * lambda[b];
        }
        middle[a * n + a] += nu;
    }
    Ok(S2TractorForm {
        dim: n,
        top,
        middle,
        bottom,
    })
}

/// `L(σ) = (σ, ∇_aσ)` for a weight-1 density.
pub fn split_e1(at: &ScaleAt, sigma: &Jet) -> Cotractor {
    let mu = at.covariant(std::slice::from_ref(sigma), 0, 0, 1.0);
    let o = mu.iter().map(Jet::order).min().unwrap_or(0);
    Cotractor {
        sigma: sigma.truncate(o),
        mu,
    }
}

/// `L(τ) = (τ, ½∇_aτ, ½∇_(a∇_b)τ + P_(ab)τ)` for a weight-2 density.
pub fn split_e2(at: &ScaleAt, tau: &Jet) -> Result<S2Cotractor> {
    let n = at.dim;
    let p = at.schouten()?;
    let d1 = at.covariant(std::slice::from_ref(tau), 0, 0, 2.0);
    let d2 = at.covariant(&d1, 0, 1, 2.0);
    let o = d2.iter().chain(p).map(Jet::order).min().unwrap_or(0);
    let rho = (0..n * n)
        .map(|k| {
            let (a, b) = (k / n, k % n);
            let dd = (&d2[k] + &d2[b * n + a]).scale(0.25);
            let pp = (&p[k] + &p[b * n + a]).scale(0.5);
            (&dd + &(&pp * tau)).truncate(o)
        })
        .collect();
    Ok(S2Cotractor {
        tau: tau.truncate(o),
        nu: d1.iter().map(|j| j.scale(0.5).truncate(o)).collect(),
        rho,
    })
}

/// Multiple of machine epsilon applied to the summand scale of `L(τ)`.
pub const ROUNDOFF_FACTOR: f64 = 64.0;

/// Rank and signature of `L(τ)`. Eigenvalues below the roundoff of the
/// summands `∂∂τ`, `Γ∂τ`, `ΓΓτ`, `∂Γτ` and `Pτ` are discarded as well as
/// those below `RANK_TOL` of the largest: near the boundary these terms cancel
/// to far below their own size.
pub fn split_e2_rank_signature(at: &ScaleAt, tau: &Jet) -> Result<FormRank> {
    let l = split_e2(at, tau)?;
    let n = at.dim;
    let big = |it: &mut dyn Iterator<Item = f64>| it.fold(0.0f64, |a, x| a.max(x.abs()));
    let g = big(&mut at.gamma.iter().map(Jet::value));
    let dg = if at.order >= 1 {
        big(&mut at.gamma.iter().flat_map(|j| j.gradient().to_vec()))
    } else {
        0.0
    };
    let p = big(&mut at.schouten()?.iter().map(Jet::value));
    let t0 = tau.value().abs();
    let t1 = if tau.order() >= 1 {
        big(&mut tau.gradient().iter().copied())
    } else {
        0.0
    };
    let t2 = if tau.order() >= 2 {
        big(&mut tau.hessian().iter().copied())
    } else {
        0.0
    };
    let nf = n as f64;
    let scale = t2 + nf * g * t1 + nf * nf * (g * g + dg) * t0 + p * t0;
    Ok(matrix_rank_signature_floor(
        &l.matrix(),
        ROUNDOFF_FACTOR * f64::EPSILON * scale,
    ))
}

/// `∇_(a∇_b)σ + P_(ab)σ`, the first BGG operator on weight-1 densities.
pub fn bgg_residual_e1(at: &ScaleAt, sigma: &Jet) -> Result<Vec<f64>> {
    let n = at.dim;
    let d = tractor_derivative(at, &split_e1(at, sigma))?;
    Ok((0..n * n)
        .map(|k| 0.5 * (d.bottom[k] + d.bottom[(k % n) * n + k / n]))
        .collect())
}

/// Obstructions to `∇L(τ) ∈ im ∂*`.
#[derive(Debug, Clone, Serialize)]
pub struct E2Residual {
    /// Symmetric part of the middle slot.
    pub middle: Vec<f64>,
    /// Complete symmetrization of the bottom slot.
    pub bottom: Vec<f64>,
}

impl E2Residual {
    pub fn max_abs(&self) -> f64 {
        max_abs(&self.middle).max(max_abs(&self.bottom))
    }
}

/// The first BGG operator on weight-2 densities; needs `τ` to order 3 and the
/// scale to order 2.
pub fn bgg_residual_e2(at: &ScaleAt, tau: &Jet) -> Result<E2Residual> {
    let n = at.dim;
    if tau.order() < 3 || at.order < 2 {
        return Err(Error::OrderTooHigh {
            requested: 3,
            max: tau.order().min(at.order + 1),
        });
    }
    let d = s2_tractor_derivative(at, &split_e2(at, tau)?)?;
    let middle = (0..n * n)
        .map(|k| 0.5 * (d.middle[k] + d.middle[(k % n) * n + k / n]))
        .collect();
    let mut bottom = vec![0.0; n * n * n];
    let i = |x: usize, y: usize, z: usize| d.bottom[(x * n + y) * n + z];
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                bottom[(a * n + b) * n + c] =
                    (i(a, b, c) + i(a, c, b) + i(b, a, c) + i(b, c, a) + i(c, a, b) + i(c, b, a))
                        / 6.0;
            }
        }
    }
    Ok(E2Residual { middle, bottom })
}

/// `(σ⁻²g^{ab}, 0, 0)` in the Levi-Civita splitting of a scalar-flat metric,
/// `σ` the Levi-Civita scale.
pub fn metricity_section(g: &Metric, point: &[f64], order: usize) -> Result<S2Tractor> {
    let r = scalar_curvature(g, point)?;
    if r.abs() > SCALAR_FLAT_TOL {
        return Err(Error::precondition(format!(
            "metricity splitting needs a scalar-flat metric, R = {r:e} at {point:?}"
        )));
    }
    let n = g.dim();
    let lc = Connection::levi_civita(g);
    let sigma = scale_density(&lc, 1.0)?.jet(point, order)?;
    let s2 = (&sigma * &sigma).recip();
    let inv = g.inverse_jets(point, order)?;
    Ok(S2Tractor {
        tau: inv.iter().map(|x| x * &s2).collect(),
        lambda: vec![Jet::constant(n, order, 0.0); n],
        nu: Jet::constant(n, order, 0.0),
    })
}

pub const SCALAR_FLAT_TOL: f64 = 1e-8;
/// Normality threshold on slot coefficients.
pub const NORMAL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SectionKind {
    /// `L(σ)` for a weight-1 density.
    E1,
    /// `L(τ)` for a weight-2 density.
    E2,
    /// The metricity section of the Levi-Civita metric.
    Metricity,
}

#[derive(Debug, Clone, Serialize)]
pub struct Normality {
    pub kind: SectionKind,
    pub normal: bool,
    /// Largest slot of the full tractor derivative over the sampled points.
    pub max_derivative: f64,
    pub points: usize,
}

/// Whether the tractor section determined by `field` is parallel at all
/// `points`. For `Metricity` the field is ignored and `conn` must be
/// Levi-Civita.
pub fn is_normal(
    conn: &Connection,
    kind: SectionKind,
    field: &ScalarField,
    points: &[Vec<f64>],
) -> Result<Normality> {
    conn.require_special("normality")?;
    let worst = points
        .par_iter()
        .map(|p| -> Result<f64> {
            match kind {
                SectionKind::E1 => {
                    let at = ScaleAt::new(conn, p, 1)?;
                    Ok(tractor_derivative(&at, &split_e1(&at, &field.jet(p, 2)?))?.max_abs())
                }
                SectionKind::E2 => {
                    let at = ScaleAt::new(conn, p, 2)?;
                    let s = split_e2(&at, &field.jet(p, 3)?)?;
                    Ok(s2_tractor_derivative(&at, &s)?.max_abs())
                }
                SectionKind::Metricity => {
                    let g = conn.metric().ok_or_else(|| {
                        Error::precondition("metricity needs a Levi-Civita connection")
                    })?;
                    let at = ScaleAt::new(conn, p, 1)?;
                    Ok(s2_dual_tractor_derivative(&at, &metricity_section(g, p, 1)?)?.max_abs())
                }
            }
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok(Normality {
        kind,
        normal: worst < NORMAL_TOL,
        max_derivative: worst,
        points: points.len(),
    })
}
