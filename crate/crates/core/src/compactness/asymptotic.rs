use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::connections::Metric;
use crate::error::{Error, Result};
use crate::fields::extrapolate::{extrapolate_ray, RayLimits, RayOptions};
use crate::fields::{Chart, ScalarField, Symmetry, TensorField};
use crate::linalg::{null_space, sym_eigenvalues};

/// `2/α` as a positive integer.
fn power(alpha: f64) -> Result<i32> {
    let k = 2.0 / alpha;
    if !(alpha > 0.0) || (k - k.round()).abs() > 1e-12 || k.round() < 1.0 {
        return Err(Error::precondition(format!(
            "2/alpha = {k} is not a positive integer"
        )));
    }
    Ok(k.round() as i32)
}

/// `t_ab ρ^{p} + s·C ρ_aρ_b ρ^{q}` as derived components.
fn combine(
    dim: usize,
    t: &TensorField,
    c: &ScalarField,
    rho: &ScalarField,
    p: i32,
    q: i32,
    s: f64,
    label: &str,
) -> Vec<ScalarField> {
    let mut comps = Vec::with_capacity(dim * dim);
    for a in 0..dim {
        for b in 0..dim {
            let (tab, c, rho) = (t.components()[a * dim + b].clone(), c.clone(), rho.clone());
            comps.push(ScalarField::derived(
                format!("{label}[{a}{b}]"),
                move |pt, order| {
                    let r = rho.jet(pt, order + 1)?;
                    let (ra, rb) = (r.partial(a), r.partial(b));
                    let r0 = r.truncate(order);
                    if r0.value() <= 0.0 {
                        return Err(Error::Domain {
                            subexpr: rho.label(),
                            reason: "defining function must be positive in the interior".into(),
                        });
                    }
                    let first = &tab.jet(pt, order)? * &r0.powi(p);
                    let second = (&c.jet(pt, order)? * &(&ra * &rb)) * r0.powi(q);
                    Ok(&first + &second.scale(s))
                },
            ));
        }
    }
    comps
}

/// Probe points a short distance inside the boundary.
fn probe_points(chart: &Chart) -> Result<Vec<Vec<f64>>> {
    let b = chart.require_boundary()?;
    Ok([0.3, 0.5, 0.7]
        .iter()
        .map(|f| {
            chart
                .domain()
                .iter()
                .enumerate()
                .map(|(i, (lo, hi))| {
                    if i == b {
                        0.02 * (hi - lo)
                    } else {
                        lo + f * (hi - lo)
                    }
                })
                .collect()
        })
        .collect())
}

/// Restriction of a symmetric `dim×dim` matrix to `ker ω`.
fn restrict_to_kernel(dim: usize, m: &[f64], omega: &[f64]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let w = DMatrix::from_row_slice(1, dim, omega);
    let basis = null_space(&w, 1e-12);
    let k = basis.len();
    let mat = DMatrix::from_row_slice(dim, dim, m);
    let mut out = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..k {
            out[i * k + j] = (basis[i].transpose() * &mat * &basis[j])[(0, 0)];
        }
    }
    (
        basis.iter().map(|v| v.iter().copied().collect()).collect(),
        out,
    )
}

fn nondegenerate(k: usize, m: &[f64]) -> bool {
    if k == 0 {
        return true;
    }
    let ev = sym_eigenvalues(k, m);
    let big = ev.iter().map(|x| x.abs()).fold(0.0, f64::max);
    big > 0.0 && ev.iter().all(|x| x.abs() > 1e-8 * big)
}

/// `g = h/ρ^{2/α} + C dρ⊙dρ/ρ^{4/α}` with `(dρ⊙dρ)_ab = ρ_aρ_b`.
pub fn build_asymptotic_metric(
    h: &TensorField,
    c: &ScalarField,
    rho: &ScalarField,
    alpha: f64,
) -> Result<Metric> {
    let k = power(alpha)?;
    if h.valence() != (0, 2) {
        return Err(Error::shape("h must be a (0,2) tensor"));
    }
    let chart = h.chart().clone();
    let dim = chart.dim();
    for p in probe_points(&chart)? {
        let hv = h.values(&p)?;
        let r = rho.jet(&p, 1)?;
        let (_, ht) = restrict_to_kernel(dim, &hv, r.gradient());
        if !nondegenerate(dim - 1, &ht) {
            return Err(Error::Degenerate {
                what: "h on ker d(rho)".into(),
                point: p,
            });
        }
        if c.value(&p)? == 0.0 {
            return Err(Error::invalid(format!("C vanishes at {p:?}")));
        }
    }
    let comps = combine(dim, h, c, rho, -k, -2 * k, 1.0, "g");
    let g = TensorField::new(
        chart.clone(),
        (0, 2),
        0.0,
        comps,
        vec![Symmetry::Symmetric(0, 1)],
    )?;
    let mid: Vec<f64> = chart
        .domain()
        .iter()
        .map(|(lo, hi)| lo + 0.5 * (hi - lo))
        .collect();
    let provisional = Metric::new(g.clone(), (dim, 0))?;
    let signature = provisional.signature_at(&mid)?;
    Metric::new(g, signature)
}

#[derive(Debug, Clone, Serialize)]
pub struct DecompositionRay {
    pub base: Vec<f64>,
    pub limits: RayLimits,
    /// Boundary value of `h_ab`, row-major.
    pub h_boundary: Vec<f64>,
    /// Orthonormal basis of `ker dρ` at the base point.
    pub tangent_basis: Vec<Vec<f64>>,
    /// `h` restricted to that basis.
    pub h_tangential: Vec<f64>,
    pub converged: bool,
    pub nondegenerate: bool,
    /// `ρ^{-2/α} ∂_i C` extends for every boundary coordinate field `∂_i`.
    pub c_growth_ok: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Decomposition {
    pub alpha: f64,
    #[serde(skip)]
    pub h: TensorField,
    pub rays: Vec<DecompositionRay>,
    pub converged: bool,
    pub nondegenerate: bool,
    pub c_growth_ok: bool,
}

/// `h := ρ^{2/α} g − C dρ⊙dρ/ρ^{2/α}` and its boundary values above `bases`.
pub fn decompose_metric(
    g: &Metric,
    rho: &ScalarField,
    alpha: f64,
    c: &ScalarField,
    bases: &[Vec<f64>],
    opts: &RayOptions,
) -> Result<Decomposition> {
    let k = power(alpha)?;
    let chart: Arc<Chart> = g.chart().clone();
    let b = chart.require_boundary()?;
    let dim = chart.dim();
    let comps = combine(dim, g.tensor(), c, rho, k, -k, -1.0, "h");
    let h = TensorField::new(
        chart.clone(),
        (0, 2),
        0.0,
        comps,
        vec![Symmetry::Symmetric(0, 1)],
    )?;
    let tangential: Vec<usize> = (0..dim).filter(|&i| i != b).collect();
    let rays = bases
        .par_iter()
        .map(|base| {
            let limits = extrapolate_ray(&chart, base, opts, |p| {
                let mut v = h.values(p)?;
                let r = rho.jet(p, 1)?;
                v.extend_from_slice(r.gradient());
                let cj = c.jet(p, 1)?;
                let scale = r.value().powi(-k);
                v.extend(tangential.iter().map(|&i| cj.d1(i) * scale));
                Ok(v)
            })?;
            let lim = limits.limit_values();
            let h_boundary = lim[..dim * dim].to_vec();
            let drho = &lim[dim * dim..dim * dim + dim];
            let (tangent_basis, h_tangential) = restrict_to_kernel(dim, &h_boundary, drho);
            let converged = limits.limits[..dim * dim + dim].iter().all(|l| l.converged);
            let c_growth_ok = limits.limits[dim * dim + dim..].iter().all(|l| l.converged);
            let nondeg = converged && nondegenerate(tangent_basis.len(), &h_tangential);
            Ok(DecompositionRay {
                base: base.clone(),
                limits,
                h_boundary,
                tangent_basis,
                h_tangential,
                converged,
                nondegenerate: nondeg,
                c_growth_ok,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Decomposition {
        alpha,
        h,
        converged: rays.iter().all(|r| r.converged),
        nondegenerate: rays.iter().all(|r| r.nondegenerate),
        c_growth_ok: rays.iter().all(|r| r.c_growth_ok),
        rays,
    })
}
