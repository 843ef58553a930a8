//! Normalization of a defining function of a Ricci-flat metric: `ρ̃ = e^fρ`
//! with the tangential part of `ρ̃⁻³g^{ab}ρ̃_b` vanishing on the boundary.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use super::orbits::require_ricci_flat;
use crate::connections::{Connection, Metric};
use crate::error::{Error, Result};
use crate::fields::extrapolate::{extrapolate_ray, fit_powers, RayOptions};
use crate::fields::jet::Jet;
use crate::fields::{Chart, ScalarField};
use crate::linalg::{lstsq, sym_eigenvalues};

/// Eigenvalue threshold, relative to the largest, for a rank-deficient `τ`.
pub const DEGENERACY_TOL: f64 = 1e-8;
/// `ν₀` below this counts as zero.
pub const NU0_MIN: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct NormalizeOptions {
    /// Total degree of the Chebyshev fit of `f`.
    pub degree: usize,
    /// Chebyshev nodes per tangential direction.
    pub nodes: usize,
    pub ray: RayOptions,
}

impl NormalizeOptions {
    /// Degree 30 on curves, 14 on higher-dimensional boundaries.
    pub fn for_chart(chart: &Chart) -> Result<Self> {
        let degree = if chart.dim() == 2 { 30 } else { 14 };
        Ok(NormalizeOptions {
            degree,
            nodes: degree + 6,
            ray: RayOptions::for_chart(chart)?,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct NormalizedNode {
    pub coords: Vec<f64>,
    /// Solution of `τ^{ij}φ_j = −λ^i`.
    pub phi: Vec<f64>,
    /// Boundary value of the tangential part of `ρ̃⁻³g^{ab}ρ̃_b`.
    pub lambda_tilde: Vec<f64>,
    pub nu0: f64,
    /// Largest deviation of the `ν₀ + ν₂ρ²` fit.
    pub nu_residual: f64,
    /// Linear coefficient of an unconstrained quadratic fit of `ν̃`.
    pub nu_linear: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Normalization {
    pub patch: Vec<(f64, f64)>,
    pub degree: usize,
    pub coefficients: Vec<f64>,
    pub nodes: Vec<NormalizedNode>,
    /// Largest misfit of `df` against `φ`, relative to `max(1, max|φ|)`.
    pub gradient_residual: f64,
    pub max_lambda_tilde: f64,
    pub max_nu_residual: f64,
    pub max_nu_linear: f64,
    /// Spread of `ν₀` over the nodes.
    pub nu0_spread: f64,
    pub nu0: f64,
    pub nu0_nonzero: bool,
    #[serde(skip)]
    pub f: ScalarField,
    #[serde(skip)]
    pub rho_tilde: ScalarField,
}

/// Multi-indices of total degree `1..=deg` in `k` variables.
fn multi_indices(k: usize, deg: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..k {
        out = out
            .into_iter()
            .flat_map(|m: Vec<usize>| {
                let used: usize = m.iter().sum();
                (0..=deg - used).map(move |e| {
                    let mut m = m.clone();
                    m.push(e);
                    m
                })
            })
            .collect();
    }
    out.retain(|m| m.iter().sum::<usize>() > 0);
    out
}

/// `T_0..T_deg` at `x`.
fn chebyshev(x: &Jet, deg: usize) -> Vec<Jet> {
    let mut t = vec![Jet::constant(x.dim(), x.order(), 1.0), x.clone()];
    for k in 1..deg {
        let next = &(x * &t[k]).scale(2.0) - &t[k - 1];
        t.push(next);
    }
    t.truncate(deg + 1);
    t
}

/// Chebyshev expansion of a function of the tangential coordinates.
#[derive(Clone)]
struct Expansion {
    tangential: Vec<usize>,
    patch: Vec<(f64, f64)>,
    basis: Vec<Vec<usize>>,
    degree: usize,
    coefficients: Vec<f64>,
    offset: f64,
}

impl Expansion {
    fn basis_jets(&self, point: &[f64], order: usize) -> Vec<Jet> {
        let dim = point.len();
        let polys: Vec<Vec<Jet>> = self
            .tangential
            .iter()
            .zip(&self.patch)
            .map(|(&i, &(lo, hi))| {
                let c = 0.5 * (lo + hi);
                let s = 2.0 / (hi - lo);
                let x = Jet::variable(dim, order, i, point[i])
                    .add_scalar(-c)
                    .scale(s);
                chebyshev(&x, self.degree)
            })
            .collect();
        self.basis
            .iter()
            .map(|m| {
                m.iter()
                    .enumerate()
                    .fold(Jet::constant(dim, order, 1.0), |acc, (k, &e)| {
                        &acc * &polys[k][e]
                    })
            })
            .collect()
    }

    fn jet(&self, point: &[f64], order: usize) -> Jet {
        let b = self.basis_jets(point, order);
        let dim = point.len();
        b.iter()
            .zip(&self.coefficients)
            .fold(Jet::constant(dim, order, -self.offset), |acc, (j, c)| {
                &acc + &j.scale(*c)
            })
    }
}

/// `(τ^{ab}, λ^a)` concatenated.
fn tau_lambda(g: &Metric, rho: &ScalarField, p: &[f64]) -> Result<Vec<f64>> {
    let d = g.dim();
    let inv = g.inverse(p)?;
    let r = rho.jet(p, 1)?;
    let (rv, dr) = (r.value(), r.gradient());
    let mut out: Vec<f64> = inv.iter().map(|x| x / (rv * rv)).collect();
    for a in 0..d {
        out.push((0..d).map(|b| inv[a * d + b] * dr[b]).sum::<f64>() / rv.powi(3));
    }
    Ok(out)
}

fn chebyshev_nodes(patch: &[(f64, f64)], m: usize) -> Vec<Vec<f64>> {
    let one: Vec<f64> = (0..m)
        .map(|i| (std::f64::consts::PI * (2 * i + 1) as f64 / (2 * m) as f64).cos())
        .collect();
    let mut out = vec![vec![]];
    for &(lo, hi) in patch {
        out = out
            .into_iter()
            .flat_map(|t: Vec<f64>| {
                one.iter().map(move |x| {
                    let mut t = t.clone();
                    t.push(0.5 * (lo + hi) + 0.5 * (hi - lo) * x);
                    t
                })
            })
            .collect();
    }
    out
}

/// Solves `τ^{ij}φ_j = −λ^i` on a Chebyshev grid over the tangential `patch`,
/// fits `f` with `df ≈ φ` and `f(center) = 0`, and returns `ρ̃ = e^fρ` with
/// its boundary diagnostics.
pub fn normalize_defining_function(
    g: &Metric,
    rho: &ScalarField,
    patch: &[(f64, f64)],
    opts: &NormalizeOptions,
) -> Result<Normalization> {
    let chart = g.chart().clone();
    let b = chart.require_boundary()?;
    let d = chart.dim();
    let n = d - 1;
    let tangential: Vec<usize> = (0..d).filter(|&i| i != b).collect();
    if patch.len() != n {
        return Err(Error::shape(format!(
            "patch has {} intervals, boundary has dimension {n}",
            patch.len()
        )));
    }
    for (&i, &(lo, hi)) in tangential.iter().zip(patch) {
        let (clo, chi) = chart.domain()[i];
        if !(lo < hi && lo >= clo && hi <= chi) {
            return Err(Error::invalid(format!(
                "patch interval [{lo}, {hi}] is not inside [{clo}, {chi}]"
            )));
        }
    }
    if opts.degree < 1 || opts.nodes <= opts.degree {
        return Err(Error::invalid(
            "need degree >= 1 and more nodes than the degree",
        ));
    }
    let conn = Connection::levi_civita(g);
    let bases: Vec<Vec<f64>> = chebyshev_nodes(patch, opts.nodes)
        .iter()
        .map(|t| chart.with_boundary_coord(t, 0.0))
        .collect::<Result<_>>()?;
    let probes: Vec<Vec<f64>> = bases
        .iter()
        .step_by((bases.len() / 3).max(1))
        .map(|p| {
            let mut q = p.clone();
            q[b] = 0.3 * chart.span(b);
            q
        })
        .collect();
    require_ricci_flat(&conn, &probes)?;

    let solved = bases
        .par_iter()
        .map(|base| -> Result<(Vec<f64>, f64)> {
            let limits = extrapolate_ray(&chart, base, &opts.ray, |p| tau_lambda(g, rho, p))?;
            if !limits.all_converged() {
                return Err(Error::Extrapolation(format!(
                    "tau or lambda does not extend at {base:?}"
                )));
            }
            let lim = limits.limit_values();
            let tt = DMatrix::from_fn(n, n, |i, j| lim[tangential[i] * d + tangential[j]]);
            let lt = DVector::from_fn(n, |i, _| -lim[d * d + tangential[i]]);
            let ev = sym_eigenvalues(n, tt.as_slice());
            let big = ev.iter().fold(0.0f64, |a, x| a.max(x.abs()));
            if ev.iter().any(|x| x.abs() <= DEGENERACY_TOL * big) {
                return Err(Error::precondition(format!(
                    "tau is rank deficient on the patch at {base:?}; the patch meets the null orbit"
                )));
            }
            let phi = tt
                .lu()
                .solve(&lt)
                .ok_or_else(|| Error::precondition(format!("tau is singular at {base:?}")))?;
            Ok((phi.iter().copied().collect(), ev.iter().product()))
        })
        .collect::<Result<Vec<_>>>()?;
    if solved.iter().any(|s| s.1 > 0.0) && solved.iter().any(|s| s.1 < 0.0) {
        return Err(Error::precondition(
            "det tau changes sign on the patch; it crosses the null orbit",
        ));
    }

    let mut exp = Expansion {
        tangential: tangential.clone(),
        patch: patch.to_vec(),
        basis: multi_indices(n, opts.degree),
        degree: opts.degree,
        coefficients: vec![],
        offset: 0.0,
    };
    let nb = exp.basis.len();
    let mut a = DMatrix::zeros(bases.len() * n, nb);
    let mut rhs = DVector::zeros(bases.len() * n);
    for (k, base) in bases.iter().enumerate() {
        let jets = exp.basis_jets(base, 1);
        for (r, &i) in tangential.iter().enumerate() {
            for (c, j) in jets.iter().enumerate() {
                a[(k * n + r, c)] = j.d1(i);
            }
            rhs[k * n + r] = solved[k].0[r];
        }
    }
    // Columns grow like k²; equilibrate before the solve.
    let norms: Vec<f64> = (0..nb)
        .map(|c| a.column(c).amax().max(f64::MIN_POSITIVE))
        .collect();
    let scaled = DMatrix::from_fn(a.nrows(), nb, |i, j| a[(i, j)] / norms[j]);
    let coeffs =
        lstsq(&scaled, &rhs).ok_or_else(|| Error::precondition("least-squares fit of f failed"))?;
    let coeffs = DVector::from_fn(nb, |j, _| coeffs[j] / norms[j]);
    let misfit = (&a * &coeffs - &rhs).amax();
    let phi_scale = rhs.amax().max(1.0);
    exp.coefficients = coeffs.iter().copied().collect();
    let center: Vec<f64> = chart.with_boundary_coord(
        &patch.iter().map(|(l, h)| 0.5 * (l + h)).collect::<Vec<_>>(),
        0.0,
    )?;
    exp.offset = exp.jet(&center, 0).value();

    let fe = exp.clone();
    let f = ScalarField::derived("f", move |p, order| Ok(fe.jet(p, order)));
    let rho_tilde = rho.mul(&f.exp());

    let nodes = bases
        .par_iter()
        .zip(&solved)
        .map(|(base, (phi, _))| -> Result<NormalizedNode> {
            let limits = extrapolate_ray(&chart, base, &opts.ray, |p| {
                let r = rho_tilde.jet(p, 1)?;
                let inv = g.inverse(p)?;
                let (rv, dr) = (r.value(), r.gradient());
                let mut out = Vec::with_capacity(n);
                for &i in &tangential {
                    out.push((0..d).map(|c| inv[i * d + c] * dr[c]).sum::<f64>() / rv.powi(3));
                }
                let nu: f64 = (0..d)
                    .map(|x| (0..d).map(|y| inv[x * d + y] * dr[x] * dr[y]).sum::<f64>())
                    .sum();
                out.push(nu / rv.powi(4));
                Ok(out)
            })?;
            let lambda_tilde = limits.limit_values()[..n].to_vec();
            let series = limits.series(n);
            let (c2, nu_residual) = fit_powers(&series, &[0, 2])?;
            let (c3, _) = fit_powers(&series, &[0, 1, 2])?;
            Ok(NormalizedNode {
                coords: base.clone(),
                phi: phi.clone(),
                lambda_tilde,
                nu0: c2[0],
                nu_residual,
                nu_linear: c3[1],
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let nu0s: Vec<f64> = nodes.iter().map(|x| x.nu0).collect();
    let nu0 = nu0s.iter().sum::<f64>() / nu0s.len() as f64;
    let spread = nu0s.iter().fold(0.0f64, |a, x| a.max((x - nu0).abs()));
    Ok(Normalization {
        patch: patch.to_vec(),
        degree: opts.degree,
        coefficients: exp.coefficients.clone(),
        gradient_residual: misfit / phi_scale,
        max_lambda_tilde: nodes
            .iter()
            .flat_map(|x| x.lambda_tilde.iter())
            .fold(0.0, |a: f64, x| a.max(x.abs())),
        max_nu_residual: nodes.iter().fold(0.0, |a: f64, x| a.max(x.nu_residual)),
        max_nu_linear: nodes.iter().fold(0.0, |a: f64, x| a.max(x.nu_linear.abs())),
        nu0_spread: spread,
        nu0,
        nu0_nonzero: nu0.abs() > NU0_MIN,
        nodes,
        f,
        rho_tilde,
    })
}
