//! Limits at the boundary from samples along rays `ρ = eps0·2^{-j}`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::chart::Chart;
use crate::error::{Error, Result};
use crate::linalg::lstsq;

/// Default relative tolerance of the quadratic fit.
pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_K: usize = 6;
/// Fraction of the boundary-coordinate span used as the first ladder step.
pub const DEFAULT_EPS_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryLimit {
    pub limit: f64,
    pub fit_order: usize,
    /// Largest fit deviation relative to `max(1, max|value|)`; infinite when
    /// the samples diverge.
    pub residual: f64,
    pub converged: bool,
    pub divergent: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtrapolationOptions {
    pub tol: f64,
    pub fit_order: usize,
}

impl Default for ExtrapolationOptions {
    fn default() -> Self {
        ExtrapolationOptions {
            tol: DEFAULT_TOL,
            fit_order: 2,
        }
    }
}

pub fn ladder(eps0: f64, k: usize) -> Vec<f64> {
    (0..k).map(|j| eps0 * 0.5f64.powi(j as i32)).collect()
}

/// Points equal to `base` with the boundary coordinate set to `eps0·2^{-j}`.
pub fn boundary_ray_samples(
    chart: &Chart,
    base: &[f64],
    eps0: f64,
    k: usize,
) -> Result<Vec<Vec<f64>>> {
    let b = chart.require_boundary()?;
    if base.len() != chart.dim() {
        return Err(Error::shape(format!(
            "base point has {} coordinates, chart has {}",
            base.len(),
            chart.dim()
        )));
    }
    if base[b] != 0.0 {
        return Err(Error::invalid("base point must lie on the boundary"));
    }
    let (_, hi) = chart.domain()[b];
    if !(eps0 > 0.0 && eps0 <= hi) {
        return Err(Error::invalid(format!("eps0 = {eps0} outside (0, {hi}]")));
    }
    Ok(ladder(eps0, k)
        .into_iter()
        .map(|e| {
            let mut p = base.to_vec();
            p[b] = e;
            p
        })
        .collect())
}

/// Least-squares fit of `Σ c_k eps^{powers[k]}`; returns the coefficients and
/// the largest absolute deviation.
pub fn fit_powers(samples: &[(f64, f64)], powers: &[i32]) -> Result<(Vec<f64>, f64)> {
    if samples.len() < powers.len() {
        return Err(Error::Extrapolation(format!(
            "{} samples for {} coefficients",
            samples.len(),
            powers.len()
        )));
    }
    let h = samples
        .iter()
        .map(|s| s.0.abs())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let a = DMatrix::from_fn(samples.len(), powers.len(), |i, k| {
        (samples[i].0 / h).powi(powers[k])
    });
    let y = DVector::from_iterator(samples.len(), samples.iter().map(|s| s.1));
    let c = lstsq(&a, &y).ok_or_else(|| Error::Extrapolation("singular fit".into()))?;
    let dev = (&a * &c - &y).amax();
    let coeffs = c.iter().zip(powers).map(|(c, &p)| c / h.powi(p)).collect();
    Ok((coeffs, dev))
}

fn check_samples(samples: &[(f64, f64)]) -> Result<()> {
    if samples.len() < 4 {
        return Err(Error::Extrapolation(format!(
            "{} samples, need at least 4",
            samples.len()
        )));
    }
    if samples.windows(2).any(|w| !(w[1].0 < w[0].0)) {
        return Err(Error::Extrapolation(
            "eps must be strictly decreasing".into(),
        ));
    }
    if samples.iter().any(|s| !s.1.is_finite() || !s.0.is_finite()) {
        return Err(Error::Extrapolation("non-finite sample".into()));
    }
    Ok(())
}

pub fn extrapolate(samples: &[(f64, f64)]) -> Result<BoundaryLimit> {
    extrapolate_with(samples, ExtrapolationOptions::default())
}

/// Polynomial fit in eps; converged when the fit residual is below tolerance
/// and the constant term is stable when the coarsest one and two samples are
/// dropped.
pub fn extrapolate_with(
    samples: &[(f64, f64)],
    opts: ExtrapolationOptions,
) -> Result<BoundaryLimit> {
    check_samples(samples)?;
    let powers: Vec<i32> = (0..=opts.fit_order as i32).collect();
    let scale = samples.iter().map(|s| s.1.abs()).fold(1.0, f64::max);
    let (c, dev) = fit_powers(samples, &powers)?;
    let residual = dev / scale;
    let mut stable = true;
    for drop in 1..=2 {
        let sub = &samples[drop..];
        if sub.len() > powers.len() {
            let (c_sub, _) = fit_powers(sub, &powers)?;
            stable &= (c_sub[0] - c[0]).abs() <= opts.tol * scale;
        }
    }
    let converged = residual <= opts.tol && stable;
    let divergent = !converged && is_divergent(samples);
    Ok(BoundaryLimit {
        limit: c[0],
        fit_order: opts.fit_order,
        residual: if divergent { f64::INFINITY } else { residual },
        converged,
        divergent,
    })
}

/// Magnitudes growing by a factor of at least 1.2 at each of the last three
/// ladder steps.
fn is_divergent(samples: &[(f64, f64)]) -> bool {
    let tail = &samples[samples.len().saturating_sub(4)..];
    tail.windows(2)
        .all(|w| w[1].1.abs() >= 1.2 * w[0].1.abs() && w[0].1 != 0.0)
}

/// Slope and coefficient of determination of `log value` against `log eps`.
pub fn loglog_slope(samples: &[(f64, f64)]) -> Result<(f64, f64)> {
    if samples.len() < 4 {
        return Err(Error::Extrapolation(format!(
            "{} samples, need at least 4",
            samples.len()
        )));
    }
    if let Some(s) = samples.iter().find(|s| !(s.1 > 0.0) || !(s.0 > 0.0)) {
        return Err(Error::Extrapolation(format!(
            "nonpositive sample ({}, {})",
            s.0, s.1
        )));
    }
    let pts: Vec<(f64, f64)> = samples.iter().map(|s| (s.0.ln(), s.1.ln())).collect();
    Ok(linear_fit(&pts))
}

/// Ordinary least squares `y = a + b x`; returns `(b, r²)`. A perfect fit of
/// constant data reports `r² = 1`.
pub fn linear_fit(pts: &[(f64, f64)]) -> (f64, f64) {
    let (slope, _, r2) = linear_fit_full(pts);
    (slope, r2)
}

/// `(slope, intercept, r²)`.
pub fn linear_fit_full(pts: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let ss_res: f64 = pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let r2 = if syy <= 1e-28 * (1.0 + my * my) * n {
        1.0
    } else {
        1.0 - ss_res / syy
    };
    (slope, intercept, r2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RayOptions {
    pub eps0: f64,
    pub k: usize,
    /// Extra ladder steps; a component whose fit fails on the first window is
    /// refit on windows shifted toward the boundary.
    pub refinements: usize,
    pub extrapolation: ExtrapolationOptions,
}

impl RayOptions {
    pub fn for_chart(chart: &Chart) -> Result<Self> {
        let b = chart.require_boundary()?;
        Ok(RayOptions {
            eps0: DEFAULT_EPS_FRACTION * chart.span(b),
            k: DEFAULT_K,
            refinements: 3,
            extrapolation: ExtrapolationOptions::default(),
        })
    }
}

/// Samples of a vector-valued quantity along one ray, with per-component
/// limits.
#[derive(Debug, Clone, Serialize)]
pub struct RayLimits {
    pub base: Vec<f64>,
    pub eps: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    pub limits: Vec<BoundaryLimit>,
}

impl RayLimits {
    pub fn all_converged(&self) -> bool {
        self.limits.iter().all(|l| l.converged)
    }

    pub fn limit_values(&self) -> Vec<f64> {
        self.limits.iter().map(|l| l.limit).collect()
    }

    pub fn worst_residual(&self) -> f64 {
        self.limits.iter().map(|l| l.residual).fold(0.0, f64::max)
    }

    /// Samples of component `c` as `(eps, value)`.
    pub fn series(&self, c: usize) -> Vec<(f64, f64)> {
        self.eps
            .iter()
            .zip(&self.values)
            .map(|(e, v)| (*e, v[c]))
            .collect()
    }
}

/// Evaluates `f` on the ray above `base` and extrapolates every component.
pub fn extrapolate_ray<F>(chart: &Chart, base: &[f64], opts: &RayOptions, f: F) -> Result<RayLimits>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let pts = boundary_ray_samples(chart, base, opts.eps0, opts.k + opts.refinements)?;
    let b = chart.require_boundary()?;
    let eps: Vec<f64> = pts.iter().map(|p| p[b]).collect();
    let values = pts.iter().map(|p| f(p)).collect::<Result<Vec<_>>>()?;
    let m = values.first().map_or(0, Vec::len);
    if values.iter().any(|v| v.len() != m) {
        return Err(Error::shape("ray quantity changed length".to_string()));
    }
    let mut limits = Vec::with_capacity(m);
    for c in 0..m {
        let series: Vec<(f64, f64)> = eps.iter().zip(&values).map(|(e, v)| (*e, v[c])).collect();
        let mut best = None;
        for shift in 0..=opts.refinements {
            let l = extrapolate_with(&series[shift..shift + opts.k], opts.extrapolation)?;
            let done = l.converged;
            best = Some(l);
            if done {
                break;
            }
        }
        let mut l = best.unwrap();
        if !l.converged && is_divergent(&series) {
            l.divergent = true;
            l.residual = f64::INFINITY;
        }
        limits.push(l);
    }
    Ok(RayLimits {
        base: base.to_vec(),
        eps,
        values,
        limits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chart() -> Chart {
        Chart::new(
            vec!["x".into(), "r".into()],
            vec![(-1.0, 1.0), (0.0, 1.0)],
            Some(1),
        )
        .unwrap()
    }

    #[test]
    fn ray_samples() {
        let c = chart();
        let pts = boundary_ray_samples(&c, &[0.5, 0.0], 0.1, 3).unwrap();
        let r: Vec<f64> = pts.iter().map(|p| p[1]).collect();
        assert_eq!(r, vec![0.1, 0.05, 0.025]);
        assert!(boundary_ray_samples(&c, &[0.5, 0.0], 0.1, 0)
            .unwrap()
            .is_empty());
        assert!(boundary_ray_samples(&c, &[0.5, 0.0], 2.0, 3).is_err());
    }

    #[test]
    fn linear_and_divergent() {
        let s: Vec<(f64, f64)> = ladder(0.1, 6)
            .into_iter()
            .map(|e| (e, 2.0 + 3.0 * e))
            .collect();
        let l = extrapolate(&s).unwrap();
        assert!(l.converged && (l.limit - 2.0).abs() < 1e-12);
        let s: Vec<(f64, f64)> = ladder(0.1, 6).into_iter().map(|e| (e, 1.0 / e)).collect();
        let l = extrapolate(&s).unwrap();
        assert!(!l.converged && l.divergent && l.residual.is_infinite());
        assert!(extrapolate(&s[..3]).is_err());
    }

    #[test]
    fn loglog() {
        let s: Vec<(f64, f64)> = ladder(0.1, 6)
            .into_iter()
            .map(|e| (e, e.powi(-3)))
            .collect();
        let (m, r2) = loglog_slope(&s).unwrap();
        assert!((m + 3.0).abs() < 1e-12 && (r2 - 1.0).abs() < 1e-12);
        let s: Vec<(f64, f64)> = ladder(0.1, 6).into_iter().map(|e| (e, 4.0)).collect();
        assert_eq!(loglog_slope(&s).unwrap().0, 0.0);
        assert!(loglog_slope(&[(1.0, 1.0), (0.5, 0.0), (0.2, 1.0), (0.1, 1.0)]).is_err());
    }

    #[test]
    fn refinement_rescues_smooth_nonpolynomial_data() {
        let c = chart();
        let opts = RayOptions::for_chart(&c).unwrap();
        let r = extrapolate_ray(&c, &[0.0, 0.0], &opts, |p| Ok(vec![(3.0 * p[1]).exp()])).unwrap();
        assert!(r.all_converged(), "{:?}", r.limits);
        assert!((r.limits[0].limit - 1.0).abs() < 1e-5);
    }
}
