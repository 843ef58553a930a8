//! Geodesic integration and the boundary-approach laws of order-α compact
//! connections.

mod ode;

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::connections::Connection;
use crate::error::{Error, Result};
use crate::fields::extrapolate::linear_fit_full;
use crate::fields::{Chart, ScalarField};
pub use ode::Termination;
use ode::{integrate, Dense, Settings, System};

#[derive(Debug, Clone)]
pub struct GeodesicOptions {
    pub t_max: f64,
    pub rtol: f64,
    pub atol: f64,
    /// Stop once the boundary coordinate drops to this value. `None` means
    /// `1e-6` of its span.
    pub cutoff: Option<f64>,
    /// Largest accepted `|Δ log ρ|` per step.
    pub max_dlog_rho: f64,
    pub max_steps: usize,
}

impl GeodesicOptions {
    pub fn new(t_max: f64, tol: f64) -> Self {
        GeodesicOptions {
            t_max,
            rtol: tol,
            atol: tol * 1e-12,
            cutoff: None,
            max_dlog_rho: 0.05,
            max_steps: 2_000_000,
        }
    }
}

impl Default for GeodesicOptions {
    fn default() -> Self {
        GeodesicOptions::new(f64::INFINITY, 1e-9)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Sample {
    pub t: f64,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub terminated: Termination,
    /// `max |g(ẋ,ẋ)(t) − g(ẋ,ẋ)(0)|` for metric connections.
    pub energy_drift: Option<f64>,
    pub rejected_steps: usize,
    pub cutoff: f64,
    #[serde(skip)]
    dense: Vec<Dense>,
}

impl Trajectory {
    pub fn last(&self) -> &Sample {
        self.samples.last().unwrap()
    }

    pub fn t_end(&self) -> f64 {
        self.last().t
    }

    /// Position and velocity at parameter `t` from the continuous extension.
    pub fn state_at(&self, t: f64) -> Option<(Vec<f64>, Vec<f64>)> {
        if !(0.0..=self.t_end()).contains(&t) {
            return None;
        }
        let i = self
            .dense
            .partition_point(|d| d.t0 + d.h < t)
            .min(self.dense.len().checked_sub(1)?);
        let y = self.dense[i].eval(t);
        let n = y.len() / 2;
        Some((y[..n].to_vec(), y[n..].to_vec()))
    }

    pub fn position_at(&self, t: f64) -> Option<Vec<f64>> {
        self.state_at(t).map(|s| s.0)
    }

    /// CSV with columns `t, x0.., v0.., rho`.
    pub fn write_csv<W: Write>(&self, out: W, rho: &ScalarField) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let n = self.samples.first().map_or(0, |s| s.x.len());
        let mut header = vec!["t".to_string()];
        header.extend((0..n).map(|i| format!("x{i}")));
        header.extend((0..n).map(|i| format!("v{i}")));
        header.push("rho".into());
        w.write_record(&header).map_err(csv_err)?;
        for s in &self.samples {
            let mut row = vec![s.t];
            row.extend(&s.x);
            row.extend(&s.v);
            row.push(rho.value(&s.x)?);
            w.write_record(row.iter().map(|x| format!("{x:e}")))
                .map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::invalid(e.to_string()))?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::invalid(format!("csv: {e}"))
}

/// Lowest-face-excluded distance to the box, negative outside.
fn box_margin(chart: &Chart, x: &[f64]) -> f64 {
    let b = chart.boundary_index();
    let mut m = f64::INFINITY;
    for (i, (lo, hi)) in chart.domain().iter().enumerate() {
        if Some(i) != b {
            m = m.min(x[i] - lo);
        }
        m = m.min(hi - x[i]);
    }
    m
}

struct GeodesicFlow<'a> {
    conn: &'a Connection,
    b: Option<usize>,
}

impl System for GeodesicFlow<'_> {
    fn rhs(&self, y: &[f64]) -> Result<Vec<f64>> {
        let n = y.len() / 2;
        let (x, v) = y.split_at(n);
        let g = self.conn.christoffel(x)?;
        let mut out = v.to_vec();
        for c in 0..n {
            let mut acc = 0.0;
            for a in 0..n {
                for bb in 0..n {
                    acc += g[c * n * n + a * n + bb] * v[a] * v[bb];
                }
            }
            out.push(-acc);
        }
        Ok(out)
    }

    fn depth(&self, y: &[f64]) -> f64 {
        self.b.map_or(1.0, |b| y[b])
    }

    fn margin(&self, y: &[f64]) -> f64 {
        box_margin(self.conn.chart(), &y[..y.len() / 2])
    }
}

/// Solves `ẍ^c + Γ^c_ab ẋ^a ẋ^b = 0` from `(x0, v0)`.
pub fn integrate_geodesic(
    conn: &Connection,
    x0: &[f64],
    v0: &[f64],
    opts: &GeodesicOptions,
) -> Result<Trajectory> {
    let chart = conn.chart();
    let n = chart.dim();
    if x0.len() != n || v0.len() != n {
        return Err(Error::shape(format!(
            "initial data must have {n} components"
        )));
    }
    let b = chart.boundary_index();
    if !chart.contains(x0) || b.is_some_and(|b| x0[b] <= 0.0) {
        return Err(Error::OutsideDomain { point: x0.to_vec() });
    }
    if v0.iter().all(|v| *v == 0.0) {
        return Err(Error::invalid("initial velocity is zero"));
    }
    let cutoff = match (opts.cutoff, b) {
        (Some(c), _) => c,
        (None, Some(b)) => 1e-6 * chart.span(b),
        (None, None) => 0.0,
    };
    if b.is_some_and(|b| x0[b] <= cutoff) {
        return Err(Error::invalid("initial point is already below the cutoff"));
    }
    let flow = GeodesicFlow { conn, b };
    let settings = Settings {
        rtol: opts.rtol,
        atol: opts.atol,
        t_max: opts.t_max,
        cutoff,
        max_dlog_depth: if b.is_some() {
            opts.max_dlog_rho
        } else {
            f64::INFINITY
        },
        max_steps: opts.max_steps,
    };
    let y0: Vec<f64> = x0.iter().chain(v0).copied().collect();
    let run = integrate(&flow, &y0, &settings)?;
    let samples: Vec<Sample> = run
        .t
        .iter()
        .zip(&run.y)
        .map(|(&t, y)| Sample {
            t,
            x: y[..n].to_vec(),
            v: y[n..].to_vec(),
        })
        .collect();
    let energy_drift = match conn.metric() {
        Some(g) => {
            let e0 = g.norm2(x0, v0)?;
            let mut worst: f64 = 0.0;
            for s in &samples {
                worst = worst.max((g.norm2(&s.x, &s.v)? - e0).abs());
            }
            Some(worst)
        }
        None => None,
    };
    Ok(Trajectory {
        samples,
        terminated: run.stop,
        energy_drift,
        rejected_steps: run.rejected,
        cutoff,
        dense: run.dense,
    })
}

/// Independent trajectories integrated concurrently, in input order.
pub fn integrate_batch(
    conn: &Connection,
    initial: &[(Vec<f64>, Vec<f64>)],
    opts: &GeodesicOptions,
) -> Vec<Result<Trajectory>> {
    initial
        .par_iter()
        .map(|(x, v)| integrate_geodesic(conn, x, v, opts))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ApproachLaw {
    /// `log ρ` linear in `t`.
    Exponential,
    /// `log ρ` linear in `log t`.
    Power,
}

#[derive(Debug, Clone, Serialize)]
pub struct ApproachFit {
    pub alpha: f64,
    pub law: ApproachLaw,
    pub slope: f64,
    /// `α/(α−2)` for power laws.
    pub predicted_slope: Option<f64>,
    pub intercept: f64,
    pub r2: f64,
    pub tail_samples: usize,
}

impl ApproachFit {
    /// Exponential decay, or the predicted power within `slope_tol`, both with
    /// `r² > r2_min`.
    pub fn consistent(&self, slope_tol: f64, r2_min: f64) -> bool {
        let shape = match self.predicted_slope {
            Some(p) => (self.slope - p).abs() <= slope_tol,
            None => self.slope < 0.0,
        };
        shape && self.r2 > r2_min
    }
}

pub const MIN_TAIL_SAMPLES: usize = 20;

/// Fits `(t, ρ)` samples over the last decade of `ρ`.
pub fn fit_approach(samples: &[(f64, f64)], alpha: f64) -> Result<ApproachFit> {
    if !(alpha > 0.0 && alpha <= 2.0 + 1e-12) {
        return Err(Error::precondition(format!(
            "approach laws need 0 < alpha <= 2, got {alpha}"
        )));
    }
    let last = samples
        .last()
        .ok_or_else(|| Error::precondition("no samples"))?
        .1;
    let tail: Vec<(f64, f64)> = samples
        .iter()
        .filter(|s| s.0 > 0.0 && s.1 > 0.0 && s.1 <= 10.0 * last)
        .copied()
        .collect();
    if tail.len() < MIN_TAIL_SAMPLES {
        return Err(Error::precondition(format!(
            "only {} samples in the last decade of rho, need {MIN_TAIL_SAMPLES}",
            tail.len()
        )));
    }
    let exponential = (alpha - 2.0).abs() < 1e-12;
    let pts: Vec<(f64, f64)> = tail
        .iter()
        .map(|&(t, r)| (if exponential { t } else { t.ln() }, r.ln()))
        .collect();
    let (slope, intercept, r2) = linear_fit_full(&pts);
    Ok(ApproachFit {
        alpha,
        law: if exponential {
            ApproachLaw::Exponential
        } else {
            ApproachLaw::Power
        },
        slope,
        predicted_slope: (!exponential).then(|| alpha / (alpha - 2.0)),
        intercept,
        r2,
        tail_samples: tail.len(),
    })
}

fn require_boundary_stop(traj: &Trajectory) -> Result<()> {
    if traj.terminated != Termination::BoundaryProximity {
        return Err(Error::precondition(format!(
            "trajectory ended by {:?}, not boundary proximity",
            traj.terminated
        )));
    }
    Ok(())
}

/// `log ρ(c(t))` against `t` (α = 2) or `log t` (α < 2) on the last decade.
pub fn approach_law_fit(traj: &Trajectory, rho: &ScalarField, alpha: f64) -> Result<ApproachFit> {
    require_boundary_stop(traj)?;
    let samples = traj
        .samples
        .iter()
        .map(|s| Ok((s.t, rho.value(&s.x)?)))
        .collect::<Result<Vec<_>>>()?;
    fit_approach(&samples, alpha)
}

#[derive(Debug, Clone, Serialize)]
pub struct CutoffDivergence {
    pub cutoffs: Vec<f64>,
    /// Parameter at which each cutoff is reached.
    pub times: Vec<f64>,
    pub increments: Vec<f64>,
    pub monotone: bool,
    /// No increment falls below `0.9×` its predecessor.
    pub non_shrinking: bool,
}

impl CutoffDivergence {
    pub fn divergent(&self) -> bool {
        self.monotone && self.non_shrinking
    }
}

/// Times to reach a decreasing sequence of cutoffs. A geodesic reaching the
/// boundary at finite parameter shows shrinking increments.
pub fn cutoff_divergence(
    conn: &Connection,
    x0: &[f64],
    v0: &[f64],
    cutoffs: &[f64],
    opts: &GeodesicOptions,
) -> Result<CutoffDivergence> {
    if cutoffs.len() < 3 || cutoffs.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::invalid(
            "need at least three strictly decreasing cutoffs",
        ));
    }
    let times = cutoffs
        .par_iter()
        .map(|&c| {
            let o = GeodesicOptions {
                cutoff: Some(c),
                t_max: f64::INFINITY,
                ..opts.clone()
            };
            let tr = integrate_geodesic(conn, x0, v0, &o)?;
            require_boundary_stop(&tr)?;
            Ok(tr.t_end())
        })
        .collect::<Result<Vec<_>>>()?;
    let increments: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
    Ok(CutoffDivergence {
        cutoffs: cutoffs.to_vec(),
        monotone: increments.iter().all(|d| *d > 0.0),
        non_shrinking: increments.windows(2).all(|w| w[1] >= 0.9 * w[0]),
        times,
        increments,
    })
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Coordinate distance from `p` to the curve `a` near its step `i`.
fn distance_near(a: &Trajectory, i: usize, p: &[f64]) -> f64 {
    let mut best = f64::INFINITY;
    for d in &a.dense[i.saturating_sub(1)..(i + 1).min(a.dense.len())] {
        let f = |th: f64| dist(&d.eval(d.t0 + th * d.h)[..p.len()], p);
        // golden-section search on [0, 1]
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let (mut lo, mut hi) = (0.0, 1.0);
        let mut x1 = hi - g * (hi - lo);
        let mut x2 = lo + g * (hi - lo);
        let (mut f1, mut f2) = (f(x1), f(x2));
        for _ in 0..80 {
            if f1 < f2 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - g * (hi - lo);
                f1 = f(x1);
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + g * (hi - lo);
                f2 = f(x2);
            }
        }
        best = best.min(f1.min(f2)).min(f(0.0)).min(f(1.0));
    }
    best
}

/// Largest coordinate distance from a sample of `b` to the trace of `a`. The
/// trace of `b` is assumed to lie along `a`, which may extend further.
pub fn trace_distance(a: &Trajectory, b: &Trajectory) -> f64 {
    if a.dense.is_empty() {
        return b
            .samples
            .iter()
            .map(|s| dist(&s.x, &a.samples[0].x))
            .fold(0.0, f64::max);
    }
    b.samples
        .par_iter()
        .map(|s| {
            let i = a
                .samples
                .iter()
                .enumerate()
                .map(|(i, q)| (i, dist(&q.x, &s.x)))
                .fold((0, f64::INFINITY), |m, c| if c.1 < m.1 { c } else { m })
                .0;
            distance_near(a, i.min(a.dense.len() - 1), &s.x).min(distance_near(
                a,
                i.saturating_sub(1),
                &s.x,
            ))
        })
        .reduce(|| 0.0, f64::max)
}

#[derive(Debug, Clone, Serialize)]
pub struct PhiSolution {
    /// `(t, φ(t), ρ(ĉ(φ(t))))`.
    pub samples: Vec<(f64, f64, f64)>,
    pub terminated: Termination,
}

impl PhiSolution {
    pub fn approach_fit(&self, alpha: f64) -> Result<ApproachFit> {
        if self.terminated != Termination::BoundaryProximity {
            return Err(Error::precondition(format!(
                "reparameterization ended by {:?}, not boundary proximity",
                self.terminated
            )));
        }
        let pts: Vec<(f64, f64)> = self.samples.iter().map(|s| (s.0, s.2)).collect();
        fit_approach(&pts, alpha)
    }
}

struct PhiFlow<'a> {
    hat: &'a Trajectory,
    rho: &'a ScalarField,
    a: f64,
    power: f64,
}

impl PhiFlow<'_> {
    fn rho_at(&self, s: f64) -> Result<f64> {
        let x = self
            .hat
            .position_at(s)
            .ok_or_else(|| Error::precondition("reparameterization left the hat geodesic"))?;
        self.rho.value(&x)
    }
}

impl System for PhiFlow<'_> {
    fn rhs(&self, y: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![(self.rho_at(y[0])? / self.a).powf(self.power)])
    }

    fn depth(&self, y: &[f64]) -> f64 {
        self.rho_at(y[0]).unwrap_or(f64::NAN)
    }

    fn margin(&self, y: &[f64]) -> f64 {
        self.hat.t_end() - y[0]
    }
}

/// Solves `φ' = (f∘φ)^{2/α}`, `φ(0) = 0`, with `f(s) = ρ(ĉ(s))/ρ(ĉ(0))` for a
/// geodesic `ĉ` of `∇̂ = ∇ + dρ/(αρ)`. Then `ĉ∘φ` is the `∇`-geodesic with the
/// same initial velocity. Stops once `ρ(ĉ(φ))` drops to `cutoff`, which must
/// exceed the final `ρ` of `ĉ`.
pub fn reparameterize(
    hat: &Trajectory,
    rho: &ScalarField,
    alpha: f64,
    cutoff: f64,
    opts: &GeodesicOptions,
) -> Result<PhiSolution> {
    require_boundary_stop(hat)?;
    let a = rho.value(&hat.samples[0].x)?;
    let end = rho.value(&hat.last().x)?;
    if cutoff <= end || cutoff >= a {
        return Err(Error::invalid(format!(
            "cutoff {cutoff} must lie between the final rho {end} and the initial rho {a}"
        )));
    }
    let flow = PhiFlow {
        hat,
        rho,
        a,
        power: 2.0 / alpha,
    };
    let settings = Settings {
        rtol: opts.rtol,
        atol: opts.atol,
        t_max: opts.t_max,
        cutoff,
        max_dlog_depth: opts.max_dlog_rho,
        max_steps: opts.max_steps,
    };
    let run = integrate(&flow, &[0.0], &settings)?;
    let samples = run
        .t
        .iter()
        .zip(&run.y)
        .map(|(&t, y)| Ok((t, y[0], flow.rho_at(y[0])?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(PhiSolution {
        samples,
        terminated: run.stop,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    #[test]
    fn flat_geodesics_are_lines() {
        let chart =
            Arc::new(Chart::new(vec!["x".into(), "y".into()], vec![(-5.0, 5.0); 2], None).unwrap());
        let conn = Connection::flat(chart.clone());
        let tr = integrate_geodesic(
            &conn,
            &[0.1, 0.2],
            &[0.3, -0.4],
            &GeodesicOptions::new(4.0, 1e-10),
        )
        .unwrap();
        assert_eq!(tr.terminated, Termination::TimeLimit);
        for s in &tr.samples {
            assert!((s.x[0] - 0.1 - 0.3 * s.t).abs() < 1e-12);
            assert!((s.x[1] - 0.2 + 0.4 * s.t).abs() < 1e-12);
        }
        let ex = integrate_geodesic(
            &conn,
            &[0.1, 0.2],
            &[3.0, 0.0],
            &GeodesicOptions::new(4.0, 1e-10),
        )
        .unwrap();
        assert_eq!(ex.terminated, Termination::DomainExit);
        assert!((ex.last().x[0] - 5.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_initial_data() {
        let chart = Arc::new(
            Chart::new(
                vec!["x".into(), "r".into()],
                vec![(-1.0, 1.0), (0.0, 1.0)],
                Some(1),
            )
            .unwrap(),
        );
        let conn = Connection::flat(chart.clone());
        let o = GeodesicOptions::default();
        assert!(integrate_geodesic(&conn, &[0.0, 0.5], &[0.0, 0.0], &o).is_err());
        assert!(integrate_geodesic(&conn, &[0.0, 1.5], &[1.0, 0.0], &o).is_err());
        assert!(integrate_geodesic(&conn, &[0.0, 0.5], &[1.0], &o).is_err());
    }

    #[test]
    fn approach_fit_on_synthetic_laws() {
        let exp: Vec<(f64, f64)> = (0..200)
            .map(|i| (i as f64 * 0.05, (-2.0 * i as f64 * 0.05).exp()))
            .collect();
        let f = fit_approach(&exp, 2.0).unwrap();
        assert!((f.slope + 2.0).abs() < 1e-10 && f.consistent(0.02, 0.999));
        let pow: Vec<(f64, f64)> = (1..400)
            .map(|i| (1.05f64.powi(i), 1.0 / 1.05f64.powi(i)))
            .collect();
        let f = fit_approach(&pow, 1.0).unwrap();
        assert!((f.slope + 1.0).abs() < 1e-10 && f.consistent(0.02, 0.999));
        assert!(fit_approach(&pow[..10], 1.0).is_err());
        assert!(fit_approach(&pow, 3.0).is_err());
    }
}
