//! Dormand–Prince 5(4) with dense output, a depth guard and two stop events.

use serde::Serialize;

use crate::error::Result;

const A: [&[f64]; 7] = [
    &[],
    &[0.2],
    &[3.0 / 40.0, 9.0 / 40.0],
    &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
    &[
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
    ],
    &[
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
    ],
    &[
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

/// An autonomous system `y' = F(y)` with a positive depth (distance-like
/// quantity to the boundary) and a domain margin that is negative outside.
pub(crate) trait System {
    fn rhs(&self, y: &[f64]) -> Result<Vec<f64>>;
    fn depth(&self, y: &[f64]) -> f64;
    fn margin(&self, y: &[f64]) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    TimeLimit,
    BoundaryProximity,
    DomainExit,
    /// Step size underflow or step budget exhausted.
    Truncated,
}

#[derive(Debug, Clone)]
pub(crate) struct Settings {
    pub rtol: f64,
    pub atol: f64,
    pub t_max: f64,
    pub cutoff: f64,
    pub max_dlog_depth: f64,
    pub max_steps: usize,
}

/// Continuous extension of one accepted step.
#[derive(Debug, Clone)]
pub(crate) struct Dense {
    pub t0: f64,
    pub h: f64,
    r: [Vec<f64>; 5],
}

impl Dense {
    pub fn eval(&self, t: f64) -> Vec<f64> {
        let th = ((t - self.t0) / self.h).clamp(0.0, 1.0);
        let th1 = 1.0 - th;
        let r = &self.r;
        (0..r[0].len())
            .map(|i| r[0][i] + th * (r[1][i] + th1 * (r[2][i] + th * (r[3][i] + th1 * r[4][i]))))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Run {
    pub t: Vec<f64>,
    pub y: Vec<Vec<f64>>,
    pub dense: Vec<Dense>,
    pub stop: Termination,
    pub rejected: usize,
}

struct Step {
    y: Vec<f64>,
    err: f64,
    dense: Dense,
    k_last: Vec<f64>,
}

fn axpy(y: &[f64], h: f64, ks: &[Vec<f64>], coeffs: &[f64]) -> Vec<f64> {
    let mut out = y.to_vec();
    for (k, &c) in ks.iter().zip(coeffs) {
        if c != 0.0 {
            for (o, x) in out.iter_mut().zip(k) {
                *o += h * c * x;
            }
        }
    }
    out
}

fn finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// One step of size `h` from `(t, y)` with `k1 = F(y)`. `None` when some stage
/// cannot be evaluated.
fn step<S: System>(sys: &S, set: &Settings, t: f64, y: &[f64], k1: &[f64], h: f64) -> Option<Step> {
    let mut ks: Vec<Vec<f64>> = vec![k1.to_vec()];
    for s in 1..7 {
        let ys = axpy(y, h, &ks, A[s]);
        let k = sys.rhs(&ys).ok().filter(|k| finite(k))?;
        ks.push(k);
    }
    let y1 = axpy(y, h, &ks, A[6]);
    if !finite(&y1) {
        return None;
    }
    let mut err: f64 = 0.0;
    for i in 0..y.len() {
        let e: f64 = (0..7).map(|s| E[s] * ks[s][i]).sum::<f64>() * h;
        let sc = set.atol + set.rtol * y[i].abs().max(y1[i].abs());
        err = err.max(e.abs() / sc);
    }
    let diff: Vec<f64> = y1.iter().zip(y).map(|(a, b)| a - b).collect();
    let r2: Vec<f64> = (0..y.len()).map(|i| h * ks[0][i] - diff[i]).collect();
    let r3: Vec<f64> = (0..y.len())
        .map(|i| diff[i] - h * ks[6][i] - r2[i])
        .collect();
    let r4: Vec<f64> = (0..y.len())
        .map(|i| h * (0..7).map(|s| D[s] * ks[s][i]).sum::<f64>())
        .collect();
    Some(Step {
        dense: Dense {
            t0: t,
            h,
            r: [y.to_vec(), diff, r2, r3, r4],
        },
        y: y1,
        err,
        k_last: ks.pop().unwrap(),
    })
}

/// Integrates from `y0` at `t = 0` until `t_max`, the cutoff depth, or the
/// domain margin is crossed. Events are located by bisection on the step size,
/// so a boundary stop always ends with `depth ≤ cutoff`.
pub(crate) fn integrate<S: System>(sys: &S, y0: &[f64], set: &Settings) -> Result<Run> {
    let mut k1 = sys.rhs(y0)?;
    let mut run = Run {
        t: vec![0.0],
        y: vec![y0.to_vec()],
        dense: Vec::new(),
        stop: Termination::Truncated,
        rejected: 0,
    };
    let mut t = 0.0;
    let mut y = y0.to_vec();
    let scale = y0.iter().map(|x| x.abs()).fold(0.0, f64::max).max(1e-300);
    let kn = k1.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let mut h = if kn > 0.0 { 0.01 * scale / kn } else { 0.01 };
    h = h.min(set.t_max).max(1e-12);
    for _ in 0..set.max_steps {
        if t >= set.t_max {
            run.stop = Termination::TimeLimit;
            return Ok(run);
        }
        h = h.min(set.t_max - t);
        if h < 1e-13 * t.abs().max(1.0) {
            run.stop = Termination::Truncated;
            return Ok(run);
        }
        let Some(s) = step(sys, set, t, &y, &k1, h) else {
            run.rejected += 1;
            h *= 0.25;
            continue;
        };
        if s.err > 1.0 {
            run.rejected += 1;
            h *= (0.9 * s.err.powf(-0.2)).max(0.2);
            continue;
        }
        let (d0, d1) = (sys.depth(&y), sys.depth(&s.y));
        if !(d1.is_finite() && d1 > 0.0) || (d1 / d0).ln().abs() > set.max_dlog_depth {
            run.rejected += 1;
            h *= 0.5;
            continue;
        }
        let hit_cut = d1 <= set.cutoff;
        let hit_edge = sys.margin(&s.y) <= 0.0;
        if hit_cut || hit_edge {
            let (stop, last) = locate_event(sys, set, t, &y, &k1, h, hit_cut)?;
            run.t.push(last.dense.t0 + last.dense.h);
            run.y.push(last.y);
            run.dense.push(last.dense);
            run.stop = stop;
            return Ok(run);
        }
        t += h;
        y = s.y;
        k1 = s.k_last;
        run.t.push(t);
        run.y.push(y.clone());
        run.dense.push(s.dense);
        h *= (0.9 * s.err.max(1e-10).powf(-0.2)).min(5.0);
    }
    run.stop = Termination::Truncated;
    Ok(run)
}

/// Shortest partial step ending past the earlier of the two events.
fn locate_event<S: System>(
    sys: &S,
    set: &Settings,
    t: f64,
    y: &[f64],
    k1: &[f64],
    h: f64,
    cut_first_guess: bool,
) -> Result<(Termination, Step)> {
    let fired = |s: &Step| (sys.depth(&s.y) <= set.cutoff, sys.margin(&s.y) <= 0.0);
    let (mut lo, mut hi) = (0.0, h);
    let mut best = step(sys, set, t, y, k1, h).expect("step evaluated before");
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        match step(sys, set, t, y, k1, mid) {
            Some(s) => {
                let (c, e) = fired(&s);
                if c || e {
                    hi = mid;
                    best = s;
                } else {
                    lo = mid;
                }
            }
            None => hi = mid,
        }
        if hi - lo <= 1e-15 * (t.abs() + h) {
            break;
        }
    }
    let (c, e) = fired(&best);
    let stop = match (c, e) {
        (true, false) => Termination::BoundaryProximity,
        (false, true) => Termination::DomainExit,
        _ if cut_first_guess => Termination::BoundaryProximity,
        _ => Termination::DomainExit,
    };
    Ok((stop, best))
}
