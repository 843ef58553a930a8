//! Slot representations in a chosen splitting and their change of scale.
//!
//! Sections carry jets so they can be differentiated; tractor-valued forms are
//! plain values. Neither stores its splitting: every operation takes the scale
//! explicitly, and `change_scale(Υ)` re-expresses slots for `∇ + Υ`.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::fields::jet::Jet;
use crate::linalg::{rank_signature, rank_signature_floor};

/// Threshold for ranks of tractor bilinear forms, relative to the largest
/// eigenvalue.
pub const RANK_TOL: f64 = 1e-10;

fn jets_values(js: &[Jet]) -> Vec<f64> {
    js.iter().map(Jet::value).collect()
}

fn trunc(j: Jet, o: usize) -> Jet {
    j.truncate(o)
}

/// Section of `T*`: `(σ, μ_a)`, both of weight 1.
#[derive(Debug, Clone)]
pub struct Cotractor {
    pub sigma: Jet,
    pub mu: Vec<Jet>,
}

impl Cotractor {
    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn order(&self) -> usize {
        self.mu
            .iter()
            .map(Jet::order)
            .fold(self.sigma.order(), usize::min)
    }

    /// `(σ, μ_a + Υ_aσ)`.
    pub fn change_scale(&self, ups: &[Jet]) -> Cotractor {
        let o = self.order();
        Cotractor {
            sigma: self.sigma.truncate(o),
            mu: (0..self.dim())
                .map(|a| trunc(&self.mu[a] + &(&ups[a] * &self.sigma), o))
                .collect(),
        }
    }

    /// `(σ, μ_0, .., μ_{n})`.
    pub fn values(&self) -> Vec<f64> {
        let mut v = vec![self.sigma.value()];
        v.extend(jets_values(&self.mu));
        v
    }

    /// Components in the ordering used for bilinear forms: `(μ_a, σ)`.
    pub fn vector(&self) -> Vec<f64> {
        let mut v = jets_values(&self.mu);
        v.push(self.sigma.value());
        v
    }
}

/// Section of `S²T*`: `(τ, ν_a, ρ_ab)`, weight 2.
#[derive(Debug, Clone)]
pub struct S2Cotractor {
    pub tau: Jet,
    pub nu: Vec<Jet>,
    pub rho: Vec<Jet>,
}

impl S2Cotractor {
    pub fn dim(&self) -> usize {
        self.nu.len()
    }

    pub fn order(&self) -> usize {
        self.nu
            .iter()
            .chain(&self.rho)
            .map(Jet::order)
            .fold(self.tau.order(), usize::min)
    }

    /// `t⊙t` for `t ∈ T*`: `(σ², σμ_a, μ_aμ_b)`.
    pub fn square(t: &Cotractor) -> S2Cotractor {
        let n = t.dim();
        S2Cotractor {
            tau: &t.sigma * &t.sigma,
            nu: t.mu.iter().map(|m| &t.sigma * m).collect(),
            rho: (0..n * n).map(|k| &t.mu[k / n] * &t.mu[k % n]).collect(),
        }
    }

    /// `(τ, ν_a + Υ_aτ, ρ_ab + Υ_aν_b + Υ_bν_a + Υ_aΥ_bτ)`.
    pub fn change_scale(&self, ups: &[Jet]) -> S2Cotractor {
        let n = self.dim();
        let o = self.order();
        let nu = (0..n)
            .map(|a| trunc(&self.nu[a] + &(&ups[a] * &self.tau), o))
            .collect();
        let rho = (0..n * n)
            .map(|k| {
                let (a, b) = (k / n, k % n);
                let t = &(&ups[a] * &self.nu[b]) + &(&ups[b] * &self.nu[a]);
                let t = &t + &(&(&ups[a] * &ups[b]) * &self.tau);
                trunc(&self.rho[k] + &t, o)
            })
            .collect();
        S2Cotractor {
            tau: self.tau.truncate(o),
            nu,
            rho,
        }
    }

    /// `[[ρ_ab, ν_a], [ν_b, τ]]`.
    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.dim();
        DMatrix::from_fn(n + 1, n + 1, |i, j| match (i < n, j < n) {
            (true, true) => self.rho[i * n + j].value(),
            (true, false) => self.nu[i].value(),
            (false, true) => self.nu[j].value(),
            (false, false) => self.tau.value(),
        })
    }
}

/// Section of `S²T`: `(τ^{ab}, λ^a, ν)`, weight −2.
#[derive(Debug, Clone)]
pub struct S2Tractor {
    pub tau: Vec<Jet>,
    pub lambda: Vec<Jet>,
    pub nu: Jet,
}

impl S2Tractor {
    pub fn dim(&self) -> usize {
        self.lambda.len()
    }

    pub fn order(&self) -> usize {
        self.tau
            .iter()
            .chain(&self.lambda)
            .map(Jet::order)
            .fold(self.nu.order(), usize::min)
    }

    /// `(τ^{ab}, λ^a − τ^{ab}Υ_b, ν − 2λ^aΥ_a + τ^{ab}Υ_aΥ_b)`.
    pub fn change_scale(&self, ups: &[Jet]) -> S2Tractor {
        let n = self.dim();
        let o = self.order();
        let lambda = (0..n)
            .map(|a| {
                let mut l = self.lambda[a].clone();
                for b in 0..n {
                    l = &l - &(&self.tau[a * n + b] * &ups[b]);
                }
                trunc(l, o)
            })
            .collect();
        let mut nu = self.nu.clone();
        for a in 0..n {
            nu = &nu - &(&self.lambda[a] * &ups[a]).scale(2.0);
            for b in 0..n {
                nu = &nu + &(&self.tau[a * n + b] * &(&ups[a] * &ups[b]));
            }
        }
        S2Tractor {
            tau: self.tau.iter().map(|t| t.truncate(o)).collect(),
            lambda,
            nu: nu.truncate(o),
        }
    }

    /// `[[τ^{ab}, λ^a], [λ^b, ν]]`.
    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.dim();
        DMatrix::from_fn(n + 1, n + 1, |i, j| match (i < n, j < n) {
            (true, true) => self.tau[i * n + j].value(),
            (true, false) => self.lambda[i].value(),
            (false, true) => self.lambda[j].value(),
            (false, false) => self.nu.value(),
        })
    }

    /// Contraction with a cotractor pair, `h(t, t')`.
    pub fn pair(&self, t: &Cotractor, u: &Cotractor) -> f64 {
        let m = self.matrix();
        let (x, y) = (t.vector(), u.vector());
        let mut s = 0.0;
        for i in 0..x.len() {
            for j in 0..y.len() {
                s += x[i] * m[(i, j)] * y[j];
            }
        }
        s
    }
}

/// Rank and signature `(positive, negative)` of a bilinear tractor form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FormRank {
    pub rank: usize,
    pub positive: usize,
    pub negative: usize,
}

impl FormRank {
    pub fn indefinite(&self) -> bool {
        self.positive > 0 && self.negative > 0
    }
}

pub fn matrix_rank_signature(m: &DMatrix<f64>) -> FormRank {
    let n = m.nrows();
    let flat: Vec<f64> = (0..n * n).map(|k| m[(k / n, k % n)]).collect();
    let (rank, (positive, negative)) = rank_signature(n, &flat, RANK_TOL);
    FormRank {
        rank,
        positive,
        negative,
    }
}

/// As [`matrix_rank_signature`], ignoring eigenvalues below `floor`.
pub fn matrix_rank_signature_floor(m: &DMatrix<f64>, floor: f64) -> FormRank {
    let n = m.nrows();
    let flat: Vec<f64> = (0..n * n).map(|k| m[(k / n, k % n)]).collect();
    let (rank, (positive, negative)) = rank_signature_floor(n, &flat, RANK_TOL, floor);
    FormRank {
        rank,
        positive,
        negative,
    }
}

/// Rank and signature of `[[ρ_ab, ν_a], [ν_b, τ]]`.
pub fn tractor_form_rank_signature(s: &S2Cotractor) -> FormRank {
    matrix_rank_signature(&s.matrix())
}

/// Rank and signature of `[[τ^{ab}, λ^a], [λ^b, ν]]`.
pub fn dual_form_rank_signature(s: &S2Tractor) -> FormRank {
    matrix_rank_signature(&s.matrix())
}

/// `T*`-valued form of degree 0, 1 or 2: `top` has `n^k` entries and `bottom`
/// `n^{k+1}`, form indices first (skew for `k = 2`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StdForm {
    pub degree: usize,
    pub dim: usize,
    pub top: Vec<f64>,
    pub bottom: Vec<f64>,
}

/// `S²T*`-valued form; slot sizes `n^k`, `n^{k+1}`, `n^{k+2}`, the last two
/// indices of `bottom` symmetric.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct S2Form {
    pub degree: usize,
    pub dim: usize,
    pub top: Vec<f64>,
    pub middle: Vec<f64>,
    pub bottom: Vec<f64>,
}

/// One-form with values in `S²T`: `(A_a^{bc}, B_a^b, C_a)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct S2TractorForm {
    pub dim: usize,
    pub top: Vec<f64>,
    pub middle: Vec<f64>,
    pub bottom: Vec<f64>,
}

pub(crate) fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

impl StdForm {
    pub fn max_abs(&self) -> f64 {
        max_abs(&self.top).max(max_abs(&self.bottom))
    }

    /// One-forms: `(A_a, B_ab + Υ_bA_a)`.
    pub fn change_scale(&self, ups: &[f64]) -> StdForm {
        assert_eq!(self.degree, 1, "change of scale implemented for one-forms");
        let n = self.dim;
        let mut out = self.clone();
        for a in 0..n {
            for b in 0..n {
                out.bottom[a * n + b] += ups[b] * self.top[a];
            }
        }
        out
    }
}

impl S2Form {
    pub fn max_abs(&self) -> f64 {
        max_abs(&self.top)
            .max(max_abs(&self.middle))
            .max(max_abs(&self.bottom))
    }

    /// One-forms: `(A, B_ab + Υ_bA_a, C_abc + Υ_bB_ac + Υ_cB_ab + Υ_bΥ_cA_a)`.
    pub fn change_scale(&self, ups: &[f64]) -> S2Form {
        assert_eq!(self.degree, 1, "change of scale implemented for one-forms");
        let n = self.dim;
        let mut out = self.clone();
        for a in 0..n {
            for b in 0..n {
                out.middle[a * n + b] += ups[b] * self.top[a];
                for c in 0..n {
                    out.bottom[(a * n + b) * n + c] += ups[b] * self.middle[a * n + c]
                        + ups[c] * self.middle[a * n + b]
                        + ups[b] * ups[c] * self.top[a];
                }
            }
        }
        out
    }
}

impl S2TractorForm {
    pub fn max_abs(&self) -> f64 {
        max_abs(&self.top)
            .max(max_abs(&self.middle))
            .max(max_abs(&self.bottom))
    }

    /// `(A, B_a^b − A_a^{bc}Υ_c, C_a − 2B_a^bΥ_b + A_a^{bc}Υ_bΥ_c)`.
    pub fn change_scale(&self, ups: &[f64]) -> S2TractorForm {
        let n = self.dim;
        let mut out = self.clone();
        for a in 0..n {
            for b in 0..n {
                out.bottom[a] -= 2.0 * self.middle[a * n + b] * ups[b];
                for c in 0..n {
                    let t = self.top[(a * n + b) * n + c];
                    out.middle[a * n + b] -= t * ups[c];
                    out.bottom[a] += t * ups[b] * ups[c];
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn j(v: f64) -> Jet {
        Jet::constant(2, 0, v)
    }

    #[test]
    fn round_trips_are_exact_on_dyadic_data() {
        let s = S2Cotractor {
            tau: j(0.5),
            nu: vec![j(0.25), j(-1.0)],
            rho: vec![j(1.0), j(0.5), j(0.5), j(2.0)],
        };
        let u = [j(0.5), j(-0.25)];
        let back: Vec<Jet> = u.iter().map(|x| -x.clone()).collect();
        let r = s.change_scale(&u).change_scale(&back);
        assert_eq!(r.matrix(), s.matrix());
        let t = S2Tractor {
            tau: vec![j(1.0), j(0.5), j(0.5), j(2.0)],
            lambda: vec![j(0.25), j(-1.0)],
            nu: j(3.0),
        };
        assert_eq!(t.change_scale(&u).change_scale(&back).matrix(), t.matrix());
    }

    #[test]
    fn dual_pairing_is_scale_independent() {
        let c = Cotractor {
            sigma: j(0.7),
            mu: vec![j(0.2), j(-0.4)],
        };
        let d = Cotractor {
            sigma: j(-1.1),
            mu: vec![j(0.9), j(0.3)],
        };
        let h = S2Tractor {
            tau: vec![j(1.0), j(0.3), j(0.3), j(-2.0)],
            lambda: vec![j(0.5), j(0.1)],
            nu: j(0.4),
        };
        let u = [j(0.35), j(-0.8)];
        let before = h.pair(&c, &d);
        let after = h
            .change_scale(&u)
            .pair(&c.change_scale(&u), &d.change_scale(&u));
        assert!((before - after).abs() < 1e-14);
    }

    #[test]
    fn square_has_rank_one() {
        let c = Cotractor {
            sigma: j(0.7),
            mu: vec![j(0.2), j(-0.4)],
        };
        let r = tractor_form_rank_signature(&S2Cotractor::square(&c));
        assert_eq!((r.rank, r.positive, r.negative), (1, 1, 0));
    }
}
