//! Riemann, Ricci and Schouten tensors and weighted covariant derivatives.

use super::connection::{trace_form, Connection};
use super::metric::Metric;
use crate::error::{Error, Result};
use crate::fields::jet::{self, Jet};

/// `R^c_{dab}` indexed `[c][d][a][b]`, to `order` (needs Γ at `order + 1`).
pub fn riemann_jets(conn: &Connection, point: &[f64], order: usize) -> Result<Vec<Jet>> {
    let n = conn.dim();
    let g = conn.gamma_jets(point, order + 1)?;
    let gi = |c: usize, a: usize, b: usize| &g[c * n * n + a * n + b];
    let mut out = Vec::with_capacity(n.pow(4));
    for c in 0..n {
        for d in 0..n {
            for a in 0..n {
                for b in 0..n {
                    let mut r = &gi(c, b, d).partial(a) - &gi(c, a, d).partial(b);
                    for e in 0..n {
                        r = &r + &(gi(c, a, e) * gi(e, b, d)).truncate(order);
                        r = &r - &(gi(c, b, e) * gi(e, a, d)).truncate(order);
                    }
                    out.push(r);
                }
            }
        }
    }
    Ok(out)
}

/// `Ric_ab = R^c_{acb}`.
pub fn ricci_jets(conn: &Connection, point: &[f64], order: usize) -> Result<Vec<Jet>> {
    let n = conn.dim();
    let r = riemann_jets(conn, point, order)?;
    Ok(ricci_from_riemann(n, &r))
}

fn ricci_from_riemann(n: usize, r: &[Jet]) -> Vec<Jet> {
    let mut out = Vec::with_capacity(n * n);
    for a in 0..n {
        for b in 0..n {
            let terms: Vec<&Jet> = (0..n).map(|c| &r[((c * n + a) * n + c) * n + b]).collect();
            out.push(jet::sum(terms).unwrap());
        }
    }
    out
}

/// Riemann and Ricci values at a point.
pub fn riemann_ricci(conn: &Connection, point: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = conn.dim();
    let r = riemann_jets(conn, point, 0)?;
    let ric = ricci_from_riemann(n, &r);
    Ok((values(&r), values(&ric)))
}

/// `P_ab = Ric_(ab)/(dim − 1)`; only for special connections.
pub fn schouten_jets(conn: &Connection, point: &[f64], order: usize) -> Result<Vec<Jet>> {
    conn.require_special("the Schouten tensor")?;
    let n = conn.dim();
    let ric = ricci_jets(conn, point, order)?;
    Ok(schouten_from_ricci(n, &ric))
}

pub(crate) fn schouten_from_ricci(n: usize, ric: &[Jet]) -> Vec<Jet> {
    let s = 0.5 / (n - 1) as f64;
    let mut out = Vec::with_capacity(n * n);
    for a in 0..n {
        for b in 0..n {
            out.push((&ric[a * n + b] + &ric[b * n + a]).scale(s));
        }
    }
    out
}

pub fn schouten(conn: &Connection, point: &[f64]) -> Result<Vec<f64>> {
    Ok(values(&schouten_jets(conn, point, 0)?))
}

/// `g^{ab} Ric_ab` of the Levi-Civita connection.
pub fn scalar_curvature(g: &Metric, point: &[f64]) -> Result<f64> {
    let conn = Connection::levi_civita(g);
    let (_, ric) = riemann_ricci(&conn, point)?;
    let inv = g.inverse(point)?;
    Ok(inv.iter().zip(&ric).map(|(a, b)| a * b).sum())
}

pub fn values(j: &[Jet]) -> Vec<f64> {
    j.iter().map(Jet::value).collect()
}

/// Connection data at one point: Christoffel jets, the density form
/// `Γ^b_ba/(n+2)` and, when available, the Schouten tensor one order lower.
#[derive(Debug, Clone)]
pub struct ScaleAt {
    pub dim: usize,
    pub order: usize,
    pub gamma: Vec<Jet>,
    pub density_form: Vec<Jet>,
    pub schouten: Option<Vec<Jet>>,
}

impl ScaleAt {
    /// Evaluates `conn` at `point` with Γ to `order`; the Schouten tensor is
    /// included (to `order − 1`) for special connections when `order ≥ 1`.
    pub fn new(conn: &Connection, point: &[f64], order: usize) -> Result<ScaleAt> {
        let n = conn.dim();
        let gamma = conn.gamma_jets(point, order)?;
        let density_form = trace_form(n, &gamma);
        let schouten = if conn.is_special() && order >= 1 {
            let mut ric = Vec::with_capacity(n * n);
            let gi = |c: usize, a: usize, b: usize| &gamma[c * n * n + a * n + b];
            for a in 0..n {
                for b in 0..n {
                    // Ric_ab = ∂_cΓ^c_ba − ∂_bΓ^c_ca + Γ^c_ce Γ^e_ba − Γ^c_be Γ^e_ca
                    let mut r = Jet::constant(n, order - 1, 0.0);
                    for c in 0..n {
                        r = &r + &gi(c, b, a).partial(c);
                        r = &r - &gi(c, c, a).partial(b);
                        for e in 0..n {
                            r = &r + &(gi(c, c, e) * gi(e, b, a)).truncate(order - 1);
                            r = &r - &(gi(c, b, e) * gi(e, c, a)).truncate(order - 1);
                        }
                    }
                    ric.push(r);
                }
            }
            Some(schouten_from_ricci(n, &ric))
        } else {
            None
        };
        Ok(ScaleAt {
            dim: n,
            order,
            gamma,
            density_form,
            schouten,
        })
    }

    pub fn gamma(&self, c: usize, a: usize, b: usize) -> &Jet {
        &self.gamma[(c * self.dim + a) * self.dim + b]
    }

    pub fn schouten(&self) -> Result<&[Jet]> {
        self.schouten.as_deref().ok_or_else(|| {
            Error::precondition("Schouten tensor unavailable: scale is not special or order is 0")
        })
    }

    /// Weighted covariant derivative of a tensor with `up` contravariant and
    /// `down` covariant indices (contravariant first, row-major) and weight
    /// `w`, coefficients taken against the coordinate volume. The new index
    /// comes first in the result.
    pub fn covariant(&self, t: &[Jet], up: usize, down: usize, w: f64) -> Vec<Jet> {
        let n = self.dim;
        let rank = up + down;
        assert_eq!(t.len(), n.pow(rank as u32));
        let mut out = Vec::with_capacity(n * t.len());
        let mut multi = vec![0usize; rank];
        for a in 0..n {
            for (k, tk) in t.iter().enumerate() {
                let mut rem = k;
                for slot in multi.iter_mut().rev() {
                    *slot = rem % n;
                    rem /= n;
                }
                let mut r = tk.partial(a);
                if w != 0.0 {
                    let o = r.order();
                    r = &r + &(&self.density_form[a] * tk).truncate(o).scale(w);
                }
                for s in 0..rank {
                    let orig = multi[s];
                    let stride = n.pow((rank - 1 - s) as u32);
                    let base = k - orig * stride;
                    for e in 0..n {
                        let te = &t[base + e * stride];
                        let o = r.order();
                        if s < up {
                            r = &r + &(self.gamma(orig, a, e) * te).truncate(o);
                        } else {
                            r = &r - &(self.gamma(e, a, orig) * te).truncate(o);
                        }
                    }
                }
                out.push(r);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::fields::Chart;

    fn chart() -> Arc<Chart> {
        Arc::new(
            Chart::new(
                vec!["x".into(), "y".into()],
                vec![(-1.0, 1.0), (0.0, 2.0)],
                Some(1),
            )
            .unwrap(),
        )
    }

    #[test]
    fn half_plane_is_einstein_with_negative_constant() {
        let g = Metric::from_exprs(chart(), &["1/y^2", "0", "0", "1/y^2"], (2, 0)).unwrap();
        let lc = Connection::levi_civita(&g);
        let p = [0.3, 0.6];
        let (_, ric) = riemann_ricci(&lc, &p).unwrap();
        let gv = g.values(&p).unwrap();
        for k in 0..4 {
            assert!((ric[k] + gv[k]).abs() < 1e-12, "{ric:?}");
        }
        let pv = schouten(&lc, &p).unwrap();
        for k in 0..4 {
            assert!((pv[k] + gv[k]).abs() < 1e-12);
        }
        assert!((scalar_curvature(&g, &p).unwrap() + 2.0).abs() < 1e-12);
        let at = ScaleAt::new(&lc, &p, 1).unwrap();
        for (a, b) in at.schouten().unwrap().iter().zip(&gv) {
            assert!((a.value() + b).abs() < 1e-12);
        }
    }

    #[test]
    fn round_sphere_chart() {
        // Unit sphere in (θ, φ): Ric = g.
        let c = Arc::new(
            Chart::new(
                vec!["t".into(), "p".into()],
                vec![(0.1, 3.0), (0.0, 6.0)],
                None,
            )
            .unwrap(),
        );
        let g = Metric::from_exprs(c, &["1", "0", "0", "sin(t)^2"], (2, 0)).unwrap();
        let lc = Connection::levi_civita(&g);
        let p = [1.1, 2.0];
        let (_, ric) = riemann_ricci(&lc, &p).unwrap();
        let gv = g.values(&p).unwrap();
        for k in 0..4 {
            assert!((ric[k] - gv[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn covariant_derivative_of_metric_vanishes() {
        let c = chart();
        let g = Metric::from_exprs(c, &["1/y^2 + x^2", "x*y", "x*y", "2 + y"], (2, 0)).unwrap();
        let lc = Connection::levi_civita(&g);
        let p = [0.3, 0.6];
        let at = ScaleAt::new(&lc, &p, 1).unwrap();
        let gj = g.jets(&p, 1).unwrap();
        for d in at.covariant(&gj, 0, 2, 0.0) {
            assert!(d.value().abs() < 1e-12);
        }
        // The parallel volume is a weight −(n+2) density with zero derivative.
        let nu = lc.parallel_volume().unwrap().jet(&p, 1).unwrap();
        for d in at.covariant(&[nu], 0, 0, -3.0) {
            assert!(d.value().abs() < 1e-12);
        }
    }

    #[test]
    fn non_special_rejected() {
        let c = chart();
        let ups = crate::fields::OneForm::Components(vec![
            crate::fields::ScalarField::parse(&c, "y").unwrap(),
            crate::fields::ScalarField::constant(0.0),
        ]);
        let conn = Connection::flat(c).projective_change(ups);
        assert!(matches!(
            schouten(&conn, &[0.0, 1.0]),
            Err(Error::Precondition(_))
        ));
    }
}
