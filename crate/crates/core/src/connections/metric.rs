use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fields::jet::Jet;
use crate::fields::{Chart, ScalarField, Symmetry, TensorField};
use crate::linalg::{det_jets, invert_jets, rank_signature};

/// A pseudo-Riemannian metric `g_ab` with declared signature (p, q).
#[derive(Debug, Clone)]
pub struct Metric {
    g: TensorField,
    signature: (usize, usize),
}

impl Metric {
    pub fn new(g: TensorField, signature: (usize, usize)) -> Result<Metric> {
        if g.valence() != (0, 2) || g.weight() != 0.0 {
            return Err(Error::shape("a metric is an unweighted (0,2) tensor"));
        }
        if signature.0 + signature.1 != g.dim() {
            return Err(Error::invalid(format!(
                "signature ({}, {}) does not add up to dimension {}",
                signature.0,
                signature.1,
                g.dim()
            )));
        }
        let g = if g.symmetries().contains(&Symmetry::Symmetric(0, 1)) {
            g
        } else {
            let mut sym = g.symmetries().to_vec();
            sym.push(Symmetry::Symmetric(0, 1));
            TensorField::new(g.chart().clone(), (0, 2), 0.0, g.components().to_vec(), sym)?
        };
        Ok(Metric { g, signature })
    }

    /// Row-major component expressions.
    pub fn from_exprs(
        chart: Arc<Chart>,
        texts: &[&str],
        signature: (usize, usize),
    ) -> Result<Metric> {
        let g =
            TensorField::from_exprs(chart, (0, 2), 0.0, texts, vec![Symmetry::Symmetric(0, 1)])?;
        Metric::new(g, signature)
    }

    pub fn chart(&self) -> &Arc<Chart> {
        self.g.chart()
    }

    pub fn dim(&self) -> usize {
        self.g.dim()
    }

    pub fn signature(&self) -> (usize, usize) {
        self.signature
    }

    pub fn tensor(&self) -> &TensorField {
        &self.g
    }

    pub fn jets(&self, point: &[f64], order: usize) -> Result<Vec<Jet>> {
        self.g.eval_jet(point, order)
    }

    pub fn values(&self, point: &[f64]) -> Result<Vec<f64>> {
        self.g.values(point)
    }

    /// Jets of `g^{ab}`.
    pub fn inverse_jets(&self, point: &[f64], order: usize) -> Result<Vec<Jet>> {
        let g = self.jets(point, order)?;
        invert_jets(self.dim(), &g).ok_or_else(|| Error::Degenerate {
            what: "metric".into(),
            point: point.to_vec(),
        })
    }

    pub fn inverse(&self, point: &[f64]) -> Result<Vec<f64>> {
        Ok(self
            .inverse_jets(point, 0)?
            .iter()
            .map(Jet::value)
            .collect())
    }

    /// `√|det g|`, the Levi-Civita parallel volume in coordinates.
    pub fn volume(&self) -> ScalarField {
        let m = self.clone();
        ScalarField::derived("sqrt|det g|", move |p, k| {
            let g = m.jets(p, k)?;
            let d = det_jets(m.dim(), &g);
            if d.value() == 0.0 {
                return Err(Error::Degenerate {
                    what: "metric".into(),
                    point: p.to_vec(),
                });
            }
            Ok(if d.value() < 0.0 { -d } else { d }.sqrt())
        })
    }

    /// Eigenvalue sign counts at `point`.
    pub fn signature_at(&self, point: &[f64]) -> Result<(usize, usize)> {
        let n = self.dim();
        let (rank, sig) = rank_signature(n, &self.values(point)?, 1e-12);
        if rank < n {
            return Err(Error::Degenerate {
                what: "metric".into(),
                point: point.to_vec(),
            });
        }
        Ok(sig)
    }

    /// `g(v, v)` at `point`.
    pub fn norm2(&self, point: &[f64], v: &[f64]) -> Result<f64> {
        let g = self.values(point)?;
        let n = self.dim();
        Ok((0..n)
            .flat_map(|a| (0..n).map(move |b| (a, b)))
            .map(|(a, b)| g[a * n + b] * v[a] * v[b])
            .sum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn half_plane() -> Metric {
        let c = Arc::new(
            Chart::new(
                vec!["x".into(), "y".into()],
                vec![(-1.0, 1.0), (0.0, 2.0)],
                Some(1),
            )
            .unwrap(),
        );
        Metric::from_exprs(c, &["1/y^2", "0", "0", "1/y^2"], (2, 0)).unwrap()
    }

    #[test]
    fn inverse_and_volume() {
        let g = half_plane();
        let inv = g.inverse(&[0.1, 0.5]).unwrap();
        assert!((inv[0] - 0.25).abs() < 1e-15 && inv[1] == 0.0);
        let v = g.volume().jet(&[0.1, 0.5], 1).unwrap();
        assert!((v.value() - 4.0).abs() < 1e-14);
        assert!((v.d1(1) + 16.0).abs() < 1e-12);
        assert_eq!(g.signature_at(&[0.1, 0.5]).unwrap(), (2, 0));
    }

    #[test]
    fn signature_must_match_dimension() {
        let c =
            Arc::new(Chart::new(vec!["x".into(), "y".into()], vec![(-1.0, 1.0); 2], None).unwrap());
        assert!(Metric::from_exprs(c, &["1", "0", "0", "1"], (1, 0)).is_err());
    }
}
