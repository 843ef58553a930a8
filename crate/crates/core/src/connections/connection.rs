use std::sync::Arc;

use super::metric::Metric;
use crate::error::{Error, Result};
use crate::fields::jet::{self, Jet};
use crate::fields::{Chart, OneForm, ScalarField};

#[derive(Debug, Clone)]
pub enum ConnectionKind {
    LeviCivita(Metric),
    /// Christoffel components indexed `[c][a][b]`.
    Explicit(Vec<ScalarField>),
    /// `base + Σ Υ_i`; nested changes are flattened into one list.
    Projective {
        base: Arc<Connection>,
        upsilons: Vec<OneForm>,
    },
}

/// A torsion-free linear connection on a chart.
#[derive(Debug, Clone)]
pub struct Connection {
    chart: Arc<Chart>,
    kind: ConnectionKind,
    is_special: bool,
    parallel_volume: Option<ScalarField>,
}

impl Connection {
    /// Levi-Civita connection via the Koszul formula; special with parallel
    /// volume `√|det g|`.
    pub fn levi_civita(g: &Metric) -> Connection {
        Connection {
            chart: g.chart().clone(),
            kind: ConnectionKind::LeviCivita(g.clone()),
            is_special: true,
            parallel_volume: Some(g.volume()),
        }
    }

    /// Connection from explicit Christoffel symbols `[c][a][b]`. Supplying a
    /// parallel volume marks it special.
    pub fn explicit(
        chart: Arc<Chart>,
        gamma: Vec<ScalarField>,
        parallel_volume: Option<ScalarField>,
    ) -> Result<Connection> {
        let n = chart.dim();
        if gamma.len() != n * n * n {
            return Err(Error::shape(format!(
                "{} Christoffel components, expected {}",
                gamma.len(),
                n * n * n
            )));
        }
        Ok(Connection {
            chart,
            kind: ConnectionKind::Explicit(gamma),
            is_special: parallel_volume.is_some(),
            parallel_volume,
        })
    }

    /// The coordinate connection `Γ = 0`, parallel volume 1.
    pub fn flat(chart: Arc<Chart>) -> Connection {
        let n = chart.dim();
        Connection::explicit(
            chart,
            vec![ScalarField::constant(0.0); n * n * n],
            Some(ScalarField::constant(1.0)),
        )
        .unwrap()
    }

    pub fn chart(&self) -> &Arc<Chart> {
        &self.chart
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    pub fn kind(&self) -> &ConnectionKind {
        &self.kind
    }

    pub fn is_special(&self) -> bool {
        self.is_special
    }

    pub fn parallel_volume(&self) -> Option<&ScalarField> {
        self.parallel_volume.as_ref()
    }

    pub fn metric(&self) -> Option<&Metric> {
        match &self.kind {
            ConnectionKind::LeviCivita(g) => Some(g),
            _ => None,
        }
    }

    pub(crate) fn require_special(&self, what: &str) -> Result<()> {
        if self.is_special {
            Ok(())
        } else {
            Err(Error::precondition(format!(
                "{what} needs a special connection"
            )))
        }
    }

    /// `Γ̂^c_ab = Γ^c_ab + Υ_a δ^c_b + Υ_b δ^c_a`.
    ///
    /// When the base is special and every accumulated Υ is exact, `Υ = dF`,
    /// the result is special with parallel volume `ν·e^{(n+2)F}`.
    pub fn projective_change(&self, upsilon: OneForm) -> Connection {
        let (base, mut upsilons) = match &self.kind {
            ConnectionKind::Projective { base, upsilons } => (base.clone(), upsilons.clone()),
            _ => (Arc::new(self.clone()), Vec::new()),
        };
        upsilons.push(upsilon);
        let potentials: Option<Vec<&ScalarField>> =
            upsilons.iter().map(OneForm::potential).collect();
        let parallel_volume = match (potentials, base.parallel_volume()) {
            (Some(pots), Some(nu)) if base.is_special => {
                let total = pots[1..].iter().fold(pots[0].clone(), |acc, f| acc.add(f));
                Some(nu.mul(&total.scale((self.dim() + 1) as f64).exp()))
            }
            _ => None,
        };
        Connection {
            chart: self.chart.clone(),
            kind: ConnectionKind::Projective { base, upsilons },
            is_special: parallel_volume.is_some(),
            parallel_volume,
        }
    }

    /// Christoffel jets `[c][a][b]` at `point` to `order`.
    pub fn gamma_jets(&self, point: &[f64], order: usize) -> Result<Vec<Jet>> {
        let n = self.dim();
        match &self.kind {
            ConnectionKind::LeviCivita(g) => {
                if order + 1 > jet::MAX_ORDER {
                    return Err(Error::OrderTooHigh {
                        requested: order + 1,
                        max: jet::MAX_ORDER,
                    });
                }
                let gj = g.jets(point, order + 1)?;
                let ginv: Vec<Jet> = g.inverse_jets(point, order)?;
                // dg[a][b][d] = ∂_a g_bd
                let mut dg = Vec::with_capacity(n * n * n);
                for a in 0..n {
                    for bd in 0..n * n {
                        dg.push(gj[bd].partial(a));
                    }
                }
                let idx = |a: usize, b: usize, d: usize| a * n * n + b * n + d;
                let mut out = Vec::with_capacity(n * n * n);
                for c in 0..n {
                    for a in 0..n {
                        for b in 0..n {
                            let terms: Vec<Jet> = (0..n)
                                .map(|d| {
                                    let k = &(&dg[idx(a, b, d)] + &dg[idx(b, a, d)])
                                        - &dg[idx(d, a, b)];
                                    &ginv[c * n + d] * &k
                                })
                                .collect();
                            out.push(jet::sum(&terms).unwrap().scale(0.5));
                        }
                    }
                }
                Ok(out)
            }
            ConnectionKind::Explicit(gamma) => gamma.iter().map(|f| f.jet(point, order)).collect(),
            ConnectionKind::Projective { base, upsilons } => {
                let mut out = base.gamma_jets(point, order)?;
                let mut ups = upsilons[0].jets(point, order)?;
                for u in &upsilons[1..] {
                    let more = u.jets(point, order)?;
                    for (a, b) in ups.iter_mut().zip(&more) {
                        *a = &*a + b;
                    }
                }
                for c in 0..n {
                    for a in 0..n {
                        for b in 0..n {
                            let k = c * n * n + a * n + b;
                            if b == c {
                                out[k] = &out[k] + &ups[a];
                            }
                            if a == c {
                                out[k] = &out[k] + &ups[b];
                            }
                        }
                    }
                }
                Ok(out)
            }
        }
    }

    pub fn christoffel(&self, point: &[f64]) -> Result<Vec<f64>> {
        Ok(self.gamma_jets(point, 0)?.iter().map(Jet::value).collect())
    }

    /// Largest `|Γ^c_ab − Γ^c_ba|` at `point`.
    pub fn torsion_defect(&self, point: &[f64]) -> Result<f64> {
        let n = self.dim();
        let g = self.christoffel(point)?;
        let mut worst: f64 = 0.0;
        for c in 0..n {
            for a in 0..n {
                for b in 0..n {
                    worst = worst.max((g[c * n * n + a * n + b] - g[c * n * n + b * n + a]).abs());
                }
            }
        }
        Ok(worst)
    }

    /// Largest `|∂_a ν − ν Γ^b_ba|` at `point`, relative to `max(|ν|, |∂ν|)`.
    pub fn parallel_volume_defect(&self, point: &[f64]) -> Result<f64> {
        let nu = self
            .parallel_volume
            .as_ref()
            .ok_or_else(|| Error::precondition("connection has no parallel volume"))?
            .jet(point, 1)?;
        let n = self.dim();
        let g = self.christoffel(point)?;
        let mut worst: f64 = 0.0;
        let mut scale = nu.value().abs();
        for a in 0..n {
            let trace: f64 = (0..n).map(|b| g[b * n * n + b * n + a]).sum();
            scale = scale.max(nu.d1(a).abs());
            worst = worst.max((nu.d1(a) - nu.value() * trace).abs());
        }
        Ok(worst / scale.max(f64::MIN_POSITIVE))
    }

    /// Trace one-form `Γ^b_ba/(n+2)`: the shift of this connection against
    /// the coordinate connection on densities.
    pub fn density_form_jets(&self, point: &[f64], order: usize) -> Result<Vec<Jet>> {
        let gamma = self.gamma_jets(point, order)?;
        Ok(trace_form(self.dim(), &gamma))
    }
}

pub(crate) fn trace_form(n: usize, gamma: &[Jet]) -> Vec<Jet> {
    (0..n)
        .map(|a| {
            let terms: Vec<&Jet> = (0..n).map(|b| &gamma[b * n * n + b * n + a]).collect();
            jet::sum(terms).unwrap().scale(1.0 / (n + 1) as f64)
        })
        .collect()
}
