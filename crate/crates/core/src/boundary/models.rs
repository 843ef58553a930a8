//! Built-in model geometries.

use std::sync::Arc;

use rand::Rng;
use serde::Serialize;

use crate::connections::{Connection, Metric};
use crate::error::{Error, Result};
use crate::fields::{Chart, ScalarField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Hyperbolic,
    FlatHemisphere,
    ConformalToy,
    BumpedHyperbolic,
    Custom,
}

/// Where a built-in constant or formula comes from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub name: String,
    pub value: String,
    pub source: String,
}

fn prov(name: &str, value: impl Into<String>, source: &str) -> Provenance {
    Provenance {
        name: name.into(),
        value: value.into(),
        source: source.into(),
    }
}

#[derive(Debug, Clone)]
pub struct ModelMetric {
    pub kind: ModelKind,
    pub signature: (usize, usize),
    pub chart: Arc<Chart>,
    pub metric: Metric,
    pub rho: ScalarField,
    pub provenance: Vec<Provenance>,
}

impl ModelMetric {
    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    /// `n`, the boundary dimension.
    pub fn n(&self) -> usize {
        self.dim() - 1
    }

    pub fn connection(&self) -> Connection {
        Connection::levi_civita(&self.metric)
    }

    /// Uniform interior points, kept a tenth of each span away from the box
    /// faces.
    pub fn random_interior_points<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        count: usize,
    ) -> Vec<Vec<f64>> {
        (0..count)
            .map(|_| self.chart.random_interior_point(rng, 0.1))
            .collect()
    }

    pub fn boundary_point(&self, tangential: &[f64]) -> Result<Vec<f64>> {
        self.chart.with_boundary_coord(tangential, 0.0)
    }

    pub fn custom(chart: Arc<Chart>, metric: Metric, rho: ScalarField) -> ModelMetric {
        ModelMetric {
            kind: ModelKind::Custom,
            signature: metric.signature(),
            chart,
            metric,
            rho,
            provenance: Vec::new(),
        }
    }
}

fn metric_from_strings(
    chart: &Arc<Chart>,
    comps: &[String],
    signature: (usize, usize),
) -> Result<Metric> {
    let refs: Vec<&str> = comps.iter().map(String::as_str).collect();
    Metric::from_exprs(chart.clone(), &refs, signature)
}

/// Half-space model in `(x_1..x_n, ρ)` with `ρ = y²`:
/// `g = Σdx_i²/ρ + dρ²/(4ρ²)`, Einstein with `Ric = −n g`.
pub fn make_hyperbolic(n: usize) -> Result<ModelMetric> {
    make_scaled_hyperbolic(n, None)
}

/// Hyperbolic model with the conformal factor `1 + a·exp(−|x|² − (ρ − 1)²)/…`
/// inserted: not Einstein for `a ≠ 0`.
pub fn make_bumped_hyperbolic(n: usize, amplitude: f64) -> Result<ModelMetric> {
    make_scaled_hyperbolic(n, Some(amplitude))
}

fn make_scaled_hyperbolic(n: usize, bump: Option<f64>) -> Result<ModelMetric> {
    if n < 1 {
        return Err(Error::invalid("hyperbolic model needs n >= 1"));
    }
    let mut names: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
    names.push("rho".into());
    let mut domain = vec![(-2.0, 2.0); n];
    domain.push((0.0, 2.0));
    let chart = Arc::new(Chart::new(names, domain, Some(n))?);
    let d = n + 1;
    let factor = match bump {
        Some(a) => {
            let xs: Vec<String> = (1..=n).map(|i| format!("x{i}^2")).collect();
            format!("(1 + {a}*exp(-({} + (rho - 1)^2)/0.5))*", xs.join(" + "))
        }
        None => String::new(),
    };
    let mut comps = vec!["0".to_string(); d * d];
    for i in 0..n {
        comps[i * d + i] = format!("{factor}1/rho");
    }
    comps[n * d + n] = format!("{factor}1/(4*rho^2)");
    let metric = metric_from_strings(&chart, &comps, (d, 0))?;
    let rho = ScalarField::coordinate(&chart, n);
    let mut provenance = vec![
        prov(
            "g",
            "sum dx_i^2/rho + drho^2/(4 rho^2)",
            "half-space metric (|dx|^2 + dy^2)/y^2 with rho = y^2",
        ),
        prov("Ric", format!("-{n} g"), "constant curvature -1"),
        prov(
            "R",
            format!("{}", -((n * (n + 1)) as f64)),
            "trace of Ric = -n g",
        ),
        prov("parallel volume", "rho^(-(n+3)/2)/2", "sqrt(det g)"),
    ];
    let kind = if let Some(a) = bump {
        provenance.push(prov(
            "bump",
            format!("{a}"),
            "conformal factor breaking the Einstein condition",
        ));
        ModelKind::BumpedHyperbolic
    } else {
        ModelKind::Hyperbolic
    };
    Ok(ModelMetric {
        kind,
        signature: (d, 0),
        chart,
        metric,
        rho,
        provenance,
    })
}

/// Flat metric of signature (p, q) on `R^{n+1}` pulled back by the central
/// projection `y_i = u_i/u_0`, `y_{n+1} = 1/u_0`. The boundary `u_0 = 0` is the
/// equator of the hemisphere. Negative directions are the last `q` of
/// `y_1..y_{n+1}`.
pub fn make_flat_hemisphere(signature: (usize, usize), n: usize) -> Result<ModelMetric> {
    let (p, q) = signature;
    if n < 1 || p + q != n + 1 {
        return Err(Error::invalid(format!(
            "signature ({p}, {q}) is invalid for dimension {}",
            n + 1
        )));
    }
    let eps: Vec<f64> = (0..=n).map(|k| if k < p { 1.0 } else { -1.0 }).collect();
    let names: Vec<String> = (0..=n).map(|i| format!("u{i}")).collect();
    let mut domain = vec![(-2.0, 2.0); n + 1];
    domain[0] = (0.0, 1.0);
    let chart = Arc::new(Chart::new(names, domain, Some(0))?);
    let d = n + 1;
    let sign = |e: f64| if e > 0.0 { "" } else { "-" };
    let mut comps = vec!["0".to_string(); d * d];
    let mut g00: Vec<String> = (1..=n)
        .map(|i| format!("{}u{i}^2", sign(eps[i - 1])))
        .collect();
    g00.push(format!("{}1", sign(eps[n])));
    let mut sum = g00[0].clone();
    for t in &g00[1..] {
        match t.strip_prefix('-') {
            Some(rest) => sum = format!("{sum} - {rest}"),
            None => sum = format!("{sum} + {t}"),
        }
    }
    comps[0] = format!("({sum})/u0^4");
    for i in 1..=n {
        let s = if eps[i - 1] > 0.0 { "-" } else { "" };
        comps[i] = format!("{s}u{i}/u0^3");
        comps[i * d] = comps[i].clone();
        comps[i * d + i] = format!("{}1/u0^2", sign(eps[i - 1]));
    }
    let metric = metric_from_strings(&chart, &comps, signature)?;
    let rho = ScalarField::coordinate(&chart, 0);
    let layout: Vec<String> = eps
        .iter()
        .map(|e| if *e > 0.0 { "+" } else { "-" }.to_string())
        .collect();
    let provenance = vec![
        prov(
            "g",
            format!(
                "pullback of the flat metric with signs ({}) on (y_1..y_{})",
                layout.join(","),
                n + 1
            ),
            "central projection y_i = u_i/u_0, y_(n+1) = 1/u_0",
        ),
        prov(
            "signature layout",
            layout.join(","),
            "negative directions are the last q of y_1..y_(n+1)",
        ),
        prov("Riemann", "0", "pullback of a flat metric"),
        prov(
            "parallel volume",
            "u0^(-(n+2))",
            "Jacobian of the central projection",
        ),
        prov(
            "equator",
            "|u| = 1 when q = 1",
            "null cone of the flat metric meets the boundary there",
        ),
    ];
    Ok(ModelMetric {
        kind: ModelKind::FlatHemisphere,
        signature,
        chart,
        metric,
        rho,
        provenance,
    })
}

/// `g = (dρ² + Σdx_i²)/ρ²`, whose volume grows like `ρ^{-(n+1)}`.
pub fn make_conformal_toy(n: usize) -> Result<ModelMetric> {
    if n < 1 {
        return Err(Error::invalid("conformal toy needs n >= 1"));
    }
    let mut names: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
    names.push("rho".into());
    let mut domain = vec![(-2.0, 2.0); n];
    domain.push((0.0, 2.0));
    let chart = Arc::new(Chart::new(names, domain, Some(n))?);
    let d = n + 1;
    let mut comps = vec!["0".to_string(); d * d];
    for i in 0..d {
        comps[i * d + i] = "1/rho^2".into();
    }
    let metric = metric_from_strings(&chart, &comps, (d, 0))?;
    let rho = ScalarField::coordinate(&chart, n);
    Ok(ModelMetric {
        kind: ModelKind::ConformalToy,
        signature: (d, 0),
        chart,
        metric,
        rho,
        provenance: vec![
            prov(
                "g",
                "(drho^2 + |dx|^2)/rho^2",
                "conformally compact half-space",
            ),
            prov("parallel volume", "rho^(-(n+1))", "sqrt(det g)"),
        ],
    })
}
