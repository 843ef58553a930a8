//! Scenario files.
//!
//! A scenario is a TOML file with the sections `[metric]`,
//! `[defining_function]`, `[task]` and `[tolerances]`; every key is optional
//! except the metric. See the README for the schema.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::boundary::{
    make_bumped_hyperbolic, make_conformal_toy, make_flat_hemisphere, make_hyperbolic, ModelMetric,
};
use crate::connections::Metric;
use crate::error::{Error, Result};
use crate::fields::extrapolate::{ExtrapolationOptions, RayOptions};
use crate::fields::{Chart, ScalarField};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub seed: Option<u64>,
    pub metric: MetricSpec,
    #[serde(default)]
    pub defining_function: Option<DefiningFunction>,
    #[serde(default)]
    pub task: TaskParams,
    #[serde(default)]
    pub tolerances: Tolerances,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Builtin {
    Hyperbolic,
    BumpedHyperbolic,
    FlatHemisphere,
    ConformalToy,
}

/// Either a built-in model or custom components over a chart.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricSpec {
    pub builtin: Option<Builtin>,
    /// Boundary dimension of a built-in model.
    pub n: Option<usize>,
    /// `(p, q)`; required for custom metrics, optional for the hemisphere.
    pub signature: Option<[usize; 2]>,
    /// Bump amplitude of `bumped_hyperbolic`.
    pub amplitude: Option<f64>,
    pub coords: Option<Vec<String>>,
    pub domain: Option<Vec<[f64; 2]>>,
    /// Name of the boundary coordinate.
    pub boundary: Option<String>,
    /// Row-major component expressions.
    pub components: Option<Vec<String>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DefiningFunction {
    pub expr: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BggKind {
    E1,
    E2,
    Metricity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AsymptoticsKind {
    Auto,
    Einstein,
    RicciFlat,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TaskParams {
    pub alpha: Option<f64>,
    /// Tangential coordinates of boundary base points.
    pub base_points: Option<Vec<Vec<f64>>>,
    /// Number of random base points (or interior points, or geodesics) when
    /// none are listed.
    pub samples: usize,
    /// Interior points for `bgg`.
    pub points: Option<Vec<Vec<f64>>>,
    pub bgg_kind: BggKind,
    /// Density to test; defaults to the connection's own scale.
    pub density: Option<String>,
    /// `[x0, v0]` pairs for `geodesics`.
    pub initial: Option<Vec<[Vec<f64>; 2]>>,
    pub t_max: f64,
    /// Cutoffs for the divergence test; empty to skip.
    pub cutoffs: Vec<f64>,
    pub asymptotics: AsymptoticsKind,
    /// Tangential patch `[[lo, hi], ...]` for normalization.
    pub patch: Option<Vec<[f64; 2]>>,
    pub degree: Option<usize>,
    pub nodes: Option<usize>,
}

impl Default for TaskParams {
    fn default() -> Self {
        TaskParams {
            alpha: None,
            base_points: None,
            samples: 8,
            points: None,
            bgg_kind: BggKind::E1,
            density: None,
            initial: None,
            t_max: 10.0,
            cutoffs: vec![],
            asymptotics: AsymptoticsKind::Auto,
            patch: None,
            degree: None,
            nodes: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Relative residual of the boundary fits.
    pub extrapolation: f64,
    /// First ladder step as a fraction of the boundary-coordinate span.
    pub eps_fraction: f64,
    pub ladder: usize,
    pub refinements: usize,
    pub geodesic_rtol: f64,
    pub approach_slope: f64,
    pub approach_r2: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            extrapolation: 1e-6,
            eps_fraction: 0.1,
            ladder: 6,
            refinements: 3,
            geodesic_rtol: 1e-9,
            approach_slope: 0.02,
            approach_r2: 0.999,
        }
    }
}

fn positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "tolerances.{name} must be positive, got {x}"
        )))
    }
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Scenario> {
        let s: Scenario = toml::from_str(text)
            .map_err(|e| Error::invalid(format!("config: {}", e.to_string().trim_end())))?;
        s.validate()?;
        Ok(s)
    }

    fn validate(&self) -> Result<()> {
        let t = &self.tolerances;
        positive("extrapolation", t.extrapolation)?;
        positive("eps_fraction", t.eps_fraction)?;
        positive("geodesic_rtol", t.geodesic_rtol)?;
        positive("approach_slope", t.approach_slope)?;
        positive("approach_r2", t.approach_r2)?;
        if t.ladder < 4 {
            return Err(Error::invalid("tolerances.ladder must be at least 4"));
        }
        if t.eps_fraction > 1.0 {
            return Err(Error::invalid("tolerances.eps_fraction must not exceed 1"));
        }
        if let Some(a) = self.task.alpha {
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::invalid(format!(
                    "task.alpha must be positive, got {a}"
                )));
            }
        }
        Ok(())
    }

    /// Resolves the metric and defining function.
    pub fn model(&self) -> Result<ModelMetric> {
        let m = &self.metric;
        let mut model = match m.builtin {
            Some(b) => {
                if m.components.is_some() || m.coords.is_some() {
                    return Err(Error::invalid(
                        "metric: give either builtin or components, not both",
                    ));
                }
                let n = m.n.unwrap_or(1);
                match b {
                    Builtin::Hyperbolic => make_hyperbolic(n)?,
                    Builtin::BumpedHyperbolic => {
                        make_bumped_hyperbolic(n, m.amplitude.unwrap_or(0.5))?
                    }
                    Builtin::FlatHemisphere => {
                        let sig = m.signature.map_or((n + 1, 0), |s| (s[0], s[1]));
                        make_flat_hemisphere(sig, n)?
                    }
                    Builtin::ConformalToy => make_conformal_toy(n)?,
                }
            }
            None => self.custom_model()?,
        };
        if let Some(df) = &self.defining_function {
            model.rho = ScalarField::parse(&model.chart, &df.expr)
                .map_err(|e| Error::invalid(format!("defining_function.expr: {e}")))?;
        }
        Ok(model)
    }

    fn custom_model(&self) -> Result<ModelMetric> {
        let m = &self.metric;
        let missing =
            |k: &str| Error::invalid(format!("metric.{k} is required for a custom metric"));
        let coords = m.coords.clone().ok_or_else(|| missing("coords"))?;
        let domain = m.domain.clone().ok_or_else(|| missing("domain"))?;
        let comps = m.components.as_ref().ok_or_else(|| missing("components"))?;
        let sig = m.signature.ok_or_else(|| missing("signature"))?;
        let boundary = match &m.boundary {
            Some(b) => Some(coords.iter().position(|c| c == b).ok_or_else(|| {
                Error::invalid(format!("metric.boundary: `{b}` is not a coordinate"))
            })?),
            None => None,
        };
        let chart = Arc::new(Chart::new(
            coords,
            domain.iter().map(|d| (d[0], d[1])).collect(),
            boundary,
        )?);
        let d = chart.dim();
        if comps.len() != d * d {
            return Err(Error::invalid(format!(
                "metric.components: {} entries, expected {}",
                comps.len(),
                d * d
            )));
        }
        let mut fields = Vec::with_capacity(d * d);
        for (k, c) in comps.iter().enumerate() {
            fields.push(
                ScalarField::parse(&chart, c)
                    .map_err(|e| Error::invalid(format!("metric.components[{k}]: {e}")))?,
            );
        }
        for a in 0..d {
            for b in a + 1..d {
                let (x, y) = (&fields[a * d + b], &fields[b * d + a]);
                if x.expr() != y.expr() {
                    return Err(Error::invalid(format!(
                        "metric.components: entries ({a},{b}) and ({b},{a}) differ"
                    )));
                }
            }
        }
        let refs: Vec<&str> = comps.iter().map(String::as_str).collect();
        let metric = Metric::from_exprs(chart.clone(), &refs, (sig[0], sig[1]))?;
        let rho = match boundary {
            Some(b) => ScalarField::coordinate(&chart, b),
            None => ScalarField::constant(1.0),
        };
        Ok(ModelMetric::custom(chart, metric, rho))
    }

    pub fn ray_options(&self, chart: &Chart) -> Result<RayOptions> {
        let b = chart.require_boundary()?;
        let t = &self.tolerances;
        Ok(RayOptions {
            eps0: t.eps_fraction * chart.span(b),
            k: t.ladder,
            refinements: t.refinements,
            extrapolation: ExtrapolationOptions {
                tol: t.extrapolation,
                fit_order: 2,
            },
        })
    }

    /// Listed base points, or `task.samples` uniform ones from the seed.
    pub fn base_points(&self, model: &ModelMetric, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<f64>>> {
        let chart = &model.chart;
        let b = chart.require_boundary()?;
        match &self.task.base_points {
            Some(list) => list
                .iter()
                .enumerate()
                .map(|(i, t)| {
                    chart
                        .with_boundary_coord(t, 0.0)
                        .map_err(|e| Error::invalid(format!("task.base_points[{i}]: {e}")))
                })
                .collect(),
            None => Ok((0..self.task.samples)
                .map(|_| {
                    let t: Vec<f64> = chart
                        .domain()
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| *i != b)
                        .map(|(_, &(lo, hi))| {
                            let m = 0.1 * (hi - lo);
                            rng.random_range(lo + m..hi - m)
                        })
                        .collect();
                    chart.with_boundary_coord(&t, 0.0).unwrap()
                })
                .collect()),
        }
    }

    pub fn rng(&self, seed: Option<u64>) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed.or(self.seed).unwrap_or(0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_scenario() {
        let s =
            Scenario::from_toml("[metric]\nbuiltin = \"hyperbolic\"\nn = 2\n[task]\nalpha = 2.0\n")
                .unwrap();
        let m = s.model().unwrap();
        assert_eq!(m.dim(), 3);
        assert_eq!(s.task.alpha, Some(2.0));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let e = Scenario::from_toml("[metric]\nbuiltin = \"hyperbolic\"\nbogus = 1\n").unwrap_err();
        assert!(e.to_string().contains("bogus"), "{e}");
    }

    #[test]
    fn custom_metric_errors_carry_paths() {
        let text = r#"
[metric]
coords = ["x", "r"]
domain = [[-1, 1], [0, 1]]
boundary = "r"
signature = [2, 0]
components = ["1/r", "0", "0", "1/(4*r^^2)"]
"#;
        let e = Scenario::from_toml(text).unwrap().model().unwrap_err();
        let msg = e.to_string();
        assert!(
            msg.contains("metric.components[3]") && msg.contains("byte"),
            "{msg}"
        );
    }

    #[test]
    fn asymmetric_components_rejected() {
        let text = r#"
[metric]
coords = ["x", "r"]
domain = [[-1, 1], [0, 1]]
boundary = "r"
signature = [2, 0]
components = ["1/r", "x", "0", "1/(4*r^2)"]
"#;
        assert!(Scenario::from_toml(text).unwrap().model().is_err());
    }

    #[test]
    fn tolerances_must_be_positive() {
        assert!(Scenario::from_toml(
            "[metric]\nbuiltin = \"hyperbolic\"\n[tolerances]\nextrapolation = -1.0\n"
        )
        .is_err());
    }
}
