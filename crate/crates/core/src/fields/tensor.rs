//! Scalar and tensor fields on a chart, evaluable to jets.

use std::fmt;
use std::sync::Arc;

use super::chart::Chart;
use super::expr::{Expr, Func};
use super::jet::{Jet, MAX_ORDER};
use crate::error::{Error, Result};

type JetFn = dyn Fn(&[f64], usize) -> Result<Jet> + Send + Sync;

enum Inner {
    Const(f64),
    Expr { expr: Expr, names: Arc<[String]> },
    Derived { label: String, f: Box<JetFn> },
}

/// A smooth function on a chart. Expression-backed fields evaluate exactly to
/// order three; derived fields are closures over other fields and carry as
/// many derivatives as their inputs allow.
#[derive(Clone)]
pub struct ScalarField(Arc<Inner>);

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ScalarField({})", self.label())
    }
}

impl ScalarField {
    pub fn constant(c: f64) -> Self {
        ScalarField(Arc::new(Inner::Const(c)))
    }

    pub fn from_expr(expr: Expr, names: &[String]) -> Self {
        ScalarField(Arc::new(Inner::Expr {
            expr,
            names: names.into(),
        }))
    }

    /// Parses `text` over the chart's coordinates.
    pub fn parse(chart: &Chart, text: &str) -> Result<Self> {
        Ok(Self::from_expr(chart.parse(text)?, chart.coord_names()))
    }

    /// Coordinate function `x_i`.
    pub fn coordinate(chart: &Chart, i: usize) -> Self {
        Self::from_expr(Expr::Var(i), chart.coord_names())
    }

    pub fn derived(
        label: impl Into<String>,
        f: impl Fn(&[f64], usize) -> Result<Jet> + Send + Sync + 'static,
    ) -> Self {
        ScalarField(Arc::new(Inner::Derived {
            label: label.into(),
            f: Box::new(f),
        }))
    }

    pub fn expr(&self) -> Option<&Expr> {
        match &*self.0 {
            Inner::Expr { expr, .. } => Some(expr),
            _ => None,
        }
    }

    pub fn as_constant(&self) -> Option<f64> {
        match &*self.0 {
            Inner::Const(c) => Some(*c),
            Inner::Expr {
                expr: Expr::Num(c), ..
            } => Some(*c),
            _ => None,
        }
    }

    /// Printable form: the expression text, or a label for derived fields.
    pub fn label(&self) -> String {
        match &*self.0 {
            Inner::Const(c) => format!("{c:?}"),
            Inner::Expr { expr, names } => expr.display(names).to_string(),
            Inner::Derived { label, .. } => label.clone(),
        }
    }

    /// Value and partials up to `order` at `point`.
    pub fn jet(&self, point: &[f64], order: usize) -> Result<Jet> {
        if order > MAX_ORDER {
            return Err(Error::OrderTooHigh {
                requested: order,
                max: MAX_ORDER,
            });
        }
        match &*self.0 {
            Inner::Const(c) => Ok(Jet::constant(point.len(), order, *c)),
            Inner::Expr { expr, names } => expr.eval_jet(point, order, names),
            Inner::Derived { f, .. } => {
                let j = f(point, order)?;
                if j.order() < order {
                    return Err(Error::OrderTooHigh {
                        requested: order,
                        max: j.order(),
                    });
                }
                Ok(j.truncate(order))
            }
        }
    }

    pub fn value(&self, point: &[f64]) -> Result<f64> {
        Ok(self.jet(point, 0)?.value())
    }

    fn names(&self) -> Option<&Arc<[String]>> {
        match &*self.0 {
            Inner::Expr { names, .. } => Some(names),
            _ => None,
        }
    }

    fn as_expr_with(&self, names: &Arc<[String]>) -> Option<Expr> {
        match &*self.0 {
            Inner::Const(c) => Some(Expr::num(*c)),
            Inner::Expr { expr, names: n } if n == names => Some(expr.clone()),
            _ => None,
        }
    }

    fn binary(
        &self,
        other: &ScalarField,
        sym: &str,
        mk: fn(Expr, Expr) -> Expr,
        op: fn(Jet, Jet) -> Result<Jet>,
    ) -> ScalarField {
        if let Some(names) = self.names().or(other.names()).cloned() {
            if let (Some(a), Some(b)) = (self.as_expr_with(&names), other.as_expr_with(&names)) {
                return ScalarField::from_expr(mk(a, b), &names);
            }
        }
        let (a, b) = (self.clone(), other.clone());
        ScalarField::derived(
            format!("({}) {sym} ({})", a.label(), b.label()),
            move |p, k| op(a.jet(p, k)?, b.jet(p, k)?),
        )
    }

    pub fn add(&self, other: &ScalarField) -> ScalarField {
        self.binary(other, "+", Expr::add, |a, b| Ok(a + b))
    }

    pub fn sub(&self, other: &ScalarField) -> ScalarField {
        self.binary(other, "-", Expr::sub, |a, b| Ok(a - b))
    }

    pub fn mul(&self, other: &ScalarField) -> ScalarField {
        self.binary(other, "*", Expr::mul, |a, b| Ok(a * b))
    }

    pub fn div(&self, other: &ScalarField) -> ScalarField {
        self.binary(other, "/", Expr::div, |a, b| {
            if b.value() == 0.0 {
                return Err(Error::Domain {
                    subexpr: "quotient".into(),
                    reason: "division by zero".into(),
                });
            }
            Ok(a / b)
        })
    }

    pub fn scale(&self, c: f64) -> ScalarField {
        ScalarField::constant(c).mul(self)
    }

    /// Exact negation (no rounding in any derivative).
    pub fn neg(&self) -> ScalarField {
        if let Some(names) = self.names().cloned() {
            let e = self.as_expr_with(&names).unwrap();
            return ScalarField::from_expr(Expr::Neg(Box::new(e)), &names);
        }
        if let Some(c) = self.as_constant() {
            return ScalarField::constant(-c);
        }
        let a = self.clone();
        ScalarField::derived(format!("-({})", a.label()), move |p, k| Ok(-a.jet(p, k)?))
    }

    fn unary(&self, func: Func, check: fn(f64) -> bool, reason: &'static str) -> ScalarField {
        if let Some(names) = self.names().cloned() {
            let e = self.as_expr_with(&names).unwrap();
            return ScalarField::from_expr(Expr::call(func, e), &names);
        }
        let a = self.clone();
        let label = format!("{}({})", func.name(), a.label());
        let l2 = label.clone();
        ScalarField::derived(label, move |p, k| {
            let j = a.jet(p, k)?;
            if !check(j.value()) {
                return Err(Error::Domain {
                    subexpr: l2.clone(),
                    reason: reason.into(),
                });
            }
            Ok(match func {
                Func::Exp => j.exp(),
                Func::Log => j.ln(),
                Func::Sqrt => j.sqrt(),
                Func::Sin => j.sin(),
                Func::Cos => j.cos(),
            })
        })
    }

    pub fn ln(&self) -> ScalarField {
        self.unary(Func::Log, |x| x > 0.0, "log of a nonpositive argument")
    }

    pub fn exp(&self) -> ScalarField {
        self.unary(Func::Exp, |_| true, "")
    }

    pub fn sqrt(&self) -> ScalarField {
        self.unary(Func::Sqrt, |x| x > 0.0, "sqrt of a nonpositive argument")
    }

    /// `self^p` for real `p`; the base must be positive unless `p` is an
    /// integer.
    pub fn powf(&self, p: f64) -> ScalarField {
        let r = super::expr::Rational::new((2.0 * p).round() as i64, 2);
        if let (Some(names), Some(r)) = (self.names().cloned(), r) {
            if (r.as_f64() - p).abs() == 0.0 {
                let e = self.as_expr_with(&names).unwrap();
                return ScalarField::from_expr(Expr::pow(e, r), &names);
            }
        }
        let a = self.clone();
        let label = format!("({})^({p})", a.label());
        let l2 = label.clone();
        ScalarField::derived(label, move |pt, k| {
            let j = a.jet(pt, k)?;
            let integer = p == p.trunc();
            if (!integer && j.value() <= 0.0) || (j.value() == 0.0 && p < 0.0) {
                return Err(Error::Domain {
                    subexpr: l2.clone(),
                    reason: "power of a nonpositive base".into(),
                });
            }
            Ok(j.powf(p))
        })
    }
}

/// Index symmetry between two slot positions of a tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Symmetry {
    Symmetric(usize, usize),
    Antisymmetric(usize, usize),
}

/// A tensor field of valence (r contravariant, s covariant) and projective
/// weight `weight`. Components are stored row-major over the multi-index,
/// contravariant slots first.
#[derive(Debug, Clone)]
pub struct TensorField {
    chart: Arc<Chart>,
    valence: (usize, usize),
    weight: f64,
    components: Vec<ScalarField>,
    symmetries: Vec<Symmetry>,
}

impl TensorField {
    pub fn new(
        chart: Arc<Chart>,
        valence: (usize, usize),
        weight: f64,
        components: Vec<ScalarField>,
        symmetries: Vec<Symmetry>,
    ) -> Result<Self> {
        let rank = valence.0 + valence.1;
        let expected = chart.dim().pow(rank as u32);
        if components.len() != expected {
            return Err(Error::shape(format!(
                "valence ({}, {}) on a {}-dimensional chart needs {} components, got {}",
                valence.0,
                valence.1,
                chart.dim(),
                expected,
                components.len()
            )));
        }
        for s in &symmetries {
            let (Symmetry::Symmetric(i, j) | Symmetry::Antisymmetric(i, j)) = *s;
            if i >= rank || j >= rank || i == j {
                return Err(Error::shape(format!("invalid symmetry {s:?}")));
            }
        }
        Ok(TensorField {
            chart,
            valence,
            weight,
            components,
            symmetries,
        })
    }

    /// Parses component expressions (row-major).
    pub fn from_exprs(
        chart: Arc<Chart>,
        valence: (usize, usize),
        weight: f64,
        texts: &[&str],
        symmetries: Vec<Symmetry>,
    ) -> Result<Self> {
        let comps = texts
            .iter()
            .map(|t| ScalarField::parse(&chart, t))
            .collect::<Result<Vec<_>>>()?;
        Self::new(chart, valence, weight, comps, symmetries)
    }

    pub fn chart(&self) -> &Arc<Chart> {
        &self.chart
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    pub fn valence(&self) -> (usize, usize) {
        self.valence
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.components
    }

    pub fn symmetries(&self) -> &[Symmetry] {
        &self.symmetries
    }

    pub fn component(&self, multi: &[usize]) -> &ScalarField {
        &self.components[flat_index(self.dim(), multi)]
    }

    /// Jets of every component at `point`.
    pub fn eval_jet(&self, point: &[f64], order: usize) -> Result<Vec<Jet>> {
        self.components
            .iter()
            .map(|c| c.jet(point, order))
            .collect()
    }

    pub fn values(&self, point: &[f64]) -> Result<Vec<f64>> {
        self.components.iter().map(|c| c.value(point)).collect()
    }

    /// Largest relative violation of the declared symmetries over `points`.
    pub fn symmetry_defect(&self, points: &[Vec<f64>]) -> Result<f64> {
        let n = self.dim();
        let rank = self.valence.0 + self.valence.1;
        let mut worst: f64 = 0.0;
        for p in points {
            let vals = self.values(p)?;
            let scale = vals.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-300);
            for (k, v) in vals.iter().enumerate() {
                let mut multi = unflatten(n, rank, k);
                for s in &self.symmetries {
                    let (sign, i, j) = match *s {
                        Symmetry::Symmetric(i, j) => (1.0, i, j),
                        Symmetry::Antisymmetric(i, j) => (-1.0, i, j),
                    };
                    multi.swap(i, j);
                    let other = vals[flat_index(n, &multi)];
                    multi.swap(i, j);
                    worst = worst.max((v - sign * other).abs() / scale);
                }
            }
        }
        Ok(worst)
    }
}

pub fn flat_index(n: usize, multi: &[usize]) -> usize {
    multi.iter().fold(0, |acc, &i| acc * n + i)
}

pub fn unflatten(n: usize, rank: usize, mut k: usize) -> Vec<usize> {
    let mut m = vec![0; rank];
    for slot in m.iter_mut().rev() {
        *slot = k % n;
        k /= n;
    }
    m
}

/// A covector field: either the differential of a potential or explicit
/// components.
#[derive(Debug, Clone)]
pub enum OneForm {
    Exact(ScalarField),
    Components(Vec<ScalarField>),
}

impl OneForm {
    pub fn exact(potential: ScalarField) -> Self {
        OneForm::Exact(potential)
    }

    pub fn potential(&self) -> Option<&ScalarField> {
        match self {
            OneForm::Exact(f) => Some(f),
            OneForm::Components(_) => None,
        }
    }

    pub fn neg(&self) -> OneForm {
        match self {
            OneForm::Exact(f) => OneForm::Exact(f.neg()),
            OneForm::Components(c) => OneForm::Components(c.iter().map(ScalarField::neg).collect()),
        }
    }

    /// Component jets at `point`; exact forms need the potential one order
    /// higher.
    pub fn jets(&self, point: &[f64], order: usize) -> Result<Vec<Jet>> {
        match self {
            OneForm::Exact(f) => {
                let j = f.jet(point, order + 1)?;
                Ok((0..point.len()).map(|a| j.partial(a)).collect())
            }
            OneForm::Components(c) => {
                if c.len() != point.len() {
                    return Err(Error::shape(format!(
                        "one-form has {} components on a {}-dimensional chart",
                        c.len(),
                        point.len()
                    )));
                }
                c.iter().map(|f| f.jet(point, order)).collect()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

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
    fn combinators_stay_symbolic_when_possible() {
        let c = chart();
        let f = ScalarField::parse(&c, "x*y").unwrap();
        let g = f.add(&ScalarField::constant(1.0)).ln();
        assert_eq!(g.label(), "log(x*y + 1)");
        let j = g.jet(&[0.5, 1.0], 1).unwrap();
        assert!((j.value() - 1.5f64.ln()).abs() < 1e-15);
        assert!((j.d1(0) - 1.0 / 1.5).abs() < 1e-15);
        assert!(g.powf(0.5).expr().is_some());
    }

    #[test]
    fn derived_fields_report_missing_orders() {
        let f = ScalarField::derived("lowish", |p, _| Ok(Jet::variable(p.len(), 1, 0, p[0])));
        assert!(f.jet(&[0.1, 0.2], 1).is_ok());
        assert!(matches!(
            f.jet(&[0.1, 0.2], 2),
            Err(Error::OrderTooHigh {
                requested: 2,
                max: 1
            })
        ));
        let g = f.ln();
        assert!(matches!(g.jet(&[-0.1, 0.2], 0), Err(Error::Domain { .. })));
    }

    #[test]
    fn tensor_symmetry_and_shape() {
        let c = chart();
        let t = TensorField::from_exprs(
            c.clone(),
            (0, 2),
            0.0,
            &["1", "x", "x", "y"],
            vec![Symmetry::Symmetric(0, 1)],
        )
        .unwrap();
        assert_eq!(t.symmetry_defect(&[vec![0.3, 0.4]]).unwrap(), 0.0);
        let bad = TensorField::from_exprs(
            c.clone(),
            (0, 2),
            0.0,
            &["1", "x", "y", "y"],
            vec![Symmetry::Symmetric(0, 1)],
        )
        .unwrap();
        assert!(bad.symmetry_defect(&[vec![0.3, 0.4]]).unwrap() > 0.1);
        assert!(TensorField::from_exprs(c, (0, 2), 0.0, &["1"], vec![]).is_err());
        assert_eq!(unflatten(3, 3, flat_index(3, &[2, 0, 1])), vec![2, 0, 1]);
    }

    #[test]
    fn exact_one_form() {
        let c = chart();
        let w = OneForm::exact(ScalarField::parse(&c, "x^2*y").unwrap());
        let j = w.jets(&[0.5, 2.0], 1).unwrap();
        assert_eq!(j[0].value(), 2.0);
        assert_eq!(j[1].value(), 0.25);
        assert_eq!(j[0].d1(1), 1.0);
    }
}
