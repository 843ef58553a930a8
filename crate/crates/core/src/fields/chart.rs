//! Coordinate boxes with an optional boundary coordinate.

use rand::Rng;

use super::expr::{parse_expr, Expr};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    coord_names: Vec<String>,
    domain: Vec<(f64, f64)>,
    boundary_index: Option<usize>,
}

const RESERVED: [&str; 5] = ["exp", "log", "sqrt", "sin", "cos"];

impl Chart {
    pub fn new(
        coord_names: Vec<String>,
        domain: Vec<(f64, f64)>,
        boundary_index: Option<usize>,
    ) -> Result<Chart> {
        let dim = coord_names.len();
        if dim < 2 {
            return Err(Error::Chart(format!("dimension {dim} < 2")));
        }
        if domain.len() != dim {
            return Err(Error::Chart(format!(
                "{} coordinate names but {} intervals",
                dim,
                domain.len()
            )));
        }
        for (i, name) in coord_names.iter().enumerate() {
            let valid = name
                .chars()
                .next()
                .is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
                && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
            if !valid || RESERVED.contains(&name.as_str()) {
                return Err(Error::Chart(format!("invalid coordinate name `{name}`")));
            }
            if coord_names[..i].contains(name) {
                return Err(Error::Chart(format!("duplicate coordinate name `{name}`")));
            }
        }
        for (i, &(lo, hi)) in domain.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::Chart(format!(
                    "interval for `{}` is empty: [{lo}, {hi}]",
                    coord_names[i]
                )));
            }
        }
        if let Some(b) = boundary_index {
            if b >= dim {
                return Err(Error::Chart(format!("boundary index {b} out of range")));
            }
            if domain[b].0 != 0.0 {
                return Err(Error::Chart(format!(
                    "boundary coordinate `{}` must have lower endpoint 0",
                    coord_names[b]
                )));
            }
        }
        Ok(Chart {
            coord_names,
            domain,
            boundary_index,
        })
    }

    pub fn dim(&self) -> usize {
        self.coord_names.len()
    }

    pub fn coord_names(&self) -> &[String] {
        &self.coord_names
    }

    pub fn domain(&self) -> &[(f64, f64)] {
        &self.domain
    }

    pub fn boundary_index(&self) -> Option<usize> {
        self.boundary_index
    }

    pub fn span(&self, i: usize) -> f64 {
        self.domain[i].1 - self.domain[i].0
    }

    /// Index of the boundary coordinate, or a precondition error.
    pub fn require_boundary(&self) -> Result<usize> {
        self.boundary_index
            .ok_or_else(|| Error::precondition("chart has no boundary coordinate"))
    }

    /// Closed-box membership.
    pub fn contains(&self, point: &[f64]) -> bool {
        point.len() == self.dim()
            && point
                .iter()
                .zip(&self.domain)
                .all(|(x, (lo, hi))| *x >= *lo && *x <= *hi)
    }

    pub fn check_point(&self, point: &[f64]) -> Result<()> {
        if point.len() != self.dim() {
            return Err(Error::shape(format!(
                "point has {} coordinates, chart has {}",
                point.len(),
                self.dim()
            )));
        }
        if !self.contains(point) {
            return Err(Error::OutsideDomain {
                point: point.to_vec(),
            });
        }
        Ok(())
    }

    pub fn parse(&self, text: &str) -> Result<Expr> {
        Ok(parse_expr(text, &self.coord_names)?)
    }

    /// Uniform point in the box shrunk by `margin` (a fraction of each span)
    /// on every side.
    pub fn random_interior_point<R: Rng + ?Sized>(&self, rng: &mut R, margin: f64) -> Vec<f64> {
        self.domain
            .iter()
            .map(|&(lo, hi)| {
                let pad = margin * (hi - lo);
                rng.random_range(lo + pad..hi - pad)
            })
            .collect()
    }

    /// Inserts a boundary coordinate value into tangential coordinates.
    pub fn with_boundary_coord(&self, tangential: &[f64], value: f64) -> Result<Vec<f64>> {
        let b = self.require_boundary()?;
        if tangential.len() + 1 != self.dim() {
            return Err(Error::shape(format!(
                "expected {} tangential coordinates, got {}",
                self.dim() - 1,
                tangential.len()
            )));
        }
        let mut p = tangential.to_vec();
        p.insert(b, value);
        Ok(p)
    }

    /// Tangential coordinates of a point (boundary coordinate removed).
    pub fn tangential(&self, point: &[f64]) -> Result<Vec<f64>> {
        let b = self.require_boundary()?;
        let mut p = point.to_vec();
        p.remove(b);
        Ok(p)
    }
}
