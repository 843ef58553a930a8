//! Projective densities.
//!
//! A density of weight `w` is stored as its coefficient `c` against the
//! coordinate volume, `σ = c·|dx|^{-w/(n+2)}`. The coordinate volume is
//! parallel for the flat coordinate connection, so it serves as the common
//! reference scale: a connection ∇ acts on densities through the one-form
//! `Υ^∇_a = Γ^b_ba/(n+2)`, i.e. `∇_aσ = ∂_a c + w Υ^∇_a c`, and a projective
//! change by Υ shifts this by `wΥ_a σ`.

use super::connection::Connection;
use crate::error::{Error, Result};
use crate::fields::jet::Jet;
use crate::fields::ScalarField;

/// `∇_a σ` at `point` (coefficients against the coordinate volume).
pub fn density_derivative(
    conn: &Connection,
    w: f64,
    sigma: &ScalarField,
    point: &[f64],
) -> Result<Vec<f64>> {
    conn.require_special("density derivative")?;
    let s = sigma.jet(point, 1)?;
    let ups = conn.density_form_jets(point, 0)?;
    Ok((0..conn.dim())
        .map(|a| s.d1(a) + w * ups[a].value() * s.value())
        .collect())
}

/// Coordinate coefficient of the weight-`w` scale determined by the
/// connection's parallel volume ν: `ν^{-w/(n+2)}`.
pub fn scale_density(conn: &Connection, w: f64) -> Result<ScalarField> {
    conn.require_special("a parallel scale")?;
    let nu = conn
        .parallel_volume()
        .ok_or_else(|| Error::precondition("connection has no parallel volume"))?;
    Ok(nu.powf(-w / (conn.dim() + 1) as f64))
}

/// Converts a coordinate coefficient to the coefficient against the
/// connection's own parallel scale: `c·ν^{w/(n+2)}`.
pub fn own_coefficient(conn: &Connection, w: f64, coefficient: f64, point: &[f64]) -> Result<f64> {
    conn.require_special("own-scale coefficients")?;
    let nu = conn
        .parallel_volume()
        .ok_or_else(|| Error::precondition("connection has no parallel volume"))?
        .value(point)?;
    Ok(coefficient * nu.abs().powf(w / (conn.dim() + 1) as f64))
}

/// Jet version of [`own_coefficient`] multiplier `ν^{w/(n+2)}`.
pub fn own_factor_jet(conn: &Connection, w: f64, point: &[f64], order: usize) -> Result<Jet> {
    conn.require_special("own-scale coefficients")?;
    let nu = conn
        .parallel_volume()
        .ok_or_else(|| Error::precondition("connection has no parallel volume"))?
        .jet(point, order)?;
    let nu = if nu.value() < 0.0 { -nu } else { nu };
    Ok(nu.powf(w / (conn.dim() + 1) as f64))
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::connections::Metric;
    use crate::fields::{Chart, OneForm};

    #[test]
    fn parallel_scale_has_zero_derivative_and_weight_zero_ignores_changes() {
        let c = Arc::new(
            Chart::new(
                vec!["x".into(), "r".into()],
                vec![(-1.0, 1.0), (0.0, 2.0)],
                Some(1),
            )
            .unwrap(),
        );
        let g = Metric::from_exprs(c.clone(), &["1/r", "0", "0", "1/(4*r^2)"], (2, 0)).unwrap();
        let lc = Connection::levi_civita(&g);
        let sigma = scale_density(&lc, 1.0).unwrap();
        let p = [0.2, 0.3];
        for d in density_derivative(&lc, 1.0, &sigma, &p).unwrap() {
            assert!(d.abs() < 1e-12);
        }
        let f = ScalarField::parse(&c, "x*r").unwrap();
        let changed = lc.projective_change(OneForm::exact(f));
        let h = ScalarField::parse(&c, "x^2 + r").unwrap();
        assert_eq!(
            density_derivative(&lc, 0.0, &h, &p).unwrap(),
            density_derivative(&changed, 0.0, &h, &p).unwrap()
        );
    }
}
