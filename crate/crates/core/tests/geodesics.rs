use pcompact::boundary::{make_flat_hemisphere, make_hyperbolic};
use pcompact::compactness::hat_connection;
use pcompact::fields::{OneForm, ScalarField};
use pcompact::geodesics::{
    approach_law_fit, cutoff_divergence, integrate_geodesic, reparameterize, trace_distance,
    GeodesicOptions, Termination,
};

#[test]
fn hyperbolic_vertical_geodesic_is_exponential() {
    let m = make_hyperbolic(1).unwrap();
    let tr = integrate_geodesic(
        &m.connection(),
        &[0.0, 1.0],
        &[0.0, -2.0],
        &GeodesicOptions::default(),
    )
    .unwrap();
    assert_eq!(tr.terminated, Termination::BoundaryProximity);
    assert!(tr.last().x[1] <= 2e-6);
    for s in &tr.samples {
        let exact = (-2.0 * s.t).exp();
        assert!((s.x[1] - exact).abs() < 1e-7 * exact, "t = {}", s.t);
        assert!(s.x[0].abs() < 1e-15);
    }
    let fit = approach_law_fit(&tr, &m.rho, 2.0).unwrap();
    assert!((fit.slope + 2.0).abs() < 1e-6);
    assert!(fit.consistent(0.02, 0.999));
}

#[test]
fn hemisphere_approach_is_inverse_linear() {
    let m = make_flat_hemisphere((2, 0), 1).unwrap();
    let tr = integrate_geodesic(
        &m.connection(),
        &[0.5, 0.3],
        &[-0.2, 0.1],
        &GeodesicOptions::default(),
    )
    .unwrap();
    assert_eq!(tr.terminated, Termination::BoundaryProximity);
    let fit = approach_law_fit(&tr, &m.rho, 1.0).unwrap();
    assert!((fit.slope + 1.0).abs() < 0.02, "{}", fit.slope);
    assert!(fit.r2 > 0.999);
    // affine in the flat coordinates y = (u1/u0, 1/u0)
    let y = |x: &[f64]| [x[1] / x[0], 1.0 / x[0]];
    let (y0, y1) = (y(&tr.samples[0].x), y(&tr.samples[1].x));
    let dt = tr.samples[1].t;
    for s in tr.samples.iter().step_by(25) {
        let ys = y(&s.x);
        for k in 0..2 {
            let lin = y0[k] + (y1[k] - y0[k]) / dt * s.t;
            assert!((ys[k] - lin).abs() < 1e-6 * lin.abs().max(1.0));
        }
    }
}

#[test]
fn energy_is_conserved() {
    let hyp = make_hyperbolic(2).unwrap();
    let hem = make_flat_hemisphere((2, 1), 2).unwrap();
    let cases = [
        (hyp.connection(), vec![0.1, -0.2, 0.8], vec![0.3, 0.1, 0.2]),
        (hem.connection(), vec![0.6, 0.2, -0.1], vec![0.05, 0.1, 0.2]),
    ];
    for (conn, x, v) in cases {
        let tr = integrate_geodesic(&conn, &x, &v, &GeodesicOptions::new(10.0, 1e-9)).unwrap();
        assert_ne!(tr.terminated, Termination::Truncated);
        assert!(tr.energy_drift.unwrap() < 1e-8, "{:?}", tr.energy_drift);
    }
}

#[test]
fn tangential_geodesic_has_no_approach_law() {
    let m = make_hyperbolic(1).unwrap();
    let tr = integrate_geodesic(
        &m.connection(),
        &[0.0, 1.0],
        &[0.0, 1.0],
        &GeodesicOptions::default(),
    )
    .unwrap();
    assert_eq!(tr.terminated, Termination::DomainExit);
    assert!(approach_law_fit(&tr, &m.rho, 2.0).is_err());
}

#[test]
fn boundary_is_never_reached_in_finite_time() {
    let cutoffs = [1e-3, 1e-4, 1e-5, 1e-6];
    let hyp = make_hyperbolic(1).unwrap();
    let hem = make_flat_hemisphere((2, 0), 1).unwrap();
    let o = GeodesicOptions::default();
    let d = cutoff_divergence(&hyp.connection(), &[0.2, 1.0], &[0.1, -1.0], &cutoffs, &o).unwrap();
    assert!(d.divergent(), "{d:?}");
    let d = cutoff_divergence(&hem.connection(), &[0.5, 0.3], &[-0.2, 0.1], &cutoffs, &o).unwrap();
    assert!(d.divergent(), "{d:?}");
    // the compact connection itself reaches the boundary: increments shrink
    let hat = hat_connection(&hyp.connection(), &hyp.rho, 2.0).unwrap();
    let d = cutoff_divergence(&hat, &[0.2, 1.0], &[0.1, -1.0], &cutoffs, &o).unwrap();
    assert!(!d.divergent(), "{d:?}");
}

#[test]
fn projectively_related_traces_coincide() {
    let m = make_hyperbolic(1).unwrap();
    let conn = m.connection();
    let (x0, v0) = ([0.1, 1.0], [0.4, -0.6]);
    let o = GeodesicOptions::default();
    let hat = hat_connection(&conn, &m.rho, 2.0).unwrap();
    let a = integrate_geodesic(&conn, &x0, &v0, &o).unwrap();
    let b = integrate_geodesic(&hat, &x0, &v0, &o).unwrap();
    assert!(trace_distance(&a, &b) < 1e-8, "{}", trace_distance(&a, &b));
    assert!(trace_distance(&b, &a) < 1e-8);
    let f = ScalarField::parse(&m.chart, "0.3*sin(x1) + 0.2*rho^2").unwrap();
    let other = conn.projective_change(OneForm::exact(f));
    let c = integrate_geodesic(&other, &x0, &v0, &GeodesicOptions::new(0.5, 1e-9)).unwrap();
    assert!(trace_distance(&a, &c) < 1e-8, "{}", trace_distance(&a, &c));
}

#[test]
fn reparameterization_recovers_the_metric_geodesic() {
    let m = make_hyperbolic(1).unwrap();
    let hat = hat_connection(&m.connection(), &m.rho, 2.0).unwrap();
    let o = GeodesicOptions::default();
    let ch = integrate_geodesic(&hat, &[0.0, 1.0], &[0.0, -2.0], &o).unwrap();
    assert_eq!(ch.terminated, Termination::BoundaryProximity);
    let phi = reparameterize(&ch, &m.rho, 2.0, 1e-5, &o).unwrap();
    for &(t, _, r) in &phi.samples {
        assert!((r - (-2.0 * t).exp()).abs() < 1e-6 * r, "t = {t}");
    }
    let fit = phi.approach_fit(2.0).unwrap();
    assert!(fit.consistent(0.02, 0.999));
    assert!((fit.slope + 2.0).abs() < 1e-4);
}
