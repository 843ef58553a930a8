use pcompact::boundary::{
    make_bumped_hyperbolic, make_flat_hemisphere, make_hyperbolic, ModelMetric,
};
use pcompact::connections::{own_factor_jet, scale_density, Connection, ScaleAt};
use pcompact::fields::extrapolate::{boundary_ray_samples, extrapolate};
use pcompact::fields::{Jet, OneForm, ScalarField};
use pcompact::linalg::null_space;
use pcompact::tractor::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng() -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(7)
}

fn points(m: &ModelMetric, count: usize) -> Vec<Vec<f64>> {
    m.random_interior_points(&mut rng(), count)
}

/// Random cubic polynomial in the chart coordinates.
fn random_poly(m: &ModelMetric, r: &mut impl Rng, scale: f64) -> ScalarField {
    let names = m.chart.coord_names();
    let mut terms = vec![format!("{}", r.random_range(0.5..1.5))];
    for a in names {
        terms.push(format!("{}*{a}", scale * r.random_range(-1.0..1.0)));
        for b in names {
            terms.push(format!("{}*{a}*{b}", scale * r.random_range(-0.5..0.5)));
        }
    }
    terms.push(format!(
        "{}*{}^3",
        scale * r.random_range(-0.3..0.3),
        names[0]
    ));
    ScalarField::parse(&m.chart, &terms.join(" + ")).unwrap()
}

fn jets(f: &[ScalarField], p: &[f64], order: usize) -> Vec<Jet> {
    f.iter().map(|x| x.jet(p, order).unwrap()).collect()
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len()
        && a.iter()
            .zip(b)
            .all(|(x, y)| (x - y).abs() <= tol * (1.0 + y.abs()))
}

#[test]
fn hemisphere_scale_is_a_normal_e1_solution() {
    for m in [
        make_flat_hemisphere((2, 0), 1).unwrap(),
        make_flat_hemisphere((2, 1), 2).unwrap(),
    ] {
        let lc = m.connection();
        let sigma = scale_density(&lc, 1.0).unwrap();
        let pts = points(&m, 20);
        for p in &pts {
            let at = ScaleAt::new(&lc, p, 1).unwrap();
            let r = bgg_residual_e1(&at, &sigma.jet(p, 2).unwrap()).unwrap();
            assert!(r.iter().all(|x| x.abs() < 1e-10), "{r:?}");
        }
        assert!(
            is_normal(&lc, SectionKind::E1, &sigma, &pts)
                .unwrap()
                .normal
        );
    }
}

#[test]
fn hyperbolic_scale_residual_is_minus_g_sigma() {
    let m = make_hyperbolic(2).unwrap();
    let lc = m.connection();
    let sigma = scale_density(&lc, 1.0).unwrap();
    let pts = points(&m, 20);
    for p in &pts {
        let at = ScaleAt::new(&lc, p, 1).unwrap();
        let s = sigma.jet(p, 2).unwrap();
        let r = bgg_residual_e1(&at, &s).unwrap();
        let expect: Vec<f64> = m
            .metric
            .values(p)
            .unwrap()
            .iter()
            .map(|g| -g * s.value())
            .collect();
        assert!(close(&r, &expect, 1e-9), "{r:?} vs {expect:?}");
    }
    assert!(
        !is_normal(&lc, SectionKind::E1, &sigma, &pts)
            .unwrap()
            .normal
    );
}

#[test]
fn hyperbolic_tau_is_normal_with_indefinite_form() {
    for n in [1, 2] {
        let m = make_hyperbolic(n).unwrap();
        let lc = m.connection();
        let tau = scale_density(&lc, 2.0).unwrap();
        let pts = points(&m, 20);
        for p in &pts {
            let at = ScaleAt::new(&lc, p, 2).unwrap();
            let t = tau.jet(p, 3).unwrap();
            assert!(bgg_residual_e2(&at, &t).unwrap().max_abs() < 1e-9);
            let l = split_e2(&at, &t).unwrap();
            let g = m.metric.values(p).unwrap();
            assert!(l.nu.iter().all(|x| x.value().abs() < 1e-10));
            for (r, gv) in l.rho.iter().zip(&g) {
                assert!((r.value() + gv * t.value()).abs() < 1e-9 * (1.0 + gv.abs()));
            }
            let fr = tractor_form_rank_signature(&l);
            assert_eq!((fr.rank, fr.positive, fr.negative), (n + 2, 1, n + 1));
        }
        assert!(is_normal(&lc, SectionKind::E2, &tau, &pts).unwrap().normal);
    }
}

#[test]
fn hemisphere_sigma_squared_is_normal_rank_one() {
    let m = make_flat_hemisphere((3, 0), 2).unwrap();
    let lc = m.connection();
    let tau = scale_density(&lc, 2.0).unwrap();
    let pts = points(&m, 20);
    for p in &pts {
        let at = ScaleAt::new(&lc, p, 2).unwrap();
        let t = tau.jet(p, 3).unwrap();
        assert!(bgg_residual_e2(&at, &t).unwrap().max_abs() < 1e-9);
        assert_eq!(
            tractor_form_rank_signature(&split_e2(&at, &t).unwrap()).rank,
            1
        );
    }
    assert!(is_normal(&lc, SectionKind::E2, &tau, &pts).unwrap().normal);
}

#[test]
fn bump_breaks_the_e2_equation() {
    let m = make_bumped_hyperbolic(1, 0.3).unwrap();
    let lc = m.connection();
    let tau = scale_density(&lc, 2.0).unwrap();
    let worst = points(&m, 30)
        .iter()
        .map(|p| {
            let at = ScaleAt::new(&lc, p, 2).unwrap();
            bgg_residual_e2(&at, &tau.jet(p, 3).unwrap())
                .unwrap()
                .max_abs()
        })
        .fold(0.0, f64::max);
    assert!(worst > 1e-3, "{worst}");
}

#[test]
fn metricity_section_of_flat_models() {
    for (sig, n) in [((2, 0), 1), ((1, 1), 1), ((3, 0), 2), ((2, 1), 2)] {
        let m = make_flat_hemisphere(sig, n).unwrap();
        let lc = m.connection();
        let sigma = scale_density(&lc, 1.0).unwrap();
        let pts = points(&m, 10);
        for p in &pts {
            let h = metricity_section(&m.metric, p, 1).unwrap();
            let mat = h.matrix();
            assert_eq!(dual_form_rank_signature(&h).rank, n + 1);
            let ns = null_space(&mat, 1e-10);
            assert_eq!(ns.len(), 1);
            let at = ScaleAt::new(&lc, p, 1).unwrap();
            let l = split_e1(&at, &sigma.jet(p, 2).unwrap()).vector();
            let ln = l.iter().map(|x| x * x).sum::<f64>().sqrt();
            let cos =
                ns[0].iter().zip(&l).map(|(a, b)| a * b).sum::<f64>().abs() / (ns[0].norm() * ln);
            assert!((1.0 - cos * cos).max(0.0).sqrt() < 1e-6);
        }
        assert!(
            is_normal(&lc, SectionKind::Metricity, &sigma, &pts)
                .unwrap()
                .normal
        );
    }
    let hyp = make_hyperbolic(1).unwrap();
    assert!(metricity_section(&hyp.metric, &[0.1, 0.5], 1).is_err());
}

#[test]
fn operations_are_scale_equivariant() {
    let mut r = rng();
    for m in [make_hyperbolic(1).unwrap(), make_hyperbolic(2).unwrap()] {
        let lc = m.connection();
        let d = m.dim();
        for _ in 0..20 {
            let f = random_poly(&m, &mut r, 0.5);
            let hat = lc.projective_change(OneForm::exact(f.clone()));
            let p = m.chart.random_interior_point(&mut r, 0.2);
            let at = ScaleAt::new(&lc, &p, 2).unwrap();
            let ah = ScaleAt::new(&hat, &p, 2).unwrap();
            let ups = OneForm::exact(f).jets(&p, 2).unwrap();
            let upv: Vec<f64> = ups.iter().map(Jet::value).collect();
            let sfield = random_poly(&m, &mut r, 1.0);
            let s = sfield.jet(&p, 3).unwrap();

            let a = split_e1(&at, &s).change_scale(&ups);
            assert!(close(&a.values(), &split_e1(&ah, &s).values(), 1e-10));
            let a = split_e2(&at, &s).unwrap().change_scale(&ups);
            let b = split_e2(&ah, &s).unwrap();
            assert!((a.matrix() - b.matrix()).abs().max() < 1e-10 * (1.0 + b.matrix().abs().max()));

            let fields: Vec<ScalarField> = (0..1 + d + d * d)
                .map(|_| random_poly(&m, &mut r, 1.0))
                .collect();
            let js = jets(&fields, &p, 2);
            let c = Cotractor {
                sigma: js[0].clone(),
                mu: js[1..=d].to_vec(),
            };
            let x = tractor_derivative(&at, &c).unwrap().change_scale(&upv);
            let y = tractor_derivative(&ah, &c.change_scale(&ups)).unwrap();
            assert!(close(&x.top, &y.top, 1e-10) && close(&x.bottom, &y.bottom, 1e-10));

            let mut rho = js[1 + d..].to_vec();
            for i in 0..d {
                for k in 0..i {
                    rho[i * d + k] = rho[k * d + i].clone();
                }
            }
            let s2 = S2Cotractor {
                tau: js[0].clone(),
                nu: js[1..=d].to_vec(),
                rho: rho.clone(),
            };
            let x = s2_tractor_derivative(&at, &s2).unwrap().change_scale(&upv);
            let y = s2_tractor_derivative(&ah, &s2.change_scale(&ups)).unwrap();
            assert!(close(&x.top, &y.top, 1e-10) && close(&x.middle, &y.middle, 1e-10));
            assert!(close(&x.bottom, &y.bottom, 1e-10));

            let dual = S2Tractor {
                tau: rho,
                lambda: js[1..=d].to_vec(),
                nu: js[0].clone(),
            };
            let x = s2_dual_tractor_derivative(&at, &dual)
                .unwrap()
                .change_scale(&upv);
            let y = s2_dual_tractor_derivative(&ah, &dual.change_scale(&ups)).unwrap();
            assert!(close(&x.top, &y.top, 1e-10) && close(&x.middle, &y.middle, 1e-10));
            assert!(close(&x.bottom, &y.bottom, 1e-10));
        }
    }
}

#[test]
fn splitting_derivatives_lie_in_the_kernel() {
    let mut r = rng();
    let m = make_hyperbolic(2).unwrap();
    let lc = m.connection();
    for _ in 0..10 {
        let p = m.chart.random_interior_point(&mut r, 0.2);
        let f = random_poly(&m, &mut r, 1.0);
        let at = ScaleAt::new(&lc, &p, 2).unwrap();
        let s = f.jet(&p, 3).unwrap();
        assert!(std_in_kernel(
            &tractor_derivative(&at, &split_e1(&at, &s)).unwrap(),
            1e-10
        ));
        let d2 = s2_tractor_derivative(&at, &split_e2(&at, &s).unwrap()).unwrap();
        assert!(s2_in_kernel(&d2, 1e-10));
    }
}

#[test]
fn compact_scale_bottom_slot_diverges_on_the_hemisphere() {
    let m = make_flat_hemisphere((2, 0), 1).unwrap();
    let lc = m.connection();
    let tau = scale_density(&lc, 2.0).unwrap();
    let ups = OneForm::exact(m.rho.ln().scale(0.5));
    let hat = lc.projective_change(ups.clone());
    let base = m.boundary_point(&[0.3]).unwrap();
    let pts = boundary_ray_samples(&m.chart, &base, 0.1, 6).unwrap();
    let samples: Vec<(f64, f64)> = pts
        .iter()
        .map(|p| {
            let at = ScaleAt::new(&lc, p, 1).unwrap();
            let l = split_e2(&at, &tau.jet(p, 2).unwrap()).unwrap();
            let moved = l.change_scale(&ups.jets(p, 0).unwrap());
            let own = own_factor_jet(&hat, 2.0, p, 0).unwrap().value();
            let expect = own * tau.value(p).unwrap() / (4.0 * p[0] * p[0]);
            assert!((moved.rho[0].value() * own - expect).abs() < 1e-9 * expect);
            (p[0], moved.rho[0].value() * own)
        })
        .collect();
    let lim = extrapolate(&samples).unwrap();
    assert!(!lim.converged && lim.divergent);
}

#[test]
fn codifferential_is_nilpotent_and_images_match() {
    let mut r = rng();
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = r.random_range(2..=4);
        let skew = |r: &mut ChaCha8Rng, fiber: usize| {
            let mut v = vec![0.0; n * n * fiber];
            for a in 0..n {
                for b in a + 1..n {
                    for f in 0..fiber {
                        let x: f64 = r.random_range(-1.0..1.0);
                        v[(a * n + b) * fiber + f] = x;
                        v[(b * n + a) * fiber + f] = -x;
                    }
                }
            }
            v
        };
        let f = StdForm {
            degree: 2,
            dim: n,
            top: skew(&mut r, 1),
            bottom: skew(&mut r, n),
        };
        let once = kostant_codiff(&f).unwrap();
        assert!(std_in_image(&once, 1e-14));
        worst = worst.max(
            kostant_codiff(&once)
                .unwrap()
                .bottom
                .iter()
                .fold(0.0, |m, x| m.max(x.abs())),
        );
        let mut bottom = skew(&mut r, n * n);
        for k in 0..n * n {
            for b in 0..n {
                for c in 0..b {
                    bottom[(k * n + b) * n + c] = bottom[(k * n + c) * n + b];
                }
            }
        }
        let g = S2Form {
            degree: 2,
            dim: n,
            top: skew(&mut r, 1),
            middle: skew(&mut r, n),
            bottom,
        };
        let once = kostant_codiff_s2(&g).unwrap();
        assert!(s2_in_image(&once, 1e-14));
        let twice = kostant_codiff_s2(&once).unwrap();
        worst = worst
            .max(twice.middle.iter().fold(0.0, |m, x| m.max(x.abs())))
            .max(twice.bottom.iter().fold(0.0, |m, x| m.max(x.abs())));
    }
    assert!(worst < 1e-13);
}

#[test]
fn hat_connection_is_special() {
    let m = make_hyperbolic(1).unwrap();
    let hat: Connection = m
        .connection()
        .projective_change(OneForm::exact(m.rho.ln().scale(0.5)));
    assert!(hat.is_special());
}

#[test]
fn sigma_squared_rank_survives_roundoff_near_the_boundary() {
    let m = make_flat_hemisphere((2, 0), 1).unwrap();
    let lc = m.connection();
    let tau = scale_density(&lc, 2.0).unwrap();
    for r in [0.1, 3.125e-3, 3.9e-4] {
        let p = [r, -0.4];
        let at = ScaleAt::new(&lc, &p, 2).unwrap();
        let fr = split_e2_rank_signature(&at, &tau.jet(&p, 3).unwrap()).unwrap();
        assert_eq!((fr.rank, fr.positive), (1, 1), "rho = {r}");
    }
    let h = make_hyperbolic(2).unwrap();
    let lc = h.connection();
    let tau = scale_density(&lc, 2.0).unwrap();
    let p = [0.1, -0.3, 1e-3];
    let at = ScaleAt::new(&lc, &p, 2).unwrap();
    let fr = split_e2_rank_signature(&at, &tau.jet(&p, 3).unwrap()).unwrap();
    assert_eq!((fr.rank, fr.positive, fr.negative), (4, 1, 3));
}
