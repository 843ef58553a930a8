use pcompact::boundary::{
    make_bumped_hyperbolic, make_conformal_toy, make_flat_hemisphere, make_hyperbolic, ModelMetric,
};
use pcompact::connections::{riemann_ricci, Connection};
use pcompact::fields::expr::{parse_expr, Expr, Func, Rational};
use pcompact::fields::extrapolate::{extrapolate_with, ladder, ExtrapolationOptions};
use pcompact::fields::{OneForm, ScalarField};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn models() -> Vec<ModelMetric> {
    vec![
        make_hyperbolic(1).unwrap(),
        make_hyperbolic(2).unwrap(),
        make_bumped_hyperbolic(2, 0.3).unwrap(),
        make_flat_hemisphere((2, 0), 1).unwrap(),
        make_flat_hemisphere((3, 0), 2).unwrap(),
        make_flat_hemisphere((2, 1), 2).unwrap(),
        make_conformal_toy(1).unwrap(),
    ]
}

fn names() -> Vec<String> {
    ["x", "y", "rho"].iter().map(|s| s.to_string()).collect()
}

fn leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![
        (0usize..3).prop_map(Expr::var),
        (-1e4f64..1e4).prop_map(Expr::num),
        (0i64..20).prop_map(|k| Expr::num(k as f64)),
    ]
}

fn ast() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(5, 40, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::add(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::sub(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::mul(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::div(a, b)),
            (inner.clone(), -4i64..5, prop_oneof![Just(1i64), Just(2i64)])
                .prop_map(|(e, p, q)| Expr::pow(e, Rational::new(p, q).unwrap())),
            (inner, 0..Func::ALL.len()).prop_map(|(e, k)| Expr::call(Func::ALL[k], e)),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn printed_expressions_reparse(e in ast()) {
        let names = names();
        let text = e.display(&names).to_string();
        let once = parse_expr(&text, &names).map_err(|err| TestCaseError::fail(format!("{text}: {err}")))?;
        let again = parse_expr(&once.display(&names).to_string(), &names).unwrap();
        prop_assert_eq!(&once, &again);
        prop_assert_eq!(&once, &e, "printed as {}", text);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn polynomial_limits_are_exact(
        c in proptest::collection::vec(-10.0f64..10.0, 4),
        order in 1usize..4,
        eps0 in 0.01f64..0.5,
    ) {
        let samples: Vec<(f64, f64)> = ladder(eps0, 6)
            .into_iter()
            .map(|e| (e, (0..=order).map(|k| c[k] * e.powi(k as i32)).sum()))
            .collect();
        let opts = ExtrapolationOptions { fit_order: order, ..Default::default() };
        let lim = extrapolate_with(&samples, opts).unwrap();
        prop_assert!(lim.converged);
        prop_assert!((lim.limit - c[0]).abs() <= 1e-12 * c[0].abs().max(1.0), "{} vs {}", lim.limit, c[0]);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn declared_symmetries_hold(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for m in models() {
            let pts = m.random_interior_points(&mut rng, 100);
            prop_assert!(m.metric.tensor().symmetry_defect(&pts).unwrap() < 1e-12);
        }
    }

    #[test]
    fn jets_match_central_differences(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = 1e-5;
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-6 * b.abs().max(1.0);
        for m in models() {
            let d = m.dim();
            for p in m.random_interior_points(&mut rng, 5) {
                let centre = m.metric.jets(&p, 3).unwrap();
                for a in 0..d {
                    let (mut up, mut down) = (p.clone(), p.clone());
                    up[a] += h;
                    down[a] -= h;
                    let (ju, jd) = (m.metric.jets(&up, 3).unwrap(), m.metric.jets(&down, 3).unwrap());
                    for ((c, u), w) in centre.iter().zip(&ju).zip(&jd) {
                        let fd = |x: f64, y: f64| (x - y) / (2.0 * h);
                        prop_assert!(close(c.d1(a), fd(u.value(), w.value())));
                        for b in 0..d {
                            prop_assert!(close(c.d2(a, b), fd(u.d1(b), w.d1(b))));
                            for e in 0..d {
                                prop_assert!(close(c.d3(a, b, e), fd(u.d2(b, e), w.d2(b, e))));
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn connection_invariants(seed in any::<u64>(), a in -0.5f64..0.5, b in -0.5f64..0.5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for m in models() {
            let lc = m.connection();
            let names = m.chart.coord_names();
            let f = ScalarField::parse(&m.chart, &format!("{a}*{}^2 + {b}*{}", names[0], names[names.len() - 1])).unwrap();
            let ups = OneForm::exact(f);
            let changed = lc.projective_change(ups.clone());
            let back = changed.projective_change(ups.neg());
            let d = m.dim();
            for p in m.random_interior_points(&mut rng, 10) {
                prop_assert!(lc.torsion_defect(&p).unwrap() < 1e-12);
                prop_assert!(changed.torsion_defect(&p).unwrap() < 1e-12);
                let g0 = lc.christoffel(&p).unwrap();
                let g1 = back.christoffel(&p).unwrap();
                let scale = g0.iter().fold(1.0f64, |s, x| s.max(x.abs()));
                prop_assert!(g0.iter().zip(&g1).all(|(x, y)| (x - y).abs() <= 1e-12 * scale));
                prop_assert!(metric_defect(&m, &lc, &p) < 1e-10);
                let (_, ric) = riemann_ricci(&lc, &p).unwrap();
                let rs = ric.iter().fold(1.0f64, |s, x| s.max(x.abs()));
                for i in 0..d {
                    for j in 0..d {
                        prop_assert!((ric[i * d + j] - ric[j * d + i]).abs() < 1e-10 * rs);
                    }
                }
            }
        }
    }
}

/// Largest `|∇_c g_ab|` relative to the size of `∂g`.
fn metric_defect(m: &ModelMetric, conn: &Connection, p: &[f64]) -> f64 {
    let d = m.dim();
    let g = m.metric.jets(p, 1).unwrap();
    let gamma = conn.christoffel(p).unwrap();
    let gam = |c: usize, a: usize, b: usize| gamma[(c * d + a) * d + b];
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 1.0;
    for c in 0..d {
        for a in 0..d {
            for b in 0..d {
                let dg = g[a * d + b].d1(c);
                let s: f64 = (0..d)
                    .map(|e| {
                        gam(e, c, a) * g[e * d + b].value() + gam(e, c, b) * g[a * d + e].value()
                    })
                    .sum();
                scale = scale.max(dg.abs());
                worst = worst.max((dg - s).abs());
            }
        }
    }
    worst / scale
}
