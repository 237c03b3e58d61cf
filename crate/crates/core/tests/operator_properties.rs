use std::collections::HashSet;
use std::sync::Arc;

use proptest::prelude::*;
use qispline::analysis::{sup_error, SampleRule};
use qispline::basis::BasisFamily;
use qispline::bernstein::Deriv;
use qispline::config::{random_mesh, UNIT_SQUARE};
use qispline::functions::TestFunction;
use qispline::mesh::{CrissCrossMesh, Point};
use qispline::operators::{Operator, OperatorKind, S2Coefficients};

fn family(seed: u64) -> Arc<BasisFamily> {
    Arc::new(BasisFamily::build(&random_mesh(5, 4, 3.0, seed, UNIT_SQUARE).unwrap()).unwrap())
}

#[test]
fn quadratic_derivatives_are_reproduced_everywhere() {
    let fam = family(2);
    let q: TestFunction = r#"poly:{"2,0":0.3,"1,1":-1.1,"0,2":2,"1,0":4,"0,0":-1}"#.parse().unwrap();
    for kind in OperatorKind::ALL {
        let qf = Operator::new(kind, fam.clone()).apply(|p| q.value(p)).unwrap();
        for k in 0..=30 {
            for l in 0..=30 {
                let p = Point::new(k as f64 / 30.0, l as f64 / 30.0);
                let d = qf.evaluate(p, Deriv::DX).unwrap() - q.derivative(Deriv::DX, p).unwrap();
                assert!(d.abs() < 1e-9 * 5.0, "{kind} {p}: {d}");
            }
        }
    }
}

#[test]
fn mixed_second_derivative_is_constant_per_triangle() {
    let fam = family(4);
    let f: TestFunction = "exp-sum".parse().unwrap();
    let qf = Operator::new(OperatorKind::W2star, fam.clone()).apply(|p| f.value(p)).unwrap();
    for t in fam.mesh().triangles() {
        let a = qf.evaluate_in(t, [0.2, 0.3, 0.5], Deriv::DXY);
        let b = qf.evaluate_in(t, [0.6, 0.1, 0.3], Deriv::DXY);
        assert!((a - b).abs() < 1e-12 * a.abs().max(1.0));
    }
}

#[test]
fn cubic_error_obeys_third_order_bound() {
    let mesh = CrissCrossMesh::uniform(8, 8, UNIT_SQUARE).unwrap();
    let op = Operator::build(OperatorKind::S2, &mesh).unwrap();
    let f: TestFunction = r#"poly:{"3,0":1}"#.parse().unwrap();
    let r = sup_error(&f, &op, Deriv::VALUE, SampleRule::default()).unwrap();
    let bound = 0.125 * (1.0f64 / 8.0).powi(3) * 6.0;
    assert!(r.error > 0.0 && r.error <= bound, "{} vs {bound}", r.error);
}

#[test]
fn denser_samples_never_report_less() {
    let op = Operator::new(OperatorKind::S2, family(6));
    let f: TestFunction = "sine".parse().unwrap();
    for alpha in Deriv::UP_TO_SECOND {
        let coarse = sup_error(&f, &op, alpha, SampleRule::default()).unwrap().error;
        let fine = sup_error(&f, &op, alpha, SampleRule::new(12).unwrap()).unwrap().error;
        assert!(fine >= coarse, "{alpha}");
    }
}

#[test]
fn lebesgue_function_is_at_least_one() {
    let fam = family(8);
    for kind in OperatorKind::ALL {
        let op = Operator::new(kind, fam.clone());
        for k in 0..=20 {
            let p = Point::new(k as f64 / 20.0, (k as f64 * 0.37).fract());
            assert!(op.lebesgue_function(p).unwrap() >= 1.0 - 1e-12);
        }
    }
}

#[test]
fn site_census_examples() {
    let m2 = CrissCrossMesh::uniform(2, 2, UNIT_SQUARE).unwrap();
    assert_eq!(Operator::build(OperatorKind::S2, &m2).unwrap().data_site_count(), 16);
    assert_eq!(OperatorKind::W2star.nominal_site_count(2, 2), 13);
    assert_eq!(OperatorKind::W2star.nominal_site_count(3, 2), 18);
}

#[test]
fn all_data_sites_lie_in_domain() {
    let fam = family(9);
    for kind in OperatorKind::ALL {
        let op = Operator::new(kind, fam.clone());
        let worst = op.sites().iter().map(|&(_, p)| fam.mesh().distance_outside(p)).fold(0.0, f64::max);
        assert_eq!(worst, 0.0);
    }
}

#[test]
fn coefficients_for_uniform_interior() {
    let c = S2Coefficients::new(&CrissCrossMesh::uniform(6, 6, UNIT_SQUARE).unwrap());
    for w in [c.a(3), c.c(3), c.a_bar(3), c.c_bar(3)] {
        assert!((w + 0.125).abs() < 1e-15);
    }
    assert!((c.b(3, 3) - 1.5).abs() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn operator_is_linear(seed in 0u64..50, a in -3.0f64..3.0, b in -3.0f64..3.0, kind in prop::sample::select(OperatorKind::ALL.to_vec())) {
        let op = Operator::new(kind, family(seed));
        let f = |p: Point| (3.0 * p.x).sin() + p.y * p.y * p.y;
        let g = |p: Point| (p.x - 0.3).abs() + (2.0 * p.y).exp();
        let qf = op.apply(f).unwrap();
        let qg = op.apply(g).unwrap();
        let qh = op.apply(|p| a * f(p) + b * g(p)).unwrap();
        for ((x, y), z) in qf.coefficients().iter().zip(qg.coefficients()).zip(qh.coefficients()) {
            let want = a * x + b * y;
            prop_assert!((z - want).abs() <= 1e-12 * (1.0 + a.abs() * x.abs() + b.abs() * y.abs()));
        }
    }

    #[test]
    fn operator_is_local(seed in 0u64..50, tri in 0usize..80, kind in prop::sample::select(OperatorKind::ALL.to_vec())) {
        let fam = family(seed);
        let mesh = fam.mesh().clone();
        let t = mesh.triangle_from_index(tri % mesh.triangle_count());
        let op = Operator::new(kind, fam);
        let near: HashSet<_> = t
            .active_indices()
            .iter()
            .flat_map(|&(i, j)| op.functional(i, j).unwrap().terms.iter().map(|term| term.site))
            .collect();
        let f = |p: Point| (p.x * 5.0).cos() * p.y;
        let qf = op.apply(f).unwrap();
        let values: Vec<f64> = op
            .sites()
            .iter()
            .map(|&(site, p)| if near.contains(&site) { f(p) } else { f(p) + 1e3 })
            .collect();
        let qg = op.apply_site_values(&values).unwrap();
        prop_assert_eq!(*qf.patch(t).coeffs(), *qg.patch(t).coeffs());
        // the neighbourhood stays within two cells of the triangle's cell
        for s in &near {
            let p = s.point(&mesh);
            let cell = mesh.locate(p).unwrap();
            prop_assert!(cell.r.abs_diff(t.r) <= 2 && cell.s.abs_diff(t.s) <= 2);
        }
    }
}
