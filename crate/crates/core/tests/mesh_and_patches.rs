use proptest::prelude::*;
use qispline::bernstein::{polynomial_to_patch, Deriv};
use qispline::mesh::{barycentric, CrissCrossMesh, Partition1D, Point};
use qispline::polynomial::Polynomial;

fn partition(steps: Vec<f64>, a: f64) -> Partition1D {
    let mut knots = vec![a];
    for s in steps {
        let last = *knots.last().unwrap();
        knots.push(last + s);
    }
    Partition1D::new(knots).unwrap()
}

fn mesh_strategy() -> impl Strategy<Value = CrissCrossMesh> {
    (
        prop::collection::vec(0.05f64..2.0, 2..7),
        prop::collection::vec(0.05f64..2.0, 2..7),
        -3.0f64..3.0,
        -3.0f64..3.0,
    )
        .prop_map(|(xs, ys, a, c)| CrissCrossMesh::new(partition(xs, a), partition(ys, c)).unwrap())
}

proptest! {
    #[test]
    fn located_triangle_contains_point(mesh in mesh_strategy(), u in 0.0f64..=1.0, v in 0.0f64..=1.0) {
        let [a, b, c, d] = mesh.domain();
        let p = Point::new(a + u * (b - a), c + v * (d - c));
        let t = mesh.locate(p).unwrap();
        let bary = barycentric(&mesh.triangle_vertices(t), p);
        prop_assert!(bary.iter().all(|&l| l >= -1e-9), "{p} not in {t}: {bary:?}");
        prop_assert!((bary.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn points_outside_are_rejected(mesh in mesh_strategy(), eps in 1e-6f64..1.0) {
        let [_, b, c, _] = mesh.domain();
        prop_assert!(mesh.locate(Point::new(b + eps, c)).is_err());
    }

    #[test]
    fn bernstein_form_reproduces_quadratics(
        coeffs in prop::array::uniform6(-5.0f64..5.0),
        verts in prop::array::uniform6(-2.0f64..2.0),
        l in prop::array::uniform3(0.0f64..1.0),
    ) {
        let v = [Point::new(verts[0], verts[1]), Point::new(verts[2], verts[3]), Point::new(verts[4], verts[5])];
        let area = (v[1].x - v[0].x) * (v[2].y - v[0].y) - (v[2].x - v[0].x) * (v[1].y - v[0].y);
        prop_assume!(area.abs() > 0.05);
        let poly = Polynomial::new([(2, 0), (1, 1), (0, 2), (1, 0), (0, 1), (0, 0)].into_iter().zip(coeffs));
        let patch = polynomial_to_patch(&poly, v).unwrap();
        let s = l.iter().sum::<f64>().max(1e-9);
        let b = l.map(|x| x / s);
        let p = Point::new(
            b[0] * v[0].x + b[1] * v[1].x + b[2] * v[2].x,
            b[0] * v[0].y + b[1] * v[1].y + b[2] * v[2].y,
        );
        let scale = 1.0 + coeffs.iter().map(|c| c.abs()).sum::<f64>() * 4.0;
        prop_assert!((patch.eval_barycentric(b) - poly.eval(p)).abs() < 1e-11 * scale);
        for alpha in Deriv::UP_TO_SECOND {
            let want = poly.derivative(alpha.dx as u32, alpha.dy as u32).eval(p);
            let got = patch.derivative_barycentric(alpha, b);
            prop_assert!((got - want).abs() < 1e-8 * scale / area.abs(), "{alpha}: {got} vs {want}");
        }
    }
}

#[test]
fn every_triangle_has_six_distinct_dofs() {
    let mesh = CrissCrossMesh::uniform(3, 4, [0.0, 1.0, 0.0, 1.0]).unwrap();
    let mut seen = vec![0usize; mesh.dof_count()];
    for t in mesh.triangles() {
        let mut d = mesh.triangle_dofs(t).to_vec();
        d.sort_unstable();
        d.dedup();
        assert_eq!(d.len(), 6);
        for k in d {
            seen[k] += 1;
        }
    }
    // every registered dof belongs to some triangle
    assert!(seen.iter().all(|&c| c > 0));
    // vertices + centers + h-edges + v-edges + half-diagonals
    let (m, n) = (3, 4);
    assert_eq!(mesh.dof_count(), (m + 1) * (n + 1) + m * n + m * (n + 1) + (m + 1) * n + 4 * m * n);
}
