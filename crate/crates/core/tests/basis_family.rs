use qispline::basis::{construct_bspline_shape, scaling_system_dense, solve_scales, univariate_bspline, BasisFamily};
use qispline::bernstein::Deriv;
use qispline::config::{random_mesh, UNIT_SQUARE};
use qispline::mesh::{CrissCrossMesh, Point};
use qispline::numeric::{solve_least_squares, DEFAULT_REL_TOL};
use qispline::operators::s2_functionals;

#[test]
fn dense_and_streaming_scales_agree() {
    let mesh = random_mesh(4, 5, 3.0, 17, UNIT_SQUARE).unwrap();
    let shapes: Vec<_> = mesh
        .all_indices()
        .map(|(i, j)| construct_bspline_shape(&mesh, i, j, DEFAULT_REL_TOL).unwrap())
        .collect();
    let s2 = s2_functionals(&mesh);
    let (streamed, stats) = solve_scales(&mesh, &shapes, &s2, DEFAULT_REL_TOL).unwrap();
    let (a, b) = scaling_system_dense(&mesh, &shapes, &s2);
    let (dense, residual) = solve_least_squares(&a, &b).unwrap();
    assert!(residual < 1e-9, "dense residual {residual}");
    assert!(stats.residual < 1e-9);
    for (x, y) in streamed.iter().zip(&dense) {
        assert!((x - y).abs() < 1e-9 * y.abs().max(1.0), "{x} vs {y}");
    }
}

#[test]
fn uniform_inner_scale_is_one_half() {
    let fam = BasisFamily::build(&CrissCrossMesh::uniform(6, 6, UNIT_SQUARE).unwrap()).unwrap();
    for i in 1..=6 {
        for j in 1..=6 {
            assert!((fam.scale(i, j) - 0.5).abs() < 1e-12, "scale({i},{j}) = {}", fam.scale(i, j));
        }
    }
}

#[test]
fn bottom_edge_trace_is_tensor_of_univariate_splines() {
    let mesh = random_mesh(5, 4, 2.5, 3, [0.0, 2.0, -1.0, 1.0]).unwrap();
    let fam = BasisFamily::build(&mesh).unwrap();
    let c = mesh.py().start();
    for k in 0..=40 {
        let x = 2.0 * k as f64 / 40.0;
        for i in 0..=mesh.m() + 1 {
            let want = univariate_bspline(mesh.px(), i, x).unwrap();
            let got = fam.eval(i, 0, Point::new(x, c)).unwrap();
            assert!((got - want).abs() < 1e-10, "B[{i},0]({x}) = {got}, want {want}");
        }
    }
}

#[test]
fn uniform_interior_spline_matches_box_spline_values() {
    // Zwart-Powell element: 1/2 at its center, 1/8 at the neighbouring cell
    // centers, 1/4 at the corners of its central cell.
    let mesh = CrissCrossMesh::uniform(8, 8, UNIT_SQUARE).unwrap();
    let fam = BasisFamily::build(&mesh).unwrap();
    let c = mesh.center(4, 4);
    let h = 1.0 / 8.0;
    assert!((fam.eval(4, 4, c).unwrap() - 0.5).abs() < 1e-12);
    for (dx, dy) in [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)] {
        let p = Point::new(c.x + dx * h, c.y + dy * h);
        assert!((fam.eval(4, 4, p).unwrap() - 0.125).abs() < 1e-12);
    }
    for (dx, dy) in [(0.5, 0.5), (-0.5, 0.5)] {
        let p = Point::new(c.x + dx * h, c.y + dy * h);
        assert!((fam.eval(4, 4, p).unwrap() - 0.25).abs() < 1e-12);
    }
    let g = fam.values_at(c, Deriv::DX).unwrap();
    let own = g.iter().find(|(slot, _)| *slot == mesh.index_slot(4, 4)).unwrap().1;
    assert!(own.abs() < 1e-10);
}

#[test]
fn small_meshes_build() {
    for (m, n) in [(2, 2), (2, 3), (3, 2), (3, 3)] {
        let d = BasisFamily::build(&CrissCrossMesh::uniform(m, n, UNIT_SQUARE).unwrap())
            .unwrap()
            .diagnostics();
        assert!(d.partition_of_unity < 1e-10, "{m}x{n}");
        assert!(d.c1_relative < 1e-10, "{m}x{n}");
    }
}
