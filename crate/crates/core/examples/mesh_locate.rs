//! Build a non-uniform criss-cross mesh and locate a few points.
//!
//! cargo run -p qispline --example mesh_locate

use qispline::config::random_mesh;
use qispline::mesh::{barycentric, CrissCrossMesh, Partition1D, Point};

fn main() -> qispline::Result<()> {
    let mesh = CrissCrossMesh::new(
        Partition1D::new(vec![0.0, 0.1, 0.35, 0.7, 1.0])?,
        Partition1D::new(vec![0.0, 0.5, 0.6, 1.0])?,
    )?;
    let r = mesh.ratios();
    println!("{}x{} cells, {} triangles, {} BB dofs", mesh.m(), mesh.n(), mesh.triangle_count(), mesh.dof_count());
    println!("h = {:.3}, delta = {:.3}, h/delta = {:.2}", r.h, r.delta, r.gamma);

    for p in [Point::new(0.05, 0.05), Point::new(0.5, 0.55), Point::new(1.0, 1.0), Point::new(0.35, 0.3)] {
        let t = mesh.locate(p)?;
        let b = barycentric(&mesh.triangle_vertices(t), p);
        println!("{p} -> {t:?}  barycentric [{:.3}, {:.3}, {:.3}]", b[0], b[1], b[2]);
    }

    let rand = random_mesh(6, 6, 3.0, 42, [0.0, 1.0, 0.0, 1.0])?;
    println!("seeded random 6x6 mesh, h/delta = {:.3}", rand.ratios().gamma);
    println!("x knots: {:.3?}", rand.px().knots());
    Ok(())
}
