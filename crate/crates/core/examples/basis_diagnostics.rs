//! Construct the normalized B-spline family and print its diagnostics.
//!
//! cargo run --release -p qispline --example basis_diagnostics

use qispline::basis::BasisFamily;
use qispline::bernstein::Deriv;
use qispline::config::random_mesh;
use qispline::mesh::Point;

fn main() -> qispline::Result<()> {
    let mesh = random_mesh(8, 6, 2.5, 1, [0.0, 2.0, 0.0, 1.0])?;
    let family = BasisFamily::build(&mesh)?;

    let p = Point::new(0.8, 0.4);
    let values = family.values_at(p, Deriv::VALUE)?;
    let sum: f64 = values.iter().map(|(_, v)| v).sum();
    println!("{} splines nonzero at {p}, sum = {sum:.15}", values.len());

    let d = family.diagnostics();
    println!("{}", serde_json::to_string_pretty(&d).expect("diagnostics serialize"));
    let v = d.violations(1e-10);
    if v.is_empty() {
        println!("all checks within tolerance");
    } else {
        println!("outside tolerance: {v:?}");
    }
    Ok(())
}
