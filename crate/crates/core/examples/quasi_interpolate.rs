//! Apply both quasi-interpolants to a smooth function and compare
//! values and derivatives with the exact ones.
//!
//! cargo run --release -p qispline --example quasi_interpolate

use std::sync::Arc;

use qispline::basis::BasisFamily;
use qispline::bernstein::Deriv;
use qispline::config::random_mesh;
use qispline::functions::TestFunction;
use qispline::mesh::Point;
use qispline::operators::{Operator, OperatorKind};

fn main() -> qispline::Result<()> {
    let mesh = random_mesh(12, 12, 2.0, 5, [0.0, 1.0, 0.0, 1.0])?;
    let family = Arc::new(BasisFamily::build(&mesh)?);
    let f: TestFunction = "exp-sum".parse()?;
    let p = Point::new(0.3141, 0.2718);

    for kind in OperatorKind::ALL {
        let op = Operator::new(kind, family.clone());
        let qf = op.apply(|x| f.value(x))?;
        println!("{kind}: {} data sites", op.data_site_count());
        for alpha in Deriv::UP_TO_SECOND {
            let approx = qf.evaluate(p, alpha)?;
            let exact = f.derivative(alpha, p).expect("smooth");
            println!("  D^{alpha}: {approx:+.8} exact {exact:+.8} error {:.2e}", (approx - exact).abs());
        }
    }

    // Quadratics are reproduced exactly.
    let q: TestFunction = r#"poly:{"2,0":1,"1,1":-2,"0,1":0.5}"#.parse()?;
    let op = Operator::new(OperatorKind::S2, family);
    let qq = op.apply(|x| q.value(x))?;
    println!("quadratic reproduction error at {p}: {:.1e}", (qq.evaluate(p, Deriv::VALUE)? - q.value(p)).abs());
    Ok(())
}
