//! Check the a priori error bounds for a smooth test function.
//!
//! cargo run --release -p qispline --example error_bounds

use std::sync::Arc;

use qispline::analysis::{check_theorem, BoundOptions, Theorem};
use qispline::basis::BasisFamily;
use qispline::config::{random_mesh, UNIT_SQUARE};
use qispline::functions::TestFunction;
use qispline::operators::{Operator, OperatorKind};

fn main() -> qispline::Result<()> {
    let mesh = random_mesh(8, 8, 3.0, 11, UNIT_SQUARE)?;
    let family = Arc::new(BasisFamily::build(&mesh)?);
    let f: TestFunction = "sine".parse()?;

    for kind in OperatorKind::ALL {
        let op = Operator::new(kind, family.clone());
        for t in Theorem::ALL {
            for r in check_theorem(t, &op, &f, BoundOptions::default())? {
                let bound = r.bound.unwrap_or(f64::NAN);
                println!(
                    "{kind:<7} theorem {t:<3} D^{}  error {:.3e}  bound {:.3e}  ratio {:.3}",
                    r.alpha,
                    r.error,
                    bound,
                    r.error / bound
                );
            }
        }
    }

    // Only Lipschitz data: just the first bound applies.
    let ridge: TestFunction = "abs-ridge:0.47".parse()?;
    let op = Operator::new(OperatorKind::S2, family);
    for r in check_theorem(Theorem::T1, &op, &ridge, BoundOptions::default())? {
        println!("abs-ridge theorem 1: error {:.3e} bound {:.3e}", r.error, r.bound.unwrap_or(f64::NAN));
    }
    Ok(())
}
