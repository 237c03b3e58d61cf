//! Refinement study on random meshes, written as CSV to stdout.
//!
//! cargo run --release -p qispline --example convergence_study

use qispline::analysis::{convergence_study, write_convergence_csv, StudyConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = StudyConfig::from_json(
        r#"{"operator": "w2star", "function": "exp-sum", "levels": 4, "m0": 4, "gamma": 2.0, "seed": 9}"#,
    )?;
    let rows = convergence_study(&cfg)?;
    write_convergence_csv(&mut std::io::stdout().lock(), &cfg, &rows)?;

    let last = rows.last().expect("at least one level");
    if let Some(o) = last.orders {
        eprintln!("finest orders: value {:.2}, gradient {:.2}/{:.2}, hessian {:.2}/{:.2}/{:.2}", o[0], o[1], o[2], o[3], o[4], o[5]);
    }
    Ok(())
}
