//! Sampled uniform norms of both operators on uniform and random meshes.
//!
//! cargo run --release -p qispline --example lebesgue_norms

use std::sync::Arc;

use qispline::analysis::lebesgue_sup;
use qispline::basis::BasisFamily;
use qispline::config::{random_mesh, UNIT_SQUARE};
use qispline::mesh::CrissCrossMesh;
use qispline::operators::{Operator, OperatorKind};

fn main() -> qispline::Result<()> {
    let meshes = [
        ("uniform 8x8", CrissCrossMesh::uniform(8, 8, UNIT_SQUARE)?),
        ("random 8x8, gamma 4", random_mesh(8, 8, 4.0, 3, UNIT_SQUARE)?),
    ];
    for (label, mesh) in meshes {
        let family = Arc::new(BasisFamily::build(&mesh)?);
        for kind in OperatorKind::ALL {
            let op = Operator::new(kind, family.clone());
            let (sup, at) = lebesgue_sup(&op, 50)?;
            println!("{label:<20} {kind:<7} sup = {sup:.6} at {at}  (bound {})", kind.norm_bound());
        }
    }
    Ok(())
}
