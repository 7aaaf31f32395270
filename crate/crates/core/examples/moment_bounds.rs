//! Monte Carlo second moments across truncation levels against the Gronwall bound.

use semimono::cutoff::CutoffFamily;
use semimono::estimators::{self, UniformBoundOptions};
use semimono::model::builtin;
use semimono::paths::TimeGrid;

fn main() -> semimono::Result<()> {
    let model = builtin::cubic(0.2, 1.0, 0.5, vec![0.5])?.with_xi(1.0)?;
    let fam = CutoffFamily::for_model(&model)?;
    let grid = TimeGrid::new(1.0, 100)?;
    let rep = estimators::uniform_bound_report(&model, &fam, &[1, 2, 3, 4], grid, 2.0, 4000, 0, &UniformBoundOptions::default())?;
    for (n, m) in rep.levels.iter().zip(&rep.bounded) {
        let bound = m.bounds.as_ref().map_or(f64::NAN, |b| b[100]);
        println!("n = {n}: E|X_T - x0|^2 = {:.5} +- {:.5} (bound {bound:.4})", m.estimates[100], m.stderrs[100]);
    }
    println!("settled fraction {:?}", rep.settled_fraction);
    println!("dominated {}, stabilized {}, verdict {}", rep.dominated, rep.stabilized, rep.verdict);
    Ok(())
}
