//! Coupled gaps between truncation levels and a reference level.

use semimono::cutoff::CutoffFamily;
use semimono::estimators;
use semimono::model::builtin;
use semimono::paths::TimeGrid;

fn main() -> semimono::Result<()> {
    let model = builtin::cubic(0.2, 1.0, 0.5, vec![1.5])?.with_xi(1.0)?;
    let fam = CutoffFamily::for_model(&model)?;
    let rep = estimators::convergence_report(&model, &fam, &[1, 2, 3, 4], 16, TimeGrid::new(1.0, 200)?, 2.0, 2000, 0)?;
    for i in 0..rep.levels.len() {
        println!(
            "n = {}: gap {:.3e} +- {:.1e}, settled {:.3}",
            rep.levels[i], rep.gaps[i], rep.stderrs[i], rep.settled_fraction[i]
        );
    }
    println!("monotone {}, settled nonzero gaps {}", rep.monotone, rep.nonzero_settled_gaps);
    Ok(())
}
