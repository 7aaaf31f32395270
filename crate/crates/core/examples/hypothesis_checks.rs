//! Sample the structural conditions for each built-in model and print any witnesses.

use semimono::model::{self, builtin};

fn main() -> semimono::Result<()> {
    let models = [
        builtin::ou(2, 1.0, 1.0, vec![0.0, 0.0])?,
        builtin::cubic(0.2, 1.0, 0.5, vec![0.5])?,
        builtin::cubic2d(0.2, 1.0, 0.5, 0.5, vec![0.3, -0.2])?,
    ];
    for m in &models {
        let rep = model::check_hypothesis(m, 10.0, 2000, 1)?;
        println!("{:<8} passed = {} ({} samples)", m.name, rep.passed, rep.samples_used);
        for v in &rep.violations {
            println!("  {} at {:?}: {}", v.property, v.witness, v.measured);
        }
    }
    Ok(())
}
