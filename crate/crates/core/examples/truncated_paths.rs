//! One noise path driven through increasing truncation levels of the cubic model.

use semimono::cutoff::{make_truncated, CutoffFamily};
use semimono::model::builtin;
use semimono::paths::{self, euler_truncated, sample_noise, stopping_time, TimeGrid};

fn main() -> semimono::Result<()> {
    let model = builtin::cubic(0.2, 1.0, 0.5, vec![1.5])?.with_xi(1.0)?;
    let fam = CutoffFamily::for_model(&model)?;
    let noise = sample_noise(TimeGrid::new(1.0, 1000)?, 1, 17);
    for n in [1, 2, 4, 8] {
        let path = euler_truncated(&make_truncated(&model, n, &fam)?, &noise)?;
        println!(
            "n = {n}: X_T = {:+.6}, sup |X| = {:.4}, exit index {:?}",
            path.terminal()[0],
            path.sup_norm(),
            stopping_time(&path, n, fam.xi)
        );
    }
    let (path, tm) = paths::settle(&model, &fam, &noise, 1, 1 << 12)?;
    println!("settled at n = {}: X_T = {:+.6}", tm.n, path.terminal()[0]);
    Ok(())
}
