//! First-order Malliavin derivative of OU against its closed form.

use semimono::cutoff::CutoffFamily;
use semimono::malliavin;
use semimono::model::builtin;
use semimono::paths::{self, sample_noise, TimeGrid};

fn main() -> semimono::Result<()> {
    let model = builtin::ou(1, 1.0, 1.0, vec![1.0])?;
    let fam = CutoffFamily::for_model(&model)?;
    let noise = sample_noise(TimeGrid::new(1.0, 1000)?, 1, 0);
    let (path, tm) = paths::settle(&model, &fam, &noise, 1, 1 << 10)?;
    let first = malliavin::propagate_first(&tm, &path, &noise)?;
    for r in (0..=1000).step_by(200) {
        let t = noise.grid.t(r);
        println!("r = {t:.1}: D_r X_1 = {:.6}, exact {:.6}", first.value(r, 1000)[0], (t - 1.0).exp());
    }
    println!(
        "||DX_1||_H^2 = {:.6}, exact {:.6}",
        malliavin::hnorm_sq(&first, 1000),
        (1.0 - (-2.0f64).exp()) / 2.0
    );
    Ok(())
}
