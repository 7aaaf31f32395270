//! Second-order field of the 2-d cubic model: initial tensors and symmetry.

use semimono::cutoff::CutoffFamily;
use semimono::malliavin;
use semimono::model::builtin;
use semimono::paths::{self, sample_noise, TimeGrid};

fn main() -> semimono::Result<()> {
    let model = builtin::cubic2d(0.2, 1.0, 0.5, 0.5, vec![0.3, -0.2])?.with_xi(1.0)?;
    let fam = CutoffFamily::for_model(&model)?;
    let noise = sample_noise(TimeGrid::new(1.0, 400)?, 2, 5);
    let (path, tm) = paths::settle(&model, &fam, &noise, 1, 1 << 12)?;
    let first = malliavin::propagate_first(&tm, &path, &noise)?;
    let pairs = malliavin::pair_grid(400, 100);
    let second = malliavin::propagate_second(&tm, &path, &noise, &first, &[200, 400], &pairs)?;
    for &(r, tau) in &pairs {
        println!("(r, tau) = ({r}, {tau}): D^2 X_T = {:?}", second.get(r, tau, 400).unwrap_or_default());
    }
    println!("symmetry gap {:.3e}", second.symmetry_gap());
    Ok(())
}
