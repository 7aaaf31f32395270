//! Radial profile of the cutoff family and its level-uniform derivative bound.

use semimono::cutoff::{certify_uniform_bounds, CutoffFamily};
use semimono::model::builtin;

fn main() -> semimono::Result<()> {
    let model = builtin::ou(1, 1.0, 1.0, vec![0.0])?;
    let fam = CutoffFamily::for_model(&model)?;
    println!("kernel: {:?}", fam.kernel);
    for n in [1, 2, 4] {
        let r = fam.radius(n);
        println!("n = {n}, R = {r}");
        for i in 0..=10 {
            let p = fam.profile(n, 2.5 * r * i as f64 / 10.0);
            println!("  |x| = {:6.3}  phi = {:.6}  phi' = {:+.6}  phi'' = {:+.6}", p.radius, p.value, p.d1, p.d2);
        }
    }
    let cert = certify_uniform_bounds(&fam, &model, &[1, 2], 1..=6, 5000, 3)?;
    for row in &cert.rows {
        println!(
            "order {} n {}: sup * R^l = {:.4} (<= {:.4}), |b| * sup = {:.4} (<= {:.4})",
            row.order, row.n, row.scaled_derivative, row.derivative_bound, row.sup_product, row.product_bound
        );
    }
    println!("certified: {}", cert.report.passed);
    Ok(())
}
