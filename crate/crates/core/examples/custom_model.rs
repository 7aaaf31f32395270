//! A user-defined drift `b(x) = -x^5` plugged into the builder and checked.

use std::sync::Arc;

use semimono::cutoff::CutoffFamily;
use semimono::model::{self, builtin::ConstantDiffusion, VectorField};
use semimono::paths::{self, sample_noise, TimeGrid};
use semimono::ModelSpec;

#[derive(Debug)]
struct Quintic;

impl VectorField for Quintic {
    fn dim(&self) -> usize {
        1
    }
    fn value(&self, x: &[f64], out: &mut [f64]) {
        out[0] = -x[0].powi(5);
    }
    fn jacobian(&self, x: &[f64], out: &mut [f64]) {
        out[0] = -5.0 * x[0].powi(4);
    }
    fn hessian(&self, x: &[f64], out: &mut [f64]) {
        out[0] = -20.0 * x[0].powi(3);
    }
}

fn main() -> semimono::Result<()> {
    // |b'|^2 = 25 x^8 <= 25 (1 + |x|^8), |b''|^2 = 400 x^6 <= 400 (1 + |x|^6)
    let model = ModelSpec::builder("quintic", Arc::new(Quintic))
        .diffusion(Arc::new(ConstantDiffusion::scalar(1, 0.7)))
        .monotone_k(1e-9)
        .growth(1, 25.0, 8.0)
        .growth(2, 400.0, 6.0)
        .xi(1.0)
        .x0(vec![0.8])
        .build()?;
    let rep = model::check_hypothesis(&model, 4.0, 2000, 0)?;
    println!("hypothesis passed: {} ({} violations)", rep.passed, rep.violations.len());
    let fam = CutoffFamily::for_model(&model)?;
    let noise = sample_noise(TimeGrid::new(2.0, 2000)?, 1, 9);
    let (path, tm) = paths::settle(&model, &fam, &noise, 1, 1 << 12)?;
    println!("settled at n = {}, X_T = {:.6}", tm.n, path.terminal()[0]);
    Ok(())
}
