//! Sampling-based checks of the structural hypotheses on a model.
//!
//! None of these are proofs: each report records the radius of the sampled
//! ball, and anything outside it is outside certified scope.

use super::ModelSpec;
use crate::error::{Error, Result};
use crate::linalg;
use crate::sampling;

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub property: String,
    pub witness: Vec<Vec<f64>>,
    pub measured: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisReport {
    pub passed: bool,
    pub violations: Vec<Violation>,
    pub samples_used: usize,
    pub domain_radius: f64,
}

impl HypothesisReport {
    pub(crate) fn new(samples_used: usize, domain_radius: f64) -> Self {
        Self {
            passed: true,
            violations: Vec::new(),
            samples_used,
            domain_radius,
        }
    }

    pub(crate) fn push(&mut self, property: &str, witness: Vec<Vec<f64>>, measured: f64) {
        self.violations.push(Violation {
            property: property.to_string(),
            witness,
            measured,
        });
        self.passed = false;
    }

    /// Concatenate reports; the radius kept is the smallest one.
    pub fn merge(mut self, other: HypothesisReport) -> Self {
        self.samples_used += other.samples_used;
        self.domain_radius = self.domain_radius.min(other.domain_radius);
        self.violations.extend(other.violations);
        self.passed = self.violations.is_empty();
        self
    }
}

/// Slack for monotonicity comparisons on models where the inequality is tight.
pub fn tol_mono(dist_sq: f64) -> f64 {
    1e-9 * (1.0 + dist_sq)
}

fn finite_or(what: &'static str, x: &[f64], v: &[f64]) -> Result<()> {
    if linalg::all_finite(v) {
        Ok(())
    } else {
        Err(Error::Evaluation {
            what,
            point: x.to_vec(),
        })
    }
}

fn check_args(radius: f64, n: usize) -> Result<()> {
    if !(radius > 0.0) || n == 0 {
        return Err(Error::Domain(format!(
            "need radius > 0 and at least one sample, got radius = {radius}, n = {n}"
        )));
    }
    Ok(())
}

/// `<b(y) - b(x), y - x> <= -K |y - x|^2` on `n_pairs` uniform pairs in the ball.
pub fn check_semi_monotone(
    model: &ModelSpec,
    radius: f64,
    n_pairs: usize,
    rng_seed: u64,
) -> Result<HypothesisReport> {
    check_args(radius, n_pairs)?;
    let d = model.dim;
    let mut rng = sampling::seeded(rng_seed);
    let mut report = HypothesisReport::new(n_pairs, radius);
    for _ in 0..n_pairs {
        let x = sampling::uniform_in_ball(&mut rng, d, radius);
        let y = sampling::uniform_in_ball(&mut rng, d, radius);
        let bx = model.b(&x);
        finite_or("drift b", &x, &bx)?;
        let by = model.b(&y);
        finite_or("drift b", &y, &by)?;
        let diff: Vec<f64> = y.iter().zip(&x).map(|(a, b)| a - b).collect();
        let db: Vec<f64> = by.iter().zip(&bx).map(|(a, b)| a - b).collect();
        let dsq = linalg::norm_sq(&diff);
        let excess = linalg::dot(&db, &diff) + model.monotone_k * dsq;
        if excess > tol_mono(dsq) {
            report.push("semi_monotone", vec![x, y], excess);
        }
    }
    Ok(report)
}

/// `<grad b(x) y, y> <= -K |y|^2` for sampled `x`, `y` in the ball.
pub fn check_dissipativity(
    model: &ModelSpec,
    radius: f64,
    n_samples: usize,
    rng_seed: u64,
) -> Result<HypothesisReport> {
    check_args(radius, n_samples)?;
    let d = model.dim;
    let mut rng = sampling::seeded(rng_seed);
    let mut report = HypothesisReport::new(n_samples, radius);
    let mut gy = vec![0.0; d];
    for _ in 0..n_samples {
        let x = sampling::uniform_in_ball(&mut rng, d, radius);
        let y = sampling::uniform_in_ball(&mut rng, d, radius);
        let g = model.grad_b(&x);
        finite_or("drift gradient", &x, &g)?;
        linalg::matvec(&g, &y, &mut gy, d);
        let ysq = linalg::norm_sq(&y);
        let excess = linalg::dot(&gy, &y) + model.monotone_k * ysq;
        if excess > tol_mono(ysq) {
            report.push("dissipativity", vec![x, y], excess);
        }
    }
    Ok(report)
}

/// `f` and `sigma` are `k1`-Lipschitz (Euclidean / Frobenius) and `|f(x)| <= k1 (1 + |x|)`.
pub fn check_lipschitz(
    model: &ModelSpec,
    radius: f64,
    n_pairs: usize,
    rng_seed: u64,
) -> Result<HypothesisReport> {
    check_args(radius, n_pairs)?;
    let d = model.dim;
    let k1 = model.lipschitz_k1;
    let mut rng = sampling::seeded(rng_seed);
    let mut report = HypothesisReport::new(n_pairs, radius);
    for _ in 0..n_pairs {
        let x = sampling::uniform_in_ball(&mut rng, d, radius);
        let y = sampling::uniform_in_ball(&mut rng, d, radius);
        let dist = linalg::dist_sq(&x, &y).sqrt();
        let (fx, fy) = (model.f(&x), model.f(&y));
        finite_or("drift f", &x, &fx)?;
        finite_or("drift f", &y, &fy)?;
        let (sx, sy) = (model.sigma(&x), model.sigma(&y));
        finite_or("diffusion", &x, &sx)?;
        finite_or("diffusion", &y, &sy)?;
        let slack = 1e-9 * (1.0 + dist);
        let df = linalg::dist_sq(&fx, &fy).sqrt();
        if df > k1 * dist + slack {
            report.push("f_lipschitz", vec![x.clone(), y.clone()], df / dist);
        }
        let ds = linalg::dist_sq(&sx, &sy).sqrt();
        if ds > k1 * dist + slack {
            report.push("sigma_lipschitz", vec![x.clone(), y.clone()], ds / dist);
        }
        let fnorm = linalg::norm(&fx);
        if fnorm > k1 * (1.0 + linalg::norm(&x)) + 1e-9 {
            report.push("f_linear_growth", vec![x], fnorm);
        }
    }
    Ok(report)
}

/// Sampled check of `|d_alpha b(x)|^2 <= gamma_m (1 + |x|^{q_m})` for declared orders 1 and 2.
/// Higher declared orders have no analytic derivative available and are skipped.
pub fn check_growth(
    model: &ModelSpec,
    radius: f64,
    n_samples: usize,
    rng_seed: u64,
) -> Result<HypothesisReport> {
    check_args(radius, n_samples)?;
    let d = model.dim;
    let mut rng = sampling::seeded(rng_seed);
    let mut report = HypothesisReport::new(n_samples, radius);
    for _ in 0..n_samples {
        let x = sampling::uniform_in_ball(&mut rng, d, radius);
        let xn = linalg::norm(&x);
        for g in &model.growth {
            let worst = match g.order {
                1 => {
                    let jac = model.grad_b(&x);
                    finite_or("drift gradient", &x, &jac)?;
                    (0..d)
                        .map(|m| (0..d).map(|i| jac[i * d + m].powi(2)).sum::<f64>())
                        .fold(0.0, f64::max)
                }
                2 => {
                    let h = model.hess_b(&x);
                    finite_or("drift hessian", &x, &h)?;
                    let mut worst = 0.0f64;
                    for a in 0..d {
                        for c in 0..d {
                            let s: f64 = (0..d).map(|i| h[(i * d + a) * d + c].powi(2)).sum();
                            worst = worst.max(s);
                        }
                    }
                    worst
                }
                _ => continue,
            };
            let bound = g.gamma * (1.0 + xn.powf(g.q));
            if worst > bound * (1.0 + 1e-12) + 1e-12 {
                report.push(&format!("growth_order_{}", g.order), vec![x.clone()], worst);
            }
        }
    }
    Ok(report)
}

/// Central finite-difference step used by [`check_derivatives`].
pub const FD_STEP: f64 = 1e-5;
/// Mixed tolerance `|analytic - fd| <= FD_REL_TOL * max(1, |analytic|)`.
pub const FD_REL_TOL: f64 = 1e-4;

/// Compare every analytic derivative (gradients and Hessians of `b`, `f`, `sigma`)
/// against central differences of the next-lower derivative.
pub fn check_derivatives(
    model: &ModelSpec,
    radius: f64,
    n_samples: usize,
    rng_seed: u64,
) -> Result<HypothesisReport> {
    check_args(radius, n_samples)?;
    let d = model.dim;
    let mut rng = sampling::seeded(rng_seed);
    let mut report = HypothesisReport::new(n_samples, radius);
    let h = FD_STEP;

    type Eval<'a> = Box<dyn Fn(&[f64], &mut [f64]) + 'a>;
    // (name, value-of-order-k, derivative-of-order-k+1, output size of order-k)
    let pairs: Vec<(&str, Eval, Eval, usize)> = vec![
        (
            "grad_b",
            Box::new(|x, o| model.drift_b.value(x, o)),
            Box::new(|x, o| model.drift_b.jacobian(x, o)),
            d,
        ),
        (
            "hess_b",
            Box::new(|x, o| model.drift_b.jacobian(x, o)),
            Box::new(|x, o| model.drift_b.hessian(x, o)),
            d * d,
        ),
        (
            "grad_f",
            Box::new(|x, o| model.drift_f.value(x, o)),
            Box::new(|x, o| model.drift_f.jacobian(x, o)),
            d,
        ),
        (
            "hess_f",
            Box::new(|x, o| model.drift_f.jacobian(x, o)),
            Box::new(|x, o| model.drift_f.hessian(x, o)),
            d * d,
        ),
        (
            "grad_sigma",
            Box::new(|x, o| model.diffusion_sigma.value(x, o)),
            Box::new(|x, o| model.diffusion_sigma.jacobian(x, o)),
            d * d,
        ),
        (
            "hess_sigma",
            Box::new(|x, o| model.diffusion_sigma.jacobian(x, o)),
            Box::new(|x, o| model.diffusion_sigma.hessian(x, o)),
            d * d * d,
        ),
    ];

    for _ in 0..n_samples {
        let x = sampling::uniform_in_ball(&mut rng, d, radius);
        for (name, lower, upper, size) in &pairs {
            let mut analytic = vec![0.0; size * d];
            upper(&x, &mut analytic);
            finite_or("derivative", &x, &analytic)?;
            let mut plus = vec![0.0; *size];
            let mut minus = vec![0.0; *size];
            let mut worst = 0.0f64;
            for m in 0..d {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[m] += h;
                xm[m] -= h;
                lower(&xp, &mut plus);
                lower(&xm, &mut minus);
                for e in 0..*size {
                    let fd = (plus[e] - minus[e]) / (2.0 * h);
                    let an = analytic[e * d + m];
                    let err = (an - fd).abs() / an.abs().max(1.0);
                    worst = worst.max(err);
                }
            }
            if worst > FD_REL_TOL {
                report.push(name, vec![x.clone()], worst);
            }
        }
    }
    Ok(report)
}

/// All sampled checks merged into one report.
pub fn check_hypothesis(
    model: &ModelSpec,
    radius: f64,
    n_samples: usize,
    rng_seed: u64,
) -> Result<HypothesisReport> {
    Ok(check_semi_monotone(model, radius, n_samples, rng_seed)?
        .merge(check_dissipativity(model, radius, n_samples, rng_seed.wrapping_add(1))?)
        .merge(check_lipschitz(model, radius, n_samples, rng_seed.wrapping_add(2))?)
        .merge(check_growth(model, radius, n_samples, rng_seed.wrapping_add(3))?)
        .merge(check_derivatives(model, radius.min(5.0), 100.min(n_samples), rng_seed.wrapping_add(4))?))
}

#[cfg(test)]
mod tests {
    use super::super::builtin::*;
    use super::*;
    use std::sync::Arc;

    fn scalar_model(drift: Arc<dyn super::super::VectorField>, k: f64) -> ModelSpec {
        ModelSpec::builder("t", drift).monotone_k(k).xi(1.0).build().unwrap()
    }

    #[derive(Debug)]
    struct Expanding;
    impl super::super::VectorField for Expanding {
        fn dim(&self) -> usize {
            1
        }
        fn value(&self, x: &[f64], o: &mut [f64]) {
            o[0] = x[0];
        }
        fn jacobian(&self, _x: &[f64], o: &mut [f64]) {
            o[0] = 1.0;
        }
        fn hessian(&self, _x: &[f64], o: &mut [f64]) {
            o[0] = 0.0;
        }
    }

    #[derive(Debug)]
    struct Blowup;
    impl super::super::VectorField for Blowup {
        fn dim(&self) -> usize {
            1
        }
        fn value(&self, x: &[f64], o: &mut [f64]) {
            o[0] = if x[0] > 0.0 { f64::NAN } else { -x[0] };
        }
        fn jacobian(&self, _x: &[f64], o: &mut [f64]) {
            o[0] = -1.0;
        }
        fn hessian(&self, _x: &[f64], o: &mut [f64]) {
            o[0] = 0.0;
        }
    }

    #[test]
    fn semi_monotone_examples() {
        let ou = scalar_model(Arc::new(LinearDrift { dim: 1, k: 1.0 }), 1.0);
        assert!(check_semi_monotone(&ou, 10.0, 1000, 1).unwrap().passed);

        let cubic = scalar_model(Arc::new(CubicDrift), 1.0);
        assert!(check_semi_monotone(&cubic, 10.0, 1000, 1).unwrap().passed);

        let bad = scalar_model(Arc::new(Expanding), 1.0);
        let r = check_semi_monotone(&bad, 10.0, 1000, 1).unwrap();
        assert!(!r.passed);
        assert_eq!(r.violations[0].witness.len(), 2);
    }

    #[test]
    fn cubic_pair_identity_brute_force() {
        // <b(y) - b(x), y - x> = -(y - x)^2 (1 + x^2 + xy + y^2) on a grid of pairs.
        let m = scalar_model(Arc::new(CubicDrift), 1.0);
        for i in -20..=20 {
            for j in -20..=20 {
                let (x, y) = (i as f64 * 0.5, j as f64 * 0.5);
                let lhs = (m.b(&[y])[0] - m.b(&[x])[0]) * (y - x);
                let rhs = -(y - x).powi(2) * (1.0 + x * x + x * y + y * y);
                assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs.abs()));
                assert!(lhs <= -(y - x).powi(2) + 1e-9);
            }
        }
    }

    #[test]
    fn dissipativity_examples() {
        let ou = scalar_model(Arc::new(LinearDrift { dim: 1, k: 1.0 }), 1.0);
        assert!(check_dissipativity(&ou, 10.0, 1000, 2).unwrap().passed);
        let cubic = scalar_model(Arc::new(CubicDrift), 1.0);
        assert!(check_dissipativity(&cubic, 10.0, 1000, 2).unwrap().passed);
        let ou_k2 = scalar_model(Arc::new(LinearDrift { dim: 1, k: 1.0 }), 2.0);
        assert!(!check_dissipativity(&ou_k2, 10.0, 1000, 2).unwrap().passed);
    }

    #[test]
    fn non_finite_coefficient_names_the_point() {
        let m = scalar_model(Arc::new(Blowup), 1.0);
        match check_semi_monotone(&m, 1.0, 100, 3) {
            Err(Error::Evaluation { point, .. }) => assert!(point[0] > 0.0),
            other => panic!("expected evaluation error, got {other:?}"),
        }
    }

    #[test]
    fn builtins_satisfy_all_checks() {
        for m in [
            ou(1, 1.0, 1.0, vec![1.0]).unwrap(),
            ou(3, 2.0, 0.5, vec![1.0, 0.0, -1.0]).unwrap(),
            cubic(0.2, 1.0, 0.5, vec![0.5]).unwrap(),
            cubic2d(0.2, 1.0, 0.3, 0.5, vec![0.5, -0.3]).unwrap(),
        ] {
            let r = check_hypothesis(&m, 5.0, 500, 11).unwrap();
            assert!(r.passed, "{}: {:?}", m.name, r.violations.first());
        }
    }

    #[test]
    fn wrong_derivative_is_caught() {
        #[derive(Debug)]
        struct WrongGrad;
        impl super::super::VectorField for WrongGrad {
            fn dim(&self) -> usize {
                1
            }
            fn value(&self, x: &[f64], o: &mut [f64]) {
                o[0] = -x[0] - x[0].powi(3);
            }
            fn jacobian(&self, x: &[f64], o: &mut [f64]) {
                o[0] = -1.0 - 2.0 * x[0] * x[0];
            }
            fn hessian(&self, x: &[f64], o: &mut [f64]) {
                o[0] = -4.0 * x[0];
            }
        }
        let m = scalar_model(Arc::new(WrongGrad), 1.0);
        let r = check_derivatives(&m, 5.0, 50, 4).unwrap();
        assert!(r.violations.iter().any(|v| v.property == "grad_b"));
    }
}
