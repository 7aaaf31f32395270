//! Smooth radial cutoffs `phi_n` and the truncated drifts `b_n = phi_n b`.
//!
//! `phi_n(x) = eta((|x| - R) / R)` with `R = n^xi`, where `eta` is the smooth
//! step that is exactly 1 on `(-inf, 0]` and exactly 0 on `[1, inf)`:
//!
//! ```text
//! eta(s) = 1 / (1 + exp(1/(1-s) - 1/s)),   0 < s < 1
//! ```
//!
//! `-eta'` is a C-infinity bump on `[0, 1]` with unit mass, so `eta` is the
//! radial mollification of the indicator of `[0, 3R/2)` by a kernel of
//! half-width `R/2`. Derivatives are closed-form; nothing is integrated at
//! runtime.

use std::ops::RangeInclusive;

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{HypothesisReport, ModelSpec, Sde};
use crate::sampling;

/// The 1-D mollifier `psi` on `(-1, 1)` behind the cutoff profile, with its
/// recorded constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BumpKernel {
    /// Numerically integrated mass of `psi` (1 up to quadrature error).
    pub normalization: f64,
    /// `sup |psi|`.
    pub sup_norm: f64,
    /// `sup |eta'|`, bounds `|grad phi_n| n^xi`. Equals `2 sup|psi|`.
    pub first_order: f64,
    /// `max(sup |eta''|, sup |eta'|)`, bounds every entry of `Hess phi_n` times `n^{2 xi}`.
    pub second_order: f64,
}

/// Smooth step: `(eta, eta', eta'')` at `s`.
pub fn smooth_step(s: f64) -> (f64, f64, f64) {
    if s <= 0.0 {
        return (1.0, 0.0, 0.0);
    }
    if s >= 1.0 {
        return (0.0, 0.0, 0.0);
    }
    let t = 1.0 - s;
    let z = 1.0 / t - 1.0 / s;
    let eta = 1.0 / (1.0 + z.exp());
    let one_minus = 1.0 / (1.0 + (-z).exp());
    let w = eta * one_minus;
    let q = 1.0 / (s * s) + 1.0 / (t * t);
    let dq = -2.0 / (s * s * s) + 2.0 / (t * t * t);
    let d1 = -w * q;
    let d2 = -d1 * (one_minus - eta) * q - w * dq;
    (eta, d1, d2)
}

impl BumpKernel {
    /// `psi(t) = -eta'((t + 1) / 2) / 2`, supported in `[-1, 1]`.
    pub fn psi(t: f64) -> f64 {
        -0.5 * smooth_step(0.5 * (t + 1.0)).1
    }

    pub fn standard() -> Self {
        let normalization = simpson(Self::psi, -1.0, 1.0, 20_000);
        let sup_norm = sup_abs(Self::psi, -1.0, 1.0);
        let first = sup_abs(|s| smooth_step(s).1, 0.0, 1.0);
        let second = sup_abs(|s| smooth_step(s).2, 0.0, 1.0);
        Self {
            normalization,
            sup_norm,
            first_order: first,
            second_order: second.max(first),
        }
    }

    /// Kernel constant for derivative order 1 or 2.
    pub fn order_constant(&self, order: usize) -> Option<f64> {
        match order {
            1 => Some(self.first_order),
            2 => Some(self.second_order),
            _ => None,
        }
    }
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + k as f64 * h);
    }
    acc * h / 3.0
}

/// Dense scan followed by golden-section refinement of `|f|` around the best point.
fn sup_abs(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let n = 20_000;
    let h = (b - a) / n as f64;
    let (mut best_k, mut best) = (0usize, 0.0f64);
    for k in 0..=n {
        let v = f(a + k as f64 * h).abs();
        if v > best {
            best = v;
            best_k = k;
        }
    }
    let (mut lo, mut hi) = ((a + (best_k as f64 - 1.0) * h).max(a), (a + (best_k as f64 + 1.0) * h).min(b));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..100 {
        let m1 = hi - g * (hi - lo);
        let m2 = lo + g * (hi - lo);
        if f(m1).abs() > f(m2).abs() {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    best.max(f(0.5 * (lo + hi)).abs())
}

/// The family `{phi_n : n >= 1}` for a given truncation exponent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffFamily {
    pub xi: f64,
    pub dim: usize,
    pub kernel: BumpKernel,
}

/// Radial profile of `phi_n` at distance `r`: value, `d/dr`, `d^2/dr^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfilePoint {
    pub radius: f64,
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

impl CutoffFamily {
    pub fn new(xi: f64, dim: usize) -> Result<Self> {
        if !(xi > 0.0) || !xi.is_finite() || dim == 0 {
            return Err(Error::Domain(format!(
                "cutoff family needs xi > 0 and dim >= 1, got xi = {xi}, dim = {dim}"
            )));
        }
        Ok(Self {
            xi,
            dim,
            kernel: BumpKernel::standard(),
        })
    }

    pub fn for_model(model: &ModelSpec) -> Result<Self> {
        Self::new(model.xi, model.dim)
    }

    /// Inner radius `n^xi`; `phi_n` is 1 inside it and 0 beyond twice it.
    pub fn radius(&self, n: u32) -> f64 {
        (n as f64).powf(self.xi)
    }

    /// Mollifier width used for level `n` (`n^xi / 2`).
    pub fn epsilon(&self, n: u32) -> f64 {
        0.5 * self.radius(n)
    }

    pub fn profile(&self, n: u32, r: f64) -> ProfilePoint {
        let big_r = self.radius(n);
        let (value, d1, d2) = if r <= big_r {
            (1.0, 0.0, 0.0)
        } else {
            let (e, e1, e2) = smooth_step((r - big_r) / big_r);
            (e, e1 / big_r, e2 / (big_r * big_r))
        };
        ProfilePoint {
            radius: r,
            value,
            d1,
            d2,
        }
    }

    pub fn phi(&self, n: u32, x: &[f64]) -> f64 {
        let r = linalg::norm(x);
        let big_r = self.radius(n);
        if r <= big_r {
            1.0
        } else {
            smooth_step((r - big_r) / big_r).0
        }
    }

    pub fn phi_grad(&self, n: u32, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        let r = linalg::norm(x);
        let big_r = self.radius(n);
        if r > big_r && r < 2.0 * big_r {
            let e1 = smooth_step((r - big_r) / big_r).1;
            let scale = e1 / (big_r * r);
            for (gi, xi) in g.iter_mut().zip(x) {
                *gi = scale * xi;
            }
        }
        g
    }

    /// Full Hessian of `phi_n` (row-major `d x d`).
    pub fn phi_hess(&self, n: u32, x: &[f64]) -> Vec<f64> {
        let d = x.len();
        let mut h = vec![0.0; d * d];
        let r = linalg::norm(x);
        let big_r = self.radius(n);
        if r > big_r && r < 2.0 * big_r {
            let (_, e1, e2) = smooth_step((r - big_r) / big_r);
            let radial = e2 / (big_r * big_r);
            let tangential = e1 / (big_r * r);
            for a in 0..d {
                for c in 0..d {
                    let xx = x[a] * x[c] / (r * r);
                    let delta = if a == c { 1.0 } else { 0.0 };
                    h[a * d + c] = radial * xx + tangential * (delta - xx);
                }
            }
        }
        h
    }

    /// `u^T Hess phi_n(x) v`.
    pub fn phi_hess_contract(&self, n: u32, x: &[f64], u: &[f64], v: &[f64]) -> f64 {
        let d = x.len();
        let h = self.phi_hess(n, x);
        let mut hv = vec![0.0; d];
        linalg::matvec(&h, v, &mut hv, d);
        linalg::dot(u, &hv)
    }
}

/// `dX = [b_n(X) + f(X)] dt + sigma(X) dW` with `b_n = phi_n b`.
#[derive(Debug, Clone)]
pub struct TruncatedModel {
    pub base: ModelSpec,
    pub n: u32,
    pub family: CutoffFamily,
}

pub fn make_truncated(model: &ModelSpec, n: u32, family: &CutoffFamily) -> Result<TruncatedModel> {
    if n == 0 {
        return Err(Error::Domain("truncation level must be >= 1".into()));
    }
    if family.dim != model.dim {
        return Err(Error::Dimension {
            expected: model.dim,
            got: family.dim,
        });
    }
    Ok(TruncatedModel {
        base: model.clone(),
        n,
        family: *family,
    })
}

enum Zone {
    Inner,
    Shell,
    Outer,
}

impl TruncatedModel {
    pub fn radius(&self) -> f64 {
        self.family.radius(self.n)
    }

    fn zone(&self, x: &[f64]) -> Zone {
        let r = linalg::norm(x);
        let big_r = self.radius();
        if r <= big_r {
            Zone::Inner
        } else if r >= 2.0 * big_r {
            Zone::Outer
        } else {
            Zone::Shell
        }
    }

    /// `b_n(x)` alone.
    pub fn bn(&self, x: &[f64]) -> Vec<f64> {
        let d = self.base.dim;
        let mut out = vec![0.0; d];
        match self.zone(x) {
            Zone::Inner => self.base.drift_b.value(x, &mut out),
            Zone::Outer => {}
            Zone::Shell => {
                self.base.drift_b.value(x, &mut out);
                let phi = self.family.phi(self.n, x);
                out.iter_mut().for_each(|v| *v *= phi);
            }
        }
        out
    }

    /// `grad b_n = phi grad b + b (grad phi)^T`.
    pub fn grad_bn(&self, x: &[f64]) -> Vec<f64> {
        let d = self.base.dim;
        let mut out = vec![0.0; d * d];
        match self.zone(x) {
            Zone::Inner => self.base.drift_b.jacobian(x, &mut out),
            Zone::Outer => {}
            Zone::Shell => {
                self.base.drift_b.jacobian(x, &mut out);
                let phi = self.family.phi(self.n, x);
                let gphi = self.family.phi_grad(self.n, x);
                let b = self.base.b(x);
                for i in 0..d {
                    for m in 0..d {
                        out[i * d + m] = phi * out[i * d + m] + b[i] * gphi[m];
                    }
                }
            }
        }
        out
    }

    /// Second-order product rule on `phi_n b`.
    pub fn hess_bn(&self, x: &[f64]) -> Vec<f64> {
        let d = self.base.dim;
        let mut out = vec![0.0; d * d * d];
        match self.zone(x) {
            Zone::Inner => self.base.drift_b.hessian(x, &mut out),
            Zone::Outer => {}
            Zone::Shell => {
                self.base.drift_b.hessian(x, &mut out);
                let phi = self.family.phi(self.n, x);
                let gphi = self.family.phi_grad(self.n, x);
                let hphi = self.family.phi_hess(self.n, x);
                let b = self.base.b(x);
                let jb = self.base.grad_b(x);
                for i in 0..d {
                    for a in 0..d {
                        for c in 0..d {
                            let k = (i * d + a) * d + c;
                            out[k] = phi * out[k]
                                + gphi[a] * jb[i * d + c]
                                + gphi[c] * jb[i * d + a]
                                + b[i] * hphi[a * d + c];
                        }
                    }
                }
            }
        }
        out
    }
}

impl Sde for TruncatedModel {
    fn dim(&self) -> usize {
        self.base.dim
    }

    fn x0(&self) -> &[f64] {
        &self.base.x0
    }

    fn drift(&self, x: &[f64], out: &mut [f64]) {
        let bn = self.bn(x);
        self.base.drift_f.value(x, out);
        // b_n + f, summed in the same order on every level
        out.iter_mut().zip(&bn).for_each(|(o, b)| *o = b + *o);
    }

    fn drift_jacobian(&self, x: &[f64], out: &mut [f64]) {
        let jb = self.grad_bn(x);
        self.base.drift_f.jacobian(x, out);
        out.iter_mut().zip(&jb).for_each(|(o, b)| *o = b + *o);
    }

    fn drift_hessian(&self, x: &[f64], out: &mut [f64]) {
        let hb = self.hess_bn(x);
        self.base.drift_f.hessian(x, out);
        out.iter_mut().zip(&hb).for_each(|(o, b)| *o = b + *o);
    }

    fn diffusion(&self, x: &[f64], out: &mut [f64]) {
        self.base.diffusion_sigma.value(x, out);
    }

    fn diffusion_jacobian(&self, x: &[f64], out: &mut [f64]) {
        self.base.diffusion_sigma.jacobian(x, out);
    }

    fn diffusion_hessian(&self, x: &[f64], out: &mut [f64]) {
        self.base.diffusion_sigma.hessian(x, out);
    }
}

/// Sampled `sup |b_n(x) - b_n(y)| / |x - y|` over pairs in the ball of the given radius.
pub fn lipschitz_estimate(tm: &TruncatedModel, radius: f64, n_pairs: usize, seed: u64) -> f64 {
    let d = tm.base.dim;
    let mut rng = sampling::seeded(seed);
    let mut worst = 0.0f64;
    for _ in 0..n_pairs {
        let x = sampling::uniform_in_ball(&mut rng, d, radius);
        let y = sampling::uniform_in_ball(&mut rng, d, radius);
        let dist = linalg::dist_sq(&x, &y).sqrt();
        if dist > 0.0 {
            worst = worst.max(linalg::dist_sq(&tm.bn(&x), &tm.bn(&y)).sqrt() / dist);
        }
    }
    worst
}

/// Per-(order, level) sampled suprema over the transition shell.
#[derive(Debug, Clone, PartialEq)]
pub struct CertificateRow {
    pub order: usize,
    pub n: u32,
    /// Order 1: `sup |grad phi_n|`; order 2: `sup max_{a,c} |d_a d_c phi_n|`.
    pub sup_derivative: f64,
    /// `sup_derivative * n^{xi * order}`.
    pub scaled_derivative: f64,
    /// `sup |b(x)| * |d_L phi_n(x)|` with the same derivative measure.
    pub sup_product: f64,
    pub derivative_bound: f64,
    pub product_bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CutoffCertificate {
    pub report: HypothesisReport,
    pub rows: Vec<CertificateRow>,
}

/// Relative slack on the certification bounds.
pub const CERT_SLACK: f64 = 1e-9;

/// Sample the transition shell `n^xi < |x| < 2 n^xi` for each level and compare the
/// derivative and drift-product suprema against `C_l` and
/// `M_l = 2^{xi + 1} gamma_l sup|psi|`, with `C_l` the kernel constant of order `l`.
pub fn certify_uniform_bounds(
    family: &CutoffFamily,
    model: &ModelSpec,
    orders: &[usize],
    n_range: RangeInclusive<u32>,
    n_samples: usize,
    seed: u64,
) -> Result<CutoffCertificate> {
    if *n_range.start() == 0 || n_samples == 0 {
        return Err(Error::Domain("levels start at 1 and need samples".into()));
    }
    let d = family.dim;
    let mut rows = Vec::new();
    let mut max_radius = 0.0f64;
    let mut report = HypothesisReport::new(0, 0.0);
    let mut rng = sampling::seeded(seed);
    for &order in orders {
        let constant = family
            .kernel
            .order_constant(order)
            .ok_or_else(|| Error::Domain(format!("only orders 1 and 2 are certified, got {order}")))?;
        let growth = model.growth_for(order).ok_or(Error::MissingGrowth(order))?;
        let product_bound = 2f64.powf(family.xi + 1.0) * growth.gamma * family.kernel.sup_norm;
        for n in n_range.clone() {
            let big_r = family.radius(n);
            max_radius = max_radius.max(2.0 * big_r);
            let (mut sup_der, mut sup_prod) = (0.0f64, 0.0f64);
            let mut witness = (Vec::new(), Vec::new());
            for _ in 0..n_samples {
                let x = sampling::radial_in_shell(&mut rng, d, big_r, 2.0 * big_r);
                let der = match order {
                    1 => linalg::norm(&family.phi_grad(n, &x)),
                    _ => family
                        .phi_hess(n, &x)
                        .iter()
                        .fold(0.0f64, |m, v| m.max(v.abs())),
                };
                let b = model.b(&x);
                if !linalg::all_finite(&b) {
                    return Err(Error::Evaluation {
                        what: "drift b",
                        point: x,
                    });
                }
                let prod = linalg::norm(&b) * der;
                if der > sup_der {
                    sup_der = der;
                    witness.0 = x.clone();
                }
                if prod > sup_prod {
                    sup_prod = prod;
                    witness.1 = x;
                }
            }
            report.samples_used += n_samples;
            if sup_der > constant * (1.0 + CERT_SLACK) {
                report.push(&format!("cutoff_derivative_order_{order}_n_{n}"), vec![witness.0], sup_der);
            }
            if sup_prod > product_bound * (1.0 + CERT_SLACK) {
                report.push(&format!("cutoff_product_order_{order}_n_{n}"), vec![witness.1], sup_prod);
            }
            rows.push(CertificateRow {
                order,
                n,
                sup_derivative: sup_der,
                scaled_derivative: sup_der * big_r.powi(order as i32),
                sup_product: sup_prod,
                derivative_bound: constant,
                product_bound,
            });
        }
    }
    report.domain_radius = max_radius;
    Ok(CutoffCertificate { report, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::builtin;

    /// Kernel written out directly from the exponential bump, independent of `smooth_step`.
    fn psi_direct(t: f64) -> f64 {
        if t <= -1.0 || t >= 1.0 {
            return 0.0;
        }
        let s = 0.5 * (t + 1.0);
        let u = (-1.0 / s).exp();
        let v = (-1.0 / (1.0 - s)).exp();
        0.5 * u * v * (1.0 / (s * s) + 1.0 / ((1.0 - s) * (1.0 - s))) / ((u + v) * (u + v))
    }

    /// Gauss-Legendre 5-point composite rule.
    fn gauss(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
        const X: [f64; 5] = [0.0, -0.5384693101056831, 0.5384693101056831, -0.906179845938664, 0.906179845938664];
        const W: [f64; 5] = [0.5688888888888889, 0.47862867049936647, 0.47862867049936647, 0.23692688505618908, 0.23692688505618908];
        let h = (b - a) / panels as f64;
        let mut acc = 0.0;
        for p in 0..panels {
            let mid = a + (p as f64 + 0.5) * h;
            for k in 0..5 {
                acc += W[k] * f(mid + 0.5 * h * X[k]);
            }
        }
        acc * 0.5 * h
    }

    /// phi_n(x) as the convolution of psi_eps with the indicator of [0, 3R/2), eps = R/2.
    fn phi_by_quadrature(xi: f64, n: u32, r: f64) -> f64 {
        let big_r = (n as f64).powf(xi);
        let eps = 0.5 * big_r;
        let mass = gauss(psi_direct, -1.0, 1.0, 400);
        // integrate psi_eps(y) over y with r - y < 3R/2, i.e. y > r - 3R/2
        let lo = (r - 1.5 * big_r).max(-eps);
        if lo >= eps {
            return 0.0;
        }
        gauss(|y| psi_direct(y / eps) / eps, lo, eps, 400) / mass
    }

    #[test]
    fn kernel_constants() {
        let k = BumpKernel::standard();
        assert!((k.normalization - 1.0).abs() < 1e-10, "{}", k.normalization);
        assert!((k.sup_norm - 1.0).abs() < 1e-12);
        assert!((k.first_order - 2.0 * k.sup_norm).abs() < 1e-12);
        assert!(k.second_order >= k.first_order);
    }

    #[test]
    fn phi_examples() {
        let fam = CutoffFamily::new(1.0, 1).unwrap();
        assert_eq!(fam.phi(2, &[0.0]), 1.0);
        assert_eq!(fam.phi(1, &[3.0]), 0.0);
        let v = fam.phi(1, &[1.5]);
        assert!(v > 0.0 && v < 1.0);
        assert!((v - phi_by_quadrature(1.0, 1, 1.5)).abs() < 1e-8);
    }

    #[test]
    fn phi_matches_quadrature_across_shell() {
        for (xi, n) in [(1.0, 1), (1.0, 3), (0.5, 4), (2.0, 2)] {
            let fam = CutoffFamily::new(xi, 1).unwrap();
            let big_r = fam.radius(n);
            for k in 0..=40 {
                let r = big_r * (0.9 + 1.2 * k as f64 / 40.0);
                let a = fam.phi(n, &[r]);
                let b = phi_by_quadrature(xi, n, r);
                assert!((a - b).abs() < 1e-8, "xi {xi} n {n} r {r}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let fam = CutoffFamily::new(1.0, 1).unwrap();
        let h = 1e-6;
        let x = 1.5;
        let fd = (fam.phi(1, &[x + h]) - fam.phi(1, &[x - h])) / (2.0 * h);
        let g = fam.phi_grad(1, &[x])[0];
        assert!(((g - fd) / g).abs() <= 1e-5);
        assert_eq!(fam.phi_grad(3, &[2.9]), vec![0.0]);
    }

    #[test]
    fn hessian_matches_finite_difference_in_3d() {
        let fam = CutoffFamily::new(0.7, 3).unwrap();
        let x = [1.1, -0.9, 1.3];
        let n = 2;
        let h = 1e-5;
        let hess = fam.phi_hess(n, &x);
        for c in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[c] += h;
            xm[c] -= h;
            let gp = fam.phi_grad(n, &xp);
            let gm = fam.phi_grad(n, &xm);
            for a in 0..3 {
                let fd = (gp[a] - gm[a]) / (2.0 * h);
                assert!((hess[a * 3 + c] - fd).abs() < 1e-7, "{a}{c}");
            }
        }
        let u = [1.0, 2.0, -1.0];
        let v = [0.5, 0.0, 1.0];
        let direct: f64 = (0..3)
            .flat_map(|a| (0..3).map(move |c| (a, c)))
            .map(|(a, c)| u[a] * hess[a * 3 + c] * v[c])
            .sum();
        assert!((fam.phi_hess_contract(n, &x, &u, &v) - direct).abs() < 1e-14);
    }

    #[test]
    fn truncated_examples() {
        let ou = builtin::ou(1, 1.0, 1.0, vec![1.0]).unwrap();
        let fam = CutoffFamily::for_model(&ou).unwrap();
        let t3 = make_truncated(&ou, 3, &fam).unwrap();
        for x in [-3.0, -1.2, 0.0, 2.5, 3.0] {
            assert_eq!(t3.bn(&[x]), vec![-x]);
        }
        let t1 = make_truncated(&ou, 1, &fam).unwrap();
        for x in [2.0, -2.0, 7.5] {
            assert_eq!(t1.bn(&[x]), vec![0.0]);
        }

        let cubic = builtin::cubic(0.2, 1.0, 0.5, vec![0.5]).unwrap();
        let fam = CutoffFamily::new(1.0, 1).unwrap();
        let t2 = make_truncated(&cubic, 2, &fam).unwrap();
        assert_eq!(t2.bn(&[1.0]), vec![-2.0]);
        assert_eq!(t2.grad_bn(&[1.0]), vec![-4.0]);
    }

    #[test]
    fn truncated_derivatives_match_finite_differences() {
        let m = builtin::cubic2d(0.2, 1.0, 0.3, 0.5, vec![0.5, -0.3]).unwrap();
        let fam = CutoffFamily::new(1.0, 2).unwrap();
        let tm = make_truncated(&m, 1, &fam).unwrap();
        let h = 1e-6;
        for x in [[1.2, 0.3], [-0.8, -1.1], [0.2, 1.7]] {
            let j = tm.grad_bn(&x);
            let hs = tm.hess_bn(&x);
            for m_ in 0..2 {
                let mut xp = x;
                let mut xm = x;
                xp[m_] += h;
                xm[m_] -= h;
                let (bp, bm) = (tm.bn(&xp), tm.bn(&xm));
                let (jp, jm) = (tm.grad_bn(&xp), tm.grad_bn(&xm));
                for i in 0..2 {
                    let fd = (bp[i] - bm[i]) / (2.0 * h);
                    assert!((j[i * 2 + m_] - fd).abs() < 1e-6 * (1.0 + fd.abs()));
                    for a in 0..2 {
                        let fd2 = (jp[i * 2 + a] - jm[i * 2 + a]) / (2.0 * h);
                        let an = hs[(i * 2 + a) * 2 + m_];
                        assert!((an - fd2).abs() < 1e-5 * (1.0 + fd2.abs()), "{an} vs {fd2}");
                    }
                }
            }
        }
    }

    #[test]
    fn certification_ou_and_zero_drift() {
        let ou = builtin::ou(1, 1.0, 1.0, vec![1.0]).unwrap();
        let fam = CutoffFamily::for_model(&ou).unwrap();
        let cert = certify_uniform_bounds(&fam, &ou, &[1], 1..=6, 10_000, 5).unwrap();
        assert!(cert.report.passed, "{:?}", cert.report.violations);
        let psi = fam.kernel.sup_norm;
        for row in &cert.rows {
            assert!(row.sup_product <= 2.0 * 4.0 * psi);
        }

        let zero = crate::model::ModelSpec::builder(
            "zero",
            std::sync::Arc::new(builtin::ZeroField { dim: 1 }),
        )
        .xi(1.0)
        .growth(1, 1.0, 1.0)
        .build()
        .unwrap();
        let cert = certify_uniform_bounds(&fam, &zero, &[1], 1..=6, 1000, 5).unwrap();
        assert!(cert.rows.iter().all(|r| r.sup_product == 0.0));
    }

    #[test]
    fn certification_requires_growth_metadata() {
        let ou = builtin::ou(1, 1.0, 1.0, vec![1.0]).unwrap();
        let fam = CutoffFamily::for_model(&ou).unwrap();
        let mut bare = ou.clone();
        bare.growth.clear();
        assert!(matches!(
            certify_uniform_bounds(&fam, &bare, &[1], 1..=2, 10, 0),
            Err(Error::MissingGrowth(1))
        ));
    }

    #[test]
    fn lipschitz_of_truncated_cubic_is_finite_and_grows() {
        let m = builtin::cubic(0.2, 1.0, 0.5, vec![0.5]).unwrap();
        let fam = CutoffFamily::new(1.0, 1).unwrap();
        let l1 = lipschitz_estimate(&make_truncated(&m, 1, &fam).unwrap(), 20.0, 20_000, 1);
        let l3 = lipschitz_estimate(&make_truncated(&m, 3, &fam).unwrap(), 20.0, 20_000, 1);
        assert!(l1.is_finite() && l3.is_finite());
        assert!(l3 > l1);
    }
}
