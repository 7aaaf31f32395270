//! SDE coefficient specifications, sampling checks of the structural
//! hypotheses, and the derived moment constants.
//!
//! The equation is `dX = [b(X) + f(X)] dt + sigma(X) dW`, with `b` smooth and
//! semi-monotone (`<b(y) - b(x), y - x> <= -K |y - x|^2`) but only locally
//! Lipschitz, and `f`, `sigma` globally Lipschitz with a shared constant `k1`.
//!
//! Index layout used throughout the crate (all row-major):
//!
//! * vector field Jacobian: `jac[i * d + m] = d_m v^i`
//! * vector field Hessian: `hess[(i * d + a) * d + c] = d_a d_c v^i`
//! * diffusion value: `sigma[i * d + l] = sigma^i_l` (column `l` multiplies `dW^l`)
//! * diffusion Jacobian: `jac[(i * d + l) * d + m] = d_m sigma^i_l`
//! * diffusion Hessian: `hess[((i * d + l) * d + a) * d + c]`

pub mod builtin;
mod checks;

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg;

pub use checks::{
    check_derivatives, check_dissipativity, check_growth, check_hypothesis, check_lipschitz,
    check_semi_monotone, HypothesisReport, Violation,
};

/// Product convention for a row vector against a matrix: `u.C` is `C^T u`,
/// so `(u.C)_j = sum_m u_m C[m][j]`. With `u = grad b^i` and `C = D_r X`
/// this gives `(grad b . D_r X)_{ij}`, the ordinary matrix product row.
#[derive(Debug, Clone, Copy)]
pub struct NotationConvention;

impl NotationConvention {
    pub const DOT_PRODUCT_RULE: &'static str = "u.C := C^T u";

    pub fn apply(u: &[f64], c: &[f64], d: usize) -> Vec<f64> {
        (0..d)
            .map(|j| (0..d).map(|m| u[m] * c[m * d + j]).sum())
            .collect()
    }
}

/// A smooth map `R^d -> R^d` with analytic first and second derivatives.
pub trait VectorField: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64], out: &mut [f64]);
    fn jacobian(&self, x: &[f64], out: &mut [f64]);
    fn hessian(&self, x: &[f64], out: &mut [f64]);
}

/// A smooth map `R^d -> R^{d x d}` with analytic first and second derivatives.
pub trait MatrixField: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64], out: &mut [f64]);
    fn jacobian(&self, x: &[f64], out: &mut [f64]);
    fn hessian(&self, x: &[f64], out: &mut [f64]);
}

/// Coefficients of a simulable SDE: total drift and diffusion with derivatives.
///
/// Implemented by [`ModelSpec`] (drift `b + f`) and by
/// [`crate::cutoff::TruncatedModel`] (drift `b_n + f`).
pub trait Sde: Send + Sync {
    fn dim(&self) -> usize;
    fn x0(&self) -> &[f64];
    fn drift(&self, x: &[f64], out: &mut [f64]);
    fn drift_jacobian(&self, x: &[f64], out: &mut [f64]);
    fn drift_hessian(&self, x: &[f64], out: &mut [f64]);
    fn diffusion(&self, x: &[f64], out: &mut [f64]);
    fn diffusion_jacobian(&self, x: &[f64], out: &mut [f64]);
    fn diffusion_hessian(&self, x: &[f64], out: &mut [f64]);
}

/// `|d_alpha b(x)|^2 <= gamma (1 + |x|^q)` for every multi-index of length `order`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthBound {
    pub order: usize,
    pub gamma: f64,
    pub q: f64,
}

#[derive(Clone)]
pub struct ModelSpec {
    pub name: String,
    pub dim: usize,
    pub drift_b: Arc<dyn VectorField>,
    pub drift_f: Arc<dyn VectorField>,
    pub diffusion_sigma: Arc<dyn MatrixField>,
    pub monotone_k: f64,
    pub lipschitz_k1: f64,
    pub xi: f64,
    pub growth: Vec<GrowthBound>,
    pub x0: Vec<f64>,
}

impl fmt::Debug for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelSpec")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("monotone_k", &self.monotone_k)
            .field("lipschitz_k1", &self.lipschitz_k1)
            .field("xi", &self.xi)
            .field("growth", &self.growth)
            .field("x0", &self.x0)
            .finish()
    }
}

pub struct ModelBuilder {
    name: String,
    dim: usize,
    drift_b: Arc<dyn VectorField>,
    drift_f: Option<Arc<dyn VectorField>>,
    diffusion: Option<Arc<dyn MatrixField>>,
    monotone_k: f64,
    lipschitz_k1: f64,
    xi: Option<f64>,
    growth: Vec<GrowthBound>,
    x0: Option<Vec<f64>>,
}

impl ModelBuilder {
    pub fn drift_f(mut self, f: Arc<dyn VectorField>) -> Self {
        self.drift_f = Some(f);
        self
    }

    pub fn diffusion(mut self, sigma: Arc<dyn MatrixField>) -> Self {
        self.diffusion = Some(sigma);
        self
    }

    pub fn monotone_k(mut self, k: f64) -> Self {
        self.monotone_k = k;
        self
    }

    pub fn lipschitz_k1(mut self, k1: f64) -> Self {
        self.lipschitz_k1 = k1;
        self
    }

    /// Truncation exponent; defaults to the largest declared growth exponent.
    pub fn xi(mut self, xi: f64) -> Self {
        self.xi = Some(xi);
        self
    }

    pub fn growth(mut self, order: usize, gamma: f64, q: f64) -> Self {
        self.growth.push(GrowthBound { order, gamma, q });
        self
    }

    pub fn x0(mut self, x0: Vec<f64>) -> Self {
        self.x0 = Some(x0);
        self
    }

    pub fn build(self) -> Result<ModelSpec> {
        let d = self.dim;
        if d == 0 {
            return Err(Error::Domain("dim must be at least 1".into()));
        }
        let drift_f = self
            .drift_f
            .unwrap_or_else(|| Arc::new(builtin::ZeroField { dim: d }));
        let diffusion = self
            .diffusion
            .unwrap_or_else(|| Arc::new(builtin::ConstantDiffusion::zero(d)));
        for got in [self.drift_b.dim(), drift_f.dim(), diffusion.dim()] {
            if got != d {
                return Err(Error::Dimension { expected: d, got });
            }
        }
        if !(self.monotone_k > 0.0) || !self.monotone_k.is_finite() {
            return Err(Error::Domain(format!(
                "monotone_k must be positive, got {}",
                self.monotone_k
            )));
        }
        if !(self.lipschitz_k1 >= 0.0) || !self.lipschitz_k1.is_finite() {
            return Err(Error::Domain(format!(
                "lipschitz_k1 must be nonnegative, got {}",
                self.lipschitz_k1
            )));
        }
        for g in &self.growth {
            if g.order == 0 || !(g.gamma >= 0.0) || !(g.q >= 0.0) {
                return Err(Error::Domain(format!("invalid growth entry {g:?}")));
            }
        }
        let xi = match self.xi {
            Some(xi) => xi,
            None => self.growth.iter().map(|g| g.q).fold(0.0, f64::max),
        };
        if !(xi > 0.0) || !xi.is_finite() {
            return Err(Error::Domain(format!("xi must be positive, got {xi}")));
        }
        let x0 = self.x0.unwrap_or_else(|| vec![0.0; d]);
        if x0.len() != d {
            return Err(Error::Dimension {
                expected: d,
                got: x0.len(),
            });
        }
        if !linalg::all_finite(&x0) {
            return Err(Error::Domain("x0 must be finite".into()));
        }
        Ok(ModelSpec {
            name: self.name,
            dim: d,
            drift_b: self.drift_b,
            drift_f,
            diffusion_sigma: diffusion,
            monotone_k: self.monotone_k,
            lipschitz_k1: self.lipschitz_k1,
            xi,
            growth: self.growth,
            x0,
        })
    }
}

impl ModelSpec {
    /// Start a model from its semi-monotone drift `b`. `f` and `sigma` default to zero.
    pub fn builder(name: impl Into<String>, drift_b: Arc<dyn VectorField>) -> ModelBuilder {
        ModelBuilder {
            name: name.into(),
            dim: drift_b.dim(),
            drift_b,
            drift_f: None,
            diffusion: None,
            monotone_k: 1.0,
            lipschitz_k1: 0.0,
            xi: None,
            growth: Vec::new(),
            x0: None,
        }
    }

    pub fn growth_for(&self, order: usize) -> Option<GrowthBound> {
        self.growth.iter().copied().find(|g| g.order == order)
    }

    pub fn with_xi(mut self, xi: f64) -> Result<Self> {
        if !(xi > 0.0) || !xi.is_finite() {
            return Err(Error::Domain(format!("xi must be positive, got {xi}")));
        }
        self.xi = xi;
        Ok(self)
    }

    pub fn with_x0(mut self, x0: Vec<f64>) -> Result<Self> {
        if x0.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                got: x0.len(),
            });
        }
        self.x0 = x0;
        Ok(self)
    }

    pub fn b(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.drift_b.value(x, &mut out);
        out
    }

    pub fn f(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.drift_f.value(x, &mut out);
        out
    }

    pub fn sigma(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim * self.dim];
        self.diffusion_sigma.value(x, &mut out);
        out
    }

    pub fn grad_b(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim * self.dim];
        self.drift_b.jacobian(x, &mut out);
        out
    }

    pub fn hess_b(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let mut out = vec![0.0; d * d * d];
        self.drift_b.hessian(x, &mut out);
        out
    }
}

impl Sde for ModelSpec {
    fn dim(&self) -> usize {
        self.dim
    }

    fn x0(&self) -> &[f64] {
        &self.x0
    }

    fn drift(&self, x: &[f64], out: &mut [f64]) {
        self.drift_b.value(x, out);
        let mut tmp = vec![0.0; self.dim];
        self.drift_f.value(x, &mut tmp);
        out.iter_mut().zip(&tmp).for_each(|(o, v)| *o += v);
    }

    fn drift_jacobian(&self, x: &[f64], out: &mut [f64]) {
        self.drift_b.jacobian(x, out);
        let mut tmp = vec![0.0; out.len()];
        self.drift_f.jacobian(x, &mut tmp);
        out.iter_mut().zip(&tmp).for_each(|(o, v)| *o += v);
    }

    fn drift_hessian(&self, x: &[f64], out: &mut [f64]) {
        self.drift_b.hessian(x, out);
        let mut tmp = vec![0.0; out.len()];
        self.drift_f.hessian(x, &mut tmp);
        out.iter_mut().zip(&tmp).for_each(|(o, v)| *o += v);
    }

    fn diffusion(&self, x: &[f64], out: &mut [f64]) {
        self.diffusion_sigma.value(x, out);
    }

    fn diffusion_jacobian(&self, x: &[f64], out: &mut [f64]) {
        self.diffusion_sigma.jacobian(x, out);
    }

    fn diffusion_hessian(&self, x: &[f64], out: &mut [f64]) {
        self.diffusion_sigma.hessian(x, out);
    }
}

/// `(alpha, beta)` with `<b(a) + f(a), a> v |sigma(a)|^2 <= alpha + beta |a|^2`.
///
/// Grouping: `alpha = (|b(0)|^2 / 2 + k1^2) v 2|sigma(0)|^2` and
/// `beta = (1 - K + k1^2) v 2 k1^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthConstants {
    pub alpha: f64,
    pub beta: f64,
}

pub fn growth_constants(model: &ModelSpec) -> Result<GrowthConstants> {
    let zero = vec![0.0; model.dim];
    let b0 = model.b(&zero);
    let s0 = model.sigma(&zero);
    if !linalg::all_finite(&b0) || !linalg::all_finite(&s0) {
        return Err(Error::Evaluation {
            what: "coefficient",
            point: zero,
        });
    }
    let k1 = model.lipschitz_k1;
    let alpha = (0.5 * linalg::norm_sq(&b0) + k1 * k1).max(2.0 * linalg::norm_sq(&s0));
    let beta = (-model.monotone_k + 1.0 + k1 * k1).max(2.0 * k1 * k1);
    Ok(GrowthConstants { alpha, beta })
}

/// Coefficients of `L|x|^p <= beta_p |x|^p + alpha_p |x|^{p-2}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorConstants {
    pub p: f64,
    pub alpha_p: f64,
    pub beta_p: f64,
}

pub fn moment_generator_constants(model: &ModelSpec, p: f64) -> Result<GeneratorConstants> {
    let g = growth_constants(model)?;
    generator_constants_from(g, model.lipschitz_k1, p)
}

pub fn generator_constants_from(
    g: GrowthConstants,
    k1: f64,
    p: f64,
) -> Result<GeneratorConstants> {
    if !(p >= 2.0) {
        return Err(Error::Domain(format!("moment order p must be >= 2, got {p}")));
    }
    let k1sq = k1 * k1;
    Ok(GeneratorConstants {
        p,
        alpha_p: p * (g.alpha + (p - 1.0) * k1sq),
        beta_p: p * (g.beta + (p - 1.0) * k1sq),
    })
}

/// Constants for the second moment about the initial point,
/// `L_n |x - x0|^2 <= beta |x - x0|^2 + alpha`, valid for every truncation level.
///
/// Derived from `phi_n <= 1`, semi-monotonicity and the Lipschitz bounds:
/// `beta = 2 + 2 k1 + 2 k1^2` and `alpha = |b(x0)|^2 + |f(x0)|^2 + 2 |sigma(x0)|^2`.
pub fn centered_moment_constants(model: &ModelSpec) -> Result<GeneratorConstants> {
    let x0 = &model.x0;
    let b = model.b(x0);
    let f = model.f(x0);
    let s = model.sigma(x0);
    if !linalg::all_finite(&b) || !linalg::all_finite(&f) || !linalg::all_finite(&s) {
        return Err(Error::Evaluation {
            what: "coefficient",
            point: x0.clone(),
        });
    }
    let k1 = model.lipschitz_k1;
    Ok(GeneratorConstants {
        p: 2.0,
        alpha_p: linalg::norm_sq(&b) + linalg::norm_sq(&f) + 2.0 * linalg::norm_sq(&s),
        beta_p: 2.0 + 2.0 * k1 + 2.0 * k1 * k1,
    })
}

/// `L|x|^p` for the generator of `sde`.
pub fn apply_generator<S: Sde + ?Sized>(sde: &S, p: f64, x: &[f64]) -> Result<f64> {
    let zero = vec![0.0; sde.dim()];
    apply_generator_about(sde, p, x, &zero)
}

/// `L|x - c|^p`. The `|x - c|^{p-4}` term is taken as zero at `x = c`.
pub fn apply_generator_about<S: Sde + ?Sized>(
    sde: &S,
    p: f64,
    x: &[f64],
    center: &[f64],
) -> Result<f64> {
    let d = sde.dim();
    if x.len() != d {
        return Err(Error::Dimension {
            expected: d,
            got: x.len(),
        });
    }
    if !(p >= 2.0) {
        return Err(Error::Domain(format!("generator exponent p must be >= 2, got {p}")));
    }
    if !linalg::all_finite(x) {
        return Err(Error::Evaluation {
            what: "argument",
            point: x.to_vec(),
        });
    }
    let y: Vec<f64> = x.iter().zip(center).map(|(a, c)| a - c).collect();
    let mut drift = vec![0.0; d];
    sde.drift(x, &mut drift);
    let mut sigma = vec![0.0; d * d];
    sde.diffusion(x, &mut sigma);
    if !linalg::all_finite(&drift) || !linalg::all_finite(&sigma) {
        return Err(Error::Evaluation {
            what: "coefficient",
            point: x.to_vec(),
        });
    }
    let r2 = linalg::norm_sq(&y);
    let sigma_f2 = linalg::norm_sq(&sigma);
    if r2 == 0.0 {
        return Ok(if p == 2.0 { sigma_f2 } else { 0.0 });
    }
    let r = r2.sqrt();
    let rp2 = r.powf(p - 2.0);
    // |sigma^T y|^2
    let sty: f64 = (0..d)
        .map(|l| {
            let c: f64 = (0..d).map(|i| sigma[i * d + l] * y[i]).sum();
            c * c
        })
        .sum();
    let cross = if p == 2.0 {
        0.0
    } else {
        0.5 * p * (p - 2.0) * r.powf(p - 4.0) * sty
    };
    Ok(p * rp2 * linalg::dot(&y, &drift) + 0.5 * p * rp2 * sigma_f2 + cross)
}
