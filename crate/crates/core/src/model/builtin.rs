//! Built-in test models.
//!
//! * `ou`: `b = -K x`, `f = 0`, `sigma = s I`. Closed-form moments and derivatives.
//! * `cubic` (d = 1): `b = -x - x^3`, `f = kappa sin x`, `sigma = a + c tanh x` with `|c| < a`.
//! * `cubic2d`: `b = -(1 + |x|^2) x + omega J x` (J the quarter rotation),
//!   `f = kappa (sin x2, sin x1)`, and a state-dependent full diffusion matrix.

use std::collections::BTreeMap;
use std::sync::Arc;

use super::{MatrixField, ModelSpec, VectorField};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct ZeroField {
    pub dim: usize,
}

impl VectorField for ZeroField {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn jacobian(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn hessian(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
}

/// `b(x) = -k x`.
#[derive(Debug, Clone)]
pub struct LinearDrift {
    pub dim: usize,
    pub k: f64,
}

impl VectorField for LinearDrift {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &[f64], out: &mut [f64]) {
        for (o, xi) in out.iter_mut().zip(x) {
            *o = -self.k * xi;
        }
    }
    fn jacobian(&self, _x: &[f64], out: &mut [f64]) {
        let d = self.dim;
        out.fill(0.0);
        for i in 0..d {
            out[i * d + i] = -self.k;
        }
    }
    fn hessian(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
}

/// `b(x) = -x - x^3` in one dimension.
#[derive(Debug, Clone)]
pub struct CubicDrift;

impl VectorField for CubicDrift {
    fn dim(&self) -> usize {
        1
    }
    fn value(&self, x: &[f64], out: &mut [f64]) {
        out[0] = -x[0] - x[0] * x[0] * x[0];
    }
    fn jacobian(&self, x: &[f64], out: &mut [f64]) {
        out[0] = -1.0 - 3.0 * x[0] * x[0];
    }
    fn hessian(&self, x: &[f64], out: &mut [f64]) {
        out[0] = -6.0 * x[0];
    }
}

/// `f(x) = kappa sin x` in one dimension.
#[derive(Debug, Clone)]
pub struct SineForce {
    pub kappa: f64,
}

impl VectorField for SineForce {
    fn dim(&self) -> usize {
        1
    }
    fn value(&self, x: &[f64], out: &mut [f64]) {
        out[0] = self.kappa * x[0].sin();
    }
    fn jacobian(&self, x: &[f64], out: &mut [f64]) {
        out[0] = self.kappa * x[0].cos();
    }
    fn hessian(&self, x: &[f64], out: &mut [f64]) {
        out[0] = -self.kappa * x[0].sin();
    }
}

/// Constant diffusion matrix.
#[derive(Debug, Clone)]
pub struct ConstantDiffusion {
    pub dim: usize,
    pub matrix: Vec<f64>,
}

impl ConstantDiffusion {
    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            matrix: vec![0.0; dim * dim],
        }
    }

    pub fn scalar(dim: usize, s: f64) -> Self {
        let mut matrix = vec![0.0; dim * dim];
        for i in 0..dim {
            matrix[i * dim + i] = s;
        }
        Self { dim, matrix }
    }
}

impl MatrixField for ConstantDiffusion {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, _x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.matrix);
    }
    fn jacobian(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn hessian(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
}

/// `sigma(x) = a + c tanh x` in one dimension.
#[derive(Debug, Clone)]
pub struct TanhDiffusion {
    pub a: f64,
    pub c: f64,
}

impl MatrixField for TanhDiffusion {
    fn dim(&self) -> usize {
        1
    }
    fn value(&self, x: &[f64], out: &mut [f64]) {
        out[0] = self.a + self.c * x[0].tanh();
    }
    fn jacobian(&self, x: &[f64], out: &mut [f64]) {
        let t = x[0].tanh();
        out[0] = self.c * (1.0 - t * t);
    }
    fn hessian(&self, x: &[f64], out: &mut [f64]) {
        let t = x[0].tanh();
        out[0] = -2.0 * self.c * t * (1.0 - t * t);
    }
}

/// `b(x) = -(1 + |x|^2) x + omega J x` with `J = [[0, -1], [1, 0]]`.
#[derive(Debug, Clone)]
pub struct Cubic2dDrift {
    pub omega: f64,
}

const ROT: [f64; 4] = [0.0, -1.0, 1.0, 0.0];

impl VectorField for Cubic2dDrift {
    fn dim(&self) -> usize {
        2
    }
    fn value(&self, x: &[f64], out: &mut [f64]) {
        let s = x[0] * x[0] + x[1] * x[1];
        for i in 0..2 {
            let jx = ROT[i * 2] * x[0] + ROT[i * 2 + 1] * x[1];
            out[i] = -(1.0 + s) * x[i] + self.omega * jx;
        }
    }
    fn jacobian(&self, x: &[f64], out: &mut [f64]) {
        let s = x[0] * x[0] + x[1] * x[1];
        for i in 0..2 {
            for m in 0..2 {
                let delta = if i == m { 1.0 } else { 0.0 };
                out[i * 2 + m] = -(1.0 + s) * delta - 2.0 * x[i] * x[m] + self.omega * ROT[i * 2 + m];
            }
        }
    }
    fn hessian(&self, x: &[f64], out: &mut [f64]) {
        let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
        for i in 0..2 {
            for a in 0..2 {
                for c in 0..2 {
                    out[(i * 2 + a) * 2 + c] =
                        -2.0 * (x[a] * delta(i, c) + x[c] * delta(i, a) + x[i] * delta(a, c));
                }
            }
        }
    }
}

/// `f(x) = kappa (sin x2, sin x1)`.
#[derive(Debug, Clone)]
pub struct CrossSineForce {
    pub kappa: f64,
}

impl VectorField for CrossSineForce {
    fn dim(&self) -> usize {
        2
    }
    fn value(&self, x: &[f64], out: &mut [f64]) {
        out[0] = self.kappa * x[1].sin();
        out[1] = self.kappa * x[0].sin();
    }
    fn jacobian(&self, x: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
        out[1] = self.kappa * x[1].cos();
        out[2] = self.kappa * x[0].cos();
        out[3] = 0.0;
    }
    fn hessian(&self, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        // d^2 f^0 / dx1^2, d^2 f^1 / dx0^2
        out[3] = -self.kappa * x[1].sin();
        out[4] = -self.kappa * x[0].sin();
    }
}

/// `sigma = [[a + c tanh x2, c/2 sin x1], [c/2 sin x2, a + c tanh x1]]`.
#[derive(Debug, Clone)]
pub struct CoupledDiffusion2d {
    pub a: f64,
    pub c: f64,
}

impl MatrixField for CoupledDiffusion2d {
    fn dim(&self) -> usize {
        2
    }
    fn value(&self, x: &[f64], out: &mut [f64]) {
        out[0] = self.a + self.c * x[1].tanh();
        out[1] = 0.5 * self.c * x[0].sin();
        out[2] = 0.5 * self.c * x[1].sin();
        out[3] = self.a + self.c * x[0].tanh();
    }
    fn jacobian(&self, x: &[f64], out: &mut [f64]) {
        let (t0, t1) = (x[0].tanh(), x[1].tanh());
        out.fill(0.0);
        // entry (i, l) at [(i*2 + l)*2 + m]
        out[1] = self.c * (1.0 - t1 * t1); // sigma^0_0 by x1
        out[2] = 0.5 * self.c * x[0].cos(); // sigma^0_1 by x0
        out[5] = 0.5 * self.c * x[1].cos(); // sigma^1_0 by x1
        out[6] = self.c * (1.0 - t0 * t0); // sigma^1_1 by x0
    }
    fn hessian(&self, x: &[f64], out: &mut [f64]) {
        let (t0, t1) = (x[0].tanh(), x[1].tanh());
        out.fill(0.0);
        let idx = |i: usize, l: usize, a: usize, c: usize| ((i * 2 + l) * 2 + a) * 2 + c;
        out[idx(0, 0, 1, 1)] = -2.0 * self.c * t1 * (1.0 - t1 * t1);
        out[idx(0, 1, 0, 0)] = -0.5 * self.c * x[0].sin();
        out[idx(1, 0, 1, 1)] = -0.5 * self.c * x[1].sin();
        out[idx(1, 1, 0, 0)] = -2.0 * self.c * t0 * (1.0 - t0 * t0);
    }
}

/// Ornstein-Uhlenbeck: `dX = -K X dt + s dW`.
pub fn ou(dim: usize, k: f64, sigma: f64, x0: Vec<f64>) -> Result<ModelSpec> {
    ModelSpec::builder("ou", Arc::new(LinearDrift { dim, k }))
        .diffusion(Arc::new(ConstantDiffusion::scalar(dim, sigma)))
        .monotone_k(k)
        .lipschitz_k1(0.0)
        .growth(1, k * k, 1.0)
        .growth(2, k * k, 1.0)
        .x0(x0)
        .build()
}

/// One-dimensional cubic model. `xi` defaults to the largest growth exponent (4).
pub fn cubic(kappa: f64, a: f64, c: f64, x0: Vec<f64>) -> Result<ModelSpec> {
    if !(c.abs() < a) {
        return Err(Error::Domain(format!(
            "cubic diffusion needs |c| < a, got a = {a}, c = {c}"
        )));
    }
    ModelSpec::builder("cubic", Arc::new(CubicDrift))
        .drift_f(Arc::new(SineForce { kappa }))
        .diffusion(Arc::new(TanhDiffusion { a, c }))
        .monotone_k(1.0)
        .lipschitz_k1(kappa.abs().max(c.abs()))
        .growth(1, 12.0, 4.0)
        .growth(2, 36.0, 2.0)
        .growth(3, 36.0, 1.0)
        .x0(x0)
        .build()
}

/// Two-dimensional coupled cubic model.
pub fn cubic2d(kappa: f64, a: f64, c: f64, omega: f64, x0: Vec<f64>) -> Result<ModelSpec> {
    if !(c.abs() < a) {
        return Err(Error::Domain(format!(
            "cubic2d diffusion needs |c| < a, got a = {a}, c = {c}"
        )));
    }
    let g1 = (2.0 * (1.0 + omega.abs()).powi(2)).max(18.0);
    ModelSpec::builder("cubic2d", Arc::new(Cubic2dDrift { omega }))
        .drift_f(Arc::new(CrossSineForce { kappa }))
        .diffusion(Arc::new(CoupledDiffusion2d { a, c }))
        .monotone_k(1.0)
        .lipschitz_k1(kappa.abs().max(c.abs() * 1.25f64.sqrt()))
        .growth(1, g1, 4.0)
        .growth(2, 36.0, 2.0)
        .x0(x0)
        .build()
}

/// Names accepted by [`from_params`].
pub const BUILTIN_NAMES: [&str; 3] = ["ou", "cubic", "cubic2d"];

struct ParamReader<'a> {
    model: &'a str,
    params: &'a BTreeMap<String, f64>,
}

impl ParamReader<'_> {
    fn get(&self, key: &str, default: f64) -> Result<f64> {
        let v = self.params.get(key).copied().unwrap_or(default);
        if !v.is_finite() {
            return Err(Error::Config(format!("model.params.{key}: must be finite")));
        }
        Ok(v)
    }

    fn positive(&self, key: &str, default: f64) -> Result<f64> {
        let v = self.get(key, default)?;
        if v <= 0.0 {
            return Err(Error::Config(format!(
                "model.params.{key}: must be positive for model '{}', got {v}",
                self.model
            )));
        }
        Ok(v)
    }

    fn check_known(&self, known: &[&str]) -> Result<()> {
        for key in self.params.keys() {
            if !known.contains(&key.as_str()) {
                return Err(Error::Config(format!(
                    "model.params.{key}: unknown parameter for model '{}' (expected one of {known:?})",
                    self.model
                )));
            }
        }
        Ok(())
    }
}

/// Build a built-in model from a name and a parameter map, validating each field.
pub fn from_params(
    name: &str,
    params: &BTreeMap<String, f64>,
    x0: Option<Vec<f64>>,
) -> Result<ModelSpec> {
    let key = name.to_ascii_lowercase();
    let r = ParamReader {
        model: &key,
        params,
    };
    let model = match key.as_str() {
        "ou" => {
            r.check_known(&["K", "sigma", "dim"])?;
            let k = r.positive("K", 1.0)?;
            let sigma = r.get("sigma", 1.0)?;
            let dim = r.positive("dim", 1.0)?;
            if dim.fract() != 0.0 {
                return Err(Error::Config("model.params.dim: must be an integer".into()));
            }
            let dim = dim as usize;
            ou(dim, k, sigma, x0.unwrap_or_else(|| vec![1.0; dim]))
        }
        "cubic" => {
            r.check_known(&["kappa", "a", "c"])?;
            let a = r.positive("a", 1.0)?;
            cubic(
                r.get("kappa", 0.2)?,
                a,
                r.get("c", 0.5)?,
                x0.unwrap_or_else(|| vec![0.5]),
            )
        }
        "cubic2d" => {
            r.check_known(&["kappa", "a", "c", "omega"])?;
            let a = r.positive("a", 1.0)?;
            cubic2d(
                r.get("kappa", 0.2)?,
                a,
                r.get("c", 0.3)?,
                r.get("omega", 0.5)?,
                x0.unwrap_or_else(|| vec![0.5, -0.3]),
            )
        }
        _ => {
            let hint = suggest(name, &BUILTIN_NAMES)
                .map(|s| format!(" (did you mean '{s}'?)"))
                .unwrap_or_default();
            return Err(Error::Config(format!("model.name: unknown model '{name}'{hint}")));
        }
    };
    model.map_err(|e| match e {
        Error::Domain(msg) => Error::Config(format!("model: {msg}")),
        other => other,
    })
}

/// Closest known name by edit distance, if reasonably close.
pub fn suggest<'a>(name: &str, candidates: &[&'a str]) -> Option<&'a str> {
    let lower = name.to_ascii_lowercase();
    candidates
        .iter()
        .map(|c| (strsim::levenshtein(&lower, c), *c))
        .filter(|(dist, _)| *dist <= 3)
        .min()
        .map(|(_, c)| c)
}

pub fn coefficient_summary(name: &str) -> Option<&'static str> {
    match name.to_ascii_lowercase().as_str() {
        "ou" => Some("b(x) = -K x;  f(x) = 0;  sigma(x) = sigma * I   [params: K, sigma, dim]"),
        "cubic" => Some(
            "b(x) = -x - x^3;  f(x) = kappa sin(x);  sigma(x) = a + c tanh(x), |c| < a   [params: kappa, a, c]",
        ),
        "cubic2d" => Some(
            "b(x) = -(1 + |x|^2) x + omega J x;  f(x) = kappa (sin x2, sin x1);  \
             sigma(x) = [[a + c tanh x2, c/2 sin x1], [c/2 sin x2, a + c tanh x1]]   [params: kappa, a, c, omega]",
        ),
        _ => None,
    }
}
