//! First- and second-order Malliavin derivative fields along a simulated path,
//! with two independent oracles: Cameron–Martin finite differences and the
//! Jacobian-flow factorisation `D_r X_t = J_t J_r^{-1} sigma(X_r)`.
//!
//! Both fields are driven by the per-step linear map
//!
//! ```text
//! G_k = I + grad(b_n + f)(X_k) dt + sum_l B_l(X_k) dW^l_k,   (B_l)_{im} = d_m sigma^i_l
//! ```
//!
//! so `D_r X_{k+1} = G_k D_r X_k` from `D_r X_r = sigma(X_r)`. Entry `(i, j)`
//! of a first-order block is `D^j_r X^i`. Second-order tensors are stored as
//! `[(i * d + j) * d + k]` for `D^{j,k}_{r,tau} X^i`.

use std::io::Write;
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::Sde;
use crate::paths::{euler, NoisePath, PathSolution, TimeGrid};

/// Per-step data shared by every `r` slice.
struct StepMaps {
    d: usize,
    n: usize,
    /// `G_k`, `k < N`, blocks of `d * d`.
    g: Vec<f64>,
    /// `sigma(X_k)`, `k <= N`.
    sigma: Vec<f64>,
}

impl StepMaps {
    fn g(&self, k: usize) -> &[f64] {
        let s = self.d * self.d;
        &self.g[k * s..(k + 1) * s]
    }

    fn sigma(&self, k: usize) -> &[f64] {
        let s = self.d * self.d;
        &self.sigma[k * s..(k + 1) * s]
    }
}

fn check_inputs<S: Sde + ?Sized>(sde: &S, path: &PathSolution, noise: &NoisePath) -> Result<()> {
    let d = sde.dim();
    if path.dim != d || noise.dim != d {
        return Err(Error::Dimension {
            expected: d,
            got: if path.dim != d { path.dim } else { noise.dim },
        });
    }
    if path.grid != noise.grid {
        return Err(Error::Domain("path and noise are on different grids".into()));
    }
    Ok(())
}

fn step_maps<S: Sde + ?Sized>(sde: &S, path: &PathSolution, noise: &NoisePath) -> Result<StepMaps> {
    check_inputs(sde, path, noise)?;
    let d = sde.dim();
    let n = path.grid.n_steps;
    let dt = path.grid.dt();
    let mut g = vec![0.0; n * d * d];
    let mut sigma = vec![0.0; (n + 1) * d * d];
    let mut jac = vec![0.0; d * d];
    let mut sjac = vec![0.0; d * d * d];
    for k in 0..=n {
        let x = path.state(k);
        sde.diffusion(x, &mut sigma[k * d * d..(k + 1) * d * d]);
        if k == n {
            break;
        }
        sde.drift_jacobian(x, &mut jac);
        sde.diffusion_jacobian(x, &mut sjac);
        let dw = noise.increment(k);
        let gk = &mut g[k * d * d..(k + 1) * d * d];
        for i in 0..d {
            for m in 0..d {
                let mut v = jac[i * d + m] * dt;
                for l in 0..d {
                    v += sjac[(i * d + l) * d + m] * dw[l];
                }
                gk[i * d + m] = if i == m { 1.0 + v } else { v };
            }
        }
    }
    if !linalg::all_finite(&g) || !linalg::all_finite(&sigma) {
        return Err(Error::Evaluation {
            what: "linearised coefficients",
            point: path.states.clone(),
        });
    }
    Ok(StepMaps { d, n, g, sigma })
}

/// Lower-triangular array of blocks `D_r X_{t_k}`, `r <= k`.
#[derive(Debug, Clone, PartialEq)]
pub struct FirstDerivField {
    pub grid: TimeGrid,
    pub dim: usize,
    offsets: Vec<usize>,
    data: Vec<f64>,
}

impl FirstDerivField {
    fn block_size(&self) -> usize {
        self.dim * self.dim
    }

    /// The `d x d` block for `(r, k)`, `None` when `r > k`.
    pub fn get(&self, r: usize, k: usize) -> Option<&[f64]> {
        if r > k || k > self.grid.n_steps {
            return None;
        }
        let s = self.block_size();
        let start = self.offsets[r] + (k - r) * s;
        Some(&self.data[start..start + s])
    }

    /// The block for `(r, k)`, zero when `r > k`.
    pub fn value(&self, r: usize, k: usize) -> Vec<f64> {
        self.get(r, k)
            .map(<[f64]>::to_vec)
            .unwrap_or_else(|| vec![0.0; self.block_size()])
    }

    /// `D_r X_T` for every `r <= N`.
    pub fn terminal(&self) -> Vec<Vec<f64>> {
        let n = self.grid.n_steps;
        (0..=n).map(|r| self.value(r, n)).collect()
    }
}

/// Propagate `D_r X` for every grid `r`, each slice independently.
pub fn propagate_first<S: Sde + ?Sized>(
    sde: &S,
    path: &PathSolution,
    noise: &NoisePath,
) -> Result<FirstDerivField> {
    let maps = step_maps(sde, path, noise)?;
    let (d, n) = (maps.d, maps.n);
    let s = d * d;
    let slices: Vec<Result<Vec<f64>>> = (0..=n)
        .into_par_iter()
        .map(|r| {
            let mut out = Vec::with_capacity((n + 1 - r) * s);
            out.extend_from_slice(maps.sigma(r));
            let mut next = vec![0.0; s];
            for k in r..n {
                let cur = &out[(k - r) * s..(k - r + 1) * s];
                linalg::matmul(maps.g(k), cur, &mut next, d);
                if !linalg::all_finite(&next) {
                    return Err(Error::Propagation { r, t: k + 1 });
                }
                out.extend_from_slice(&next);
            }
            Ok(out)
        })
        .collect();
    let mut offsets = Vec::with_capacity(n + 1);
    let mut data = Vec::with_capacity((n + 1) * (n + 2) / 2 * s);
    for slice in slices {
        offsets.push(data.len());
        data.extend(slice?);
    }
    Ok(FirstDerivField {
        grid: path.grid,
        dim: d,
        offsets,
        data,
    })
}

/// `D_r X_T` for all `r` by a backward product, in `O(N d^3)`.
pub fn terminal_slice<S: Sde + ?Sized>(
    sde: &S,
    path: &PathSolution,
    noise: &NoisePath,
) -> Result<Vec<Vec<f64>>> {
    let maps = step_maps(sde, path, noise)?;
    let (d, n) = (maps.d, maps.n);
    let mut out = vec![Vec::new(); n + 1];
    let mut q = linalg::identity(d);
    let mut tmp = vec![0.0; d * d];
    for r in (0..=n).rev() {
        if r < n {
            linalg::matmul(&q, maps.g(r), &mut tmp, d);
            std::mem::swap(&mut q, &mut tmp);
        }
        let mut block = vec![0.0; d * d];
        linalg::matmul(&q, maps.sigma(r), &mut block, d);
        if !linalg::all_finite(&block) {
            return Err(Error::Propagation { r, t: n });
        }
        out[r] = block;
    }
    Ok(out)
}

/// `sum_{r < k} |D_r X_{t_k}|_F^2 dt`.
pub fn hnorm_sq(first: &FirstDerivField, k: usize) -> f64 {
    let dt = first.grid.dt();
    (0..k.min(first.grid.n_steps + 1))
        .map(|r| first.get(r, k).map_or(0.0, linalg::norm_sq))
        .sum::<f64>()
        * dt
}

/// Same quantity at `T` from a terminal slice.
pub fn hnorm_sq_terminal(slice: &[Vec<f64>], dt: f64) -> f64 {
    let n = slice.len().saturating_sub(1);
    slice[..n].iter().map(|b| linalg::norm_sq(b)).sum::<f64>() * dt
}

/// Second-order tensors at output times for requested `(r, tau)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondDerivField {
    pub grid: TimeGrid,
    pub dim: usize,
    pub output_times: Vec<usize>,
    pub pairs: Vec<(usize, usize)>,
    values: Vec<f64>,
}

impl SecondDerivField {
    fn tensor_size(&self) -> usize {
        self.dim * self.dim * self.dim
    }

    /// `D^{j,k}_{r,tau} X_t` as a flat tensor; zero when `max(r, tau) > t`.
    /// `None` when the pair or time was not computed.
    pub fn get(&self, r: usize, tau: usize, t: usize) -> Option<&[f64]> {
        let p = self.pairs.iter().position(|&q| q == (r, tau))?;
        let ti = self.output_times.iter().position(|&s| s == t)?;
        let s = self.tensor_size();
        let start = (p * self.output_times.len() + ti) * s;
        Some(&self.values[start..start + s])
    }

    /// Largest `|D^{j,k}_{r,tau} - D^{k,j}_{tau,r}|` over pairs present in both orders.
    /// Largest absolute entry over all stored tensors.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn symmetry_gap(&self) -> f64 {
        let d = self.dim;
        let mut worst = 0.0f64;
        for &(r, tau) in &self.pairs {
            for &t in &self.output_times {
                let (Some(a), Some(b)) = (self.get(r, tau, t), self.get(tau, r, t)) else {
                    continue;
                };
                for i in 0..d {
                    for j in 0..d {
                        for k in 0..d {
                            let g = (a[(i * d + j) * d + k] - b[(i * d + k) * d + j]).abs();
                            worst = worst.max(g);
                        }
                    }
                }
            }
        }
        worst
    }
}

/// All ordered pairs of grid indices that are multiples of `stride`.
pub fn pair_grid(n_steps: usize, stride: usize) -> Vec<(usize, usize)> {
    let idx: Vec<usize> = (0..=n_steps).step_by(stride.max(1)).collect();
    idx.iter()
        .flat_map(|&r| idx.iter().map(move |&tau| (r, tau)))
        .collect()
}

/// Starting tensor at `max(r, tau)`:
/// `A^{ijk} = <grad sigma^i_j(X_r), D^k_tau X_r> + <grad sigma^i_k(X_tau), D^j_r X_tau>`,
/// each term zero when its inner derivative looks into the future.
pub fn second_initial<S: Sde + ?Sized>(
    sde: &S,
    path: &PathSolution,
    first: &FirstDerivField,
    r: usize,
    tau: usize,
) -> Vec<f64> {
    let d = sde.dim();
    let mut out = vec![0.0; d * d * d];
    let mut sjac = vec![0.0; d * d * d];
    if tau <= r {
        let dx = first.value(tau, r);
        sde.diffusion_jacobian(path.state(r), &mut sjac);
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    let mut acc = 0.0;
                    for m in 0..d {
                        acc += sjac[(i * d + j) * d + m] * dx[m * d + k];
                    }
                    out[(i * d + j) * d + k] += acc;
                }
            }
        }
    }
    if r <= tau {
        let dx = first.value(r, tau);
        sde.diffusion_jacobian(path.state(tau), &mut sjac);
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    let mut acc = 0.0;
                    for m in 0..d {
                        acc += sjac[(i * d + k) * d + m] * dx[m * d + j];
                    }
                    out[(i * d + j) * d + k] += acc;
                }
            }
        }
    }
    out
}

/// Propagate the second-order field for each pair, sampling it at `output_times`.
pub fn propagate_second<S: Sde + ?Sized>(
    sde: &S,
    path: &PathSolution,
    noise: &NoisePath,
    first: &FirstDerivField,
    output_times: &[usize],
    pairs: &[(usize, usize)],
) -> Result<SecondDerivField> {
    let maps = step_maps(sde, path, noise)?;
    let (d, n) = (maps.d, maps.n);
    if first.grid != path.grid || first.dim != d {
        return Err(Error::Domain("first-order field belongs to another path".into()));
    }
    if let Some(&bad) = output_times.iter().chain(pairs.iter().flat_map(|p| [&p.0, &p.1])).find(|&&t| t > n) {
        return Err(Error::Domain(format!("grid index {bad} beyond N = {n}")));
    }
    let dt = path.grid.dt();
    let d3 = d * d * d;
    let mut hdrift = vec![0.0; n * d3];
    let mut hsigma = vec![0.0; n * d3 * d];
    for k in 0..n {
        let x = path.state(k);
        sde.drift_hessian(x, &mut hdrift[k * d3..(k + 1) * d3]);
        sde.diffusion_hessian(x, &mut hsigma[k * d3 * d..(k + 1) * d3 * d]);
    }
    let last_out = output_times.iter().copied().max().unwrap_or(0);
    let per_pair: Vec<Result<Vec<f64>>> = pairs
        .par_iter()
        .map(|&(r, tau)| {
            let mut out = vec![0.0; output_times.len() * d3];
            let t0 = r.max(tau);
            let mut y = second_initial(sde, path, first, r, tau);
            let mut next = vec![0.0; d3];
            let mut k = t0;
            loop {
                for (ti, &t) in output_times.iter().enumerate() {
                    if t == k {
                        out[ti * d3..(ti + 1) * d3].copy_from_slice(&y);
                    }
                }
                if k >= last_out || k >= n {
                    break;
                }
                let g = maps.g(k);
                let mr = first.get(r, k).expect("r <= k");
                let mt = first.get(tau, k).expect("tau <= k");
                let hd = &hdrift[k * d3..(k + 1) * d3];
                let hs = &hsigma[k * d3 * d..(k + 1) * d3 * d];
                let dw = noise.increment(k);
                for i in 0..d {
                    for j in 0..d {
                        for kk in 0..d {
                            let mut v = 0.0;
                            for m in 0..d {
                                v += g[i * d + m] * y[(m * d + j) * d + kk];
                            }
                            // Hessian contractions with u = D^kk_tau X_k, w = D^j_r X_k
                            let mut src = 0.0;
                            for a in 0..d {
                                for c in 0..d {
                                    let uw = mt[a * d + kk] * mr[c * d + j];
                                    let mut coef = hd[(i * d + a) * d + c] * dt;
                                    for l in 0..d {
                                        coef += hs[((i * d + l) * d + a) * d + c] * dw[l];
                                    }
                                    src += coef * uw;
                                }
                            }
                            next[(i * d + j) * d + kk] = v + src;
                        }
                    }
                }
                if !linalg::all_finite(&next) {
                    return Err(Error::Propagation { r: t0, t: k + 1 });
                }
                std::mem::swap(&mut y, &mut next);
                k += 1;
            }
            Ok(out)
        })
        .collect();
    let mut values = Vec::with_capacity(pairs.len() * output_times.len() * d3);
    for v in per_pair {
        values.extend(v?);
    }
    Ok(SecondDerivField {
        grid: path.grid,
        dim: d,
        output_times: output_times.to_vec(),
        pairs: pairs.to_vec(),
        values,
    })
}

/// A Cameron–Martin direction `h : [0, T] -> R^d`.
#[derive(Clone)]
pub enum CMDirection {
    Constant(Vec<f64>),
    /// `value` on `[start, end)`, zero elsewhere.
    Window { start: f64, end: f64, value: Vec<f64> },
    Custom(Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>),
}

impl std::fmt::Debug for CMDirection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Constant(v) => f.debug_tuple("Constant").field(v).finish(),
            Self::Window { start, end, value } => f
                .debug_struct("Window")
                .field("start", start)
                .field("end", end)
                .field("value", value)
                .finish(),
            Self::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl CMDirection {
    pub fn eval(&self, t: f64, d: usize) -> Vec<f64> {
        match self {
            Self::Constant(v) => v.clone(),
            Self::Window { start, end, value } => {
                if t >= *start && t < *end {
                    value.clone()
                } else {
                    vec![0.0; d]
                }
            }
            Self::Custom(h) => h(t),
        }
    }

    /// `h(t_k)` at left grid points, flat `k * d + l`.
    pub fn on_grid(&self, grid: &TimeGrid, d: usize) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(grid.n_steps * d);
        for k in 0..grid.n_steps {
            let v = self.eval(grid.t(k), d);
            if v.len() != d {
                return Err(Error::Dimension {
                    expected: d,
                    got: v.len(),
                });
            }
            out.extend(v);
        }
        if !linalg::all_finite(&out) {
            return Err(Error::Domain("direction h is not finite on the grid".into()));
        }
        Ok(out)
    }

    pub fn l2_norm_sq(&self, grid: &TimeGrid, d: usize) -> Result<f64> {
        Ok(linalg::norm_sq(&self.on_grid(grid, d)?) * grid.dt())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CameronMartin {
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    pub rel_err: f64,
}

/// Directional difference quotient of `X_T` along `eps * int h` against
/// `sum_{r < N} D_r X_T h(t_r) dt`.
pub fn cameron_martin_check<S: Sde + ?Sized>(
    sde: &S,
    noise: &NoisePath,
    h: &CMDirection,
    eps: f64,
) -> Result<CameronMartin> {
    if !(eps > 0.0) {
        return Err(Error::Domain(format!("eps must be positive, got {eps}")));
    }
    let d = sde.dim();
    let hg = h.on_grid(&noise.grid, d)?;
    let base = euler(sde, noise, 1.0)?;
    let bumped = euler(sde, &noise.shifted(&hg, eps)?, 1.0)?;
    let lhs: Vec<f64> = bumped
        .terminal()
        .iter()
        .zip(base.terminal())
        .map(|(a, b)| (a - b) / eps)
        .collect();
    let slice = terminal_slice(sde, &base, noise)?;
    let dt = noise.grid.dt();
    let mut rhs = vec![0.0; d];
    for (r, block) in slice.iter().take(noise.grid.n_steps).enumerate() {
        let mut v = vec![0.0; d];
        linalg::matvec(block, &hg[r * d..(r + 1) * d], &mut v, d);
        for i in 0..d {
            rhs[i] += v[i] * dt;
        }
    }
    let gap = linalg::dist_sq(&lhs, &rhs).sqrt();
    let scale = linalg::norm(&rhs);
    Ok(CameronMartin {
        rel_err: if scale > 0.0 { gap / scale } else { gap },
        lhs,
        rhs,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowCheck {
    pub max_gap: f64,
    pub pairs_checked: usize,
    /// `r` values skipped because `J_r` could not be inverted reliably.
    pub ill_conditioned: Vec<usize>,
}

/// Condition numbers above this skip the `r` slice.
pub const FLOW_CONDITION_LIMIT: f64 = 1e12;

/// Compare `D_r X_t` with `J_t J_r^{-1} sigma(X_r)` on every `r <= t` with both on `stride`.
pub fn flow_factorization_check<S: Sde + ?Sized>(
    sde: &S,
    path: &PathSolution,
    noise: &NoisePath,
    first: &FirstDerivField,
    stride: usize,
) -> Result<FlowCheck> {
    let maps = step_maps(sde, path, noise)?;
    let (d, n) = (maps.d, maps.n);
    let mut flows = Vec::with_capacity(n + 1);
    flows.push(DMatrix::<f64>::identity(d, d));
    for k in 0..n {
        let g = DMatrix::from_row_slice(d, d, maps.g(k));
        let next = &g * &flows[k];
        flows.push(next);
    }
    let idx: Vec<usize> = (0..=n).step_by(stride.max(1)).collect();
    let mut max_gap = 0.0f64;
    let mut pairs_checked = 0;
    let mut ill_conditioned = Vec::new();
    for &r in &idx {
        let jr = &flows[r];
        let svd = jr.clone().svd(false, false);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        let inv = match jr.clone().try_inverse() {
            Some(inv) if smin > 0.0 && smax / smin < FLOW_CONDITION_LIMIT => inv,
            _ => {
                ill_conditioned.push(r);
                continue;
            }
        };
        let sig = DMatrix::from_row_slice(d, d, maps.sigma(r));
        let tail = inv * sig;
        for &t in idx.iter().filter(|&&t| t >= r) {
            let pred = &flows[t] * &tail;
            let field = first.get(r, t).expect("r <= t");
            for i in 0..d {
                for j in 0..d {
                    max_gap = max_gap.max((pred[(i, j)] - field[i * d + j]).abs());
                }
            }
            pairs_checked += 1;
        }
    }
    Ok(FlowCheck {
        max_gap,
        pairs_checked,
        ill_conditioned,
    })
}

/// Columns `r,t,i,j,value` (times, 1-based indices) for `r <= t` on the stride lattice plus `t = T`.
pub fn write_first_csv<W: Write>(first: &FirstDerivField, stride: usize, out: W) -> Result<()> {
    let n = first.grid.n_steps;
    let d = first.dim;
    let mut times: Vec<usize> = (0..=n).step_by(stride.max(1)).collect();
    if times.last() != Some(&n) {
        times.push(n);
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["r", "t", "i", "j", "value"])?;
    for &r in &times {
        for &t in times.iter().filter(|&&t| t >= r) {
            let block = first.get(r, t).expect("r <= t");
            for i in 0..d {
                for j in 0..d {
                    w.write_record([
                        first.grid.t(r).to_string(),
                        first.grid.t(t).to_string(),
                        (i + 1).to_string(),
                        (j + 1).to_string(),
                        block[i * d + j].to_string(),
                    ])?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Columns `r,tau,t,i,j,k,value`.
pub fn write_second_csv<W: Write>(second: &SecondDerivField, out: W) -> Result<()> {
    let d = second.dim;
    let g = second.grid;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["r", "tau", "t", "i", "j", "k", "value"])?;
    for &(r, tau) in &second.pairs {
        for &t in &second.output_times {
            let v = second.get(r, tau, t).expect("computed pair");
            for i in 0..d {
                for j in 0..d {
                    for k in 0..d {
                        w.write_record([
                            g.t(r).to_string(),
                            g.t(tau).to_string(),
                            g.t(t).to_string(),
                            (i + 1).to_string(),
                            (j + 1).to_string(),
                            (k + 1).to_string(),
                            v[(i * d + j) * d + k].to_string(),
                        ])?;
                    }
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}
