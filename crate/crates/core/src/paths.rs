//! Seeded Brownian increments and Euler–Maruyama paths for truncated models.
//!
//! The original (untruncated) equation is never stepped directly. It is reached
//! by running the truncated scheme on one fixed noise path at levels
//! `n, 2n, 4n, ...` until the trajectory stays strictly inside `B_{n^xi}`; from
//! then on every higher level reproduces the same path bit for bit.

use std::collections::BTreeMap;
use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::cutoff::{make_truncated, CutoffFamily, TruncatedModel};
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{ModelSpec, Sde};
use crate::sampling::{self, GENERATOR_ID};

/// Uniform grid `t_k = k T / N`, `k = 0..=N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub horizon: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, n_steps: usize) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() || n_steps == 0 {
            return Err(Error::Domain(format!(
                "time grid needs T > 0 and N >= 1, got T = {horizon}, N = {n_steps}"
            )));
        }
        Ok(Self { horizon, n_steps })
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    /// `t_N` is returned as `T` exactly.
    pub fn t(&self, k: usize) -> f64 {
        if k == self.n_steps {
            self.horizon
        } else {
            k as f64 * self.dt()
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|k| self.t(k)).collect()
    }

    /// Nearest grid index to `t`, clamped to `[0, N]`.
    pub fn index_of(&self, t: f64) -> usize {
        ((t / self.dt()).round().max(0.0) as usize).min(self.n_steps)
    }
}

/// Increments `dW_k`, stored flat at `k * dim + l`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePath {
    pub grid: TimeGrid,
    pub dim: usize,
    pub seed: u64,
    pub generator_id: String,
    pub increments: Vec<f64>,
}

pub fn sample_noise(grid: TimeGrid, dim: usize, seed: u64) -> NoisePath {
    let mut rng = sampling::seeded(seed);
    let scale = grid.dt().sqrt();
    let increments = (0..grid.n_steps * dim)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect();
    NoisePath {
        grid,
        dim,
        seed,
        generator_id: GENERATOR_ID.to_string(),
        increments,
    }
}

impl NoisePath {
    /// Noise with explicitly given increments (hand-built scenarios and shifts).
    pub fn from_increments(grid: TimeGrid, dim: usize, increments: Vec<f64>) -> Result<Self> {
        if increments.len() != grid.n_steps * dim {
            return Err(Error::Dimension {
                expected: grid.n_steps * dim,
                got: increments.len(),
            });
        }
        Ok(Self {
            grid,
            dim,
            seed: 0,
            generator_id: "explicit".to_string(),
            increments,
        })
    }

    pub fn increment(&self, k: usize) -> &[f64] {
        &self.increments[k * self.dim..(k + 1) * self.dim]
    }

    /// `dW_k + eps * h_k * dt` with `h` sampled on the left grid points (flat `k * dim + l`).
    pub fn shifted(&self, h: &[f64], eps: f64) -> Result<Self> {
        if h.len() != self.increments.len() {
            return Err(Error::Dimension {
                expected: self.increments.len(),
                got: h.len(),
            });
        }
        let dt = self.grid.dt();
        let mut out = self.clone();
        for (w, hk) in out.increments.iter_mut().zip(h) {
            *w += eps * hk * dt;
        }
        Ok(out)
    }

    /// Same Brownian path on a grid `factor` times coarser (blocks of increments summed).
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 || self.grid.n_steps % factor != 0 {
            return Err(Error::Domain(format!(
                "cannot coarsen {} steps by a factor of {factor}",
                self.grid.n_steps
            )));
        }
        let grid = TimeGrid::new(self.grid.horizon, self.grid.n_steps / factor)?;
        let d = self.dim;
        let mut increments = vec![0.0; grid.n_steps * d];
        for k in 0..grid.n_steps {
            for j in 0..factor {
                let src = self.increment(k * factor + j);
                for l in 0..d {
                    increments[k * d + l] += src[l];
                }
            }
        }
        Ok(Self {
            grid,
            dim: d,
            seed: self.seed,
            generator_id: self.generator_id.clone(),
            increments,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PathModel {
    Truncated { n: u32 },
    /// Original equation realised as the truncated path at the settled level.
    Settled { level: u32 },
    Explicit,
}

pub const SCHEME: &str = "euler-maruyama (left-point)";

/// Do not enumerate exit radii beyond this many levels.
pub const EXIT_LEVEL_CAP: u32 = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct PathSolution {
    pub grid: TimeGrid,
    pub dim: usize,
    pub xi: f64,
    /// `(N + 1) * dim` values, state `k` at `k * dim`.
    pub states: Vec<f64>,
    pub model: PathModel,
    /// `n -> first k with |X_k| >= n^xi`, for every level whose radius the path reaches.
    pub exit_events: BTreeMap<u32, usize>,
    pub scheme: &'static str,
    pub seed: u64,
}

impl PathSolution {
    pub fn from_states(grid: TimeGrid, dim: usize, xi: f64, states: Vec<f64>) -> Result<Self> {
        if states.len() != (grid.n_steps + 1) * dim {
            return Err(Error::Dimension {
                expected: (grid.n_steps + 1) * dim,
                got: states.len(),
            });
        }
        let mut p = Self {
            grid,
            dim,
            xi,
            states,
            model: PathModel::Explicit,
            exit_events: BTreeMap::new(),
            scheme: "explicit",
            seed: 0,
        };
        p.exit_events = exit_events(&p);
        Ok(p)
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k * self.dim..(k + 1) * self.dim]
    }

    pub fn terminal(&self) -> &[f64] {
        self.state(self.grid.n_steps)
    }

    pub fn sup_norm(&self) -> f64 {
        self.states
            .chunks(self.dim)
            .map(linalg::norm)
            .fold(0.0, f64::max)
    }
}

/// First grid index with `|X_k| >= n^xi` (closed threshold).
pub fn stopping_time(path: &PathSolution, n: u32, xi: f64) -> Option<usize> {
    let radius = (n as f64).powf(xi);
    path.states
        .chunks(path.dim)
        .position(|x| linalg::norm(x) >= radius)
}

fn exit_events(path: &PathSolution) -> BTreeMap<u32, usize> {
    let mut running = Vec::with_capacity(path.grid.n_steps + 1);
    let mut m = 0.0f64;
    for x in path.states.chunks(path.dim) {
        m = m.max(linalg::norm(x));
        running.push(m);
    }
    let mut events = BTreeMap::new();
    for n in 1..=EXIT_LEVEL_CAP {
        let radius = (n as f64).powf(path.xi);
        if radius > m {
            break;
        }
        // running sup is nondecreasing
        events.insert(n, running.partition_point(|&v| v < radius));
    }
    events
}

/// Euler–Maruyama for any coefficient set; `xi` only labels exit events.
pub fn euler<S: Sde + ?Sized>(sde: &S, noise: &NoisePath, xi: f64) -> Result<PathSolution> {
    let d = sde.dim();
    if noise.dim != d {
        return Err(Error::Dimension {
            expected: d,
            got: noise.dim,
        });
    }
    let n_steps = noise.grid.n_steps;
    let dt = noise.grid.dt();
    let mut states = Vec::with_capacity((n_steps + 1) * d);
    states.extend_from_slice(sde.x0());
    let mut drift = vec![0.0; d];
    let mut sigma = vec![0.0; d * d];
    let mut next = vec![0.0; d];
    for k in 0..n_steps {
        let x = &states[k * d..(k + 1) * d];
        sde.drift(x, &mut drift);
        sde.diffusion(x, &mut sigma);
        let dw = noise.increment(k);
        for i in 0..d {
            let mut v = x[i] + drift[i] * dt;
            for l in 0..d {
                v += sigma[i * d + l] * dw[l];
            }
            next[i] = v;
        }
        if !linalg::all_finite(&next) {
            return Err(Error::Explosion {
                last_finite: k,
                seed: noise.seed,
            });
        }
        states.extend_from_slice(&next);
    }
    let mut path = PathSolution {
        grid: noise.grid,
        dim: d,
        xi,
        states,
        model: PathModel::Explicit,
        exit_events: BTreeMap::new(),
        scheme: SCHEME,
        seed: noise.seed,
    };
    path.exit_events = exit_events(&path);
    Ok(path)
}

pub fn euler_truncated(tm: &TruncatedModel, noise: &NoisePath) -> Result<PathSolution> {
    let mut path = euler(tm, noise, tm.family.xi)?;
    path.model = PathModel::Truncated { n: tm.n };
    Ok(path)
}

/// Doubles the level from `n_start` until the path never reaches `|x| >= n^xi`.
pub fn euler_original(
    model: &ModelSpec,
    family: &CutoffFamily,
    noise: &NoisePath,
    n_start: u32,
    n_max: u32,
) -> Result<PathSolution> {
    settle(model, family, noise, n_start, n_max).map(|(path, _)| path)
}

/// As [`euler_original`], also returning the settled truncated model.
pub fn settle(
    model: &ModelSpec,
    family: &CutoffFamily,
    noise: &NoisePath,
    n_start: u32,
    n_max: u32,
) -> Result<(PathSolution, TruncatedModel)> {
    if n_start == 0 || n_max < n_start {
        return Err(Error::Domain(format!(
            "need 1 <= n_start <= n_max, got n_start = {n_start}, n_max = {n_max}"
        )));
    }
    let mut n = n_start;
    loop {
        let tm = make_truncated(model, n, family)?;
        let mut path = euler_truncated(&tm, noise)?;
        match stopping_time(&path, n, family.xi) {
            None => {
                path.model = PathModel::Settled { level: n };
                return Ok((path, tm));
            }
            Some(exit_index) => match n.checked_mul(2) {
                Some(next) if next <= n_max => n = next,
                _ => {
                    return Err(Error::TruncationNotSettled {
                        level: n,
                        exit_index,
                        n_max,
                    })
                }
            },
        }
    }
}

/// Columns `t, x1..xd`.
pub fn write_path_csv<W: Write>(path: &PathSolution, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    header.extend((1..=path.dim).map(|i| format!("x{i}")));
    w.write_record(&header)?;
    for k in 0..=path.grid.n_steps {
        let mut row = vec![path.grid.t(k).to_string()];
        row.extend(path.state(k).iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Columns `k, t, dw1..dwd` with `t` the left end of the step.
pub fn write_noise_csv<W: Write>(noise: &NoisePath, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["k".to_string(), "t".to_string()];
    header.extend((1..=noise.dim).map(|i| format!("dw{i}")));
    w.write_record(&header)?;
    for k in 0..noise.grid.n_steps {
        let mut row = vec![k.to_string(), noise.grid.t(k).to_string()];
        row.extend(noise.increment(k).iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::builtin;

    fn ou() -> ModelSpec {
        builtin::ou(1, 1.0, 1.0, vec![1.0]).unwrap()
    }

    #[test]
    fn grid_endpoints() {
        let g = TimeGrid::new(1.0, 3).unwrap();
        assert_eq!(g.t(0), 0.0);
        assert_eq!(g.t(3), 1.0);
        assert!(g.times().windows(2).all(|w| w[0] < w[1]));
        assert!(TimeGrid::new(0.0, 3).is_err());
    }

    #[test]
    fn one_euler_step_by_hand() {
        let m = ou();
        let fam = CutoffFamily::for_model(&m).unwrap();
        let tm = make_truncated(&m, 100, &fam).unwrap();
        let noise = NoisePath::from_increments(TimeGrid::new(0.5, 1).unwrap(), 1, vec![0.1]).unwrap();
        let p = euler_truncated(&tm, &noise).unwrap();
        assert!((p.state(1)[0] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn zero_noise_fixed_point() {
        let m = builtin::ou(1, 1.0, 1.0, vec![0.0]).unwrap();
        let fam = CutoffFamily::for_model(&m).unwrap();
        let tm = make_truncated(&m, 1, &fam).unwrap();
        let noise = NoisePath::from_increments(TimeGrid::new(1.0, 50).unwrap(), 1, vec![0.0; 50]).unwrap();
        let p = euler_truncated(&tm, &noise).unwrap();
        assert!(p.states.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn truncated_drift_vanishes_outside_support() {
        let m = builtin::cubic(0.2, 1.0, 0.5, vec![2.5]).unwrap().with_xi(1.0).unwrap();
        let fam = CutoffFamily::for_model(&m).unwrap();
        let tm = make_truncated(&m, 1, &fam).unwrap();
        let grid = TimeGrid::new(0.01, 1).unwrap();
        let noise = NoisePath::from_increments(grid, 1, vec![0.05]).unwrap();
        let p = euler_truncated(&tm, &noise).unwrap();
        let x = 2.5;
        let expected = x + m.f(&[x])[0] * 0.01 + m.sigma(&[x])[0] * 0.05;
        assert_eq!(p.state(1)[0], expected);
    }

    #[test]
    fn noise_determinism_and_seed_sensitivity() {
        let g = TimeGrid::new(1.0, 100).unwrap();
        assert_eq!(sample_noise(g, 2, 7), sample_noise(g, 2, 7));
        assert_ne!(sample_noise(g, 2, 7).increments, sample_noise(g, 2, 8).increments);
    }

    #[test]
    fn noise_variance_clt() {
        let g = TimeGrid::new(1.0, 100_000).unwrap();
        let noise = sample_noise(g, 1, 3);
        let z: Vec<f64> = noise.increments.iter().map(|w| w / g.dt().sqrt()).collect();
        let m = z.len() as f64;
        let mean = z.iter().sum::<f64>() / m;
        let var = z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
        // Var of the sample variance of N(0,1) data is 2/(m-1)
        assert!((var - 1.0).abs() <= 3.0 * (2.0 / (m - 1.0)).sqrt(), "{var}");
        assert!(mean.abs() <= 3.0 / m.sqrt());
    }

    #[test]
    fn coarsen_sums_blocks() {
        let g = TimeGrid::new(1.0, 8).unwrap();
        let fine = sample_noise(g, 2, 1);
        let coarse = fine.coarsen(4).unwrap();
        assert_eq!(coarse.grid.n_steps, 2);
        let s: f64 = (4..8).map(|k| fine.increment(k)[1]).sum();
        assert!((coarse.increment(1)[1] - s).abs() < 1e-15);
        assert!(fine.coarsen(3).is_err());
    }

    #[test]
    fn stopping_time_examples() {
        let g = TimeGrid::new(1.0, 2).unwrap();
        let p = PathSolution::from_states(g, 1, 1.0, vec![0.0, 5.0, 6.0]).unwrap();
        assert_eq!(stopping_time(&p, 4, 1.0), Some(1));
        assert_eq!(stopping_time(&p, 7, 1.0), None);
        let g = TimeGrid::new(1.0, 4).unwrap();
        let p = PathSolution::from_states(g, 1, 1.0, vec![0.0, 1.0, 2.0, 4.0, 1.0]).unwrap();
        assert_eq!(stopping_time(&p, 4, 1.0), Some(3));
        assert_eq!(p.exit_events.get(&4), Some(&3));
        assert_eq!(p.exit_events.get(&2), Some(&2));
        assert!(!p.exit_events.contains_key(&5));
    }

    #[test]
    fn nesting_is_bitwise_before_first_exit() {
        let m = builtin::cubic(0.2, 1.0, 0.5, vec![0.5]).unwrap().with_xi(1.0).unwrap();
        let fam = CutoffFamily::for_model(&m).unwrap();
        let g = TimeGrid::new(1.0, 400).unwrap();
        let mut checked = 0;
        for seed in 0..200 {
            let noise = sample_noise(g, 1, seed);
            let p1 = euler_truncated(&make_truncated(&m, 1, &fam).unwrap(), &noise).unwrap();
            let p2 = euler_truncated(&make_truncated(&m, 2, &fam).unwrap(), &noise).unwrap();
            let cut = stopping_time(&p1, 1, 1.0).unwrap_or(g.n_steps);
            assert_eq!(p1.states[..=cut], p2.states[..=cut], "seed {seed}");
            if cut < g.n_steps {
                checked += 1;
            }
        }
        assert!(checked > 0, "no seed exercised an exit");
    }

    #[test]
    fn original_path_equals_settled_truncation() {
        let m = ou();
        let fam = CutoffFamily::for_model(&m).unwrap();
        let noise = sample_noise(TimeGrid::new(1.0, 200).unwrap(), 1, 11);
        let p = euler_original(&m, &fam, &noise, 1, 1024).unwrap();
        let PathModel::Settled { level } = p.model else {
            panic!("not settled")
        };
        let direct = euler_truncated(&make_truncated(&m, level, &fam).unwrap(), &noise).unwrap();
        assert_eq!(p.states, direct.states);
        let higher = euler_truncated(&make_truncated(&m, 4 * level, &fam).unwrap(), &noise).unwrap();
        assert_eq!(p.states, higher.states);
    }

    #[test]
    fn unsettled_truncation_is_an_error() {
        let m = builtin::ou(1, 1.0, 1.0, vec![5.0]).unwrap();
        let fam = CutoffFamily::for_model(&m).unwrap();
        let noise = sample_noise(TimeGrid::new(1.0, 10).unwrap(), 1, 0);
        let err = euler_original(&m, &fam, &noise, 1, 2).unwrap_err();
        assert!(err.to_string().contains("truncation not settled"));
    }

    #[test]
    fn ou_strong_accuracy_against_exact_recursion() {
        let m = ou();
        let fam = CutoffFamily::for_model(&m).unwrap();
        let tm = make_truncated(&m, 1000, &fam).unwrap();
        let g = TimeGrid::new(1.0, 1000).unwrap();
        let dt = g.dt();
        let decay = (-dt).exp();
        // exact step: stochastic integral I_k is Gaussian, jointly with dW_k
        let c = (1.0 - decay) / dt;
        let resid = ((1.0 - decay * decay) / 2.0 - c * c * dt).max(0.0).sqrt();
        let mut sq = 0.0;
        let seeds = 1000;
        for seed in 0..seeds {
            let noise = sample_noise(g, 1, seed);
            let p = euler_truncated(&tm, &noise).unwrap();
            let mut extra = sampling::seeded(seed + 1_000_000);
            let mut x = 1.0;
            for k in 0..g.n_steps {
                let z: f64 = extra.sample(StandardNormal);
                x = decay * x + c * noise.increment(k)[0] + resid * z;
            }
            sq += (p.terminal()[0] - x).powi(2);
        }
        let rms = (sq / seeds as f64).sqrt();
        assert!(rms <= 5e-3, "{rms}");
    }

    #[test]
    fn ou_second_moment() {
        let m = ou();
        let fam = CutoffFamily::for_model(&m).unwrap();
        let tm = make_truncated(&m, 1000, &fam).unwrap();
        let g = TimeGrid::new(1.0, 1000).unwrap();
        let samples: Vec<f64> = (0..10_000)
            .map(|s| euler_truncated(&tm, &sample_noise(g, 1, s)).unwrap().terminal()[0].powi(2))
            .collect();
        let mm = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / mm;
        let sd = (samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (mm - 1.0)).sqrt();
        let exact = (-2.0f64).exp() + (1.0 - (-2.0f64).exp()) / 2.0;
        assert!((mean - exact).abs() <= 3.0 * sd / mm.sqrt(), "{mean} vs {exact}");
    }

    #[test]
    fn csv_headers() {
        let g = TimeGrid::new(1.0, 2).unwrap();
        let noise = sample_noise(g, 2, 0);
        let p = PathSolution::from_states(g, 2, 1.0, vec![0.0; 6]).unwrap();
        let mut buf = Vec::new();
        write_path_csv(&p, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("t,x1,x2\n0,0,0\n"));
        let mut buf = Vec::new();
        write_noise_csv(&noise, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("k,t,dw1,dw2\n"));
    }
}
