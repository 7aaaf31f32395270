//! Monte Carlo moments across truncation levels, Gronwall-type bounds and
//! the uniform-boundedness and coupled-convergence reports.
//!
//! Every estimator simulates seeds `seed0..seed0 + M` independently (in
//! parallel) and reduces them in seed order, so results do not depend on the
//! thread count.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::cutoff::{make_truncated, CutoffFamily};
use crate::error::{Error, Result};
use crate::linalg;
use crate::malliavin;
use crate::model::{self, ModelSpec, Sde};
use crate::paths::{self, euler, sample_noise, stopping_time, TimeGrid};

/// Seeds simulated per parallel batch before the ordered reduction.
const BATCH: usize = 512;

/// Running mean and sum of squared deviations (Welford).
#[derive(Debug, Clone)]
struct Welford {
    count: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Welford {
    fn new(width: usize) -> Self {
        Self {
            count: 0,
            mean: vec![0.0; width],
            m2: vec![0.0; width],
        }
    }

    fn push(&mut self, x: &[f64]) {
        self.count += 1;
        let n = self.count as f64;
        for ((m, s), &v) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(x) {
            let delta = v - *m;
            *m += delta / n;
            *s += delta * (v - *m);
        }
    }

    fn stderr(&self) -> Vec<f64> {
        let n = self.count as f64;
        self.m2
            .iter()
            .map(|s| (s / (n - 1.0)).max(0.0).sqrt() / n.sqrt())
            .collect()
    }
}

/// Mean and standard error of a per-seed vector functional.
pub fn monte_carlo<F>(samples: usize, seed0: u64, width: usize, per_seed: F) -> Result<(Vec<f64>, Vec<f64>)>
where
    F: Fn(u64) -> Result<Vec<f64>> + Sync,
{
    if samples < 2 {
        return Err(Error::Domain(format!("need at least 2 samples, got {samples}")));
    }
    let mut acc = Welford::new(width);
    let mut start = 0usize;
    while start < samples {
        let end = (start + BATCH).min(samples);
        let batch: Vec<Result<Vec<f64>>> = (start..end)
            .into_par_iter()
            .map(|i| per_seed(seed0.wrapping_add(i as u64)))
            .collect();
        for v in batch {
            let v = v?;
            debug_assert_eq!(v.len(), width);
            acc.push(&v);
        }
        start = end;
    }
    let se = acc.stderr();
    Ok((acc.mean, se))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Quantity {
    /// `E|X_t|^p`.
    Moment,
    /// `E|X_t - x0|^p`.
    CenteredMoment,
    /// `E ||D X_T||_H^p`.
    HNorm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Level {
    Truncated(u32),
    Settled,
    /// Coefficients used as given, with no truncation bookkeeping.
    Direct,
}

impl std::fmt::Display for Level {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Level::Truncated(n) => write!(f, "{n}"),
            Level::Settled => f.write_str("settled"),
            Level::Direct => f.write_str("direct"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentReport {
    pub quantity: Quantity,
    pub level: Level,
    pub p: f64,
    pub times: Vec<f64>,
    pub estimates: Vec<f64>,
    pub stderrs: Vec<f64>,
    /// Reference bound at each time, when one applies.
    pub bounds: Option<Vec<f64>>,
    pub samples: usize,
    pub seed0: u64,
}

impl MomentReport {
    pub fn sup_estimate(&self) -> f64 {
        self.estimates.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

fn check_p(p: f64) -> Result<()> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::Domain(format!("moment order p must be >= 1, got {p}")));
    }
    Ok(())
}

/// `E|X_{t_k}|^p` (or about `center`) at every grid time for the given coefficients.
pub fn mc_moment<S: Sde + ?Sized>(
    sde: &S,
    grid: TimeGrid,
    p: f64,
    samples: usize,
    seed0: u64,
    center: Option<&[f64]>,
) -> Result<MomentReport> {
    check_p(p)?;
    let d = sde.dim();
    let zero = vec![0.0; d];
    let c = center.unwrap_or(&zero);
    let (estimates, stderrs) = monte_carlo(samples, seed0, grid.n_steps + 1, |seed| {
        let path = euler(sde, &sample_noise(grid, d, seed), 1.0)?;
        Ok(path
            .states
            .chunks(d)
            .map(|x| linalg::dist_sq(x, c).sqrt().powf(p))
            .collect())
    })?;
    Ok(MomentReport {
        quantity: if center.is_some() {
            Quantity::CenteredMoment
        } else {
            Quantity::Moment
        },
        level: Level::Direct,
        p,
        times: grid.times(),
        estimates,
        stderrs,
        bounds: None,
        samples,
        seed0,
    })
}

/// `E|X_{t_k}|^p` for the original equation, each seed run at its settled level.
pub fn mc_moment_settled(
    model: &ModelSpec,
    family: &CutoffFamily,
    grid: TimeGrid,
    p: f64,
    samples: usize,
    seed0: u64,
    n_start: u32,
    n_max: u32,
) -> Result<MomentReport> {
    check_p(p)?;
    let d = model.dim;
    let (estimates, stderrs) = monte_carlo(samples, seed0, grid.n_steps + 1, |seed| {
        let path = paths::euler_original(model, family, &sample_noise(grid, d, seed), n_start, n_max)?;
        Ok(path.states.chunks(d).map(|x| linalg::norm(x).powf(p)).collect())
    })?;
    Ok(MomentReport {
        quantity: Quantity::Moment,
        level: Level::Settled,
        p,
        times: grid.times(),
        estimates,
        stderrs,
        bounds: None,
        samples,
        seed0,
    })
}

/// Gronwall consequence of `m' <= beta m + alpha` from `m(0) = |x0|^2`:
/// `(m0 + alpha/beta) e^{beta t} - alpha/beta`, or `m0 + alpha t` when `beta = 0`.
pub fn gronwall_bound(alpha_p: f64, beta_p: f64, p: f64, x0_norm: f64, t: f64) -> Result<f64> {
    if p != 2.0 {
        return Err(Error::Domain(format!(
            "the closed Gronwall form is the p = 2 base case, got p = {p}; use moment_bound"
        )));
    }
    Ok(gronwall(alpha_p, beta_p, x0_norm * x0_norm, t))
}

fn gronwall(alpha: f64, beta: f64, m0: f64, t: f64) -> f64 {
    if beta == 0.0 {
        m0 + alpha * t
    } else {
        m0 * (beta * t).exp() + alpha * (beta * t).exp_m1() / beta
    }
}

/// Bound on `E|Y_t|^p` given `L|y|^q <= beta_q |y|^q + alpha_q |y|^{q-2}` for every even
/// `q <= p`, where `constants(q) = (alpha_q, beta_q)` and `|Y_0| = y0_norm`.
///
/// Even `p` composes `m_q(t) <= e^{beta_q t} m_q(0) + alpha_q B_{q-2}(t) (e^{beta_q t} - 1) / beta_q`
/// upward from `m_0 = 1`; other `p` use Jensen from the next even order.
/// Requires every `beta_q >= 0`, so that each `B_q` is nondecreasing.
pub fn moment_bound<C>(constants: C, p: f64, y0_norm: f64, t: f64) -> Result<f64>
where
    C: Fn(f64) -> Result<(f64, f64)>,
{
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::Domain(format!("moment order p must be >= 1, got {p}")));
    }
    let q = 2.0 * (p / 2.0).ceil();
    let mut prev = 1.0;
    let mut order = 2.0;
    while order <= q {
        let (alpha, beta) = constants(order)?;
        if beta < 0.0 || alpha < 0.0 {
            return Err(Error::Domain(format!(
                "composition needs alpha_q, beta_q >= 0, got ({alpha}, {beta}) at q = {order}"
            )));
        }
        prev = gronwall(alpha * prev, beta, y0_norm.powf(order), t);
        order += 2.0;
    }
    Ok(if q == p { prev } else { prev.powf(p / q) })
}

/// Which moment the uniform report tests against which bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BoundForm {
    /// `E|X_t - x0|^p` against the level-independent centered constants (p = 2 only).
    Centered,
    /// `E|X_t|^p` against the declared-hypothesis constants `(alpha_p, beta_p)`.
    Uncentered,
}

#[derive(Debug, Clone)]
pub struct UniformBoundOptions {
    pub form: BoundForm,
    /// Relative increase allowed between successive settled levels.
    pub stabilization_tol: f64,
    /// Also estimate `E ||D X_T||_H^p` per level.
    pub hnorm: bool,
}

impl Default for UniformBoundOptions {
    fn default() -> Self {
        Self {
            form: BoundForm::Centered,
            stabilization_tol: 0.01,
            hnorm: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub level: u32,
    pub t: f64,
    pub estimate: f64,
    pub bound: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniformBoundReport {
    pub form: BoundForm,
    pub levels: Vec<u32>,
    /// Bounded quantity per level (carries the bound).
    pub bounded: Vec<MomentReport>,
    /// The other moment per level, for reference.
    pub companion: Vec<MomentReport>,
    pub hnorm: Vec<MomentReport>,
    /// Fraction of seeds that never reach `|x| >= n^xi`, per level.
    pub settled_fraction: Vec<f64>,
    /// First level at which no seed exits.
    pub settled_level: Option<u32>,
    /// `(sup_t est_{n+1} - sup_t est_n) / sup_t est_n` for successive levels.
    pub relative_increase: Vec<f64>,
    pub dominated: bool,
    pub stabilized: bool,
    pub first_violation: Option<Violation>,
    pub verdict: bool,
}

/// Run every level on common seeds and test bound dominance (`estimate <= bound + 3 SE`)
/// and stabilisation of the across-level sup from the first settled level on.
pub fn uniform_bound_report(
    model: &ModelSpec,
    family: &CutoffFamily,
    levels: &[u32],
    grid: TimeGrid,
    p: f64,
    samples: usize,
    seed0: u64,
    opts: &UniformBoundOptions,
) -> Result<UniformBoundReport> {
    check_p(p)?;
    if levels.is_empty() {
        return Err(Error::Domain("uniform bound report needs at least one level".into()));
    }
    let d = model.dim;
    let x0 = model.x0.clone();
    let width_t = grid.n_steps + 1;
    // per level: centered moments, plain moments, hnorm, settled flag
    let per_level = 2 * width_t + 2;
    let tms = levels
        .iter()
        .map(|&n| make_truncated(model, n, family))
        .collect::<Result<Vec<_>>>()?;
    let (mean, se) = monte_carlo(samples, seed0, per_level * levels.len(), |seed| {
        let noise = sample_noise(grid, d, seed);
        let mut out = Vec::with_capacity(per_level * levels.len());
        for tm in &tms {
            let path = paths::euler_truncated(tm, &noise)?;
            out.extend(path.states.chunks(d).map(|x| linalg::dist_sq(x, &x0).sqrt().powf(p)));
            out.extend(path.states.chunks(d).map(|x| linalg::norm(x).powf(p)));
            out.push(if opts.hnorm {
                let slice = malliavin::terminal_slice(tm, &path, &noise)?;
                malliavin::hnorm_sq_terminal(&slice, grid.dt()).powf(p / 2.0)
            } else {
                0.0
            });
            out.push(if stopping_time(&path, tm.n, family.xi).is_none() { 1.0 } else { 0.0 });
        }
        Ok(out)
    })?;

    let times = grid.times();
    let bound_curve: Vec<f64> = match opts.form {
        BoundForm::Centered => {
            if p != 2.0 {
                return Err(Error::Domain("centered bound is available for p = 2".into()));
            }
            let c = model::centered_moment_constants(model)?;
            times.iter().map(|&t| gronwall(c.alpha_p, c.beta_p, 0.0, t)).collect()
        }
        BoundForm::Uncentered => {
            let x0n = linalg::norm(&model.x0);
            times
                .iter()
                .map(|&t| {
                    moment_bound(
                        |q| {
                            let g = model::moment_generator_constants(model, q)?;
                            Ok((g.alpha_p, g.beta_p))
                        },
                        p,
                        x0n,
                        t,
                    )
                })
                .collect::<Result<_>>()?
        }
    };

    let mk = |q: Quantity, n: u32, est: &[f64], s: &[f64], bounds: Option<Vec<f64>>, ts: Vec<f64>| MomentReport {
        quantity: q,
        level: Level::Truncated(n),
        p,
        times: ts,
        estimates: est.to_vec(),
        stderrs: s.to_vec(),
        bounds,
        samples,
        seed0,
    };
    let mut bounded = Vec::new();
    let mut companion = Vec::new();
    let mut hnorm = Vec::new();
    let mut settled_fraction = Vec::new();
    for (li, &n) in levels.iter().enumerate() {
        let base = li * per_level;
        let centered = (&mean[base..base + width_t], &se[base..base + width_t]);
        let plain = (&mean[base + width_t..base + 2 * width_t], &se[base + width_t..base + 2 * width_t]);
        let (b, c, bq, cq) = match opts.form {
            BoundForm::Centered => (centered, plain, Quantity::CenteredMoment, Quantity::Moment),
            BoundForm::Uncentered => (plain, centered, Quantity::Moment, Quantity::CenteredMoment),
        };
        bounded.push(mk(bq, n, b.0, b.1, Some(bound_curve.clone()), times.clone()));
        companion.push(mk(cq, n, c.0, c.1, None, times.clone()));
        if opts.hnorm {
            let h = base + 2 * width_t;
            hnorm.push(mk(Quantity::HNorm, n, &mean[h..h + 1], &se[h..h + 1], None, vec![grid.horizon]));
        }
        settled_fraction.push(mean[base + 2 * width_t + 1]);
    }

    let mut first_violation = None;
    'outer: for rep in &bounded {
        let Level::Truncated(n) = rep.level else { unreachable!() };
        for k in 0..rep.times.len() {
            let limit = bound_curve[k] + 3.0 * rep.stderrs[k];
            if !(rep.estimates[k] <= limit) {
                first_violation = Some(Violation {
                    level: n,
                    t: rep.times[k],
                    estimate: rep.estimates[k],
                    bound: bound_curve[k],
                    stderr: rep.stderrs[k],
                });
                break 'outer;
            }
        }
    }

    let sups: Vec<f64> = bounded.iter().map(MomentReport::sup_estimate).collect();
    let relative_increase: Vec<f64> = sups
        .windows(2)
        .map(|w| if w[0] > 0.0 { (w[1] - w[0]) / w[0] } else if w[1] > 0.0 { f64::INFINITY } else { 0.0 })
        .collect();
    let settled_idx = settled_fraction.iter().position(|&f| f == 1.0);
    let stabilized = match settled_idx {
        Some(i) => relative_increase[i.min(relative_increase.len())..]
            .iter()
            .all(|&r| r <= opts.stabilization_tol),
        None => false,
    };
    let dominated = first_violation.is_none();
    Ok(UniformBoundReport {
        form: opts.form,
        levels: levels.to_vec(),
        bounded,
        companion,
        hnorm,
        settled_level: settled_idx.map(|i| levels[i]),
        settled_fraction,
        relative_increase,
        dominated,
        stabilized,
        first_violation,
        verdict: dominated && stabilized,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub levels: Vec<u32>,
    pub n_ref: u32,
    pub p: f64,
    /// `E|X_T^n - X_T^{ref}|^p` on common noise.
    pub gaps: Vec<f64>,
    pub stderrs: Vec<f64>,
    pub settled_fraction: Vec<f64>,
    /// `(seed, level)` pairs whose level was settled but whose gap was not exactly 0.
    pub nonzero_settled_gaps: usize,
    /// Gaps nonincreasing in `n`.
    pub monotone: bool,
    pub samples: usize,
    pub seed0: u64,
}

/// Coupled gaps to the reference level on common noise.
pub fn convergence_report(
    model: &ModelSpec,
    family: &CutoffFamily,
    levels: &[u32],
    n_ref: u32,
    grid: TimeGrid,
    p: f64,
    samples: usize,
    seed0: u64,
) -> Result<ConvergenceReport> {
    check_p(p)?;
    if levels.is_empty() || levels.iter().any(|&n| n >= n_ref) {
        return Err(Error::Domain(format!(
            "reference level {n_ref} must exceed every level in {levels:?}"
        )));
    }
    let d = model.dim;
    let reference = make_truncated(model, n_ref, family)?;
    let tms = levels
        .iter()
        .map(|&n| make_truncated(model, n, family))
        .collect::<Result<Vec<_>>>()?;
    let m = levels.len();
    // per level: gap, settled flag, settled-but-nonzero flag
    let (mean, se) = monte_carlo(samples, seed0, 3 * m, |seed| {
        let noise = sample_noise(grid, d, seed);
        let xr = paths::euler_truncated(&reference, &noise)?;
        let mut out = vec![0.0; 3 * m];
        for (li, tm) in tms.iter().enumerate() {
            let path = paths::euler_truncated(tm, &noise)?;
            let gap = linalg::dist_sq(path.terminal(), xr.terminal()).sqrt().powf(p);
            let settled = stopping_time(&path, tm.n, family.xi).is_none();
            out[li] = gap;
            out[m + li] = if settled { 1.0 } else { 0.0 };
            out[2 * m + li] = if settled && gap != 0.0 { 1.0 } else { 0.0 };
        }
        Ok(out)
    })?;
    let gaps = mean[..m].to_vec();
    let nonzero = mean[2 * m..].iter().map(|f| (f * samples as f64).round() as usize).sum();
    Ok(ConvergenceReport {
        levels: levels.to_vec(),
        n_ref,
        p,
        monotone: gaps.windows(2).all(|w| w[1] <= w[0]),
        gaps,
        stderrs: se[..m].to_vec(),
        settled_fraction: mean[m..2 * m].to_vec(),
        nonzero_settled_gaps: nonzero,
        samples,
        seed0,
    })
}

/// Columns `level,t,p,estimate,stderr,bound` (empty bound when none applies).
pub fn write_moments_csv<W: Write>(reports: &[MomentReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["level", "t", "p", "estimate", "stderr", "bound"])?;
    for rep in reports {
        for k in 0..rep.times.len() {
            let bound = rep.bounds.as_ref().map(|b| b[k].to_string()).unwrap_or_default();
            w.write_record([
                rep.level.to_string(),
                rep.times[k].to_string(),
                rep.p.to_string(),
                rep.estimates[k].to_string(),
                rep.stderrs[k].to_string(),
                bound,
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Columns `n,p,gap,stderr,settled_fraction`.
pub fn write_convergence_csv<W: Write>(rep: &ConvergenceReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n", "p", "gap", "stderr", "settled_fraction"])?;
    for (i, n) in rep.levels.iter().enumerate() {
        w.write_record([
            n.to_string(),
            rep.p.to_string(),
            rep.gaps[i].to_string(),
            rep.stderrs[i].to_string(),
            rep.settled_fraction[i].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// The three bound forms on a time grid, as printed in `bounds.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundTable {
    pub times: Vec<f64>,
    /// Gronwall from `m(0) = |x0|^2` with `(alpha_2, beta_2)`.
    pub uncentered_gronwall: Vec<f64>,
    /// `|x0|^2 alpha_2 e^{beta_2 t}` taken literally.
    pub scaled_exponential: Vec<f64>,
    /// Gronwall for `E|X_t - x0|^2` with the centered constants.
    pub centered_gronwall: Vec<f64>,
}

pub fn bound_table(model: &ModelSpec, grid: TimeGrid) -> Result<BoundTable> {
    let g = model::moment_generator_constants(model, 2.0)?;
    let c = model::centered_moment_constants(model)?;
    let x0n = linalg::norm(&model.x0);
    let times = grid.times();
    Ok(BoundTable {
        uncentered_gronwall: times
            .iter()
            .map(|&t| gronwall_bound(g.alpha_p, g.beta_p, 2.0, x0n, t))
            .collect::<Result<_>>()?,
        scaled_exponential: times
            .iter()
            .map(|&t| x0n * x0n * g.alpha_p * (g.beta_p * t).exp())
            .collect(),
        centered_gronwall: times.iter().map(|&t| gronwall(c.alpha_p, c.beta_p, 0.0, t)).collect(),
        times,
    })
}

/// Columns `form,t,value`.
pub fn write_bounds_csv<W: Write>(table: &BoundTable, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["form", "t", "value"])?;
    for (name, col) in [
        ("uncentered_gronwall", &table.uncentered_gronwall),
        ("scaled_exponential", &table.scaled_exponential),
        ("centered_gronwall", &table.centered_gronwall),
    ] {
        for (t, v) in table.times.iter().zip(col.iter()) {
            w.write_record([name.to_string(), t.to_string(), v.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::builtin;
    use std::sync::Arc;

    #[test]
    fn gronwall_examples() {
        assert_eq!(gronwall_bound(4.0, 0.0, 2.0, 1.0, 1.0).unwrap(), 5.0);
        assert_eq!(gronwall_bound(0.0, 0.0, 2.0, 1.5, 7.0).unwrap(), 2.25);
        let v = gronwall_bound(6.0, 6.0, 2.0, 1.0, 1.0).unwrap();
        assert!((v - (2.0 * 6f64.exp() - 1.0)).abs() < 1e-9);
        assert!((v - 805.857).abs() < 1e-3);
        assert!(gronwall_bound(1.0, 1.0, 4.0, 1.0, 1.0).is_err());
        // decay branch stays between m0 and alpha / |beta|
        let d = gronwall_bound(2.0, -1.0, 2.0, 0.0, 50.0).unwrap();
        assert!((d - 2.0).abs() < 1e-12);
    }

    #[test]
    fn moment_bound_composes_and_reduces_to_base_case() {
        let c = |_q: f64| Ok((3.0, 2.0));
        let base = moment_bound(c, 2.0, 1.2, 0.7).unwrap();
        assert_eq!(base, gronwall_bound(3.0, 2.0, 2.0, 1.2, 0.7).unwrap());
        // p = 4: derivative of the bound dominates beta_4 B_4 + alpha_4 B_2
        let b4 = |t: f64| moment_bound(c, 4.0, 1.2, t).unwrap();
        let b2 = |t: f64| moment_bound(c, 2.0, 1.2, t).unwrap();
        for t in [0.1, 0.5, 1.0] {
            let h = 1e-6;
            let deriv = (b4(t + h) - b4(t - h)) / (2.0 * h);
            assert!(deriv + 1e-6 >= 2.0 * b4(t) + 3.0 * b2(t));
        }
        assert!((b4(0.0) - 1.2f64.powi(4)).abs() < 1e-12);
        let b3 = moment_bound(c, 3.0, 1.2, 1.0).unwrap();
        assert!((b3 - b4(1.0).powf(0.75)).abs() < 1e-12);
    }

    fn ou() -> ModelSpec {
        builtin::ou(1, 1.0, 1.0, vec![1.0]).unwrap()
    }

    #[test]
    fn ou_second_moment_matches_closed_form() {
        let m = ou();
        let tm = make_truncated(&m, 1000, &CutoffFamily::for_model(&m).unwrap()).unwrap();
        let grid = TimeGrid::new(1.0, 200).unwrap();
        let rep = mc_moment(&tm, grid, 2.0, 10_000, 0, None).unwrap();
        let exact = (-2.0f64).exp() + (1.0 - (-2.0f64).exp()) / 2.0;
        let k = grid.n_steps;
        assert!((rep.estimates[k] - exact).abs() <= 3.0 * rep.stderrs[k]);
        assert_eq!(rep.estimates[0], 1.0);
        assert_eq!(rep.stderrs[0], 0.0);
    }

    #[test]
    fn deterministic_decay_has_zero_stderr() {
        let m = ModelSpec::builder("decay", Arc::new(builtin::LinearDrift { dim: 1, k: 1.0 }))
            .monotone_k(1.0)
            .xi(1.0)
            .x0(vec![1.0])
            .build()
            .unwrap();
        let grid = TimeGrid::new(1.0, 100).unwrap();
        let rep = mc_moment(&m, grid, 2.0, 10, 3, None).unwrap();
        for k in 0..=100 {
            assert_eq!(rep.stderrs[k], 0.0);
            assert!((rep.estimates[k] - (1.0 - 0.01f64).powi(2 * k as i32)).abs() < 1e-12);
        }
        let zero = m.with_x0(vec![0.0]).unwrap();
        let rep = mc_moment(&zero, grid, 2.0, 4, 0, None).unwrap();
        assert!(rep.estimates.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn stderr_halves_when_samples_quadruple() {
        let m = ou();
        let grid = TimeGrid::new(1.0, 50).unwrap();
        let a = mc_moment(&m, grid, 2.0, 2_000, 0, None).unwrap();
        let b = mc_moment(&m, grid, 2.0, 8_000, 100_000, None).unwrap();
        let ratio = b.stderrs[50] / a.stderrs[50];
        assert!((ratio - 0.5).abs() <= 0.1, "{ratio}");
    }

    #[test]
    fn settled_moments_equal_high_level_moments() {
        let m = ou();
        let fam = CutoffFamily::for_model(&m).unwrap();
        let grid = TimeGrid::new(1.0, 50).unwrap();
        let settled = mc_moment_settled(&m, &fam, grid, 2.0, 200, 0, 1, 1 << 20).unwrap();
        let high = mc_moment(&make_truncated(&m, 1 << 20, &fam).unwrap(), grid, 2.0, 200, 0, None).unwrap();
        assert_eq!(settled.estimates, high.estimates);
    }

    #[test]
    fn ou_uniform_report_passes_and_nests() {
        let m = ou();
        let fam = CutoffFamily::for_model(&m).unwrap();
        let grid = TimeGrid::new(1.0, 50).unwrap();
        let rep = uniform_bound_report(&m, &fam, &[1, 2, 3, 4, 5], grid, 2.0, 2_000, 0, &Default::default()).unwrap();
        assert!(rep.verdict, "{:?}", rep.first_violation);
        let s = rep.settled_level.unwrap();
        let i = rep.levels.iter().position(|&n| n == s).unwrap();
        for w in rep.bounded[i..].windows(2) {
            assert_eq!(w[0].estimates, w[1].estimates);
        }
    }

    #[test]
    fn misdeclared_monotonicity_names_first_violation() {
        // b = +x declared as if it were dissipative with K = 1
        let m = ModelSpec::builder("expanding", Arc::new(builtin::LinearDrift { dim: 1, k: -1.0 }))
            .diffusion(Arc::new(builtin::ConstantDiffusion::scalar(1, 1.0)))
            .monotone_k(1.0)
            .xi(1.0)
            .growth(1, 1.0, 1.0)
            .x0(vec![1.0])
            .build()
            .unwrap();
        let fam = CutoffFamily::for_model(&m).unwrap();
        let grid = TimeGrid::new(1.0, 50).unwrap();
        let opts = UniformBoundOptions {
            form: BoundForm::Uncentered,
            hnorm: false,
            ..Default::default()
        };
        let rep = uniform_bound_report(&m, &fam, &[64], grid, 2.0, 2_000, 0, &opts).unwrap();
        assert!(!rep.verdict);
        let v = rep.first_violation.unwrap();
        assert_eq!(v.level, 64);
        assert!(v.t > 0.0 && v.estimate > v.bound);
    }

    #[test]
    fn ou_coupled_gaps_vanish_at_settled_levels() {
        let m = ou();
        let fam = CutoffFamily::for_model(&m).unwrap();
        let grid = TimeGrid::new(1.0, 100).unwrap();
        let rep = convergence_report(&m, &fam, &[1, 2, 3, 4], 8, grid, 2.0, 1_000, 0).unwrap();
        assert_eq!(rep.nonzero_settled_gaps, 0);
        for (i, f) in rep.settled_fraction.iter().enumerate() {
            if *f == 1.0 {
                assert_eq!(rep.gaps[i], 0.0);
            }
        }
        assert!(rep.monotone);
        assert!(convergence_report(&m, &fam, &[1, 8], 8, grid, 2.0, 10, 0).is_err());
    }

    #[test]
    fn csv_headers() {
        let m = ou();
        let grid = TimeGrid::new(1.0, 2).unwrap();
        let rep = mc_moment(&m, grid, 2.0, 3, 0, None).unwrap();
        let mut buf = Vec::new();
        write_moments_csv(&[rep], &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("level,t,p,estimate,stderr,bound\ndirect,0,2,1,0,\n"), "{s}");
        let table = bound_table(&m, grid).unwrap();
        let mut buf = Vec::new();
        write_bounds_csv(&table, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("form,t,value\nuncentered_gronwall,0,1\n"));
    }
}
