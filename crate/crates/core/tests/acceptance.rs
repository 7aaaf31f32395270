//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use semimono::cutoff::{certify_uniform_bounds, make_truncated, CutoffFamily};
use semimono::estimators::{self, UniformBoundOptions};
use semimono::malliavin::{self, CMDirection};
use semimono::model::builtin;
use semimono::paths::{self, euler_truncated, sample_noise, stopping_time, TimeGrid};
use semimono::runner::{self, RunOptions};
use semimono::{sampling, ModelSpec, Result};

type Check = fn() -> Result<(bool, String)>;

fn ou1() -> ModelSpec {
    builtin::ou(1, 1.0, 1.0, vec![1.0]).unwrap()
}

fn cubic() -> ModelSpec {
    builtin::cubic(0.2, 1.0, 0.5, vec![0.5]).unwrap().with_xi(1.0).unwrap()
}

fn single_thread<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(f)
}

fn c1_ou_first_derivative() -> Result<(bool, String)> {
    let start = Instant::now();
    let err = single_thread(|| -> Result<f64> {
        let model = ou1();
        let family = CutoffFamily::for_model(&model)?;
        let noise = sample_noise(TimeGrid::new(1.0, 1000)?, 1, 7);
        let (path, tm) = paths::settle(&model, &family, &noise, 1, 1 << 16)?;
        let first = malliavin::propagate_first(&tm, &path, &noise)?;
        let n = noise.grid.n_steps;
        Ok((0..=n)
            .map(|r| (first.value(r, n)[0] - (-(1.0 - noise.grid.t(r))).exp()).abs())
            .fold(0.0, f64::max))
    })?;
    let secs = start.elapsed().as_secs_f64();
    Ok((
        err <= 5e-3 && secs < 10.0,
        format!("max |D_r X_T - e^-(1-r)| = {err:.3e} (<= 5e-3), {secs:.2}s single-threaded (< 10s)"),
    ))
}

fn c2_hnorm() -> Result<(bool, String)> {
    let model = ou1();
    let family = CutoffFamily::for_model(&model)?;
    let noise = sample_noise(TimeGrid::new(1.0, 1000)?, 1, 11);
    let (path, tm) = paths::settle(&model, &family, &noise, 1, 1 << 16)?;
    let first = malliavin::propagate_first(&tm, &path, &noise)?;
    let h = malliavin::hnorm_sq(&first, 1000);
    let exact = (1.0 - (-2.0f64).exp()) / 2.0;
    Ok((
        (h - exact).abs() <= 1e-2,
        format!("||DX_1||_H^2 = {h:.6} vs {exact:.6} (|diff| <= 1e-2)"),
    ))
}

fn c3_cameron_martin() -> Result<(bool, String)> {
    let grid = TimeGrid::new(1.0, 1000)?;
    let model = ou1();
    let family = CutoffFamily::for_model(&model)?;
    let h = CMDirection::Constant(vec![1.0]);
    let noise = sample_noise(grid, 1, 3);
    let (_, tm) = paths::settle(&model, &family, &noise, 1, 1 << 16)?;
    let ou = malliavin::cameron_martin_check(&tm, &noise, &h, 1e-4)?;
    let exact = 1.0 - (-1.0f64).exp();
    let rhs_rel = (ou.rhs[0] - exact).abs() / exact;

    let model = cubic();
    let family = CutoffFamily::for_model(&model)?;
    let mut errs = Vec::new();
    for seed in 0..100 {
        let noise = sample_noise(grid, 1, seed);
        let (_, tm) = paths::settle(&model, &family, &noise, 1, 1 << 16)?;
        errs.push(malliavin::cameron_martin_check(&tm, &noise, &h, 1e-4)?.rel_err);
    }
    errs.sort_by(f64::total_cmp);
    let median = 0.5 * (errs[49] + errs[50]);
    Ok((
        rhs_rel <= 1e-2 && ou.rel_err <= 1e-2 && median <= 1e-2,
        format!(
            "OU rhs rel {rhs_rel:.2e}, OU rel_err {:.2e}, CUBIC median rel_err {median:.2e} over 100 seeds (all <= 1e-2)",
            ou.rel_err
        ),
    ))
}

fn c4_nesting() -> Result<(bool, String)> {
    let start = Instant::now();
    let model = cubic();
    let family = CutoffFamily::for_model(&model)?;
    let grid = TimeGrid::new(1.0, 1000)?;
    let tms: Vec<_> = (0..=4).map(|i| make_truncated(&model, 1 << i, &family)).collect::<Result<_>>()?;
    let mut mismatches = 0usize;
    let mut exits = 0usize;
    for seed in 0..1000 {
        let noise = sample_noise(grid, 1, seed);
        let paths: Vec<_> = tms.iter().map(|tm| euler_truncated(tm, &noise)).collect::<Result<_>>()?;
        for i in 0..4 {
            let n = 1u32 << i;
            let upto = match stopping_time(&paths[i], n, family.xi) {
                Some(e) => {
                    exits += 1;
                    e
                }
                None => grid.n_steps,
            };
            let same = (0..=upto).all(|k| {
                paths[i].state(k).iter().zip(paths[i + 1].state(k)).all(|(a, b)| a.to_bits() == b.to_bits())
            });
            if !same {
                mismatches += 1;
            }
        }
    }
    let conv = estimators::convergence_report(&model, &family, &[1, 2, 4], 8, grid, 2.0, 1000, 0)?;
    let secs = start.elapsed().as_secs_f64();
    Ok((
        mismatches == 0 && conv.nonzero_settled_gaps == 0 && secs < 30.0,
        format!(
            "{mismatches} bitwise mismatches over 1000 seeds x 4 level pairs ({exits} exits), \
             {} settled nonzero gaps, {secs:.2}s (< 30s)",
            conv.nonzero_settled_gaps
        ),
    ))
}

fn c5_cutoff() -> Result<(bool, String)> {
    let model = builtin::ou(2, 1.0, 1.0, vec![0.0, 0.0])?;
    let family = CutoffFamily::for_model(&model)?;
    let mut rng = sampling::seeded(5);
    let mut exact = true;
    let mut worst_fd = 0.0f64;
    for n in 1..=6 {
        let r = family.radius(n);
        for _ in 0..2000 {
            exact &= family.phi(n, &sampling::uniform_in_ball(&mut rng, 2, r)) == 1.0;
            exact &= family.phi(n, &sampling::radial_in_shell(&mut rng, 2, 2.0 * r, 4.0 * r)) == 0.0;
        }
        for _ in 0..200 {
            let x = sampling::radial_in_shell(&mut rng, 2, 1.05 * r, 1.95 * r);
            let g = family.phi_grad(n, &x);
            let h = 1e-6 * r;
            let fd: Vec<f64> = (0..2)
                .map(|a| {
                    let (mut xp, mut xm) = (x.clone(), x.clone());
                    xp[a] += h;
                    xm[a] -= h;
                    (family.phi(n, &xp) - family.phi(n, &xm)) / (2.0 * h)
                })
                .collect();
            let gn = semimono::linalg::norm(&g);
            if gn > 1e-3 / r {
                let diff = semimono::linalg::dist_sq(&g, &fd).sqrt();
                worst_fd = worst_fd.max(diff / gn);
            }
        }
    }
    let cert = certify_uniform_bounds(&family, &model, &[1], 1..=6, 10_000, 9)?;
    let scaled: Vec<f64> = cert.rows.iter().map(|r| r.scaled_derivative).collect();
    let uniform = cert.rows.iter().all(|r| r.scaled_derivative <= r.derivative_bound * (1.0 + 1e-9));
    Ok((
        exact && uniform && cert.report.passed && worst_fd <= 1e-4,
        format!(
            "identity/support exact: {exact}; sup|grad phi_n| n^xi in [{:.4}, {:.4}] <= C1 = {:.4}; \
             FD rel err {worst_fd:.2e} (<= 1e-4)",
            scaled.iter().cloned().fold(f64::INFINITY, f64::min),
            scaled.iter().cloned().fold(0.0, f64::max),
            cert.rows[0].derivative_bound
        ),
    ))
}

fn c6_moments() -> Result<(bool, String)> {
    let start = Instant::now();
    let model = cubic();
    let family = CutoffFamily::for_model(&model)?;
    let rep = estimators::uniform_bound_report(
        &model,
        &family,
        &[1, 2, 3, 4, 5],
        TimeGrid::new(1.0, 200)?,
        2.0,
        10_000,
        0,
        &UniformBoundOptions::default(),
    )?;
    let secs = start.elapsed().as_secs_f64();
    Ok((
        rep.verdict && secs < 120.0,
        format!(
            "dominated {} (first violation {:?}), settled from n = {:?}, relative increases {:?}, {secs:.1}s (< 120s)",
            rep.dominated,
            rep.first_violation.as_ref().map(|v| (v.level, v.t)),
            rep.settled_level,
            rep.relative_increase.iter().map(|x| format!("{x:.1e}")).collect::<Vec<_>>()
        ),
    ))
}

/// Gaps at or below this are rounding noise and need not halve.
const ROUNDING_FLOOR: f64 = 1e-12;

fn c7_second_order() -> Result<(bool, String)> {
    // OU: linear, so the field vanishes
    let model = ou1();
    let family = CutoffFamily::for_model(&model)?;
    let grid = TimeGrid::new(1.0, 200)?;
    let noise = sample_noise(grid, 1, 1);
    let (path, tm) = paths::settle(&model, &family, &noise, 1, 1 << 16)?;
    let first = malliavin::propagate_first(&tm, &path, &noise)?;
    let pairs = malliavin::pair_grid(200, 10);
    let ou2 = malliavin::propagate_second(&tm, &path, &noise, &first, &[100, 200], &pairs)?;
    let ou_zero = ou2.max_abs() == 0.0;

    // CUBIC: symmetry gap on a halving study over the same Brownian path
    let model = cubic();
    let family = CutoffFamily::for_model(&model)?;
    let fine = sample_noise(TimeGrid::new(1.0, 1000)?, 1, 2);
    let mut gaps = Vec::new();
    let mut initial_ok = true;
    for factor in [2usize, 1] {
        let noise = fine.coarsen(factor)?;
        let n = noise.grid.n_steps;
        let (path, tm) = paths::settle(&model, &family, &noise, 1, 1 << 16)?;
        let first = malliavin::propagate_first(&tm, &path, &noise)?;
        let step = n / 10;
        let pairs = malliavin::pair_grid(n, step);
        let mut times: Vec<usize> = (0..=10).map(|i| i * step).collect();
        times.dedup();
        let second = malliavin::propagate_second(&tm, &path, &noise, &first, &times, &pairs)?;
        gaps.push((noise.grid.dt(), second.symmetry_gap()));
        for &(r, tau) in &pairs {
            let a = malliavin::second_initial(&tm, &path, &first, r, tau);
            let got = second.get(r, tau, r.max(tau)).expect("output time");
            initial_ok &= a.iter().zip(got).all(|(x, y)| x.to_bits() == y.to_bits());
        }
    }
    let (dt_c, g_c) = gaps[0];
    let (_, g_f) = gaps[1];
    let halves = g_f <= (0.5 * g_c).max(ROUNDING_FLOOR);
    let c = g_c.max(ROUNDING_FLOOR) / dt_c;
    Ok((
        ou_zero && halves && initial_ok,
        format!(
            "OU field identically 0: {ou_zero}; CUBIC symmetry gap {g_c:.2e} -> {g_f:.2e} on halving \
             (C = {c:.2e}); initial tensors bitwise: {initial_ok}"
        ),
    ))
}

fn c8_zero_past() -> Result<(bool, String)> {
    let model = cubic();
    let family = CutoffFamily::for_model(&model)?;
    let noise = sample_noise(TimeGrid::new(1.0, 400)?, 1, 4);
    let (path, tm) = paths::settle(&model, &family, &noise, 1, 1 << 16)?;
    let first = malliavin::propagate_first(&tm, &path, &noise)?;
    let pairs = malliavin::pair_grid(400, 20);
    let times: Vec<usize> = (0..=400).step_by(40).collect();
    let second = malliavin::propagate_second(&tm, &path, &noise, &first, &times, &pairs)?;
    let mut rng = sampling::seeded(8);
    let mut audits = 0;
    let mut bad = 0;
    use rand::Rng;
    for _ in 0..5000 {
        let t = rng.random_range(0..400);
        let r = rng.random_range(t + 1..=400);
        audits += 1;
        if first.get(r, t).is_some() || first.value(r, t).iter().any(|&v| v != 0.0) {
            bad += 1;
        }
    }
    for &(r, tau) in &pairs {
        for &t in &times {
            if r.max(tau) > t {
                audits += 1;
                if second.get(r, tau, t).expect("computed").iter().any(|&v| v != 0.0) {
                    bad += 1;
                }
            }
        }
    }
    Ok((bad == 0, format!("{bad} nonzero entries in {audits} future-looking audits")))
}

fn c9_reproducibility() -> Result<(bool, String)> {
    let dir = tempfile::tempdir()?;
    let mut runs = Vec::new();
    for (tag, threads) in [("a", 1), ("b", 1), ("c", 4)] {
        let out = dir.path().join(tag);
        let o = runner::run_path(
            "cubic_full",
            &RunOptions { out_dir: Some(out.clone()), seed: Some(42), threads: Some(threads) },
        );
        if o.exit_code != runner::EXIT_OK {
            return Ok((false, format!("run {tag} exited {} ({:?})", o.exit_code, o.error)));
        }
        runs.push(read_csvs(&out)?);
    }
    let identical = runs[0] == runs[1] && runs[0] == runs[2];
    Ok((
        identical && !runs[0].is_empty(),
        format!("{} CSVs byte-identical across 2 runs and threads 1 vs 4: {identical}", runs[0].len()),
    ))
}

fn read_csvs(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir)? {
        let p = entry?.path();
        if p.extension().is_some_and(|e| e == "csv") {
            out.insert(p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p)?);
        }
    }
    Ok(out)
}

fn main() {
    let criteria: [(&str, Check); 9] = [
        ("OU first-derivative exactness", c1_ou_first_derivative),
        ("H-norm oracle", c2_hnorm),
        ("Cameron-Martin oracle", c3_cameron_martin),
        ("truncation nesting", c4_nesting),
        ("cutoff certification", c5_cutoff),
        ("moment boundedness", c6_moments),
        ("second-derivative properties", c7_second_order),
        ("zero-past convention", c8_zero_past),
        ("reproducibility", c9_reproducibility),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (ok, detail) = check().unwrap_or_else(|e| (false, format!("error: {e}")));
        if !ok {
            failed += 1;
        }
        println!(
            "criterion {} {} {name}: {detail} [{:.2}s]",
            i + 1,
            if ok { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {}/{} passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
