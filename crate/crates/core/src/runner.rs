//! Executes an [`ExperimentConfig`] and writes CSV artifacts plus `manifest.json`.
//!
//! Exit codes: 0 all verdicts pass, 1 runtime error, 2 configuration error,
//! 3 some verdict failed (artifacts are still written).

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{self, Experiment, ExperimentConfig};
use crate::cutoff::{certify_uniform_bounds, CutoffFamily, TruncatedModel};
use crate::error::{Error, Result};
use crate::estimators::{self, BoundForm, UniformBoundOptions};
use crate::malliavin::{self, CMDirection, FirstDerivField};
use crate::model::{self, builtin, HypothesisReport, ModelSpec};
use crate::paths::{self, sample_noise, NoisePath, PathSolution};
use crate::sampling::GENERATOR_ID;

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_VERDICT: i32 = 3;

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "SEMIMONO_OUT";

/// Median Cameron–Martin relative error accepted by the oracle verdict.
pub const CM_TOL: f64 = 1e-2;
/// Largest flow-factorisation gap accepted.
pub const FLOW_TOL: f64 = 1e-8;
/// Symmetry gap of the second field, relative to its largest entry.
pub const SYMMETRY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Artifact directory; overrides `outputs.directory`.
    pub out_dir: Option<PathBuf>,
    /// Overrides `mc.seed0`.
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Passed,
    Failed,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentOutcome {
    pub name: String,
    pub status: Status,
    pub message: String,
    pub artifacts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub name: String,
    pub library_version: String,
    pub config_sha256: String,
    pub generator_id: String,
    /// First and last Monte Carlo seed.
    pub seed_range: [u64; 2],
    pub field_seed: u64,
    pub experiments: Vec<ExperimentOutcome>,
    pub exit_code: i32,
    /// The only run-dependent field.
    pub generated_at_unix: u64,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub out_dir: Option<PathBuf>,
    pub manifest: Option<Manifest>,
    /// Set when the run stopped before executing experiments.
    pub error: Option<String>,
}

impl RunOutcome {
    fn early(code: i32, err: impl ToString) -> Self {
        Self {
            exit_code: code,
            out_dir: None,
            manifest: None,
            error: Some(err.to_string()),
        }
    }
}

/// Run a config given as a file path or a bundled config name.
pub fn run_path(config: &str, opts: &RunOptions) -> RunOutcome {
    let path = Path::new(config);
    let text = if path.exists() {
        match fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => return RunOutcome::early(EXIT_CONFIG, format!("cannot read {config}: {e}")),
        }
    } else if let Some(t) = config::bundled(config) {
        t.to_string()
    } else {
        let names: Vec<&str> = config::BUNDLED.iter().map(|b| b.0).collect();
        let hint = builtin::suggest(config, &names)
            .map(|s| format!(" (did you mean '{s}'?)"))
            .unwrap_or_default();
        return RunOutcome::early(
            EXIT_CONFIG,
            format!("no config file or bundled config named '{config}'{hint}"),
        );
    };
    run_config_text(&text, opts)
}

pub fn run_config_text(text: &str, opts: &RunOptions) -> RunOutcome {
    let mut cfg = match ExperimentConfig::from_toml(text) {
        Ok(c) => c,
        Err(e) => return RunOutcome::early(EXIT_CONFIG, e),
    };
    if let Some(s) = opts.seed {
        cfg.mc.seed0 = s;
    }
    let model = match cfg.build_model() {
        Ok(m) => m,
        Err(e) => return RunOutcome::early(EXIT_CONFIG, e),
    };
    let out_dir = opts
        .out_dir
        .clone()
        .or_else(|| cfg.outputs.directory.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("semimono-out").join(&cfg.name));
    if let Err(e) = fs::create_dir_all(&out_dir) {
        return RunOutcome::early(EXIT_RUNTIME, format!("cannot create {}: {e}", out_dir.display()));
    }
    let hash = hex::encode(Sha256::digest(text.as_bytes()));
    let work = || execute(&cfg, &model, &out_dir);
    let outcomes = match opts.threads {
        Some(k) => match rayon::ThreadPoolBuilder::new().num_threads(k.max(1)).build() {
            Ok(pool) => pool.install(work),
            Err(e) => return RunOutcome::early(EXIT_RUNTIME, e),
        },
        None => work(),
    };
    let exit_code = if outcomes.iter().any(|o| o.status == Status::Error) {
        EXIT_RUNTIME
    } else if outcomes.iter().any(|o| o.status == Status::Failed) {
        EXIT_VERDICT
    } else {
        EXIT_OK
    };
    let manifest = Manifest {
        name: cfg.name.clone(),
        library_version: env!("CARGO_PKG_VERSION").to_string(),
        config_sha256: hash,
        generator_id: GENERATOR_ID.to_string(),
        seed_range: [cfg.mc.seed0, cfg.mc.seed0 + cfg.mc.samples as u64 - 1],
        field_seed: cfg.field_seed(),
        experiments: outcomes,
        exit_code,
        generated_at_unix: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    };
    let written = serde_json::to_string_pretty(&manifest)
        .map_err(|e| e.to_string())
        .and_then(|json| fs::write(out_dir.join("manifest.json"), json + "\n").map_err(|e| e.to_string()));
    RunOutcome {
        exit_code: if written.is_ok() { exit_code } else { EXIT_RUNTIME },
        error: written.err(),
        out_dir: Some(out_dir),
        manifest: Some(manifest),
    }
}

/// Settled path for one seed, with its truncated model.
struct FieldPath {
    tm: TruncatedModel,
    noise: NoisePath,
    path: PathSolution,
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    model: &'a ModelSpec,
    family: CutoffFamily,
    dir: &'a Path,
    field: Option<FieldPath>,
    first: Option<FirstDerivField>,
    symmetry: Option<(f64, f64)>,
}

enum Verdict {
    Pass(String),
    Fail(String),
}

fn execute(cfg: &ExperimentConfig, model: &ModelSpec, dir: &Path) -> Vec<ExperimentOutcome> {
    let family = match CutoffFamily::for_model(model) {
        Ok(f) => f,
        Err(e) => {
            return vec![ExperimentOutcome {
                name: "setup".into(),
                status: Status::Error,
                message: e.to_string(),
                artifacts: Vec::new(),
            }]
        }
    };
    let mut ctx = Ctx {
        cfg,
        model,
        family,
        dir,
        field: None,
        first: None,
        symmetry: None,
    };
    let mut out = Vec::new();
    for &exp in &cfg.experiments {
        let mut artifacts = Vec::new();
        let result = match exp {
            Experiment::Hypothesis => ctx.hypothesis(&mut artifacts),
            Experiment::Cutoff => ctx.cutoff(&mut artifacts),
            Experiment::Simulate => ctx.simulate(&mut artifacts),
            Experiment::FirstField => ctx.first_field(&mut artifacts),
            Experiment::SecondField => ctx.second_field(&mut artifacts),
            Experiment::Oracles => ctx.oracles(&mut artifacts),
            Experiment::Moments => ctx.moments(&mut artifacts),
            Experiment::Convergence => ctx.convergence(&mut artifacts),
        };
        let (status, message) = match result {
            Ok(Verdict::Pass(m)) => (Status::Passed, m),
            Ok(Verdict::Fail(m)) => (Status::Failed, m),
            Err(e @ Error::TruncationNotSettled { .. }) => (Status::Failed, e.to_string()),
            Err(e) => (Status::Error, format!("{}: {e}", exp.name())),
        };
        out.push(ExperimentOutcome {
            name: exp.name().to_string(),
            status,
            message,
            artifacts,
        });
    }
    out
}

fn verdict(ok: bool, msg: String) -> Verdict {
    if ok {
        Verdict::Pass(msg)
    } else {
        Verdict::Fail(msg)
    }
}

impl Ctx<'_> {
    /// Open `<stem>.csv` if the config asks for it.
    fn csv(&self, stem: &str, artifacts: &mut Vec<String>) -> Result<Option<BufWriter<File>>> {
        if !self.cfg.wants_file(stem) {
            return Ok(None);
        }
        let name = format!("{stem}.csv");
        let f = File::create(self.dir.join(&name))?;
        artifacts.push(name);
        Ok(Some(BufWriter::new(f)))
    }

    fn hypothesis(&mut self, artifacts: &mut Vec<String>) -> Result<Verdict> {
        let h = &self.cfg.hypothesis;
        let m = self.model;
        let checks: Vec<(&str, HypothesisReport)> = vec![
            ("semi_monotone", model::check_semi_monotone(m, h.radius, h.samples, h.seed)?),
            ("dissipativity", model::check_dissipativity(m, h.radius, h.samples, h.seed + 1)?),
            ("lipschitz", model::check_lipschitz(m, h.radius, h.samples, h.seed + 2)?),
            ("growth", model::check_growth(m, h.radius, h.samples, h.seed + 3)?),
            ("derivatives", model::check_derivatives(m, h.radius.min(5.0), h.samples.min(100), h.seed + 4)?),
        ];
        if let Some(out) = self.csv("hypothesis", artifacts)? {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(["check", "passed", "property", "witness", "measured"])?;
            for (name, rep) in &checks {
                if rep.violations.is_empty() {
                    w.write_record([name, "true", "", "", ""])?;
                }
                for v in &rep.violations {
                    w.write_record([
                        name.to_string(),
                        "false".to_string(),
                        v.property.clone(),
                        format!("{:?}", v.witness),
                        v.measured.to_string(),
                    ])?;
                }
            }
            w.flush()?;
        }
        let failed: Vec<&str> = checks.iter().filter(|c| !c.1.passed).map(|c| c.0).collect();
        Ok(verdict(
            failed.is_empty(),
            if failed.is_empty() {
                format!("all checks passed within radius {}", h.radius)
            } else {
                format!("failed: {}", failed.join(", "))
            },
        ))
    }

    fn cutoff(&mut self, artifacts: &mut Vec<String>) -> Result<Verdict> {
        let c = &self.cfg.cutoff;
        let fam = self.family;
        let lo = *c.levels.iter().min().expect("validated");
        let hi = *c.levels.iter().max().expect("validated");
        let cert = certify_uniform_bounds(&fam, self.model, &c.orders, lo..=hi, c.samples, c.seed)?;
        let mut exact = true;
        for &n in &c.levels {
            let big_r = fam.radius(n);
            let profile: Vec<_> = (0..c.profile_points)
                .map(|i| fam.profile(n, 2.5 * big_r * i as f64 / (c.profile_points - 1) as f64))
                .collect();
            for p in &profile {
                if (p.radius <= big_r && p.value != 1.0) || (p.radius >= 2.0 * big_r && p.value != 0.0) {
                    exact = false;
                }
            }
            if let Some(out) = self.csv(&format!("cutoff_n{n}"), artifacts)? {
                let mut w = csv::Writer::from_writer(out);
                w.write_record(["radius", "value", "d1", "d2"])?;
                for p in profile {
                    w.write_record([p.radius, p.value, p.d1, p.d2].map(|v| v.to_string()))?;
                }
                w.flush()?;
            }
        }
        if let Some(out) = self.csv("cutoff_cert", artifacts)? {
            let mut w = csv::Writer::from_writer(out);
            w.write_record([
                "order",
                "n",
                "sup_derivative",
                "scaled_derivative",
                "sup_product",
                "derivative_bound",
                "product_bound",
            ])?;
            for r in &cert.rows {
                w.write_record([
                    r.order.to_string(),
                    r.n.to_string(),
                    r.sup_derivative.to_string(),
                    r.scaled_derivative.to_string(),
                    r.sup_product.to_string(),
                    r.derivative_bound.to_string(),
                    r.product_bound.to_string(),
                ])?;
            }
            w.flush()?;
        }
        let names: Vec<&str> = cert.report.violations.iter().map(|v| v.property.as_str()).collect();
        Ok(verdict(
            cert.report.passed && exact,
            if cert.report.passed && exact {
                format!("certified orders {:?} for n = {lo}..{hi}", c.orders)
            } else if !exact {
                "cutoff identity/support property violated".to_string()
            } else {
                format!("bound exceeded: {}", names.join(", "))
            },
        ))
    }

    fn settled(&self, seed: u64) -> Result<FieldPath> {
        let t = &self.cfg.truncation;
        let noise = sample_noise(self.cfg.grid(), self.model.dim, seed);
        let (path, tm) = paths::settle(self.model, &self.family, &noise, t.n_start, t.n_max)?;
        Ok(FieldPath { tm, noise, path })
    }

    fn field(&mut self) -> Result<&FieldPath> {
        if self.field.is_none() {
            self.field = Some(self.settled(self.cfg.field_seed())?);
        }
        Ok(self.field.as_ref().expect("set above"))
    }

    fn first(&mut self) -> Result<()> {
        if self.first.is_none() {
            let f = self.field()?;
            let first = malliavin::propagate_first(&f.tm, &f.path, &f.noise)?;
            self.first = Some(first);
        }
        Ok(())
    }

    fn simulate(&mut self, artifacts: &mut Vec<String>) -> Result<Verdict> {
        self.field()?;
        if let Some(out) = self.csv("path", artifacts)? {
            paths::write_path_csv(&self.field.as_ref().expect("set").path, out)?;
        }
        if let Some(out) = self.csv("noise", artifacts)? {
            paths::write_noise_csv(&self.field.as_ref().expect("set").noise, out)?;
        }
        let f = self.field.as_ref().expect("set");
        Ok(Verdict::Pass(format!(
            "seed {} settled at level {} (path sup {})",
            self.cfg.field_seed(),
            f.tm.n,
            f.path.sup_norm()
        )))
    }

    fn first_field(&mut self, artifacts: &mut Vec<String>) -> Result<Verdict> {
        self.first()?;
        let stride = self.cfg.malliavin.pair_stride;
        let first = self.first.as_ref().expect("set");
        let f = self.field.as_ref().expect("set");
        let n = first.grid.n_steps;
        // D_r X_r = sigma(X_r) exactly
        let init_ok = (0..=n).all(|r| first.get(r, r) == Some(f.tm.base.sigma(f.path.state(r)).as_slice()));
        if let Some(out) = self.csv("first_field", artifacts)? {
            malliavin::write_first_csv(first, stride, out)?;
        }
        if let Some(out) = self.csv("hnorm", artifacts)? {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(["t", "hnorm_sq"])?;
            let mut ks: Vec<usize> = (0..=n).step_by(stride).collect();
            if ks.last() != Some(&n) {
                ks.push(n);
            }
            for k in ks {
                w.write_record([first.grid.t(k).to_string(), malliavin::hnorm_sq(first, k).to_string()])?;
            }
            w.flush()?;
        }
        Ok(verdict(
            init_ok,
            format!("||DX_T||_H^2 = {}", malliavin::hnorm_sq(first, n)),
        ))
    }

    fn second_outputs(&self) -> (Vec<usize>, Vec<(usize, usize)>) {
        let grid = self.cfg.grid();
        let mut times: Vec<usize> = self.cfg.malliavin.output_times.iter().map(|&t| grid.index_of(t)).collect();
        if times.is_empty() {
            times.push(grid.n_steps);
        }
        times.sort_unstable();
        times.dedup();
        (times, malliavin::pair_grid(grid.n_steps, self.cfg.malliavin.pair_stride))
    }

    fn second_field(&mut self, artifacts: &mut Vec<String>) -> Result<Verdict> {
        self.first()?;
        let (times, pairs) = self.second_outputs();
        let f = self.field.as_ref().expect("set");
        let first = self.first.as_ref().expect("set");
        let second = malliavin::propagate_second(&f.tm, &f.path, &f.noise, first, &times, &pairs)?;
        if let Some(out) = self.csv("second_field", artifacts)? {
            malliavin::write_second_csv(&second, out)?;
        }
        let gap = second.symmetry_gap();
        let scale = second.max_abs().max(1.0);
        self.symmetry = Some((gap, scale));
        Ok(verdict(
            gap <= SYMMETRY_TOL * scale,
            format!("{} pairs, symmetry gap {gap}", pairs.len()),
        ))
    }

    fn oracles(&mut self, artifacts: &mut Vec<String>) -> Result<Verdict> {
        let m = &self.cfg.malliavin;
        let dir = m
            .direction
            .as_ref()
            .map(|d| d.to_direction())
            .unwrap_or_else(|| CMDirection::Constant(vec![1.0; self.model.dim]));
        let seed0 = self.cfg.field_seed();
        let mut errs = Vec::with_capacity(m.cm_seeds);
        for s in 0..m.cm_seeds as u64 {
            let fp = self.settled(seed0 + s)?;
            errs.push(malliavin::cameron_martin_check(&fp.tm, &fp.noise, &dir, m.epsilon)?.rel_err);
        }
        let mut sorted = errs.clone();
        sorted.sort_by(f64::total_cmp);
        let mid = sorted.len() / 2;
        let median = if sorted.len() % 2 == 1 {
            sorted[mid]
        } else {
            0.5 * (sorted[mid - 1] + sorted[mid])
        };
        self.first()?;
        let f = self.field.as_ref().expect("set");
        let first = self.first.as_ref().expect("set");
        let flow = malliavin::flow_factorization_check(&f.tm, &f.path, &f.noise, first, m.flow_stride)?;
        if let Some(out) = self.csv("oracles", artifacts)? {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(["check", "quantity", "value"])?;
            for (s, e) in errs.iter().enumerate() {
                w.write_record(["cameron_martin".to_string(), format!("rel_err_seed_{}", seed0 + s as u64), e.to_string()])?;
            }
            w.write_record(["cameron_martin", "median_rel_err", &median.to_string()])?;
            w.write_record(["flow_factorization", "max_gap", &flow.max_gap.to_string()])?;
            w.write_record(["flow_factorization", "pairs_checked", &flow.pairs_checked.to_string()])?;
            w.write_record(["flow_factorization", "ill_conditioned", &flow.ill_conditioned.len().to_string()])?;
            if let Some((gap, scale)) = self.symmetry {
                w.write_record(["second_order_symmetry", "max_gap", &gap.to_string()])?;
                w.write_record(["second_order_symmetry", "max_abs_entry", &scale.to_string()])?;
            }
            w.flush()?;
        }
        Ok(verdict(
            median <= CM_TOL && flow.max_gap <= FLOW_TOL,
            format!("median CM rel_err {median}, flow gap {}", flow.max_gap),
        ))
    }

    fn moments(&mut self, artifacts: &mut Vec<String>) -> Result<Verdict> {
        let cfg = self.cfg;
        let grid = cfg.mc_grid();
        let mut centered = Vec::new();
        let mut plain = Vec::new();
        let mut hnorm = Vec::new();
        let mut failures = Vec::new();
        for &p in &cfg.mc.p {
            let opts = UniformBoundOptions {
                form: if p == 2.0 { BoundForm::Centered } else { BoundForm::Uncentered },
                ..Default::default()
            };
            let rep = estimators::uniform_bound_report(
                self.model,
                &self.family,
                &cfg.truncation.levels,
                grid,
                p,
                cfg.mc.samples,
                cfg.mc.seed0,
                &opts,
            )?;
            if !rep.verdict {
                failures.push(match &rep.first_violation {
                    Some(v) => format!("p = {p}: bound exceeded at n = {}, t = {}", v.level, v.t),
                    None => format!("p = {p}: across-level sup did not stabilise"),
                });
            }
            let (c, u) = match rep.form {
                BoundForm::Centered => (rep.bounded, rep.companion),
                BoundForm::Uncentered => (rep.companion, rep.bounded),
            };
            centered.extend(c);
            plain.extend(u);
            hnorm.extend(rep.hnorm);
        }
        for (stem, reps) in [("moments", &centered), ("moments_uncentered", &plain), ("hnorm_moments", &hnorm)] {
            if let Some(out) = self.csv(stem, artifacts)? {
                estimators::write_moments_csv(reps, out)?;
            }
        }
        if let Some(out) = self.csv("bounds", artifacts)? {
            estimators::write_bounds_csv(&estimators::bound_table(self.model, grid)?, out)?;
        }
        Ok(verdict(
            failures.is_empty(),
            if failures.is_empty() {
                format!("bounded and stable over levels {:?}", cfg.truncation.levels)
            } else {
                failures.join("; ")
            },
        ))
    }

    fn convergence(&mut self, artifacts: &mut Vec<String>) -> Result<Verdict> {
        let cfg = self.cfg;
        let mut reports = Vec::new();
        for &p in &cfg.mc.p {
            reports.push(estimators::convergence_report(
                self.model,
                &self.family,
                &cfg.truncation.levels,
                cfg.truncation.reference_level,
                cfg.mc_grid(),
                p,
                cfg.mc.samples,
                cfg.mc.seed0,
            )?);
        }
        if let Some(out) = self.csv("convergence", artifacts)? {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(["n", "p", "gap", "stderr", "settled_fraction"])?;
            for rep in &reports {
                for (i, n) in rep.levels.iter().enumerate() {
                    w.write_record([
                        n.to_string(),
                        rep.p.to_string(),
                        rep.gaps[i].to_string(),
                        rep.stderrs[i].to_string(),
                        rep.settled_fraction[i].to_string(),
                    ])?;
                }
            }
            w.flush()?;
        }
        let bad: usize = reports.iter().map(|r| r.nonzero_settled_gaps).sum();
        Ok(verdict(
            bad == 0,
            format!("{bad} settled (seed, level) pairs with a nonzero coupled gap"),
        ))
    }
}

/// Bundled configs and experiment kinds, one per line.
pub fn list_experiments() -> String {
    let mut s = String::from("bundled configs:\n");
    for (name, desc, _) in config::BUNDLED {
        s.push_str(&format!("  {name:<12} {desc}\n"));
    }
    s.push_str("experiment kinds:\n");
    for e in Experiment::ALL {
        s.push_str(&format!("  {:<12} {}\n", e.name(), e.summary()));
    }
    s
}

/// Coefficients and derived constants of a built-in model at its default parameters.
pub fn describe(name: &str) -> Result<String> {
    let summary = builtin::coefficient_summary(name).ok_or_else(|| {
        let hint = builtin::suggest(name, &builtin::BUILTIN_NAMES)
            .map(|s| format!(" (did you mean '{s}'?)"))
            .unwrap_or_default();
        Error::Config(format!("unknown model '{name}'{hint}"))
    })?;
    let m = builtin::from_params(name, &Default::default(), None)?;
    let g = model::growth_constants(&m)?;
    let g2 = model::moment_generator_constants(&m, 2.0)?;
    let c = model::centered_moment_constants(&m)?;
    let growth: Vec<String> = m
        .growth
        .iter()
        .map(|g| format!("order {}: gamma = {}, q = {}", g.order, g.gamma, g.q))
        .collect();
    Ok(format!(
        "{}\n  {summary}\n  dim = {}, x0 = {:?}\n  K = {}, k1 = {}, xi = {}\n  alpha = {}, beta = {}\n  \
         alpha_2 = {}, beta_2 = {}\n  centered: alpha = {}, beta = {}\n  growth: {}\n",
        m.name,
        m.dim,
        m.x0,
        m.monotone_k,
        m.lipschitz_k1,
        m.xi,
        g.alpha,
        g.beta,
        g2.alpha_p,
        g2.beta_p,
        c.alpha_p,
        c.beta_p,
        growth.join("; ")
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn describe_and_list() {
        let d = describe("OU").unwrap();
        assert!(d.contains("K = 1") && d.contains("alpha = 2") && d.contains("beta = 0"), "{d}");
        let err = describe("cubicc").unwrap_err().to_string();
        assert!(err.contains("did you mean 'cubic'"), "{err}");
        let l = list_experiments();
        for name in ["ou_smoke", "cubic_full", "cutoff_cert"] {
            assert!(l.contains(name));
        }
    }

    #[test]
    fn schema_errors_exit_2() {
        let out = run_config_text("schema_version = 1\nname = \"x\"", &RunOptions::default());
        assert_eq!(out.exit_code, EXIT_CONFIG);
        let out = run_path("no_such_config", &RunOptions::default());
        assert_eq!(out.exit_code, EXIT_CONFIG);
    }
}
