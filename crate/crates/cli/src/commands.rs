use std::fmt;
use std::path::Path;

use conflap::optimizer::{continuation, Classification, ContinuationOptions, ExtremalReport, IterationRecord, StageRecord};
use conflap::oracle::{
    key_inequality_check, maximality_sample_test, random_factor, smooth_field, theta_sweep, trial_rng, MaximalitySettings,
    ProductExample, SweepCase,
};
use conflap::speclib::{first_eigen_sign, generalized_spectrum, SolverKind};
use conflap::variation::{continuity_sandwich_check, default_t_list, fd_derivative_check};
use conflap::ConformalFactor;
use serde::Serialize;

use crate::config::{build, Built, InitialFactor, ManifoldConfig, RunConfig};
use crate::report::{write_csv, write_json, Checked};

#[derive(Debug)]
pub enum Failure {
    Config(String),
    Solver(conflap::Error),
    Io(std::io::Error),
    Diverged(String),
    Verify(Vec<String>),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::Config(_) => 2,
            Failure::Solver(_) => 3,
            Failure::Diverged(_) => 4,
            Failure::Verify(_) => 5,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "{m}"),
            Failure::Solver(e) => write!(f, "{e}"),
            Failure::Io(e) => write!(f, "writing output: {e}"),
            Failure::Diverged(m) => write!(f, "unresolved: {m}"),
            Failure::Verify(s) => write!(f, "verification failed in: {}", s.join(", ")),
        }
    }
}

impl From<conflap::Error> for Failure {
    fn from(e: conflap::Error) -> Self {
        match e {
            conflap::Error::ClusterTooLarge { .. } | conflap::Error::MeshParse { .. } => Failure::Config(e.to_string()),
            e => Failure::Solver(e),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e)
    }
}

type Outcome = Result<(), Failure>;

fn initial_factor(cfg: &RunConfig, b: &Built) -> Result<ConformalFactor, Failure> {
    match cfg.run.initial {
        InitialFactor::Unit => Ok(b.unit_factor()?),
        InitialFactor::Random => {
            let angles = b.angles.as_ref().ok_or_else(|| Failure::Config("a random start needs a generated manifold".into()))?;
            let hi = cfg.run.initial_amplitude;
            Ok(random_factor(&b.manifold, angles, &mut trial_rng(cfg.run.seed, 0), 0.1 * hi, hi)?)
        }
    }
}

fn warn(warnings: &mut Vec<String>, msg: String) {
    eprintln!("warning: {msg}");
    warnings.push(msg);
}

#[derive(Serialize)]
struct Eigenpair {
    index: usize,
    value: f64,
    residual: Checked,
}

#[derive(Serialize)]
struct FirstEigenfunction {
    constant_sign: bool,
    simple: bool,
    gap: Checked,
}

#[derive(Serialize)]
struct SpectrumReport {
    command: &'static str,
    manifold: ManifoldConfig,
    nodes: usize,
    dim: usize,
    seed: u64,
    initial: InitialFactor,
    solver: SolverKind,
    eigenvalues: Vec<Eigenpair>,
    nu: usize,
    nu_at_least_two: Checked,
    cluster2: Vec<usize>,
    cluster_tol: f64,
    distance_to_kernel: Checked,
    first_eigenfunction: FirstEigenfunction,
    warnings: Vec<String>,
}

pub fn spectrum(cfg: &RunConfig, base: &Path) -> Outcome {
    let b = build(&cfg.manifold, base)?;
    let u = initial_factor(cfg, &b)?;
    let opts = &cfg.speclib;
    let s = generalized_spectrum(&b.manifold, &u, cfg.run.eigen_count, opts)?;
    let sign = first_eigen_sign(&b.manifold, &u, opts)?;
    let mut warnings = Vec::new();
    if s.nu <= 1 {
        warn(&mut warnings, format!("nu([g]) = {} <= 1: maximization problem degenerate", s.nu));
    }
    let near = s.eigenvalues.iter().map(|l| l.abs()).fold(f64::INFINITY, f64::min);
    if near <= opts.null_tol {
        warn(&mut warnings, format!("kernel warning: an eigenvalue lies within {near:.3e} of zero"));
    }
    if s.extension_singular {
        warn(&mut warnings, "dead-set extension singular; eigenvectors zero-filled off support".into());
    }
    let scale = s.lambda1().abs().max(s.lambda2().abs());
    let report = SpectrumReport {
        command: "spectrum",
        manifold: cfg.manifold.clone(),
        nodes: b.manifold.node_count(),
        dim: b.manifold.dim(),
        seed: cfg.run.seed,
        initial: cfg.run.initial,
        solver: s.solver,
        eigenvalues: s
            .eigenvalues
            .iter()
            .zip(&s.residuals)
            .enumerate()
            .map(|(index, (&value, &r))| Eigenpair { index, value, residual: Checked::at_most(r, opts.solver_tol) })
            .collect(),
        nu: s.nu,
        nu_at_least_two: Checked::at_least(s.nu as f64, 2.0),
        cluster2: s.cluster2.clone(),
        cluster_tol: opts.cluster_tol,
        distance_to_kernel: Checked::at_least(near, opts.null_tol),
        first_eigenfunction: FirstEigenfunction {
            constant_sign: sign.constant_sign,
            simple: sign.simple,
            gap: Checked::at_least(sign.gap, opts.cluster_tol * scale),
        },
        warnings,
    };
    write_json(&cfg.run.out, "spectrum.json", &report)?;
    let shown: Vec<String> = s.eigenvalues.iter().take(cfg.run.eigen_count).map(|l| format!("{l:.6}")).collect();
    println!("lambda = [{}], nu = {}, cluster2 = {:?}", shown.join(", "), s.nu, s.cluster2);
    Ok(())
}

#[derive(Serialize)]
struct StageRow {
    epsilon: f64,
    iterations: usize,
    converged: bool,
    stalled: bool,
    resumed: bool,
    lambda2: f64,
    f2: f64,
    objective: f64,
    gamma1: f64,
    gamma2: f64,
    residual_l2: f64,
    residual_sup: f64,
    fit_residual: f64,
    limit_residual: f64,
    k_effective: usize,
    sup_u: f64,
    inf_u: f64,
    lipschitz: f64,
    int_u_neg_eps: f64,
    eps_int_u_neg_eps_n: f64,
}

impl From<&StageRecord> for StageRow {
    fn from(s: &StageRecord) -> Self {
        Self {
            epsilon: s.epsilon,
            iterations: s.iterations,
            converged: s.converged,
            stalled: s.stalled,
            resumed: s.resumed,
            lambda2: s.lambda2,
            f2: s.f2,
            objective: s.objective,
            gamma1: s.gamma1,
            gamma2: s.gamma2,
            residual_l2: s.residual_l2,
            residual_sup: s.residual_sup,
            fit_residual: s.fit_residual,
            limit_residual: s.limit_residual,
            k_effective: s.k_effective,
            sup_u: s.sup_u,
            inf_u: s.inf_u,
            lipschitz: s.lipschitz,
            int_u_neg_eps: s.int_u_neg_eps,
            eps_int_u_neg_eps_n: s.eps_int_u_neg_eps_n,
        }
    }
}

#[derive(Serialize)]
struct StageChecks {
    epsilon: f64,
    euler_residual: Checked,
    gamma1: Checked,
}

#[derive(Serialize)]
struct OptimizeReport {
    command: &'static str,
    manifold: ManifoldConfig,
    seed: u64,
    initial: InitialFactor,
    classification: Classification,
    k: usize,
    reason: Option<String>,
    lambda2: f64,
    f2: f64,
    c: Vec<f64>,
    stages: Vec<StageChecks>,
    limit_gate: Option<Checked>,
    limit_residual: Option<Checked>,
    residual_slope: Option<Checked>,
    blowup: Vec<String>,
    nodal_sup_error: Option<Checked>,
    nodal_residual: Option<Checked>,
    nodal_sign_change: Option<bool>,
    sphere_error: Option<Checked>,
    harmonic_residual: Option<Checked>,
}

fn optimize_report(cfg: &RunConfig, r: &ExtremalReport) -> OptimizeReport {
    let p = &cfg.optimizer;
    let class_tol = 10.0 * p.eul_tol;
    let last = r.stages.last();
    OptimizeReport {
        command: "optimize",
        manifold: cfg.manifold.clone(),
        seed: cfg.run.seed,
        initial: cfg.run.initial,
        classification: r.classification,
        k: r.k,
        reason: r.reason.clone(),
        lambda2: r.lambda2,
        f2: r.f2,
        c: r.c.clone(),
        stages: r
            .stages
            .iter()
            .map(|s| StageChecks {
                epsilon: s.epsilon,
                euler_residual: Checked::at_most(s.residual_l2, p.eul_tol),
                gamma1: Checked::at_least(s.gamma1, 1.0),
            })
            .collect(),
        limit_gate: last.map(|s| Checked::at_most(s.limit_residual, p.limit_gate)),
        limit_residual: r.limit.as_ref().map(|s| Checked::at_most(s.residual_l2, p.eul_tol)),
        residual_slope: r.residual_slope.map(|s| Checked::at_least(s, 0.8 * r.beta_min)),
        blowup: r.blowup.clone(),
        nodal_sup_error: r.nodal.as_ref().map(|n| Checked::at_most(n.sup_error, class_tol)),
        nodal_residual: r.nodal.as_ref().map(|n| Checked::at_most(n.residual, class_tol)),
        nodal_sign_change: r.nodal.as_ref().map(|n| n.sign_change),
        sphere_error: r.harmonic.as_ref().map(|h| Checked::at_most(h.sphere_error, class_tol)),
        harmonic_residual: r.harmonic.as_ref().map(|h| Checked::at_most(h.residual, class_tol)),
    }
}

#[derive(Serialize)]
struct FactorRow {
    node: usize,
    u: f64,
}

pub fn optimize(cfg: &RunConfig, base: &Path, resume: bool) -> Outcome {
    let b = build(&cfg.manifold, base)?;
    let u0 = initial_factor(cfg, &b)?;
    let out = &cfg.run.out;
    let opts = ContinuationOptions { checkpoint_dir: Some(out.join("checkpoints")), resume };
    let r = continuation(&b.manifold, &u0, &cfg.optimizer, &cfg.speclib, &opts)?;
    write_json(out, "optimize.json", &optimize_report(cfg, &r))?;
    let history: &[IterationRecord] = &r.history;
    write_csv(out, "history.csv", history)?;
    write_csv(out, "stages.csv", &r.stages.iter().chain(&r.limit).map(StageRow::from).collect::<Vec<_>>())?;
    let rows: Vec<FactorRow> = r.u_final.values().iter().enumerate().map(|(node, &u)| FactorRow { node, u }).collect();
    write_csv(out, "u_final.csv", &rows)?;
    println!("classification {:?}, k = {}, lambda2 = {:.8}, F2 = {:.8}", r.classification, r.k, r.lambda2, r.f2);
    match r.classification {
        Classification::Unresolved => Err(Failure::Diverged(r.reason.unwrap_or_else(|| "no classification".into()))),
        _ => Ok(()),
    }
}

#[derive(Serialize)]
struct Section {
    name: &'static str,
    pass: bool,
    checks: Vec<(String, Checked)>,
}

impl Section {
    fn new(name: &'static str, checks: Vec<(String, Checked)>) -> Self {
        Self { name, pass: checks.iter().all(|c| c.1.pass), checks }
    }
}

#[derive(Serialize)]
struct VerifyReport {
    command: &'static str,
    manifold: ManifoldConfig,
    seed: u64,
    pass: bool,
    sections: Vec<Section>,
}

// Each section draws from its own block of RNG streams.
fn stream(section: u64, trial: u64) -> u64 {
    (section << 32) | trial
}

fn log_direction(ex: &ProductExample, rng: &mut impl rand::Rng) -> Vec<f64> {
    smooth_field(&ex.angles, rng, 1.0).iter().map(|v| v.ln()).collect()
}

fn fd_section(ex: &ProductExample, cfg: &RunConfig) -> Result<Section, Failure> {
    let m = &ex.manifold;
    let mut checks = Vec::new();
    for t in 0..cfg.oracle.fd_trials as u64 {
        let mut rng = trial_rng(cfg.run.seed, stream(1, t));
        let u = random_factor(m, &ex.angles, &mut rng, 0.05, 0.3)?;
        let h = log_direction(ex, &mut rng);
        // t must stay below the relative lambda_2 / lambda_3 gap for the first-order regime
        let s = generalized_spectrum(m, &u, 3, &cfg.speclib)?;
        let gap = (s.eigenvalues[2] - s.eigenvalues[1]) / s.eigenvalues[1].abs();
        let ts: Vec<f64> = default_t_list().iter().map(|x| x * gap.min(1.0)).collect();
        let r = fd_derivative_check(m, &u, &h, &ts, &cfg.speclib)?;
        checks.push((format!("trial {t} order"), Checked::at_least(r.order.unwrap_or(f64::INFINITY), cfg.oracle.fd_min_order)));
        checks.push((format!("trial {t} right - left"), Checked::at_most(r.right - r.left, 0.0)));
    }
    Ok(Section::new("fd_derivative", checks))
}

fn sandwich_section(ex: &ProductExample, cfg: &RunConfig) -> Result<Section, Failure> {
    let mut checks = Vec::new();
    for t in 0..cfg.oracle.sandwich_trials as u64 {
        let mut rng = trial_rng(cfg.run.seed, stream(2, t));
        let u = random_factor(&ex.manifold, &ex.angles, &mut rng, 0.05, 0.5)?;
        let h = log_direction(ex, &mut rng);
        let r = continuity_sandwich_check(&ex.manifold, &u, &h, &[0.2, 0.1, 0.05], &cfg.speclib)?;
        let violations = r.samples.iter().filter(|s| !s.holds).count();
        checks.push((format!("trial {t} violations"), Checked::at_most(violations as f64, 0.0)));
    }
    Ok(Section::new("sandwich", checks))
}

fn maximality_section(ex: &ProductExample, cfg: &RunConfig) -> Result<Section, Failure> {
    let o = &cfg.oracle;
    let settings = MaximalitySettings {
        trials: o.trials,
        seed: cfg.run.seed,
        tol: o.tol,
        amplitude: (o.amplitude[0], o.amplitude[1]),
        nearest: o.nearest,
        cv_bound: o.cv_bound,
    };
    let r = maximality_sample_test(ex, &settings, &cfg.speclib)?;
    let max_excess = r.samples.iter().map(|s| -s.gap).fold(f64::NEG_INFINITY, f64::max);
    let worst_cv = r.nearest.iter().map(|s| s.cv).fold(0.0, f64::max);
    let checks = vec![
        ("max F2(u) - F2(1)".to_string(), Checked::at_most(max_excess, o.tol)),
        ("violations".to_string(), Checked::at_most(r.violations.len() as f64, 0.0)),
        ("nearest samples cv".to_string(), Checked::at_most(worst_cv, o.cv_bound)),
        ("F2 scale invariance".to_string(), Checked::at_most(r.constant_deviation, o.tol)),
    ];
    Ok(Section::new("maximality", checks))
}

fn key_sections(ex: &ProductExample, cfg: &RunConfig) -> Result<[Section; 2], Failure> {
    let o = &cfg.oracle;
    let (mut key, mut sweep) = (Vec::new(), Vec::new());
    for t in 0..o.key_trials as u64 {
        let mut rng = trial_rng(cfg.run.seed, stream(3, t));
        let u = random_factor(&ex.manifold, &ex.angles, &mut rng, 1e-3, 0.5)?;
        let k = key_inequality_check(ex, &u, &cfg.speclib, o.key_tol)?;
        key.push((format!("trial {t} margin"), Checked::at_least(k.margin, -o.key_tol * k.terms.lambda2.abs())));
        let s = theta_sweep(ex, &u, &cfg.speclib, o.sweep_samples, o.key_tol)?;
        match s.case {
            SweepCase::Interior { .. } => {
                sweep.push((format!("trial {t} closed form vs sweep"), Checked::at_most(s.closed_form_error, 1e-8)));
            }
            SweepCase::Boundary { residual, .. } => {
                sweep.push((format!("trial {t} distance of psi_1 from E1 + E2"), Checked::at_most(residual, o.key_tol.sqrt())));
            }
        }
        sweep.push((format!("trial {t} sweep max - lambda2"), Checked::at_least(s.sweep_max - k.terms.lambda2, -o.key_tol)));
    }
    Ok([Section::new("key_inequality", key), Section::new("theta_sweep", sweep)])
}

pub fn verify(cfg: &RunConfig) -> Outcome {
    let ManifoldConfig::Product { circle_nodes, h_nodes, potential } = cfg.manifold else {
        return Err(Failure::Config("verify runs on the product manifold only".into()));
    };
    let ex = ProductExample::with_potential(circle_nodes, h_nodes, potential)?;
    let mut sections = vec![fd_section(&ex, cfg)?, sandwich_section(&ex, cfg)?, maximality_section(&ex, cfg)?];
    sections.extend(key_sections(&ex, cfg)?);
    let failed: Vec<String> = sections.iter().filter(|s| !s.pass).map(|s| s.name.to_string()).collect();
    for s in &sections {
        println!("{:<16} {}", s.name, if s.pass { "pass" } else { "FAIL" });
    }
    let report = VerifyReport { command: "verify", manifold: cfg.manifold.clone(), seed: cfg.run.seed, pass: failed.is_empty(), sections };
    write_json(&cfg.run.out, "verify.json", &report)?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Verify(failed))
    }
}

/// Counts checked values in a report and collects the paths of failed ones.
fn scan(v: &serde_json::Value, path: &str, total: &mut usize, failed: &mut Vec<String>) {
    match v {
        serde_json::Value::Object(map) if map.contains_key("relation") && map.contains_key("pass") => {
            *total += 1;
            if map["pass"] != serde_json::Value::Bool(true) {
                failed.push(format!("{path} = {} (bound {} {})", map["value"], map["relation"], map["tolerance"]));
            }
        }
        serde_json::Value::Object(map) => {
            for (k, x) in map {
                scan(x, &format!("{path}.{k}"), total, failed);
            }
        }
        serde_json::Value::Array(items) => {
            // verify sections store (label, check) pairs
            if let [serde_json::Value::String(label), check] = items.as_slice() {
                return scan(check, &format!("{path}[{label}]"), total, failed);
            }
            for (i, x) in items.iter().enumerate() {
                scan(x, &format!("{path}[{i}]"), total, failed);
            }
        }
        _ => {}
    }
}

pub fn report(cfg: &RunConfig) -> Outcome {
    let mut found = 0;
    for name in ["spectrum.json", "optimize.json", "verify.json"] {
        let path = cfg.run.out.join(name);
        let Ok(text) = std::fs::read_to_string(&path) else { continue };
        found += 1;
        let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
        let (mut total, mut failed) = (0, Vec::new());
        scan(&v, "", &mut total, &mut failed);
        println!("{name}: {total} checks, {} failed", failed.len());
        for f in failed {
            println!("  {f}");
        }
        if let Some(c) = v.get("classification") {
            println!("  classification {c}, k = {}", v["k"]);
        }
        if let Some(w) = v.get("warnings").and_then(|w| w.as_array()) {
            for x in w {
                println!("  warning: {}", x.as_str().unwrap_or_default());
            }
        }
    }
    if found == 0 {
        return Err(Failure::Config(format!("no reports found in {}", cfg.run.out.display())));
    }
    Ok(())
}
