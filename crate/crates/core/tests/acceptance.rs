//! Acceptance criteria. Prints one line per criterion and exits nonzero if
//! any of them fails.

use std::process::ExitCode;
use std::time::Instant;

use conflap::optimizer::{continuation, f2, Classification, ContinuationOptions, ExtremalReport, OptimizerParams};
use conflap::oracle::{
    dense_reference_solve, key_inequality_check, maximality_sample_test, nodal_instance, random_factor, smooth_field,
    theta_sweep, trial_rng, MaximalitySettings, ProductExample, SweepCase,
};
use conflap::speclib::{generalized_spectrum, lambda2_orthogonal, negative_count};
use conflap::variation::{default_t_list, fd_derivative_check, one_sided_derivatives};
use conflap::{ConformalFactor, DiscreteManifold, SolverOptions};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn opts() -> SolverOptions {
    SolverOptions::default()
}

fn product_spectrum() -> Outcome {
    let t = Instant::now();
    let ex = ProductExample::new(256, 128).unwrap();
    let s = generalized_spectrum(&ex.manifold, &ex.unit_factor(), 3, &opts()).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let l = &s.eigenvalues;
    let exact = ex.analytic();
    let oracle_dev = (0..4).map(|i| (l[i] - exact.merged[i]).abs()).fold(0.0, f64::max);
    let pass = (l[0] + 2.0).abs() <= 1e-3
        && (l[1] + 1.0).abs() <= 1e-2
        && (l[2] + 1.0).abs() <= 1e-2
        && s.cluster2 == vec![1, 2]
        && s.nu == 3
        && oracle_dev <= 1e-7
        && secs < 30.0;
    outcome(
        pass,
        format!(
            "lambda = [{:.6}, {:.6}, {:.6}], cluster {:?}, nu {}, |solver - closed form| {oracle_dev:.1e}, {secs:.1} s",
            l[0], l[1], l[2], s.cluster2, s.nu
        ),
    )
}

fn maximality() -> Outcome {
    let t = Instant::now();
    let ex = ProductExample::new(32, 16).unwrap();
    let r = maximality_sample_test(&ex, &MaximalitySettings::default(), &opts()).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let worst = r.samples.iter().map(|s| -s.gap).fold(f64::NEG_INFINITY, f64::max);
    let cv = r.nearest.iter().map(|s| s.cv).fold(0.0, f64::max);
    outcome(
        r.pass && secs < 600.0,
        format!(
            "{} trials, {} violations, max F2(u) - F2(1) = {worst:.2e}, nearest-5 max cv {cv:.1e}, {secs:.1} s",
            r.samples.len(),
            r.violations.len()
        ),
    )
}

fn derivatives() -> Outcome {
    let ex = ProductExample::new(32, 16).unwrap();
    let m = &ex.manifold;
    let t_list = default_t_list();
    let mut worst_order = f64::INFINITY;
    let mut worst_c = 0.0f64;
    let mut ok = true;
    for trial in 0..5 {
        let mut rng = trial_rng(3, trial);
        let u = random_factor(m, &ex.angles, &mut rng, 0.05, 0.3).unwrap();
        let h: Vec<f64> = smooth_field(&ex.angles, &mut rng, 1.0).iter().map(|v| v.ln()).collect();
        // keep t inside the window where lambda_3 stays away from lambda_2
        let s = generalized_spectrum(m, &u, 3, &opts()).unwrap();
        let gap = (s.eigenvalues[2] - s.eigenvalues[1]) / s.eigenvalues[1].abs();
        let ts: Vec<f64> = t_list.iter().map(|t| t * gap.min(1.0)).collect();
        let r = fd_derivative_check(m, &u, &h, &ts, &opts()).unwrap();
        let order = r.order.unwrap_or(f64::INFINITY);
        worst_order = worst_order.min(order);
        worst_c = worst_c.max(r.constant);
        ok &= order >= 0.9;
    }
    // u = 1 sits on the double eigenvalue; h = cos(2 theta) splits it
    let u = ex.unit_factor();
    let h: Vec<f64> = ex.angles.iter().map(|a| (2.0 * a[0]).cos()).collect();
    let pair = one_sided_derivatives(m, &u, &h, &opts()).unwrap();
    let split = pair.left - pair.right;
    let fd = fd_derivative_check(m, &u, &h, &t_list, &opts()).unwrap();
    ok &= split > 1e-4 && fd.order.is_none_or(|p| p >= 0.9);
    outcome(
        ok,
        format!(
            "min fitted order {worst_order:.3}, max C {worst_c:.3e}; cluster split right {:.4} < left {:.4}, fd order {:?}",
            pair.right, pair.left, fd.order
        ),
    )
}

fn inertia() -> Outcome {
    let ex = ProductExample::new(32, 16).unwrap();
    let base = negative_count(&ex.manifold, &ex.unit_factor(), &opts()).unwrap();
    let counts: Vec<usize> = (0..20)
        .map(|trial| {
            let u = random_factor(&ex.manifold, &ex.angles, &mut trial_rng(4, trial), 0.01, 1.5).unwrap();
            negative_count(&ex.manifold, &u, &opts()).unwrap()
        })
        .collect();
    outcome(counts.iter().all(|&c| c == base), format!("negative count {base} on u = 1, counts {counts:?}"))
}

fn scaling() -> Outcome {
    let ex = ProductExample::new(32, 16).unwrap();
    let mut worst = 0.0f64;
    for trial in 0..10 {
        let u = random_factor(&ex.manifold, &ex.angles, &mut trial_rng(5, trial), 1e-3, 0.5).unwrap();
        let base = f2(&ex.manifold, &u, &opts()).unwrap();
        for s in [0.1, 3.0, 10.0] {
            let v = f2(&ex.manifold, &u.scaled(s), &opts()).unwrap();
            worst = worst.max(((v - base) / base).abs());
        }
    }
    outcome(worst <= 1e-10, format!("max relative change {worst:.2e}"))
}

fn product_runs() -> Vec<ExtremalReport> {
    let ex = ProductExample::new(32, 16).unwrap();
    let params = OptimizerParams::default();
    (0..10)
        .map(|seed| {
            let v = smooth_field(&ex.angles, &mut trial_rng(6, seed), 0.3);
            let u0 = ConformalFactor::new(&ex.manifold, v).unwrap();
            continuation(&ex.manifold, &u0, &params, &opts(), &ContinuationOptions::default()).unwrap()
        })
        .collect()
}

fn continuation_product(runs: &[ExtremalReport], secs: f64) -> Outcome {
    let mut ok = secs < 1200.0;
    let (mut dist, mut res, mut sphere, mut harm, mut slope_margin) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, f64::INFINITY);
    let mut ks = Vec::new();
    for r in runs {
        let u = r.u_final.values();
        let mean = u.iter().sum::<f64>() / u.len() as f64;
        dist = dist.max(u.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max) / mean);
        res = res.max(r.limit.as_ref().map_or(f64::INFINITY, |s| s.residual_l2));
        let h = r.harmonic.as_ref();
        sphere = sphere.max(h.map_or(f64::INFINITY, |h| h.sphere_error));
        harm = harm.max(h.map_or(f64::INFINITY, |h| h.residual));
        slope_margin = slope_margin.min(r.residual_slope.unwrap_or(f64::NEG_INFINITY) - 0.8 * r.beta_min);
        ks.push(r.k);
        ok &= r.classification == Classification::HarmonicMap;
    }
    ok &= dist <= 1e-2 && res <= 1e-4 && ks.iter().all(|&k| k == 2) && sphere <= 1e-3 && harm <= 1e-2 && slope_margin >= 0.0;
    outcome(
        ok,
        format!(
            "sup |u - mean|/mean {dist:.1e}, residual {res:.1e}, k {ks:?}, sphere {sphere:.1e}, harmonic {harm:.1e}, slope - 0.8 beta {slope_margin:.3}, {secs:.0} s"
        ),
    )
}

fn nodal_run() -> (Outcome, Option<ExtremalReport>) {
    let inst = nodal_instance(512).unwrap();
    let u0 = ConformalFactor::constant(&inst.manifold, 1.0).unwrap();
    let nu = match negative_count(&inst.manifold, &u0, &opts()) {
        Ok(n) => n,
        Err(e) => return (outcome(false, format!("instance check failed: {e}")), None),
    };
    let r = continuation(&inst.manifold, &u0, &OptimizerParams::default(), &opts(), &ContinuationOptions::default()).unwrap();
    let Some(n) = &r.nodal else {
        return (outcome(false, format!("nu {nu}, classification {:?}, k {}", r.classification, r.k)), Some(r));
    };
    let pass = nu == 2
        && r.classification == Classification::Nodal
        && r.k == 1
        && n.sup_error <= 1e-3
        && n.sign_change
        && n.max_node_positive
        && n.min_node_negative
        && n.residual <= 1e-4;
    let d = format!(
        "nu {nu}, {:?}, k {}, sup |u - |phi|| / sup u {:.1e}, sign change {}, nodal residual {:.1e}",
        r.classification, r.k, n.sup_error, n.sign_change, n.residual
    );
    (outcome(pass, d), Some(r))
}

fn diagnostics(reports: &[&ExtremalReport]) -> Outcome {
    let mut ok = !reports.is_empty();
    let (mut gamma_ratio, mut neg_ratio, mut int2_ratio) = (0.0f64, 0.0f64, 0.0f64);
    for r in reports {
        let first = &r.stages[0];
        let c0 = (first.gamma1 - 1.0) / first.epsilon;
        for s in &r.stages {
            gamma_ratio = gamma_ratio.max((s.gamma1 - 1.0) / (5.0 * s.epsilon * c0));
            neg_ratio = neg_ratio.max(s.int_u_neg_eps / first.int_u_neg_eps);
            int2_ratio = int2_ratio.max(s.eps_int_u_neg_eps_n / first.eps_int_u_neg_eps_n);
            ok &= s.gamma1 >= 1.0;
        }
    }
    ok &= gamma_ratio <= 1.0 && neg_ratio <= 10.0 && int2_ratio <= 10.0;
    outcome(
        ok,
        format!(
            "max (gamma1 - 1)/(5 eps C0) {gamma_ratio:.3}, max int u^-eps ratio {neg_ratio:.4}, max eps int u^(-eps-N) ratio {int2_ratio:.3}"
        ),
    )
}

fn cross_solver() -> Outcome {
    let mut l2o = 0.0f64;
    let mut iter_dense = 0.0f64;
    let ex = ProductExample::new(24, 12).unwrap();
    let nodal = nodal_instance(256).unwrap();
    let mut instances: Vec<(DiscreteManifold, ConformalFactor)> = vec![
        (ex.manifold.clone(), random_factor(&ex.manifold, &ex.angles, &mut trial_rng(9, 99), 0.05, 0.5).unwrap()),
        (nodal.manifold.clone(), ConformalFactor::constant(&nodal.manifold, 1.0).unwrap()),
    ];
    for trial in 0..20 {
        let mut rng = trial_rng(9, trial);
        let (m, angles) = if trial % 2 == 0 { (&ex.manifold, &ex.angles) } else { (&nodal.manifold, &nodal.angles) };
        instances.push((m.clone(), random_factor(m, angles, &mut rng, 0.01, 0.8).unwrap()));
    }
    for (m, u) in &instances {
        let s = generalized_spectrum(m, u, 4, &opts()).unwrap();
        l2o = l2o.max((lambda2_orthogonal(m, u, &opts()).unwrap() - s.lambda2()).abs());
    }
    let forced = SolverOptions { force_iterative: true, ..opts() };
    for (m, u) in &instances[2..] {
        let it = generalized_spectrum(m, u, 4, &forced).unwrap();
        let reference = dense_reference_solve(m, u).unwrap();
        for (a, b) in it.eigenvalues.iter().zip(&reference.eigenvalues) {
            iter_dense = iter_dense.max((a - b).abs());
        }
    }
    outcome(
        l2o <= 1e-9 && iter_dense <= 1e-9,
        format!("lambda2 orthogonal vs spectrum {l2o:.1e}, iterative vs dense reference {iter_dense:.1e} (20 instances)"),
    )
}

fn key_machinery() -> Outcome {
    let ex = ProductExample::new(32, 16).unwrap();
    let (mut min_margin, mut cf_err) = (f64::INFINITY, 0.0f64);
    let mut interior = 0;
    let mut failures = Vec::new();
    for trial in 0..50 {
        let u = random_factor(&ex.manifold, &ex.angles, &mut trial_rng(10, trial), 1e-3, 0.5).unwrap();
        let k = key_inequality_check(&ex, &u, &opts(), 1e-10).unwrap();
        let s = theta_sweep(&ex, &u, &opts(), 3600, 1e-10).unwrap();
        min_margin = min_margin.min(k.margin);
        if !(k.holds && s.holds) {
            failures.push(match s.case {
                SweepCase::Boundary { residual, .. } => format!("trial {trial} boundary case, psi1 off E1+E2 by {residual:.2e}"),
                SweepCase::Interior { .. } => format!("trial {trial} interior case"),
            });
        }
        if let SweepCase::Interior { .. } = s.case {
            interior += 1;
            cf_err = cf_err.max(s.closed_form_error);
        }
    }
    let ok = failures.is_empty() && cf_err <= 1e-8;
    outcome(
        ok,
        format!(
            "50 samples, min key margin {min_margin:.3e}, interior maxima {interior}, closed form vs sweep {cf_err:.1e}, failures {failures:?}"
        ),
    )
}

fn main() -> ExitCode {
    let names = [
        "product spectrum",
        "maximality sampling",
        "one-sided derivatives",
        "inertia invariance",
        "scale invariance",
        "continuation, product example",
        "nodal branch",
        "regularization diagnostics",
        "cross-solver agreement",
        "key inequality and theta sweep",
    ];
    let mut results: Vec<Outcome> = Vec::new();
    let mut report = |i: usize, o: Outcome| {
        println!("criterion {:>2} {}: {} ({})", i + 1, if o.pass { "PASS" } else { "FAIL" }, names[i], o.detail);
        results.push(o);
    };
    report(0, product_spectrum());
    report(1, maximality());
    report(2, derivatives());
    report(3, inertia());
    report(4, scaling());
    let t = Instant::now();
    let runs = product_runs();
    report(5, continuation_product(&runs, t.elapsed().as_secs_f64()));
    let (o, nodal) = nodal_run();
    report(6, o);
    let mut reps: Vec<&ExtremalReport> = runs.iter().collect();
    reps.extend(nodal.as_ref());
    report(7, diagnostics(&reps));
    report(8, cross_solver());
    report(9, key_machinery());
    let failed = results.iter().filter(|o| !o.pass).count();
    println!("acceptance: {} of {} criteria passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
