use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::ascent::{maximize_f2eps, Ascent, IterationRecord, OptimizerParams};
use super::checkpoint::Checkpoint;
use super::classify::{classify, Classification, HarmonicCheck, NodalCheck};
use super::functional::f2_value;
use crate::error::Result;
use crate::manifold::DiscreteManifold;
use crate::speclib::{ConformalFactor, SolverOptions};
use crate::variation::loglog_slope;

/// Summary of one epsilon stage (epsilon = 0 for the limit stage).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub epsilon: f64,
    pub iterations: usize,
    pub converged: bool,
    pub stalled: bool,
    pub lambda2: f64,
    pub f2: f64,
    pub objective: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub residual_l2: f64,
    pub residual_sup: f64,
    pub fit_residual: f64,
    pub limit_residual: f64,
    pub c: Vec<f64>,
    pub k_effective: usize,
    pub sup_u: f64,
    pub inf_u: f64,
    pub lipschitz: f64,
    pub int_u_neg_eps: f64,
    pub eps_int_u_neg_eps_n: f64,
    #[serde(default)]
    pub resumed: bool,
}

impl StageRecord {
    fn from_ascent(m: &DiscreteManifold, eps: f64, a: &Ascent) -> Self {
        let last = a.history.last().expect("history starts with the initial iterate");
        let c = &a.certificate;
        Self {
            epsilon: eps,
            iterations: a.iterations,
            converged: a.converged,
            stalled: a.stalled,
            lambda2: a.spectrum.lambda2(),
            f2: f2_value(m, &a.u, a.spectrum.lambda2()),
            objective: last.objective,
            gamma1: c.params.gamma1,
            gamma2: c.params.gamma2,
            residual_l2: c.residual_l2,
            residual_sup: c.residual_sup,
            fit_residual: c.fit_residual,
            limit_residual: c.limit_residual,
            c: c.c.clone(),
            k_effective: c.k_effective,
            sup_u: last.sup_u,
            inf_u: last.inf_u,
            lipschitz: last.lipschitz,
            int_u_neg_eps: last.int_u_neg_eps,
            eps_int_u_neg_eps_n: last.eps_int_u_neg_eps_n,
            resumed: false,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct ContinuationOptions {
    pub checkpoint_dir: Option<PathBuf>,
    /// Reuse stage checkpoints found in `checkpoint_dir`.
    pub resume: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExtremalReport {
    pub u_final: ConformalFactor,
    pub lambda2: f64,
    pub f2: f64,
    pub classification: Classification,
    pub k: usize,
    pub c: Vec<f64>,
    pub nodal: Option<NodalCheck>,
    pub harmonic: Option<HarmonicCheck>,
    pub stages: Vec<StageRecord>,
    pub limit: Option<StageRecord>,
    pub history: Vec<IterationRecord>,
    /// Fitted slope of log limit_residual against log epsilon.
    pub residual_slope: Option<f64>,
    /// 2 / (N + eps_min)
    pub beta_min: f64,
    /// Monitored quantities that grew past blowup_factor.
    pub blowup: Vec<String>,
    pub reason: Option<String>,
}

type Monitor = (&'static str, fn(&StageRecord) -> f64);

fn blowup_report(stages: &[StageRecord], factor: f64) -> Vec<String> {
    let Some(first) = stages.first() else { return Vec::new() };
    let monitored: [Monitor; 4] = [
        ("sup_u", |s| s.sup_u),
        ("lipschitz", |s| s.lipschitz),
        ("int_u_neg_eps", |s| s.int_u_neg_eps),
        ("eps_int_u_neg_eps_n", |s| s.eps_int_u_neg_eps_n),
    ];
    let mut out = Vec::new();
    for (name, get) in monitored {
        let base = get(first);
        if let Some(s) = stages.iter().find(|s| !(get(s) <= factor * base)) {
            out.push(format!("{name} reached {:.3e} at eps = {:.1e} (first value {:.3e})", get(s), s.epsilon, base));
        }
    }
    out
}

fn load_stage(opts: &ContinuationOptions, index: usize, eps: f64, m: &DiscreteManifold, u: &ConformalFactor) -> Option<(StageRecord, ConformalFactor)> {
    let dir = opts.checkpoint_dir.as_ref().filter(|_| opts.resume)?;
    let cp = Checkpoint::load(&Checkpoint::path(dir, index)).ok()?;
    if cp.stage.epsilon != eps || cp.u.len() != m.node_count() {
        return None;
    }
    let v = u.with_values(cp.u).ok()?;
    let mut stage = cp.stage;
    stage.resumed = true;
    Some((stage, v))
}

/// Warm-started maximization along the epsilon schedule, followed by the
/// eps = 0 stage and classification of the limit.
pub fn continuation(
    m: &DiscreteManifold,
    u0: &ConformalFactor,
    params: &OptimizerParams,
    solver: &SolverOptions,
    opts: &ContinuationOptions,
) -> Result<ExtremalReport> {
    params.validate()?;
    let mut u = u0.normalized(m);
    let mut stages = Vec::new();
    let mut history = Vec::new();
    let mut last = None;
    for (index, &eps) in params.epsilon_schedule.iter().enumerate() {
        if let Some((stage, v)) = load_stage(opts, index, eps, m, &u) {
            stages.push(stage);
            u = v;
            last = None;
            continue;
        }
        let a = maximize_f2eps(m, &u, eps, params, solver)?;
        let stage = StageRecord::from_ascent(m, eps, &a);
        if let Some(dir) = &opts.checkpoint_dir {
            Checkpoint { stage: stage.clone(), u: a.u.values().to_vec() }.save(&Checkpoint::path(dir, index))?;
        }
        history.extend(a.history.iter().cloned());
        stages.push(stage);
        u = a.u.clone();
        last = Some(a);
    }
    let eps_min = *params.epsilon_schedule.last().unwrap();
    let n = u.critical_exponent();
    let beta_min = 2.0 / (n + eps_min);
    let eps: Vec<f64> = stages.iter().map(|s| s.epsilon).collect();
    let lim: Vec<f64> = stages.iter().map(|s| s.limit_residual).collect();
    let residual_slope = loglog_slope(&eps, &lim);
    let blowup = blowup_report(&stages, params.blowup_factor);
    let final_stage = stages.last().unwrap().clone();

    let mut reason = None;
    let mut limit = None;
    let mut outcome = None;
    let mut state = last;
    if !blowup.is_empty() {
        reason = Some(format!("diagnostic blow-up: {}", blowup.join("; ")));
    } else if !final_stage.converged {
        reason = Some(format!(
            "eps = {eps_min:e} stage did not converge (residual {:.3e} > {:.1e})",
            final_stage.residual_l2, params.eul_tol
        ));
    } else if !params.limit_stage {
        reason = Some("limit stage disabled".into());
    } else if final_stage.limit_residual > params.limit_gate {
        reason = Some(format!(
            "limit residual {:.3e} at eps = {eps_min:e} exceeds the gate {:.1e}",
            final_stage.limit_residual, params.limit_gate
        ));
    } else {
        let a = maximize_f2eps(m, &u, 0.0, params, solver)?;
        let stage = StageRecord::from_ascent(m, 0.0, &a);
        history.extend(a.history.iter().cloned());
        if a.converged {
            let o = classify(m, &a.u, &a.spectrum, &a.certificate, params.c_drop_tol, 10.0 * params.eul_tol);
            if o.classification == Classification::Unresolved {
                reason = Some(match o.k {
                    1 => "k = 1 but the factor is not |phi| with a sign change".into(),
                    _ => "k >= 2 but sum psi^2 = 1 fails".into(),
                });
            }
            outcome = Some(o);
        } else {
            reason = Some(format!("limit stage did not converge (residual {:.3e})", stage.residual_l2));
        }
        limit = Some(stage);
        state = Some(a);
    }

    let (u_final, lambda2) = match &state {
        Some(a) => (a.u.clone(), a.spectrum.lambda2()),
        None => (u, final_stage.lambda2),
    };
    let c = limit.as_ref().unwrap_or(&final_stage).c.clone();
    let f2 = f2_value(m, &u_final, lambda2);
    let (classification, k, nodal, harmonic) = match outcome {
        Some(o) => (o.classification, o.k, o.nodal, o.harmonic),
        None => (Classification::Unresolved, c.iter().filter(|&&x| x > params.c_drop_tol).count(), None, None),
    };
    Ok(ExtremalReport {
        u_final,
        lambda2,
        f2,
        classification,
        k,
        c,
        nodal,
        harmonic,
        stages,
        limit,
        history,
        residual_slope,
        beta_min,
        blowup,
        reason,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blowup_flags_growth() {
        let mk = |sup: f64| StageRecord {
            epsilon: 0.1,
            iterations: 0,
            converged: true,
            stalled: false,
            lambda2: -1.0,
            f2: -1.0,
            objective: -2.0,
            gamma1: 1.0,
            gamma2: 0.0,
            residual_l2: 0.0,
            residual_sup: 0.0,
            fit_residual: 0.0,
            limit_residual: 0.0,
            c: vec![1.0],
            k_effective: 1,
            sup_u: sup,
            inf_u: 1.0,
            lipschitz: 1.0,
            int_u_neg_eps: 1.0,
            eps_int_u_neg_eps_n: 1.0,
            resumed: false,
        };
        assert!(blowup_report(&[mk(1.0), mk(5.0)], 10.0).is_empty());
        let b = blowup_report(&[mk(1.0), mk(11.0)], 10.0);
        assert_eq!(b.len(), 1);
        assert!(b[0].starts_with("sup_u"));
    }
}
