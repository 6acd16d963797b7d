use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::certificate::{euler_certificate, EulerCertificate};
use super::functional::{f2_value, penalty};
use crate::error::{Error, Result};
use crate::linalg::simplex::SpectraplexQp;
use crate::manifold::DiscreteManifold;
use crate::speclib::{generalized_spectrum, ConformalFactor, SolverOptions, SpectrumSlice};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerParams {
    pub epsilon_schedule: Vec<f64>,
    pub eul_tol: f64,
    pub c_drop_tol: f64,
    pub max_iters: usize,
    pub backtrack_tol: f64,
    pub blowup_factor: f64,
    /// Eigenvalues within window * |lambda_2| of lambda_2 enter the proximal model.
    pub window: f64,
    /// Finish with an eps = 0 stage started from the last regularized solution.
    pub limit_stage: bool,
    /// The limit stage is only trusted when |gamma1 u^2 - Phi| at the smallest
    /// eps is below this.
    pub limit_gate: f64,
}

impl Default for OptimizerParams {
    fn default() -> Self {
        Self {
            epsilon_schedule: vec![1e-1, 3e-2, 1e-2, 3e-3, 1e-3],
            eul_tol: 1e-6,
            c_drop_tol: 1e-4,
            max_iters: 400,
            backtrack_tol: 1e-10,
            blowup_factor: 10.0,
            window: 0.5,
            limit_stage: true,
            limit_gate: 0.05,
        }
    }
}

impl OptimizerParams {
    pub fn validate(&self) -> Result<()> {
        let s = &self.epsilon_schedule;
        if s.is_empty() {
            return Err(Error::InvalidInput("epsilon schedule is empty".into()));
        }
        if s.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return Err(Error::InvalidInput("epsilon values must be positive".into()));
        }
        if s.windows(2).any(|p| p[1] >= p[0]) {
            return Err(Error::InvalidInput("epsilon schedule must be strictly decreasing".into()));
        }
        for (name, v) in [
            ("eul_tol", self.eul_tol),
            ("c_drop_tol", self.c_drop_tol),
            ("backtrack_tol", self.backtrack_tol),
            ("window", self.window),
            ("limit_gate", self.limit_gate),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidInput(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.blowup_factor > 1.0) {
            return Err(Error::InvalidInput("blowup_factor must exceed 1".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidInput("max_iters must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    Start,
    FixedPoint,
    Proximal,
}

/// One row of the diagnostics time series.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IterationRecord {
    pub epsilon: f64,
    pub iteration: usize,
    pub step: StepKind,
    pub objective: f64,
    pub f2: f64,
    pub lambda2: f64,
    pub gamma1: f64,
    pub residual_l2: f64,
    pub fit_residual: f64,
    pub sup_u: f64,
    pub inf_u: f64,
    pub lipschitz: f64,
    pub int_u_neg_eps: f64,
    pub eps_int_u_neg_eps_n: f64,
}

#[derive(Clone, Debug)]
pub struct Ascent {
    pub u: ConformalFactor,
    pub spectrum: SpectrumSlice,
    pub certificate: EulerCertificate,
    pub history: Vec<IterationRecord>,
    pub converged: bool,
    pub stalled: bool,
    pub iterations: usize,
}

/// F_{2,eps}, or F_2 at eps = 0.
fn objective(m: &DiscreteManifold, u: &ConformalFactor, eps: f64, lambda2: f64) -> Result<f64> {
    let f = f2_value(m, u, lambda2);
    if eps == 0.0 {
        Ok(f)
    } else {
        Ok(f - penalty(m, u, eps)?)
    }
}

/// Root of gamma1 t^2 - gamma2 t^(2-N-eps) = phi on (0, inf); the map is
/// strictly increasing there.
pub fn f_inverse(phi: f64, gamma1: f64, gamma2: f64, n: f64, eps: f64) -> Result<f64> {
    if gamma2 == 0.0 {
        return Ok((phi.max(0.0) / gamma1).sqrt());
    }
    let p = 2.0 - n - eps;
    let f = |t: f64| gamma1 * t * t - gamma2 * t.powf(p);
    let (mut lo, mut hi) = (1.0f64, 1.0f64);
    let mut guard = 0;
    while f(lo) >= phi {
        lo *= 0.5;
        guard += 1;
        if guard > 2000 {
            return Err(Error::RootFinder { target: phi });
        }
    }
    while f(hi) <= phi {
        hi *= 2.0;
        guard += 1;
        if guard > 4000 {
            return Err(Error::RootFinder { target: phi });
        }
    }
    // bisection in log t
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if f(mid) < phi {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo - 1.0 < 1e-6 {
            break;
        }
    }
    let mut t = (lo * hi).sqrt();
    for _ in 0..8 {
        let df = 2.0 * gamma1 * t - gamma2 * p * t.powf(p - 1.0);
        let next = t - (f(t) - phi) / df;
        if !(next > lo * 0.5 && next < hi * 2.0) {
            break;
        }
        if (next - t).abs() <= 1e-15 * t {
            t = next;
            break;
        }
        t = next;
    }
    if !t.is_finite() {
        return Err(Error::RootFinder { target: phi });
    }
    Ok(t)
}

struct Iterate {
    u: ConformalFactor,
    spectrum: SpectrumSlice,
    value: f64,
}

fn evaluate(m: &DiscreteManifold, u: ConformalFactor, eps: f64, opts: &SolverOptions) -> Result<Iterate> {
    let spectrum = generalized_spectrum(m, &u, 3, opts)?;
    if spectrum.nu < 2 {
        return Err(Error::TooFewNegative { nu: spectrum.nu });
    }
    let gap = spectrum.lambda2() - spectrum.lambda1();
    if gap < opts.cluster_tol * spectrum.lambda1().abs() {
        return Err(Error::ClusterCollision { gap });
    }
    let value = objective(m, &u, eps, spectrum.lambda2())?;
    Ok(Iterate { u, spectrum, value })
}

fn record(
    m: &DiscreteManifold,
    it: &Iterate,
    cert: &EulerCertificate,
    eps: f64,
    iteration: usize,
    step: StepKind,
) -> IterationRecord {
    let uv = it.u.values();
    let n = it.u.critical_exponent();
    let positive = it.u.is_strictly_positive();
    IterationRecord {
        epsilon: eps,
        iteration,
        step,
        objective: it.value,
        f2: f2_value(m, &it.u, it.spectrum.lambda2()),
        lambda2: it.spectrum.lambda2(),
        gamma1: cert.params.gamma1,
        residual_l2: cert.residual_l2,
        fit_residual: cert.fit_residual,
        sup_u: it.u.max(),
        inf_u: it.u.min(),
        lipschitz: m.lipschitz_proxy(uv),
        int_u_neg_eps: if positive { m.integrate(uv.iter().map(|v| v.powf(-eps))) } else { f64::INFINITY },
        eps_int_u_neg_eps_n: if positive {
            eps * m.integrate(uv.iter().map(|v| v.powf(-eps - n)))
        } else {
            f64::INFINITY
        },
    }
}

/// Proximal step: h = tau G(A) / w where A solves the dual problem over
/// the spectraplex of the working cluster. Returns h and the predicted gain.
fn proximal_step(
    m: &DiscreteManifold,
    it: &Iterate,
    eps: f64,
    window: f64,
    tau: f64,
) -> (Vec<f64>, f64) {
    let s = &it.spectrum;
    let l2 = s.lambda2();
    let cl: Vec<usize> = (1..s.nu).filter(|&j| s.eigenvalues[j] - l2 <= window * l2.abs()).collect();
    let d = cl.len();
    let uv = it.u.values();
    let w = m.weights();
    let n = it.u.critical_exponent();
    let nn = uv.len();
    let int_neg = if eps > 0.0 { m.integrate(uv.iter().map(|v| v.powf(-eps))) } else { 1.0 };
    let g0: Vec<f64> = (0..nn)
        .map(|i| {
            let un = uv[i].powf(n);
            let pen = if eps > 0.0 { eps * uv[i].powf(-eps) - eps * int_neg * un } else { 0.0 };
            w[i] * ((n - 2.0) * l2 * un + pen)
        })
        .collect();
    let lam: Vec<f64> = cl.iter().map(|&j| s.eigenvalues[j]).collect();
    // g_ab for vec index p = a + d b
    let dd = d * d;
    let gp: Vec<Vec<f64>> = (0..dd)
        .map(|p| {
            let (a, b) = (p % d, p / d);
            let (fa, fb) = (&s.eigenvectors[cl[a]], &s.eigenvectors[cl[b]]);
            let lab = 0.5 * (lam[a] + lam[b]);
            (0..nn).map(|i| -(n - 2.0) * w[i] * uv[i].powf(n - 2.0) * lab * fa[i] * fb[i]).collect()
        })
        .collect();
    let inner = |x: &[f64], y: &[f64]| -> f64 { (0..nn).map(|i| x[i] * y[i] / w[i]).sum() };
    let mut hess = DMatrix::zeros(dd, dd);
    let mut lin = DVector::zeros(dd);
    for p in 0..dd {
        for q in p..dd {
            let v = tau * inner(&gp[p], &gp[q]);
            hess[(p, q)] = v;
            hess[(q, p)] = v;
        }
        let (a, b) = (p % d, p / d);
        lin[p] = if a == b { lam[a] } else { 0.0 } + tau * inner(&gp[p], &g0);
    }
    let a = SpectraplexQp { d, hessian: hess, linear: lin }.solve(300);
    let g: Vec<f64> = (0..nn).map(|i| g0[i] + (0..dd).map(|p| a[(p % d, p / d)] * gp[p][i]).sum::<f64>()).collect();
    let h: Vec<f64> = (0..nn).map(|i| tau * g[i] / w[i]).collect();
    let gap: f64 = (0..d).map(|j| a[(j, j)] * lam[j]).sum::<f64>() - l2;
    let pred = gap + (0..nn).map(|i| g[i] * h[i]).sum::<f64>();
    (h, pred)
}

/// Maximizes F_{2,eps} (F_2 when eps = 0) from u0.
pub fn maximize_f2eps(
    m: &DiscreteManifold,
    u0: &ConformalFactor,
    eps: f64,
    params: &OptimizerParams,
    opts: &SolverOptions,
) -> Result<Ascent> {
    if eps > 0.0 {
        penalty(m, u0, eps)?;
    }
    let n = u0.critical_exponent();
    let mut cur = evaluate(m, u0.normalized(m), eps, opts)?;
    let mut cert = euler_certificate(m, &cur.u, eps, &cur.spectrum, params.c_drop_tol)?;
    let mut history = vec![record(m, &cur, &cert, eps, 0, StepKind::Start)];
    let mut tau = 1.0;
    let mut stalled = false;
    let mut iterations = 0;
    while iterations < params.max_iters && cert.residual_l2 > params.eul_tol {
        iterations += 1;
        // fixed-point trial u <- f^{-1}(Phi), damped geometrically
        let phi = cert.phi_sum();
        let g = cert.params;
        let target: Vec<f64> = cur
            .u
            .values()
            .iter()
            .zip(&phi)
            .map(|(&x, &p)| if x > 0.0 { f_inverse(p, g.gamma1, g.gamma2, n, eps) } else { Ok(0.0) })
            .collect::<Result<_>>()?;
        let mut accepted = None;
        let mut s = 1.0;
        for _ in 0..4 {
            let v: Vec<f64> = cur
                .u
                .values()
                .iter()
                .zip(&target)
                .map(|(&x, &t)| if x > 0.0 { x.powf(1.0 - s) * t.max(1e-300).powf(s) } else { 0.0 })
                .collect();
            if let Ok(trial) = cur.u.with_values(v).and_then(|u| evaluate(m, u.normalized(m), eps, opts)) {
                if trial.value >= cur.value - params.backtrack_tol {
                    if let Ok(c) = euler_certificate(m, &trial.u, eps, &trial.spectrum, params.c_drop_tol) {
                        if c.fit_residual < cert.fit_residual {
                            accepted = Some((trial, c));
                            break;
                        }
                    }
                }
            }
            s *= 0.5;
        }
        if let Some((trial, c)) = accepted {
            cur = trial;
            cert = c;
            history.push(record(m, &cur, &cert, eps, iterations, StepKind::FixedPoint));
            continue;
        }
        // proximal subgradient step with a trust-ratio test
        let next = loop {
            let (h, pred) = proximal_step(m, &cur, eps, params.window, tau);
            let v: Vec<f64> = cur.u.values().iter().zip(&h).map(|(x, h)| x * h.exp()).collect();
            let trial = cur.u.with_values(v).and_then(|u| evaluate(m, u.normalized(m), eps, opts));
            let rho = match &trial {
                Ok(t) if pred > 0.0 => (t.value - cur.value) / pred,
                _ => -1.0,
            };
            // predicted gains at rounding level make the ratio meaningless, so
            // the Euler residual decides instead
            let flat = pred.abs() <= 1e-12 * cur.value.abs().max(1.0)
                && trial.as_ref().is_ok_and(|t| {
                    t.value >= cur.value - params.backtrack_tol
                        && euler_certificate(m, &t.u, eps, &t.spectrum, params.c_drop_tol)
                            .is_ok_and(|c| c.fit_residual < cert.fit_residual)
                });
            if rho > 0.1 || flat {
                if rho > 0.75 {
                    tau *= 2.0;
                }
                break trial.ok();
            }
            tau /= 4.0;
            if tau < 1e-14 {
                break None;
            }
        };
        match next {
            Some(trial) => {
                cert = euler_certificate(m, &trial.u, eps, &trial.spectrum, params.c_drop_tol)?;
                cur = trial;
                history.push(record(m, &cur, &cert, eps, iterations, StepKind::Proximal));
            }
            None => {
                stalled = true;
                break;
            }
        }
    }
    Ok(Ascent {
        converged: cert.residual_l2 <= params.eul_tol,
        u: cur.u,
        spectrum: cur.spectrum,
        certificate: cert,
        history,
        stalled,
        iterations,
    })
}
