use std::path::{Path, PathBuf};

use conflap::optimizer::OptimizerParams;
use conflap::oracle::{nodal_instance, ProductExample};
use conflap::{ConformalFactor, DiscreteManifold, SolverOptions};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub manifold: ManifoldConfig,
    pub speclib: SolverOptions,
    pub optimizer: OptimizerParams,
    pub oracle: OracleConfig,
    pub run: RunSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ManifoldConfig {
    /// Unit circle times a circle of radius 1/2 carrying dimension 3.
    Product {
        #[serde(default = "default_circle_nodes")]
        circle_nodes: usize,
        #[serde(default = "default_h_nodes")]
        h_nodes: usize,
        #[serde(default = "default_potential")]
        potential: f64,
    },
    Circle {
        nodes: usize,
        #[serde(default = "default_radius")]
        radius: f64,
        dim: usize,
        #[serde(default = "default_potential")]
        potential: f64,
    },
    /// Circle with a sign-changing-mode potential that leaves two negative eigenvalues.
    Nodal {
        #[serde(default = "default_nodal_nodes")]
        nodes: usize,
    },
    Mesh { path: PathBuf },
}

fn default_circle_nodes() -> usize {
    32
}
fn default_h_nodes() -> usize {
    16
}
fn default_potential() -> f64 {
    ProductExample::POTENTIAL
}
fn default_radius() -> f64 {
    1.0
}
fn default_nodal_nodes() -> usize {
    256
}

impl Default for ManifoldConfig {
    fn default() -> Self {
        Self::Product { circle_nodes: default_circle_nodes(), h_nodes: default_h_nodes(), potential: default_potential() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleConfig {
    pub trials: usize,
    pub tol: f64,
    pub amplitude: [f64; 2],
    pub nearest: usize,
    pub cv_bound: f64,
    pub fd_trials: usize,
    pub fd_min_order: f64,
    pub sandwich_trials: usize,
    pub key_trials: usize,
    pub sweep_samples: usize,
    pub key_tol: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            trials: 200,
            tol: 1e-8,
            amplitude: [1e-4, 0.5],
            nearest: 5,
            cv_bound: 1e-2,
            fd_trials: 5,
            fd_min_order: 0.9,
            sandwich_trials: 5,
            key_trials: 50,
            sweep_samples: 3600,
            key_tol: 1e-10,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialFactor {
    Unit,
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub seed: u64,
    pub out: PathBuf,
    pub eigen_count: usize,
    pub initial: InitialFactor,
    /// Upper end of the log-amplitude range for a random start.
    pub initial_amplitude: f64,
}

impl Default for RunSection {
    fn default() -> Self {
        Self { seed: 0, out: PathBuf::from("out"), eigen_count: 6, initial: InitialFactor::Unit, initial_amplitude: 0.3 }
    }
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// 1-based line of the first `key =` assignment, for semantic errors.
fn line_of(text: &str, key: &str) -> Option<usize> {
    text.lines().position(|l| {
        let l = l.trim_start();
        l.strip_prefix(key).is_some_and(|rest| rest.trim_start().starts_with('='))
    })
    .map(|i| i + 1)
}

fn located(text: &str, key: &str, msg: impl std::fmt::Display) -> ConfigError {
    match line_of(text, key) {
        Some(line) => ConfigError(format!("config error at line {line}: {msg}")),
        None => ConfigError(format!("config error: {msg}")),
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| {
            let msg = e.message().to_string();
            match e.span() {
                Some(span) => {
                    let line = text[..span.start.min(text.len())].matches('\n').count() + 1;
                    ConfigError(format!("config error at line {line}: {msg}"))
                }
                None => ConfigError(format!("config error: {msg}")),
            }
        })?;
        cfg.validate(text)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn validate(&self, text: &str) -> Result<(), ConfigError> {
        if let Err(e) = self.optimizer.validate() {
            let msg = e.to_string();
            let key = ["eul_tol", "c_drop_tol", "backtrack_tol", "window", "limit_gate", "blowup_factor", "max_iters"]
                .into_iter()
                .find(|k| msg.contains(k))
                .unwrap_or("epsilon_schedule");
            return Err(located(text, key, e));
        }
        let s = &self.speclib;
        for (key, v) in [("solver_tol", s.solver_tol), ("cluster_tol", s.cluster_tol), ("null_tol", s.null_tol)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(located(text, key, format!("{key} must be positive, got {v}")));
            }
        }
        let o = &self.oracle;
        // tol = 0 is allowed on purpose: it makes the maximality check fail on rounding noise
        if !(o.tol >= 0.0) || !(o.key_tol >= 0.0) {
            return Err(located(text, "tol", "oracle tolerances must be nonnegative"));
        }
        if !(o.amplitude[0] > 0.0 && o.amplitude[0] <= o.amplitude[1]) {
            return Err(located(text, "amplitude", "amplitude must be an increasing pair of positive numbers"));
        }
        if self.run.eigen_count < 2 {
            return Err(located(text, "eigen_count", "eigen_count must be at least 2"));
        }
        if !(self.run.initial_amplitude > 0.0) {
            return Err(located(text, "initial_amplitude", "initial_amplitude must be positive"));
        }
        Ok(())
    }
}

/// The manifold with node angles when the generator provides them.
pub struct Built {
    pub manifold: DiscreteManifold,
    pub angles: Option<Vec<[f64; 2]>>,
}

impl Built {
    pub fn unit_factor(&self) -> conflap::Result<ConformalFactor> {
        ConformalFactor::constant(&self.manifold, 1.0)
    }
}

pub fn build(cfg: &ManifoldConfig, base: &Path) -> conflap::Result<Built> {
    Ok(match cfg {
        ManifoldConfig::Product { circle_nodes, h_nodes, potential } => {
            let ex = ProductExample::with_potential(*circle_nodes, *h_nodes, *potential)?;
            Built { manifold: ex.manifold, angles: Some(ex.angles) }
        }
        ManifoldConfig::Circle { nodes, radius, dim, potential } => {
            let m = DiscreteManifold::build_circle(*radius, *nodes)?.with_dim(*dim).with_constant_potential(*potential)?;
            let angles = (0..*nodes).map(|i| [std::f64::consts::TAU * i as f64 / *nodes as f64, 0.0]).collect();
            Built { manifold: m, angles: Some(angles) }
        }
        ManifoldConfig::Nodal { nodes } => {
            let inst = nodal_instance(*nodes)?;
            Built { manifold: inst.manifold, angles: Some(inst.angles) }
        }
        ManifoldConfig::Mesh { path } => {
            let p = if path.is_absolute() { path.clone() } else { base.join(path) };
            Built { manifold: DiscreteManifold::read_mesh(p)?.normalize_volume(), angles: None }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_gives_defaults() {
        let c = RunConfig::parse("").unwrap();
        assert_eq!(c.manifold, ManifoldConfig::default());
        assert_eq!(c.optimizer, OptimizerParams::default());
    }

    #[test]
    fn unknown_keys_are_rejected_with_line() {
        let e = RunConfig::parse("[run]\nseed = 1\n\n[optimizer]\neul_toll = 1e-6\n").unwrap_err();
        assert!(e.0.contains("line 5"), "{}", e.0);
        assert!(e.0.contains("eul_toll"), "{}", e.0);
        let e = RunConfig::parse("[manifold]\nkind = \"nodal\"\nnodes = 64\nradius = 2.0\n").unwrap_err();
        assert!(e.0.contains("radius"), "{}", e.0);
    }

    #[test]
    fn semantic_errors_point_at_the_key() {
        let e = RunConfig::parse("[optimizer]\nmax_iters = 10\nepsilon_schedule = [1e-2, 1e-1]\n").unwrap_err();
        assert!(e.0.contains("line 3") && e.0.contains("decreasing"), "{}", e.0);
        let e = RunConfig::parse("[speclib]\ncluster_tol = -1.0\n").unwrap_err();
        assert!(e.0.contains("line 2"), "{}", e.0);
    }

    #[test]
    fn manifold_variants_parse() {
        let c = RunConfig::parse("[manifold]\nkind = \"circle\"\nnodes = 64\ndim = 4\npotential = 1.0\n").unwrap();
        assert_eq!(c.manifold, ManifoldConfig::Circle { nodes: 64, radius: 1.0, dim: 4, potential: 1.0 });
    }
}
