//! Run configuration: one TOML file fixes the problem, the grid, the solver
//! and the list of `eps` values.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::discretize::{build_grid, RadialGrid};
use crate::error::{Error, Result};
use crate::mpsolver::MountainPassConfig;
use crate::problem::{
    build_tent_potential, power_nonlinearity, HypothesisSamples, Nonlinearity, ProblemSpec,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum NonlinearityConfig {
    /// `g(t) = t^p`.
    Power { p: f64 },
    /// `g(t) = t`; fails validation, useful for exercising it.
    Linear,
}

impl NonlinearityConfig {
    pub fn build(&self) -> Result<Nonlinearity> {
        match self {
            NonlinearityConfig::Power { p } => power_nonlinearity(*p),
            NonlinearityConfig::Linear => Ok(Nonlinearity::linear()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PotentialKind {
    Tent,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub dimension: usize,
    /// `[R1, r1, r2, R2]`.
    pub radii: [f64; 4],
    pub alpha: f64,
    pub k: f64,
    #[serde(default = "default_potential")]
    pub potential: PotentialKind,
    pub nonlinearity: NonlinearityConfig,
}

fn default_potential() -> PotentialKind {
    PotentialKind::Tent
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub r_max: f64,
    /// Number of intervals `M`.
    pub nodes: usize,
    #[serde(default = "default_grading")]
    pub grading: f64,
}

fn default_grading() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub epsilons: Vec<f64>,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    pub problem: ProblemConfig,
    pub grid: GridConfig,
    #[serde(default)]
    pub solver: MountainPassConfig,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

impl RunConfig {
    /// N = 3, tent on (1, 2, 3, 4), alpha = 1, `g = t^13`, k = 4, M = 1024,
    /// R_max = 16 and the sweep 1, 0.5, 0.25, 0.1, 0.05.
    pub fn canonical() -> Self {
        Self {
            seed: 0,
            epsilons: vec![1.0, 0.5, 0.25, 0.1, 0.05],
            output_dir: default_output(),
            problem: ProblemConfig {
                dimension: 3,
                radii: [1.0, 2.0, 3.0, 4.0],
                alpha: 1.0,
                k: 4.0,
                potential: PotentialKind::Tent,
                nonlinearity: NonlinearityConfig::Power { p: 13.0 },
            },
            grid: GridConfig {
                r_max: 16.0,
                nodes: 1024,
                grading: 1.0,
            },
            solver: MountainPassConfig::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Validation(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::format(path, e))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Validation(format!("config: {e}")))
    }

    /// Solver settings with the run seed applied.
    pub fn solver_config(&self) -> MountainPassConfig {
        MountainPassConfig {
            seed: self.seed,
            ..self.solver.clone()
        }
    }

    /// Builds the problem and rejects it unless every sampled hypothesis
    /// holds.
    pub fn build_spec(&self) -> Result<ProblemSpec> {
        let p = &self.problem;
        let [r1_outer, r1, r2, r2_outer] = p.radii;
        let potential = match p.potential {
            PotentialKind::Tent => build_tent_potential(r1_outer, r1, r2, r2_outer, p.alpha)?,
        };
        let spec = ProblemSpec::new(p.dimension, potential, p.nonlinearity.build()?, p.k)?;
        let report = spec.verify(&HypothesisSamples::standard(spec.annuli()));
        if !report.all_passed() {
            let failed: Vec<String> = report
                .failures()
                .map(|c| match &c.violation {
                    Some(v) => format!("{} ({})", c.name, v.detail),
                    None => c.name.clone(),
                })
                .collect();
            return Err(Error::Validation(format!(
                "hypotheses violated: {}",
                failed.join(", ")
            )));
        }
        Ok(spec)
    }

    pub fn build_grid(&self) -> Result<Arc<RadialGrid>> {
        let outer = self.problem.radii[3];
        if self.grid.r_max < 4.0 * outer {
            return Err(Error::Validation(format!(
                "R_max = {} must be at least 4 R2 = {}",
                self.grid.r_max,
                4.0 * outer
            )));
        }
        Ok(Arc::new(build_grid(
            self.problem.dimension,
            self.grid.r_max,
            self.grid.nodes,
            self.grid.grading,
        )?))
    }

    /// Full validation without solving.
    pub fn validate(&self) -> Result<()> {
        self.build_spec()?;
        self.build_grid()?;
        self.solver.validate()?;
        if self.epsilons.is_empty() {
            return Err(Error::Validation("epsilons must not be empty".into()));
        }
        if self.epsilons.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return Err(Error::Validation(format!(
                "epsilons must be positive, got {:?}",
                self.epsilons
            )));
        }
        if self.epsilons.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::Validation(format!(
                "epsilons must be strictly decreasing, got {:?}",
                self.epsilons
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_round_trips() {
        let cfg = RunConfig::canonical();
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(RunConfig::from_toml_str(&text).unwrap(), cfg);
        cfg.validate().unwrap();
    }

    #[test]
    fn minimal_file_uses_defaults() {
        let text = r#"
            epsilons = [0.1]
            [problem]
            dimension = 3
            radii = [1.0, 2.0, 3.0, 4.0]
            alpha = 1.0
            k = 4.0
            nonlinearity = { kind = "power", p = 13.0 }
            [grid]
            r_max = 16.0
            nodes = 1024
        "#;
        let cfg = RunConfig::from_toml_str(text).unwrap();
        assert_eq!(cfg.solver, MountainPassConfig::default());
        assert_eq!(cfg.grid.grading, 1.0);
        assert_eq!(cfg.output_dir, PathBuf::from("out"));
    }

    #[test]
    fn invalid_k_rejected() {
        let mut cfg = RunConfig::canonical();
        cfg.problem.k = 2.0;
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("k >"), "{err}");
    }

    #[test]
    fn linear_nonlinearity_rejected() {
        let mut cfg = RunConfig::canonical();
        cfg.problem.nonlinearity = NonlinearityConfig::Linear;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn short_domain_rejected() {
        let mut cfg = RunConfig::canonical();
        cfg.grid.r_max = 10.0;
        assert!(cfg.build_grid().is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        let mut text = RunConfig::canonical().to_toml_string().unwrap();
        text.push_str("\n[extra]\nx = 1\n");
        assert!(RunConfig::from_toml_str(&text).is_err());
    }

    #[test]
    fn unsorted_epsilons_rejected() {
        let mut cfg = RunConfig::canonical();
        cfg.epsilons = vec![0.1, 0.5];
        assert!(cfg.validate().is_err());
    }
}
