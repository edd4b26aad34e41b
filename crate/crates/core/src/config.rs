//! TOML run configuration.
//!
//! ```toml
//! [model]
//! kind = "potts"          # potts | clock | custom
//! q = 2
//! d = 2
//! beta = 3.0
//! # profile = [1.0]       # clock: u at cyclic distance 1..=q/2
//! # pair_energy = [[0.0, 1.0], [1.0, 0.0]]   # custom
//! # field = [0.0, 0.05]
//!
//! [run]
//! seed = 42               # required
//! samples = 2000
//! depth = 12
//! ```

use serde::{Deserialize, Serialize};

use crate::estimators::{RunOptions, MIN_SAMPLES};
use crate::geometry::Spacing;
use crate::model::ModelSpec;
use crate::{Error, Result, Spin};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Potts,
    Clock,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub q: usize,
    pub d: usize,
    pub beta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair_energy: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<Vec<f64>>,
    /// Custom models only: require (and record) clock symmetry.
    #[serde(default)]
    pub clock: bool,
}

impl ModelConfig {
    pub fn build(&self) -> Result<ModelSpec> {
        let unexpected = |what: &str| {
            Err(Error::Config(format!(
                "`{what}` is not used by kind = {:?}",
                self.kind
            )))
        };
        let base = match self.kind {
            ModelKind::Potts => {
                if self.profile.is_some() {
                    return unexpected("profile");
                }
                if self.pair_energy.is_some() {
                    return unexpected("pair_energy");
                }
                ModelSpec::potts(self.q, self.d, self.beta)?
            }
            ModelKind::Clock => {
                if self.pair_energy.is_some() {
                    return unexpected("pair_energy");
                }
                let profile = self
                    .profile
                    .as_ref()
                    .ok_or_else(|| Error::Config("clock models need `profile`".into()))?;
                ModelSpec::clock(self.q, self.d, self.beta, profile)?
            }
            ModelKind::Custom => {
                if self.profile.is_some() {
                    return unexpected("profile");
                }
                let u = self
                    .pair_energy
                    .clone()
                    .ok_or_else(|| Error::Config("custom models need `pair_energy`".into()))?;
                ModelSpec::new(self.q, self.d, self.beta, u, vec![0.0; self.q], self.clock)?
            }
        };
        match &self.field {
            Some(f) => base.with_field(f.clone()),
            None => Ok(base),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub seed: Option<u64>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default = "default_depth")]
    pub depth: u32,
    /// Depth sweep; defaults to `[depth]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depths: Option<Vec<u32>>,
    #[serde(default = "default_truncation")]
    pub truncation: usize,
    #[serde(default)]
    pub spacing: Spacing,
    #[serde(default)]
    pub direction_seed: u64,
    /// Root spin for reconstruction.
    #[serde(default)]
    pub spin: Spin,
    #[serde(default = "default_distances")]
    pub distances: Vec<u32>,
    /// Length of the ray used for covariance estimates.
    #[serde(default = "default_ray_depth")]
    pub ray_depth: u32,
    /// Directory for report files.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
}

fn default_samples() -> usize {
    2000
}

fn default_depth() -> u32 {
    12
}

fn default_truncation() -> usize {
    6
}

fn default_distances() -> Vec<u32> {
    vec![2, 4, 8, 16]
}

fn default_ray_depth() -> u32 {
    32
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            seed: None,
            samples: default_samples(),
            workers: None,
            depth: default_depth(),
            depths: None,
            truncation: default_truncation(),
            spacing: Spacing::default(),
            direction_seed: 0,
            spin: 0,
            distances: default_distances(),
            ray_depth: default_ray_depth(),
            output_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub run: RunSection,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn seed(&self) -> Result<u64> {
        self.run
            .seed
            .ok_or_else(|| Error::Config("`run.seed` is required".into()))
    }

    /// Depths to sweep, strictly increasing.
    pub fn depths(&self) -> Vec<u32> {
        self.run
            .depths
            .clone()
            .unwrap_or_else(|| vec![self.run.depth])
    }

    pub fn run_options(&self, default_workers: usize) -> Result<RunOptions> {
        RunOptions::new(
            self.run.samples,
            self.seed()?,
            self.run.workers.unwrap_or(default_workers),
        )
    }

    /// Checks everything that can be checked without running: the model,
    /// the seed, sample and worker counts, depth list order and the spin.
    pub fn validate(&self) -> Result<ModelSpec> {
        let spec = self.model.build()?;
        self.seed()?;
        if self.run.samples < MIN_SAMPLES {
            return Err(Error::Config(format!(
                "`run.samples` must be at least {MIN_SAMPLES}"
            )));
        }
        if self.run.workers == Some(0) {
            return Err(Error::Config("`run.workers` must be positive".into()));
        }
        let depths = self.depths();
        if depths.is_empty() || depths.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(
                "`run.depths` must be non-empty and strictly increasing".into(),
            ));
        }
        if self.run.spin >= spec.q() {
            return Err(Error::Config(format!(
                "`run.spin` must be below q = {}",
                spec.q()
            )));
        }
        if self.run.truncation == 0 {
            return Err(Error::Config("`run.truncation` must be positive".into()));
        }
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = r#"
[model]
kind = "clock"
q = 4
d = 2
beta = 1.5
profile = [1.0, 1.5]
field = [0.0, 0.01, 0.0, -0.01]

[run]
seed = 9
depths = [4, 6]
spacing = "constant:3"
"#;

    #[test]
    fn parses_and_round_trips() {
        let cfg = RunConfig::from_toml_str(EXAMPLE).unwrap();
        let spec = cfg.validate().unwrap();
        assert_eq!(spec.q(), 4);
        assert!(spec.has_field());
        assert_eq!(cfg.run.spacing, Spacing::Constant(3));
        assert_eq!(cfg.depths(), vec![4, 6]);
        assert_eq!(cfg.run.truncation, 6);
        let again = RunConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn seed_is_required() {
        let cfg = RunConfig::from_toml_str("[model]\nkind = \"potts\"\nq = 2\nd = 2\nbeta = 1.0\n")
            .unwrap();
        assert!(matches!(cfg.validate(), Err(Error::Config(m)) if m.contains("seed")));
    }

    #[test]
    fn rejects_bad_input() {
        for text in [
            "[model]\nkind = \"potts\"\nq = 2\nd = 2\nbeta = 1.0\nextra = 1\n",
            "[model]\nkind = \"ising\"\nq = 2\nd = 2\nbeta = 1.0\n",
            "[model]\nkind = \"potts\"\nq = 2\nd = 2\nbeta = 1.0\n[run]\nseed = 1\nspacing = \"wide\"\n",
        ] {
            assert!(matches!(RunConfig::from_toml_str(text), Err(Error::Config(_))), "{text}");
        }
        let cfg = RunConfig::from_toml_str(
            "[model]\nkind = \"potts\"\nq = 2\nd = 2\nbeta = 1.0\nprofile = [1.0]\n[run]\nseed = 1\n",
        )
        .unwrap();
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let cfg = RunConfig::from_toml_str(
            "[model]\nkind = \"potts\"\nq = 2\nd = 2\nbeta = -1.0\n[run]\nseed = 1\n",
        )
        .unwrap();
        assert!(matches!(cfg.validate(), Err(Error::InvalidModel(_))));
    }
}
