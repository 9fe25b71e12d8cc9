//! Run configuration: TOML with dotted sections, validated as a whole.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Sample,
    StableCheck,
    Ward,
    Moments,
    Scaling,
    Rcm,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::Sample,
        Experiment::StableCheck,
        Experiment::Ward,
        Experiment::Moments,
        Experiment::Scaling,
        Experiment::Rcm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Sample => "sample",
            Experiment::StableCheck => "stable-check",
            Experiment::Ward => "ward",
            Experiment::Moments => "moments",
            Experiment::Scaling => "scaling",
            Experiment::Rcm => "rcm",
        }
    }

    /// Whether the experiment runs the Gibbs chain (and so needs `ε > 0`).
    pub fn samples(self) -> bool {
        self != Experiment::StableCheck
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Experiment::ALL.iter().map(|e| e.name()).collect();
                format!("unknown experiment {s:?} (expected one of {})", names.join(", "))
            })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub alpha: f64,
    pub beta: f64,
    pub epsilon: f64,
    pub dim: usize,
    pub side: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            alpha: 0.3,
            beta: 1.0,
            epsilon: 0.1,
            dim: 2,
            side: 8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainSection {
    pub seed: Option<u64>,
    pub burn: u64,
    pub keep: u64,
    pub thin: u64,
    /// Independent chains, run in parallel on streams `0..chains` of the seed.
    pub chains: usize,
}

impl Default for ChainSection {
    fn default() -> Self {
        Self {
            seed: None,
            burn: 1000,
            keep: 10_000,
            thin: 10,
            chains: 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToleranceSection {
    /// Identity checks turn inconclusive above this SE relative to scale.
    pub max_rel_se: f64,
    pub stable_rel: f64,
    pub scaling_rel: f64,
    pub control_rel: f64,
}

impl Default for ToleranceSection {
    fn default() -> Self {
        Self {
            max_rel_se: 0.05,
            stable_rel: 1e-6,
            scaling_rel: 0.15,
            control_rel: 0.03,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StableSection {
    /// Defaults to `[model.alpha]` when empty.
    pub alphas: Vec<f64>,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub points: usize,
}

impl Default for StableSection {
    fn default() -> Self {
        Self {
            alphas: Vec::new(),
            lambda_min: 0.1,
            lambda_max: 10.0,
            points: 50,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MomentsSection {
    pub sides: Vec<usize>,
    pub lambdas: Vec<f64>,
    pub powers: Vec<u32>,
}

impl Default for MomentsSection {
    fn default() -> Self {
        Self {
            sides: vec![4, 8, 16],
            lambdas: vec![-2.0, -1.0, 1.0, 2.0],
            powers: vec![1, 2],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScalingSection {
    pub deltas: Vec<f64>,
    pub environments: usize,
    /// Gibbs sweeps between recorded environments.
    pub spacing: u64,
    pub walkers: usize,
    pub horizon: f64,
    /// Width `s` of the Laplacian-of-Gaussian test function.
    pub test_scale: f64,
    pub control_w: f64,
    pub theta: f64,
}

impl Default for ScalingSection {
    fn default() -> Self {
        Self {
            deltas: vec![0.5, 0.25, 0.125],
            environments: 16,
            spacing: 10,
            walkers: 2000,
            horizon: 10.0,
            test_scale: 0.3,
            control_w: 2.0,
            theta: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RcmSection {
    pub times: Vec<f64>,
    pub onset: f64,
    pub environments: usize,
    pub spacing: u64,
    pub walkers: usize,
    pub horizons: Vec<f64>,
}

impl Default for RcmSection {
    fn default() -> Self {
        Self {
            times: (1..=10).map(|i| 5.0 * i as f64).collect(),
            onset: 5.0,
            environments: 8,
            spacing: 10,
            walkers: 2000,
            horizons: vec![2.5, 5.0, 10.0],
        }
    }
}

/// The file layout; every section is optional.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RawConfig {
    pub experiment: Option<Experiment>,
    pub model: ModelSection,
    pub chain: ChainSection,
    pub output: OutputSection,
    pub tolerance: ToleranceSection,
    pub stable: StableSection,
    pub moments: MomentsSection,
    pub scaling: ScalingSection,
    pub rcm: RcmSection,
}

/// A validated configuration.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub seed: u64,
    pub model: ModelSection,
    pub chain: ChainSection,
    pub output: OutputSection,
    pub tolerance: ToleranceSection,
    pub stable: StableSection,
    pub moments: MomentsSection,
    pub scaling: ScalingSection,
    pub rcm: RcmSection,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
}

impl RawConfig {
    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Checks every field and reports all violations at once.
    pub fn validate(self) -> Result<RunConfig, ConfigError> {
        let mut v = Vec::new();
        let experiment = self.experiment;
        if experiment.is_none() {
            v.push("experiment: missing (set it in the file or pass --experiment)".to_string());
        }
        let seed = self.chain.seed;
        if seed.is_none() {
            v.push("chain.seed: missing (set it in the file or pass --seed)".to_string());
        }
        check_alpha("model.alpha", self.model.alpha, &mut v);
        if !(self.model.beta > 0.0 && self.model.beta.is_finite()) {
            v.push(format!("model.beta = {}: must be positive and finite", self.model.beta));
        }
        let sampling = experiment.is_none_or(|e| e.samples());
        if sampling && !(self.model.epsilon > 0.0 && self.model.epsilon.is_finite()) {
            v.push(format!(
                "model.epsilon = {}: must be positive for sampling experiments (the torus measure is not normalisable at 0)",
                self.model.epsilon
            ));
        }
        if !(1..=3).contains(&self.model.dim) {
            v.push(format!("model.dim = {}: must be 1, 2 or 3", self.model.dim));
        }
        if self.model.side < 3 {
            v.push(format!("model.side = {}: must be at least 3", self.model.side));
        }
        if self.chain.keep < 1 {
            v.push("chain.keep: must be at least 1".into());
        }
        if self.chain.thin < 1 {
            v.push("chain.thin: must be at least 1".into());
        }
        if self.chain.chains < 1 {
            v.push("chain.chains: must be at least 1".into());
        }
        for (name, x) in [
            ("tolerance.max_rel_se", self.tolerance.max_rel_se),
            ("tolerance.stable_rel", self.tolerance.stable_rel),
            ("tolerance.scaling_rel", self.tolerance.scaling_rel),
            ("tolerance.control_rel", self.tolerance.control_rel),
        ] {
            if !(x > 0.0 && x.is_finite()) {
                v.push(format!("{name} = {x}: must be positive"));
            }
        }
        for (i, &a) in self.stable.alphas.iter().enumerate() {
            check_alpha(&format!("stable.alphas[{i}]"), a, &mut v);
        }
        if !(self.stable.lambda_min > 0.0 && self.stable.lambda_max > self.stable.lambda_min && self.stable.lambda_max.is_finite()) {
            v.push(format!(
                "stable.lambda_min/lambda_max = {}/{}: need 0 < min < max",
                self.stable.lambda_min, self.stable.lambda_max
            ));
        }
        if self.stable.points < 2 {
            v.push(format!("stable.points = {}: must be at least 2", self.stable.points));
        }
        if self.moments.sides.is_empty() || self.moments.sides.iter().any(|&n| n < 3) {
            v.push(format!("moments.sides = {:?}: need a non-empty list of sides ≥ 3", self.moments.sides));
        }
        if self.moments.lambdas.iter().any(|l| !l.is_finite()) {
            v.push("moments.lambdas: must be finite".into());
        }
        if self.moments.powers.iter().any(|p| !(1..=2).contains(p)) {
            v.push(format!("moments.powers = {:?}: only p = 1 and p = 2 are supported", self.moments.powers));
        }
        let s = &self.scaling;
        if experiment == Some(Experiment::Scaling) && self.model.dim != 3 {
            v.push(format!("model.dim = {}: the scaling experiment needs d = 3", self.model.dim));
        }
        if s.deltas.len() < 2 || s.deltas.iter().any(|d| !(*d > 0.0 && *d <= 1.0)) || s.deltas.windows(2).any(|w| w[1] >= w[0]) {
            v.push(format!("scaling.deltas = {:?}: need at least two decreasing values in (0, 1]", s.deltas));
        }
        if s.environments < 2 {
            v.push(format!("scaling.environments = {}: must be at least 2", s.environments));
        }
        if s.spacing < 1 || self.rcm.spacing < 1 {
            v.push("scaling.spacing / rcm.spacing: must be at least 1".into());
        }
        if s.walkers < 2 || self.rcm.walkers < 2 {
            v.push("scaling.walkers / rcm.walkers: must be at least 2".into());
        }
        for (name, x) in [
            ("scaling.horizon", s.horizon),
            ("scaling.test_scale", s.test_scale),
            ("scaling.control_w", s.control_w),
            ("scaling.theta", s.theta),
        ] {
            if !(x > 0.0 && x.is_finite()) {
                v.push(format!("{name} = {x}: must be positive"));
            }
        }
        let r = &self.rcm;
        if r.times.len() < 2 || r.times.iter().any(|t| !(*t > 0.0)) || r.times.windows(2).any(|w| w[1] <= w[0]) {
            v.push(format!("rcm.times = {:?}: need at least two increasing positive times", r.times));
        }
        if r.times.iter().filter(|&&t| t >= r.onset).count() < 2 {
            v.push(format!("rcm.onset = {}: at least two times must lie at or after it", r.onset));
        }
        if r.environments < 1 {
            v.push("rcm.environments: must be at least 1".into());
        }
        if r.horizons.len() < 2 || r.horizons.iter().any(|t| !(*t > 0.0)) || r.horizons.windows(2).any(|w| w[1] <= w[0]) {
            v.push(format!("rcm.horizons = {:?}: need at least two increasing positive horizons", r.horizons));
        }
        if !v.is_empty() {
            return Err(ConfigError::Invalid(v));
        }
        let mut stable = self.stable;
        if stable.alphas.is_empty() {
            stable.alphas = vec![self.model.alpha];
        }
        Ok(RunConfig {
            experiment: experiment.unwrap(),
            seed: seed.unwrap(),
            model: self.model,
            chain: ChainSection { seed, ..self.chain },
            output: self.output,
            tolerance: self.tolerance,
            stable,
            moments: self.moments,
            scaling: self.scaling,
            rcm: self.rcm,
        })
    }
}

fn check_alpha(name: &str, alpha: f64, v: &mut Vec<String>) {
    if alpha > 0.5 && alpha < 1.0 {
        v.push(format!(
            "{name} = {alpha}: must lie in (0, 0.5]; ln f_α(e^t) is concave in t only for α ≤ 1/2, and the tilted κ sampler relies on that log-concavity"
        ));
    } else if !(alpha > 0.0 && alpha <= 0.5) {
        v.push(format!("{name} = {alpha}: must lie in (0, 0.5]"));
    }
}

impl RunConfig {
    /// First 16 hex digits of the SHA-256 of the canonical JSON form, with
    /// the output directory left out so that relocating a run keeps its hash.
    pub fn hash(&self) -> String {
        let mut echo = self.clone();
        echo.output.dir = PathBuf::new();
        let json = serde_json::to_string(&echo).expect("config serialises");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn model_params(&self) -> Result<gradlat_core::sampler::ModelParams, gradlat_core::sampler::SamplerError> {
        self.model_params_with_side(self.model.side)
    }

    pub fn model_params_with_side(&self, side: usize) -> Result<gradlat_core::sampler::ModelParams, gradlat_core::sampler::SamplerError> {
        let lat = gradlat_core::lattice::TorusLattice::new(self.model.dim, side)?;
        gradlat_core::sampler::ModelParams::new(self.model.alpha, self.model.beta, self.model.epsilon, lat)
    }
}
