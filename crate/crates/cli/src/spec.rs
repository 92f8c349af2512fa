//! Experiment description: a TOML file plus command-line overrides.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};
use tvrestore::imaging::{DEFAULT_PATCH, DEFAULT_SIGMA};
use tvrestore::{derive_seed, Algorithm, AmplifierNoiseModel, Method, SolverConfig};

/// Fully resolved experiment. Every field has a default, so a config file
/// only needs the keys it changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub inputs: Vec<PathBuf>,
    pub algorithm: Algorithm,
    pub noisy: bool,
    pub lambda: f64,
    pub gamma: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub iterations: usize,
    pub patch: usize,
    /// Standard deviation of the Gaussian observation noise.
    pub sigma: f64,
    pub seed: u64,
    /// Amplifier-noise repetitions, each with its own seed.
    pub reps: u64,
    pub out: PathBuf,
    /// Also report PSNR/SSIM over the whole image.
    pub whole_image: bool,
    /// Sweep values for `gamma` (ADMM) or `gamma2` (PDS).
    pub grid: Option<Vec<f64>>,
    /// Worker threads for sweep cells; all cores when unset.
    pub jobs: Option<usize>,
    pub noise: AmplifierNoiseModel,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        let cfg = SolverConfig::default();
        Self {
            inputs: Vec::new(),
            algorithm: Algorithm::Admm,
            noisy: false,
            lambda: cfg.lambda,
            gamma: cfg.gamma,
            gamma1: cfg.gamma1,
            gamma2: cfg.gamma2,
            iterations: cfg.iterations,
            patch: DEFAULT_PATCH,
            sigma: DEFAULT_SIGMA,
            seed: 0,
            reps: 1,
            out: PathBuf::from("out"),
            whole_image: false,
            grid: None,
            jobs: None,
            noise: AmplifierNoiseModel::default(),
        }
    }
}

impl ExperimentSpec {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn method(&self) -> Method {
        Method::new(self.algorithm, self.noisy)
    }

    /// Solver settings for amplifier-noise repetition `rep`.
    pub fn solver_config(&self, rep: u64) -> SolverConfig {
        SolverConfig {
            lambda: self.lambda,
            gamma: self.gamma,
            gamma1: self.gamma1,
            gamma2: self.gamma2,
            iterations: self.iterations,
            noise_enabled: self.noisy,
            noise_model: self.noise,
            seed: self.rep_seed(rep),
        }
    }

    pub fn rep_seed(&self, rep: u64) -> u64 {
        self.seed.wrapping_add(rep)
    }

    /// Seed of the observation noise added to input `index`. Kept apart from
    /// the amplifier-noise streams.
    pub fn observation_seed(&self, index: usize) -> u64 {
        derive_seed(self.seed, u64::MAX - index as u64)
    }

    pub fn validate(&self, needs_input: bool) -> Result<()> {
        if needs_input && self.inputs.is_empty() {
            bail!("no input image given (use --input or `inputs` in the config file)");
        }
        if self.reps == 0 {
            bail!("reps must be >= 1");
        }
        if self.patch < 2 {
            bail!("patch size must be >= 2 and divide both image dimensions, got {}", self.patch);
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            bail!("sigma must be >= 0, got {}", self.sigma);
        }
        if let Some(grid) = &self.grid {
            if grid.is_empty() {
                bail!("sweep grid is empty");
            }
        }
        if self.jobs == Some(0) {
            bail!("jobs must be >= 1");
        }
        self.solver_config(0).validate()?;
        Ok(())
    }
}

/// Flags shared by the experiment subcommands. Unset flags keep the value
/// from the config file (or the default).
#[derive(Debug, Clone, Default, Args)]
pub struct ExperimentArgs {
    /// TOML experiment file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Input image (PGM P5 or 8-bit grayscale PNG). Repeatable.
    #[arg(long)]
    pub input: Vec<PathBuf>,
    #[arg(long, value_parser = parse_algorithm)]
    pub algo: Option<Algorithm>,
    /// Simulate optical-amplifier noise inside the solver.
    #[arg(long)]
    pub noisy: bool,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub gamma1: Option<f64>,
    #[arg(long)]
    pub gamma2: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub patch: Option<usize>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub reps: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Multiplier from physical noise power to simulated variance.
    #[arg(long)]
    pub sim_scale: Option<f64>,
    #[arg(long)]
    pub whole_image: bool,
    /// Comma-separated sweep values.
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<f64>>,
    #[arg(long)]
    pub jobs: Option<usize>,
}

fn parse_algorithm(s: &str) -> std::result::Result<Algorithm, String> {
    s.parse().map_err(|e: tvrestore::Error| e.to_string())
}

impl ExperimentArgs {
    pub fn resolve(&self) -> Result<ExperimentSpec> {
        let mut spec = match &self.config {
            Some(path) => ExperimentSpec::load(path)?,
            None => ExperimentSpec::default(),
        };
        if !self.input.is_empty() {
            spec.inputs = self.input.clone();
        }
        if let Some(a) = self.algo {
            spec.algorithm = a;
        }
        spec.noisy |= self.noisy;
        spec.whole_image |= self.whole_image;
        macro_rules! take {
            ($($flag:ident => $field:ident),*) => {
                $(if let Some(v) = self.$flag.clone() { spec.$field = v; })*
            };
        }
        take!(gamma => gamma, gamma1 => gamma1, gamma2 => gamma2, lambda => lambda, iters => iterations,
              patch => patch, sigma => sigma, seed => seed, reps => reps, out => out);
        if let Some(v) = self.sim_scale {
            spec.noise.sim_scale = v;
        }
        if self.grid.is_some() {
            spec.grid = self.grid.clone();
        }
        if self.jobs.is_some() {
            spec.jobs = self.jobs;
        }
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let dir = std::env::temp_dir().join(format!("tvrestore-spec-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("exp.toml");
        std::fs::write(&path, "gamma = 5.0\niterations = 10\nalgorithm = \"pds\"\n[noise]\nsim_scale = 0.0\n").unwrap();
        let args = ExperimentArgs { config: Some(path), gamma: Some(2.0), ..Default::default() };
        let spec = args.resolve().unwrap();
        assert_eq!(spec.gamma, 2.0);
        assert_eq!(spec.iterations, 10);
        assert_eq!(spec.algorithm, Algorithm::Pds);
        assert_eq!(spec.noise.sim_scale, 0.0);
        assert_eq!(spec.lambda, 0.03);
        std::fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn unknown_keys_are_errors() {
        assert!(toml::from_str::<ExperimentSpec>("gama = 1.0").is_err());
    }

    #[test]
    fn echo_round_trips() {
        let spec = ExperimentSpec { grid: Some(vec![0.5, 1.0]), ..Default::default() };
        let back: ExperimentSpec = serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn validation() {
        let ok = ExperimentSpec { inputs: vec!["a.pgm".into()], ..Default::default() };
        assert!(ok.validate(true).is_ok());
        assert!(ExperimentSpec::default().validate(true).is_err());
        assert!(ExperimentSpec { reps: 0, ..ok.clone() }.validate(true).is_err());
        assert!(ExperimentSpec { lambda: -1.0, ..ok.clone() }.validate(true).is_err());
        assert!(ExperimentSpec { patch: 1, ..ok }.validate(true).is_err());
    }
}
