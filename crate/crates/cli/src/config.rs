//! Benchmark configuration files.
//!
//! ```toml
//! seed = 7
//! alpha = 0.1
//! methods = ["cp", "nexcp", "lcp"]
//! reps = 25
//!
//! [dgp]
//! d = 3
//!
//! [ampute]
//! mechanism = "mcar"
//! rate = 0.2
//!
//! [sizes]
//! n_train = 300
//! n_calib = 150
//! ```
//!
//! Omitted keys take the full-size benchmark defaults for the chosen
//! dimension and mechanism.

use std::path::Path;

use cpmiss::harness::{ExperimentConfig, Grouping};
use cpmiss::synth::{AmputeConfig, DgpConfig, Mechanism};
use cpmiss::Method;
use serde::{Deserialize, Serialize};

use crate::error::{user_io, CliError, CliResult};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub alpha: Option<f64>,
    pub rho: Option<f64>,
    pub methods: Option<Vec<String>>,
    pub reps: Option<usize>,
    pub workers: Option<usize>,
    pub grouping: Option<Grouping>,
    pub imputer_iters: Option<usize>,
    pub group_budget: Option<usize>,
    pub reference_size: Option<usize>,
    #[serde(default)]
    pub dgp: DgpSection,
    #[serde(default)]
    pub ampute: AmputeSection,
    #[serde(default)]
    pub sizes: SizesSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DgpSection {
    pub d: Option<usize>,
    pub beta: Option<Vec<f64>>,
    pub mu: Option<Vec<f64>>,
    pub phi: Option<f64>,
    pub noise_sd: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmputeSection {
    pub mechanism: Option<String>,
    pub rate: Option<f64>,
    pub maskable_columns: Option<Vec<usize>>,
    pub mnar_steepness: Option<f64>,
    pub mar_steepness: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SizesSection {
    pub n_train: Option<usize>,
    pub n_calib: Option<usize>,
    pub n_test_marginal: Option<usize>,
    pub n_test_per_group: Option<usize>,
}

/// Command-line values that win over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub alpha: Option<f64>,
    pub rho: Option<f64>,
    pub methods: Option<Vec<String>>,
    pub reps: Option<usize>,
    pub workers: Option<usize>,
    pub d: Option<usize>,
    pub mechanism: Option<String>,
    pub rate: Option<f64>,
    pub n_train: Option<usize>,
    pub n_calib: Option<usize>,
    pub n_test_marginal: Option<usize>,
    pub n_test_per_group: Option<usize>,
    pub grouping: Option<Grouping>,
    pub imputer_iters: Option<usize>,
    pub group_budget: Option<usize>,
    pub reference_size: Option<usize>,
    pub beta: Option<Vec<f64>>,
    pub mu: Option<Vec<f64>>,
    pub phi: Option<f64>,
    pub noise_sd: Option<f64>,
    pub maskable_columns: Option<Vec<usize>>,
    pub mnar_steepness: Option<f64>,
    pub mar_steepness: Option<f64>,
}

impl FileConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::User(format!("bad config: {e}")))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| user_io(path, e))?;
        Self::parse(&text).map_err(|e| CliError::User(format!("{}: {e}", path.display())))
    }

    pub fn apply(&mut self, o: &Overrides) {
        fn set<T: Clone>(dst: &mut Option<T>, src: &Option<T>) {
            if src.is_some() {
                dst.clone_from(src);
            }
        }
        set(&mut self.seed, &o.seed);
        set(&mut self.alpha, &o.alpha);
        set(&mut self.rho, &o.rho);
        set(&mut self.methods, &o.methods);
        set(&mut self.reps, &o.reps);
        set(&mut self.workers, &o.workers);
        set(&mut self.dgp.d, &o.d);
        set(&mut self.ampute.mechanism, &o.mechanism);
        set(&mut self.ampute.rate, &o.rate);
        set(&mut self.sizes.n_train, &o.n_train);
        set(&mut self.sizes.n_calib, &o.n_calib);
        set(&mut self.sizes.n_test_marginal, &o.n_test_marginal);
        set(&mut self.sizes.n_test_per_group, &o.n_test_per_group);
        set(&mut self.grouping, &o.grouping);
        set(&mut self.imputer_iters, &o.imputer_iters);
        set(&mut self.group_budget, &o.group_budget);
        set(&mut self.reference_size, &o.reference_size);
        set(&mut self.dgp.beta, &o.beta);
        set(&mut self.dgp.mu, &o.mu);
        set(&mut self.dgp.phi, &o.phi);
        set(&mut self.dgp.noise_sd, &o.noise_sd);
        set(&mut self.ampute.maskable_columns, &o.maskable_columns);
        set(&mut self.ampute.mnar_steepness, &o.mnar_steepness);
        set(&mut self.ampute.mar_steepness, &o.mar_steepness);
    }

    /// Fills every unset key from the benchmark defaults and validates.
    pub fn to_experiment(&self) -> CliResult<ExperimentConfig> {
        let d = self.dgp.d.unwrap_or(3);
        if d == 0 {
            return Err(CliError::User("dgp.d must be at least 1".into()));
        }
        let mechanism: Mechanism = match &self.ampute.mechanism {
            Some(m) => m.parse()?,
            None => Mechanism::Mcar,
        };
        let mut cfg = ExperimentConfig::benchmark(d, mechanism);
        let base_dgp = DgpConfig::benchmark(d);
        cfg.dgp = DgpConfig {
            d,
            beta: self.dgp.beta.clone().unwrap_or(base_dgp.beta),
            mu: self.dgp.mu.clone().unwrap_or(base_dgp.mu),
            phi: self.dgp.phi.unwrap_or(base_dgp.phi),
            noise_sd: self.dgp.noise_sd.unwrap_or(base_dgp.noise_sd),
        };
        let base_amp = AmputeConfig::new(mechanism, d);
        cfg.ampute = AmputeConfig {
            mechanism,
            rate: self.ampute.rate.unwrap_or(base_amp.rate),
            maskable_columns: self.ampute.maskable_columns.clone().unwrap_or(base_amp.maskable_columns),
            mnar_steepness: self.ampute.mnar_steepness.unwrap_or(base_amp.mnar_steepness),
            mar_steepness: self.ampute.mar_steepness.unwrap_or(base_amp.mar_steepness),
        };
        if let Some(methods) = &self.methods {
            cfg.methods = parse_methods(methods)?;
        }
        cfg.master_seed = self.seed.unwrap_or(cfg.master_seed);
        cfg.alpha = self.alpha.unwrap_or(cfg.alpha);
        cfg.rho = self.rho.unwrap_or(cfg.rho);
        cfg.reps = self.reps.unwrap_or(cfg.reps);
        cfg.workers = self.workers.unwrap_or(cfg.workers);
        cfg.grouping = self.grouping.unwrap_or(cfg.grouping);
        cfg.pipeline.imputer_iters = self.imputer_iters.unwrap_or(cfg.pipeline.imputer_iters);
        cfg.group_budget = self.group_budget.unwrap_or(cfg.group_budget);
        cfg.reference_size = self.reference_size.unwrap_or(cfg.reference_size);
        cfg.n_train = self.sizes.n_train.unwrap_or(cfg.n_train);
        cfg.n_calib = self.sizes.n_calib.unwrap_or(cfg.n_calib);
        cfg.n_test_marginal = self.sizes.n_test_marginal.unwrap_or(cfg.n_test_marginal);
        cfg.n_test_per_group = self.sizes.n_test_per_group.unwrap_or(cfg.n_test_per_group);
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Accepts names separated by commas or given as separate entries.
pub fn parse_methods(names: &[String]) -> CliResult<Vec<Method>> {
    names
        .iter()
        .flat_map(|n| n.split(','))
        .filter(|n| !n.trim().is_empty())
        .map(|n| n.parse::<Method>().map_err(CliError::from))
        .collect()
}
