//! Seeded Monte-Carlo coverage experiments on synthetic data.
//!
//! Each repetition draws its own training, calibration and test sets from
//! disjoint random streams, fits the pipelines on the training split, and
//! evaluates every enabled method on a marginal test set and on per-group test
//! sets. Repetitions run in parallel and are reduced in repetition order, so
//! the report does not depend on the number of workers.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conformal::{EngineConfig, IntervalEngine, Method, DEFAULT_RHO};
use crate::data::{MaskedDataset, MaskedSample};
use crate::error::{Error, Result};
use crate::mask::Mask;
use crate::metrics::{median_pairwise_bandwidth, KernelSpec};
use crate::models::{fit_chained_imputer, FittedPipeline, FittedRegressor, PipelineConfig, RegressorKind};
use crate::rng::{stream, Purpose};
use crate::synth::{AmputeConfig, Amputer, DgpConfig, GaussianLinear, Mechanism};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grouping {
    ByMask,
    ByPatternSize,
}

impl FromStr for Grouping {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "by_mask" | "mask" => Ok(Grouping::ByMask),
            "by_pattern_size" | "size" => Ok(Grouping::ByPatternSize),
            other => Err(Error::Config(format!("unknown grouping {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dgp: DgpConfig,
    pub ampute: AmputeConfig,
    pub n_train: usize,
    pub n_calib: usize,
    pub n_test_marginal: usize,
    pub n_test_per_group: usize,
    pub alpha: f64,
    pub methods: Vec<Method>,
    pub reps: usize,
    pub master_seed: u64,
    pub rho: f64,
    pub grouping: Grouping,
    /// Worker threads; 0 uses every available core.
    pub workers: usize,
    pub pipeline: PipelineConfig,
    /// Candidate draws allowed per group and repetition before the group is
    /// declared unreachable.
    pub group_budget: usize,
    /// Complete draws used once to calibrate the amputation intercepts.
    pub reference_size: usize,
}

impl ExperimentConfig {
    /// Full-size synthetic benchmark: 500 training, 250 calibration, 2000
    /// marginal and 100 per-group test points, 50 repetitions. Masks are
    /// grouped exactly for `d <= 3` and by pattern size otherwise.
    pub fn benchmark(d: usize, mechanism: Mechanism) -> Self {
        ExperimentConfig {
            dgp: DgpConfig::benchmark(d),
            ampute: AmputeConfig::new(mechanism, d),
            n_train: 500,
            n_calib: 250,
            n_test_marginal: 2000,
            n_test_per_group: 100,
            alpha: 0.1,
            methods: Method::ALL.to_vec(),
            reps: 50,
            master_seed: 2024,
            rho: DEFAULT_RHO,
            grouping: if d <= 3 { Grouping::ByMask } else { Grouping::ByPatternSize },
            workers: 0,
            pipeline: PipelineConfig::default(),
            group_budget: 10_000_000,
            reference_size: 100_000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.dgp.validate()?;
        let d = self.dgp.d;
        self.ampute.validate(d)?;
        let counts = [
            ("n_train", self.n_train),
            ("n_calib", self.n_calib),
            ("n_test_marginal", self.n_test_marginal),
            ("n_test_per_group", self.n_test_per_group),
            ("reps", self.reps),
            ("group_budget", self.group_budget),
            ("reference_size", self.reference_size),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        if self.n_train <= d + 1 {
            return Err(Error::Config(format!(
                "n_train = {} is too small for {d} covariates",
                self.n_train
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::Config(format!("rho must lie in (0, 1), got {}", self.rho)));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("no methods selected".into()));
        }
        let mut seen = self.methods.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.methods.len() {
            return Err(Error::Config("methods listed twice".into()));
        }
        Ok(())
    }

    /// Evaluation groups, excluding the marginal one. Only masks supported on
    /// the maskable columns are listed, and the all-missing mask is left out.
    pub fn groups(&self) -> Vec<GroupKey> {
        let d = self.dgp.d;
        let maskable = &self.ampute.maskable_columns;
        let max_size = maskable.len().min(d - 1);
        match self.grouping {
            Grouping::ByMask => Mask::enumerate(d)
                .into_iter()
                .filter(|m| m.size() <= max_size && m.mis_indices().iter().all(|j| maskable.contains(j)))
                .map(GroupKey::Mask)
                .collect(),
            Grouping::ByPatternSize => (0..=max_size).map(GroupKey::Size).collect(),
        }
    }

    fn needs(&self, kind: RegressorKind) -> bool {
        self.methods
            .iter()
            .any(|m| m.uses_quantile_pipeline() == (kind == RegressorKind::QuantilePair))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GroupKey {
    Marginal,
    Mask(Mask),
    /// Number of missing coordinates.
    Size(usize),
}

impl GroupKey {
    pub fn matches(&self, m: &Mask) -> bool {
        match self {
            GroupKey::Marginal => true,
            GroupKey::Mask(k) => k == m,
            GroupKey::Size(s) => m.size() == *s,
        }
    }

    /// `mar` for the marginal group, `[110]` for a mask, `2` for a size.
    pub fn label(&self) -> String {
        match self {
            GroupKey::Marginal => "mar".to_string(),
            GroupKey::Mask(m) => format!("[{m}]"),
            GroupKey::Size(s) => s.to_string(),
        }
    }
}

impl fmt::Display for GroupKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// One evaluated interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    pub rep: usize,
    pub method: Method,
    pub group: String,
    pub mask: Mask,
    pub y: f64,
    pub lower: f64,
    pub upper: f64,
    pub covered: bool,
}

impl PointRecord {
    pub fn length(&self) -> f64 {
        self.upper - self.lower
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub method: Method,
    pub group: String,
    pub coverage: f64,
    /// Mean over finite intervals; `None` when every interval was infinite.
    pub mean_length: Option<f64>,
    pub n_points: usize,
    pub n_infinite: usize,
    /// Repetitions that contributed at least one point.
    pub reps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<ReportRow>,
    pub warnings: Vec<String>,
}

impl EvalReport {
    pub fn row(&self, method: Method, group: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.method == method && r.group == group)
    }
}

/// Accepted group members and the number of candidates drawn.
#[derive(Debug, Clone)]
pub struct GroupDraw {
    pub samples: Vec<MaskedSample>,
    pub attempts: usize,
}

/// Draws complete points, masks them, and keeps those whose mask belongs to
/// `key` until `count` are accepted or `budget` candidates have been drawn.
pub fn mask_group_sampler<R: Rng + ?Sized>(
    gen: &GaussianLinear,
    amputer: &Amputer,
    key: &GroupKey,
    count: usize,
    budget: usize,
    rng: &mut R,
) -> Result<GroupDraw> {
    let mut samples = Vec::with_capacity(count);
    let mut attempts = 0;
    while samples.len() < count {
        if attempts == budget {
            return Err(Error::UnreachableGroup {
                group: key.label(),
                attempts,
                accepted: samples.len(),
            });
        }
        attempts += 1;
        let (x, y) = gen.draw(rng);
        let mask = amputer.draw_mask(&x, rng);
        if key.matches(&mask) {
            samples.push(MaskedSample::from_complete(&x, mask, Some(y))?);
        }
    }
    Ok(GroupDraw { samples, attempts })
}

struct RepOutput {
    records: Vec<PointRecord>,
    warnings: Vec<String>,
}

struct Shared<'a> {
    cfg: &'a ExperimentConfig,
    gen: GaussianLinear,
    amputer: Amputer,
    groups: Vec<GroupKey>,
}

fn draw_split(shared: &Shared, rep: u64, purpose: Purpose, n: usize) -> Result<MaskedDataset> {
    let mut rng = stream(shared.cfg.master_seed, rep, purpose);
    let data = shared.gen.sample(n, &mut rng);
    shared.amputer.apply(&data.x, Some(&data.y), &mut rng)
}

fn evaluate(
    engine: &mut IntervalEngine,
    methods: &[Method],
    rep: usize,
    group: &GroupKey,
    points: &[MaskedSample],
    records: &mut Vec<PointRecord>,
    flagged: &mut HashMap<(Method, &'static str), usize>,
) -> Result<()> {
    let label = group.label();
    for s in points {
        let y = s.y().expect("synthetic points carry responses");
        for &method in methods {
            let interval = engine.interval(method, s)?;
            if let Some(diag) = interval.diagnostic {
                *flagged.entry((method, diag.as_str())).or_default() += 1;
            }
            records.push(PointRecord {
                rep,
                method,
                group: label.clone(),
                mask: s.mask().clone(),
                y,
                lower: interval.lower(),
                upper: interval.upper(),
                covered: interval.contains(y),
            });
        }
    }
    Ok(())
}

fn run_rep(shared: &Shared, rep: usize) -> Result<RepOutput> {
    let cfg = shared.cfg;
    let r = rep as u64;
    let mut warnings = Vec::new();
    let train = draw_split(shared, r, Purpose::Train, cfg.n_train)?;
    let calib = draw_split(shared, r, Purpose::Calib, cfg.n_calib)?;

    let imputer = fit_chained_imputer(&train, cfg.pipeline.imputer_iters)?;
    if !imputer.all_missing_columns.is_empty() {
        warnings.push(format!(
            "rep {rep}: columns {:?} entirely missing in training",
            imputer.all_missing_columns
        ));
    }
    let fit = |kind| -> Result<Option<FittedPipeline>> {
        if !cfg.needs(kind) {
            return Ok(None);
        }
        FittedPipeline::fit_with_imputer(&train, imputer.clone(), kind, cfg.alpha, &cfg.pipeline).map(Some)
    };
    let mean = fit(RegressorKind::LeastSquares)?;
    let quantile = fit(RegressorKind::QuantilePair)?;
    if let Some(FittedRegressor::Quantile { converged: false, .. }) = quantile.as_ref().map(|p| &p.regressor) {
        warnings.push(format!("rep {rep}: quantile regression stopped at the iteration cap"));
    }

    let bandwidth = if cfg.methods.contains(&Method::Lcp) {
        let pooled = train.concat(&calib)?;
        median_pairwise_bandwidth(pooled.samples(), &train.spans())?
    } else {
        1.0
    };
    let engine_cfg = EngineConfig {
        alpha: cfg.alpha,
        rho: cfg.rho,
        kernel: KernelSpec::gaussian(bandwidth)?,
    };
    let mut engine = IntervalEngine::new(&train, &calib, mean.as_ref(), quantile.as_ref(), engine_cfg)?;

    let mut records = Vec::new();
    let mut flagged = HashMap::new();
    let marginal = draw_split(shared, r, Purpose::MarginalTest, cfg.n_test_marginal)?;
    evaluate(
        &mut engine,
        &cfg.methods,
        rep,
        &GroupKey::Marginal,
        marginal.samples(),
        &mut records,
        &mut flagged,
    )?;

    for (k, key) in shared.groups.iter().enumerate() {
        let mut rng = stream(cfg.master_seed, r, Purpose::Group(k as u32));
        match mask_group_sampler(&shared.gen, &shared.amputer, key, cfg.n_test_per_group, cfg.group_budget, &mut rng) {
            Ok(draw) => evaluate(&mut engine, &cfg.methods, rep, key, &draw.samples, &mut records, &mut flagged)?,
            Err(Error::UnreachableGroup { group, attempts, accepted }) => warnings.push(format!(
                "rep {rep}: group {group} dropped after {attempts} draws ({accepted} accepted)"
            )),
            Err(e) => return Err(e),
        }
    }

    let mut flagged: Vec<_> = flagged.into_iter().collect();
    flagged.sort();
    for ((method, diag), n) in flagged {
        warnings.push(format!("rep {rep}: {n} {method} intervals flagged {diag}"));
    }
    Ok(RepOutput { records, warnings })
}

#[derive(Default)]
struct Accum {
    n: usize,
    covered: usize,
    n_infinite: usize,
    length_sum: f64,
    last_rep: Option<usize>,
    reps: usize,
}

fn aggregate(cfg: &ExperimentConfig, groups: &[GroupKey], outputs: &[RepOutput]) -> EvalReport {
    let labels: Vec<String> = std::iter::once(GroupKey::Marginal)
        .chain(groups.iter().cloned())
        .map(|g| g.label())
        .collect();
    let mut acc: HashMap<(Method, &str), Accum> = HashMap::new();
    let mut warnings = Vec::new();
    for out in outputs {
        for rec in &out.records {
            let a = acc.entry((rec.method, rec.group.as_str())).or_default();
            a.n += 1;
            a.covered += usize::from(rec.covered);
            let len = rec.length();
            if len.is_finite() {
                a.length_sum += len;
            } else {
                a.n_infinite += 1;
            }
            if a.last_rep != Some(rec.rep) {
                a.last_rep = Some(rec.rep);
                a.reps += 1;
            }
        }
        warnings.extend(out.warnings.iter().cloned());
    }
    let mut rows = Vec::new();
    for &method in &cfg.methods {
        for label in &labels {
            let Some(a) = acc.get(&(method, label.as_str())) else {
                continue;
            };
            let finite = a.n - a.n_infinite;
            rows.push(ReportRow {
                method,
                group: label.clone(),
                coverage: a.covered as f64 / a.n as f64,
                mean_length: (finite > 0).then(|| a.length_sum / finite as f64),
                n_points: a.n,
                n_infinite: a.n_infinite,
                reps: a.reps,
            });
        }
    }
    EvalReport { rows, warnings }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<EvalReport> {
    Ok(run_experiment_with_records(cfg)?.0)
}

/// Runs the experiment and also returns every evaluated interval, ordered by
/// repetition, group, test point and method.
pub fn run_experiment_with_records(cfg: &ExperimentConfig) -> Result<(EvalReport, Vec<PointRecord>)> {
    cfg.validate()?;
    let gen = GaussianLinear::new(cfg.dgp.clone())?;
    let reference = gen.sample(cfg.reference_size, &mut stream(cfg.master_seed, 0, Purpose::AmputeReference));
    let amputer = Amputer::calibrate(&cfg.ampute, &reference.x)?;
    let shared = Shared {
        cfg,
        gen,
        amputer,
        groups: cfg.groups(),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let outputs: Vec<RepOutput> =
        pool.install(|| (0..cfg.reps).into_par_iter().map(|rep| run_rep(&shared, rep)).collect::<Result<_>>())?;
    let report = aggregate(cfg, &shared.groups, &outputs);
    let records = outputs.into_iter().flat_map(|o| o.records).collect();
    Ok((report, records))
}
