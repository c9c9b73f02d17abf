use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Args;
use cpmiss::conformal::{EngineConfig, IntervalEngine, DEFAULT_RHO};
use cpmiss::data::{MaskedDataset, MaskedSample};
use cpmiss::harness::{run_experiment_with_records, Grouping, PointRecord};
use cpmiss::metrics::{median_pairwise_bandwidth, KernelSpec};
use cpmiss::models::{fit_chained_imputer, FittedPipeline, PipelineConfig, RegressorKind};
use cpmiss::rng::{stream, Purpose};
use cpmiss::{Mask, Method};
use rand::seq::SliceRandom;

use crate::config::{FileConfig, Overrides};
use crate::csvio::{self, fixed6, Table, DEFAULT_NA};
use crate::error::{internal_io, user_io, CliError, CliResult};

#[derive(Debug, Clone, Args)]
pub struct SynthBenchArgs {
    /// TOML experiment file; omitted keys use the benchmark defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub rho: Option<f64>,
    /// Comma-separated subset of cp, cqr, cqr_mda_exact, nexcp, lcp.
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
    #[arg(long)]
    pub reps: Option<usize>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub d: Option<usize>,
    /// mcar, mar or mnar.
    #[arg(long)]
    pub mechanism: Option<String>,
    #[arg(long)]
    pub rate: Option<f64>,
    #[arg(long)]
    pub n_train: Option<usize>,
    #[arg(long)]
    pub n_calib: Option<usize>,
    #[arg(long)]
    pub n_test_marginal: Option<usize>,
    #[arg(long)]
    pub n_test_per_group: Option<usize>,
    /// by_mask or by_pattern_size.
    #[arg(long)]
    pub grouping: Option<Grouping>,
    #[arg(long)]
    pub imputer_iters: Option<usize>,
    #[arg(long)]
    pub group_budget: Option<usize>,
    #[arg(long)]
    pub reference_size: Option<usize>,
    /// Comma-separated regression coefficients, one per column.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub beta: Option<Vec<f64>>,
    /// Comma-separated covariate means.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub mu: Option<Vec<f64>>,
    #[arg(long, allow_hyphen_values = true)]
    pub phi: Option<f64>,
    #[arg(long)]
    pub noise_sd: Option<f64>,
    /// Comma-separated zero-based column indices.
    #[arg(long, value_delimiter = ',')]
    pub maskable_columns: Option<Vec<usize>>,
    #[arg(long)]
    pub mnar_steepness: Option<f64>,
    #[arg(long)]
    pub mar_steepness: Option<f64>,
    /// Directory for report.csv and report.json.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Also write every evaluated interval to points.csv.
    #[arg(long)]
    pub dump_points: bool,
}

pub fn synth_bench(args: &SynthBenchArgs) -> CliResult<()> {
    let mut file = match &args.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    file.apply(&Overrides {
        seed: args.seed,
        alpha: args.alpha,
        rho: args.rho,
        methods: args.methods.clone(),
        reps: args.reps,
        workers: args.workers,
        d: args.d,
        mechanism: args.mechanism.clone(),
        rate: args.rate,
        n_train: args.n_train,
        n_calib: args.n_calib,
        n_test_marginal: args.n_test_marginal,
        n_test_per_group: args.n_test_per_group,
        grouping: args.grouping,
        imputer_iters: args.imputer_iters,
        group_budget: args.group_budget,
        reference_size: args.reference_size,
        beta: args.beta.clone(),
        mu: args.mu.clone(),
        phi: args.phi,
        noise_sd: args.noise_sd,
        maskable_columns: args.maskable_columns.clone(),
        mnar_steepness: args.mnar_steepness,
        mar_steepness: args.mar_steepness,
    });
    let cfg = file.to_experiment()?;
    let (report, records) = run_experiment_with_records(&cfg)?;
    for w in &report.warnings {
        log::warn!("{w}");
    }

    std::fs::create_dir_all(&args.out).map_err(|e| user_io(&args.out, e))?;
    let csv_path = args.out.join("report.csv");
    csvio::write_report_csv(csvio::create(&csv_path)?, &report)?;

    let json = serde_json::json!({
        "seed": cfg.master_seed,
        "config": cfg,
        "rows": report.rows,
        "warnings": report.warnings,
    });
    let json_path = args.out.join("report.json");
    let mut f = csvio::create(&json_path)?;
    serde_json::to_writer_pretty(&mut f, &json).map_err(|e| internal_io(&json_path, e))?;
    writeln!(f).map_err(|e| internal_io(&json_path, e))?;

    if args.dump_points {
        write_points(&args.out.join("points.csv"), &records)?;
    }
    Ok(())
}

fn write_points(path: &Path, records: &[PointRecord]) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(csvio::create(path)?);
    let io = |e: csv::Error| internal_io(path, e);
    w.write_record(["rep", "method", "group", "mask", "y", "lower", "upper", "covered"])
        .map_err(io)?;
    for r in records {
        w.write_record([
            r.rep.to_string(),
            r.method.to_string(),
            r.group.clone(),
            r.mask.to_string(),
            r.y.to_string(),
            r.lower.to_string(),
            r.upper.to_string(),
            u8::from(r.covered).to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| internal_io(path, e))
}

#[derive(Debug, Clone, Args)]
pub struct PredictArgs {
    /// Training CSV with covariates and the response.
    #[arg(long)]
    pub train: PathBuf,
    /// Query CSV with the same covariate columns.
    #[arg(long)]
    pub query: PathBuf,
    #[arg(long)]
    pub method: String,
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    #[arg(long, default_value_t = DEFAULT_RHO)]
    pub rho: f64,
    #[arg(long, default_value = DEFAULT_NA)]
    pub na_token: String,
    /// Response column; defaults to the last column of the training file.
    #[arg(long)]
    pub response: Option<String>,
    /// Seed for the training/calibration split.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Split in file order: the first two thirds train, the rest calibrate.
    #[arg(long)]
    pub no_shuffle: bool,
    /// Output CSV; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// One output row of `predict`.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryInterval {
    pub row: usize,
    pub center: f64,
    pub lower: f64,
    pub upper: f64,
    pub flag: Option<&'static str>,
}

pub fn predict_intervals(args: &PredictArgs) -> CliResult<Vec<QueryInterval>> {
    let method: Method = args.method.parse()?;
    let train_tab = csvio::read_table(&args.train, &args.na_token)?;
    let query_tab = csvio::read_table(&args.query, &args.na_token)?;

    let response_col = match &args.response {
        Some(name) => train_tab
            .column(name)
            .ok_or_else(|| CliError::User(format!("training file has no column {name:?}")))?,
        None => train_tab.headers.len() - 1,
    };
    let features: Vec<usize> = (0..train_tab.headers.len()).filter(|&j| j != response_col).collect();
    if features.is_empty() {
        return Err(CliError::User("training file has no covariate columns".into()));
    }
    let response_name = &train_tab.headers[response_col];
    let query_cols = features
        .iter()
        .map(|&j| {
            let name = &train_tab.headers[j];
            query_tab
                .column(name)
                .ok_or_else(|| CliError::User(format!("schema mismatch: query file lacks column {name:?}")))
        })
        .collect::<CliResult<Vec<_>>>()?;
    if let Some(extra) = query_tab
        .headers
        .iter()
        .find(|h| *h != response_name && !features.iter().any(|&j| &train_tab.headers[j] == *h))
    {
        return Err(CliError::User(format!(
            "schema mismatch: query column {extra:?} is not in the training file"
        )));
    }

    let samples = training_samples(&train_tab, &features, response_col, &args.train)?;
    let queries = query_samples(&query_tab, &query_cols, &args.query)?;
    let d = features.len();
    let n = samples.len();
    let n_fit = (2 * n).div_ceil(3);
    if n_fit <= d + 1 || n_fit == n {
        return Err(CliError::User(format!(
            "{n} usable training rows are too few to fit {d} covariates and keep a calibration third"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    if !args.no_shuffle {
        order.shuffle(&mut stream(args.seed, 0, Purpose::Split));
    }
    let pick = |idx: &[usize]| MaskedDataset::new(d, idx.iter().map(|&i| samples[i].clone()).collect());
    let train = pick(&order[..n_fit])?;
    let calib = pick(&order[n_fit..])?;

    let pc = PipelineConfig::default();
    let imputer = fit_chained_imputer(&train, pc.imputer_iters)?;
    for &j in &imputer.all_missing_columns {
        log::warn!(
            "column {:?} is entirely missing in the training split; imputing 0",
            train_tab.headers[features[j]]
        );
    }
    let kind = if method.uses_quantile_pipeline() {
        RegressorKind::QuantilePair
    } else {
        RegressorKind::LeastSquares
    };
    let pipeline = FittedPipeline::fit_with_imputer(&train, imputer, kind, args.alpha, &pc)?;
    let bandwidth = if method == Method::Lcp {
        median_pairwise_bandwidth(train.concat(&calib)?.samples(), &train.spans())?
    } else {
        1.0
    };
    let cfg = EngineConfig {
        alpha: args.alpha,
        rho: args.rho,
        kernel: KernelSpec::gaussian(bandwidth)?,
    };
    let mut engine = IntervalEngine::new(&train, &calib, Some(&pipeline), Some(&pipeline), cfg)?;
    queries
        .iter()
        .enumerate()
        .map(|(i, q)| {
            let iv = engine.interval(method, q)?;
            Ok(QueryInterval {
                row: i + 1,
                center: iv.center,
                lower: iv.lower(),
                upper: iv.upper(),
                flag: iv.diagnostic.map(|d| d.as_str()),
            })
        })
        .collect()
}

fn training_samples(tab: &Table, features: &[usize], response: usize, path: &Path) -> CliResult<Vec<MaskedSample>> {
    let mut out = Vec::new();
    let mut dropped = 0;
    for (row, line) in tab.rows.iter().zip(&tab.lines) {
        let Some(y) = row[response] else {
            dropped += 1;
            continue;
        };
        let x: Vec<Option<f64>> = features.iter().map(|&j| row[j]).collect();
        if !y.is_finite() || x.iter().flatten().any(|v| !v.is_finite()) {
            return Err(CliError::User(format!("{}: line {line}: non-finite value", path.display())));
        }
        out.push(MaskedSample::new(x, Some(y)));
    }
    if dropped > 0 {
        log::warn!("{}: dropped {dropped} rows without a response", path.display());
    }
    Ok(out)
}

fn query_samples(tab: &Table, cols: &[usize], path: &Path) -> CliResult<Vec<MaskedSample>> {
    tab.rows
        .iter()
        .zip(&tab.lines)
        .map(|(row, line)| {
            let x: Vec<Option<f64>> = cols.iter().map(|&j| row[j]).collect();
            if x.iter().flatten().any(|v| !v.is_finite()) {
                return Err(CliError::User(format!("{}: line {line}: non-finite value", path.display())));
            }
            Ok(MaskedSample::new(x, None))
        })
        .collect()
}

pub fn predict(args: &PredictArgs) -> CliResult<()> {
    let rows = predict_intervals(args)?;
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        let io = |e: csv::Error| CliError::Internal(format!("writing intervals: {e}"));
        w.write_record(["row", "center", "lower", "upper", "flag"]).map_err(io)?;
        for r in &rows {
            w.write_record([
                r.row.to_string(),
                r.center.to_string(),
                r.lower.to_string(),
                r.upper.to_string(),
                r.flag.unwrap_or("").to_string(),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|e| CliError::Internal(e.to_string()))?;
    }
    emit(args.out.as_deref(), &buf)
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> CliResult<()> {
    match out {
        Some(path) => std::fs::write(path, bytes).map_err(|e| internal_io(path, e)),
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|e| CliError::Internal(format!("stdout: {e}"))),
    }
}

#[derive(Debug, Clone, Args)]
pub struct AuditArgs {
    /// CSV with y_true, lower, upper and either a `mask` column of 0/1
    /// digits or one 0/1 column per covariate.
    #[arg(long)]
    pub intervals: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditRow {
    pub group: String,
    pub coverage: f64,
    pub mean_length: Option<f64>,
    pub n_points: usize,
    pub n_infinite: usize,
}

#[derive(Default)]
struct Tally {
    n: usize,
    covered: usize,
    n_infinite: usize,
    length_sum: f64,
}

impl Tally {
    fn add(&mut self, y: f64, lower: f64, upper: f64) {
        self.n += 1;
        self.covered += usize::from(lower <= y && y <= upper);
        let len = upper - lower;
        if len.is_finite() {
            self.length_sum += len;
        } else {
            self.n_infinite += 1;
        }
    }

    fn row(&self, group: String) -> AuditRow {
        let finite = self.n - self.n_infinite;
        AuditRow {
            group,
            coverage: self.covered as f64 / self.n as f64,
            mean_length: (finite > 0).then(|| self.length_sum / finite as f64),
            n_points: self.n,
            n_infinite: self.n_infinite,
        }
    }
}

/// Marginal row first, then one row per mask in lexicographic order.
pub fn audit_rows(path: &Path) -> CliResult<Vec<AuditRow>> {
    let file = std::fs::File::open(path).map_err(|e| user_io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(file);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| user_io(path, e))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::User(format!("{}: missing column {name:?}", path.display())))
    };
    let (cy, cl, cu) = (col("y_true")?, col("lower")?, col("upper")?);
    let mask_col = headers.iter().position(|h| h == "mask");
    let bit_cols: Vec<usize> = match mask_col {
        Some(_) => vec![],
        None => (0..headers.len()).filter(|j| ![cy, cl, cu].contains(j)).collect(),
    };

    let mut marginal = Tally::default();
    let mut by_mask: BTreeMap<Mask, Tally> = BTreeMap::new();
    let mut problems = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| user_io(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != headers.len() {
            problems.push(format!("line {line}: expected {} fields, found {}", headers.len(), record.len()));
            continue;
        }
        let num = |j: usize| record[j].trim().parse::<f64>().ok().filter(|v| !v.is_nan());
        let (Some(y), Some(lower), Some(upper)) = (num(cy), num(cl), num(cu)) else {
            problems.push(format!("line {line}: y_true, lower and upper must be numbers"));
            continue;
        };
        if !y.is_finite() || lower > upper {
            problems.push(format!("line {line}: need finite y_true and lower <= upper"));
            continue;
        }
        let mask = match mask_col {
            Some(j) => Mask::parse(record[j].trim()).ok(),
            None if bit_cols.is_empty() => None,
            None => bit_cols
                .iter()
                .map(|&j| match record[j].trim() {
                    "0" => Some(false),
                    "1" => Some(true),
                    _ => None,
                })
                .collect::<Option<Vec<bool>>>()
                .map(Mask::new),
        };
        let has_mask = mask_col.is_some() || !bit_cols.is_empty();
        if has_mask && mask.is_none() {
            problems.push(format!("line {line}: mask must be 0/1 digits"));
            continue;
        }
        marginal.add(y, lower, upper);
        if let Some(m) = mask {
            by_mask.entry(m).or_default().add(y, lower, upper);
        }
    }
    if !problems.is_empty() {
        return Err(CliError::User(format!("{}:\n  {}", path.display(), problems.join("\n  "))));
    }
    if marginal.n == 0 {
        return Err(CliError::User(format!("{}: no interval rows", path.display())));
    }
    let mut rows = vec![marginal.row("mar".into())];
    rows.extend(by_mask.iter().map(|(m, t)| t.row(format!("[{m}]"))));
    Ok(rows)
}

pub fn audit(args: &AuditArgs) -> CliResult<()> {
    let rows = audit_rows(&args.intervals)?;
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        let io = |e: csv::Error| CliError::Internal(format!("writing audit: {e}"));
        w.write_record(["group", "coverage", "mean_length", "n_points", "n_infinite"])
            .map_err(io)?;
        for r in &rows {
            w.write_record([
                r.group.clone(),
                fixed6(r.coverage),
                r.mean_length.map_or_else(|| "NA".to_string(), fixed6),
                r.n_points.to_string(),
                r.n_infinite.to_string(),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|e| CliError::Internal(e.to_string()))?;
    }
    emit(args.out.as_deref(), &buf)
}
