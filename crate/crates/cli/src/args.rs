//! Flag definitions and everything that can be checked without touching
//! the file system.

use std::fmt;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use kgacc::bench::ReportFormat;
use kgacc::datasets::{self, DatasetProfile};
use kgacc::evaluator::{EvalConfig, IntervalMethod, SamplingDesign};
use kgacc::intervals::Method;
use kgacc::BetaParams;
use serde::Deserialize;

/// Bad flags or flag combinations (exit code 2).
#[derive(Debug)]
pub struct Usage(pub String);

/// The command ran but missed its goal (exit code 3).
#[derive(Debug)]
pub struct Unmet(pub String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for Unmet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}
impl std::error::Error for Unmet {}

fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Usage(msg.into()).into())
}

#[derive(Debug, Parser)]
#[command(
    name = "kgacc",
    version,
    about = "Efficient accuracy audits for knowledge graphs"
)]
pub struct Cli {
    /// Directory for output files when no explicit path is given.
    #[arg(long, global = true, env = "KGACC_OUT_DIR", value_name = "DIR")]
    pub out_dir: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a labelled synthetic knowledge graph as TSV.
    Generate(GenerateArgs),
    /// Run one audit and print the estimate.
    Evaluate(EvaluateArgs),
    /// Repeat audits with oracle labels and report summary statistics.
    Bench(BenchArgs),
    /// Tabulate the expected credible-interval width of several priors.
    PriorWidth(PriorWidthArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Number of entity clusters.
    #[arg(long)]
    pub clusters: usize,
    /// Mean triples per cluster (at least 1).
    #[arg(long)]
    pub mean_size: f64,
    /// Probability that a triple is correct.
    #[arg(long)]
    pub mu: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output TSV path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
#[group(required = true, multiple = false)]
pub struct SourceArgs {
    /// Dataset TSV: subject, predicate, object and an optional 0/1 label.
    #[arg(long, value_name = "PATH")]
    pub data: Option<PathBuf>,
    /// Built-in dataset profile (yago, nell, dbpedia, factbench).
    #[arg(long, value_name = "NAME")]
    pub dataset: Option<String>,
}

#[derive(Debug, Clone)]
pub enum DataSource {
    Profile(DatasetProfile),
    File(PathBuf),
}

impl DataSource {
    /// Identity used to load each dataset once per bench run.
    pub fn key(&self) -> String {
        match self {
            DataSource::Profile(p) => format!("profile:{}", p.name),
            DataSource::File(path) => format!("file:{}", path.display()),
        }
    }
}

impl SourceArgs {
    pub fn resolve(&self) -> Result<DataSource> {
        match (&self.data, &self.dataset) {
            (Some(p), None) => Ok(DataSource::File(p.clone())),
            (None, Some(name)) => profile(name),
            _ => usage("give exactly one of --data and --dataset"),
        }
    }
}

fn profile(name: &str) -> Result<DataSource> {
    match datasets::by_name(name) {
        Some(p) => Ok(DataSource::Profile(p)),
        None => usage(format!(
            "unknown dataset {name:?}; built-in profiles are {}",
            datasets::ALL.map(|p| p.name).join(", ")
        )),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Sampling {
    Srs,
    Twcs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodName {
    Wald,
    Wilson,
    Et,
    Hpd,
    Ahpd,
}

#[derive(Debug, Clone, Args)]
pub struct MethodArgs {
    #[arg(long, value_enum, default_value = "srs")]
    pub sampling: Sampling,
    /// Triples drawn per selected cluster under twcs.
    #[arg(long, default_value_t = 3)]
    pub m: usize,
    #[arg(long, value_enum, default_value = "ahpd")]
    pub method: MethodName,
    /// Comma-separated priors: kerman, jeffreys, uniform or a:b.
    #[arg(long, value_delimiter = ',')]
    pub priors: Vec<String>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Stop once the margin of error is at most this.
    #[arg(long, default_value_t = 0.05)]
    pub epsilon: f64,
    /// First batch: triples for srs, clusters for twcs.
    #[arg(long)]
    pub initial_batch: Option<usize>,
    /// Later batches: triples for srs, clusters for twcs.
    #[arg(long)]
    pub step_batch: Option<usize>,
    /// Seconds to identify an entity.
    #[arg(long, default_value_t = 45.0)]
    pub c1: f64,
    /// Seconds to verify a triple.
    #[arg(long, default_value_t = 25.0)]
    pub c2: f64,
    /// Stop after this many annotations.
    #[arg(long)]
    pub max_annotations: Option<usize>,
}

impl MethodArgs {
    /// et and hpd without `--priors` fall back to the uniform prior.
    pub fn uses_default_prior(&self) -> bool {
        matches!(self.method, MethodName::Et | MethodName::Hpd) && self.priors.is_empty()
    }

    pub fn config(&self) -> Result<EvalConfig> {
        self.config_for(self.sampling, self.method, true)
    }

    /// `strict_priors` rejects `--priors` for methods that take none; bench
    /// matrices mix methods, so there they are just not applied.
    pub fn config_for(
        &self,
        sampling: Sampling,
        method: MethodName,
        strict_priors: bool,
    ) -> Result<EvalConfig> {
        let priors = parse_priors(&self.priors)?;
        let interval = match method {
            MethodName::Wald | MethodName::Wilson if strict_priors && !priors.is_empty() => {
                return usage("--priors only applies to et, hpd and ahpd");
            }
            MethodName::Wald => IntervalMethod::Wald,
            MethodName::Wilson => IntervalMethod::Wilson,
            MethodName::Et | MethodName::Hpd => {
                let prior = match priors.as_slice() {
                    [] => BetaParams::UNIFORM,
                    [p] => *p,
                    _ => return usage("et and hpd take a single prior; use ahpd for several"),
                };
                if method == MethodName::Et {
                    IntervalMethod::Et(prior)
                } else {
                    IntervalMethod::Hpd(prior)
                }
            }
            MethodName::Ahpd if priors.is_empty() => IntervalMethod::ahpd_default(),
            MethodName::Ahpd => IntervalMethod::Ahpd(priors),
        };
        let design = match sampling {
            Sampling::Srs => SamplingDesign::Srs,
            Sampling::Twcs => SamplingDesign::Twcs { m: self.m },
        };
        let mut cfg = EvalConfig::new(design, interval);
        cfg.alpha = self.alpha;
        cfg.epsilon = self.epsilon;
        if let Some(b) = self.initial_batch {
            cfg.initial_batch = b;
        }
        if let Some(b) = self.step_batch {
            cfg.step_batch = b;
        }
        cfg.cost_c1 = self.c1;
        cfg.cost_c2 = self.c2;
        cfg.max_annotations = self.max_annotations;
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn parse_priors(specs: &[String]) -> Result<Vec<BetaParams>> {
    specs.iter().map(|s| parse_prior(s.trim())).collect()
}

fn parse_prior(s: &str) -> Result<BetaParams> {
    match s.to_ascii_lowercase().as_str() {
        "kerman" => return Ok(BetaParams::KERMAN),
        "jeffreys" => return Ok(BetaParams::JEFFREYS),
        "uniform" => return Ok(BetaParams::UNIFORM),
        _ => {}
    }
    let parsed = s
        .split_once(':')
        .and_then(|(a, b)| Some((a.trim().parse().ok()?, b.trim().parse().ok()?)));
    match parsed.map(|(a, b)| BetaParams::new(a, b)) {
        Some(Ok(p)) => Ok(p),
        _ => usage(format!(
            "bad prior {s:?}: expected kerman, jeffreys, uniform or a:b with a, b > 0"
        )),
    }
}

/// Short name used in output headers.
pub fn prior_label(p: BetaParams) -> String {
    if p == BetaParams::KERMAN {
        "kerman".into()
    } else if p == BetaParams::JEFFREYS {
        "jeffreys".into()
    } else if p == BetaParams::UNIFORM {
        "uniform".into()
    } else {
        format!("{}:{}", p.a(), p.b())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Annotator {
    /// Labels stored in the dataset.
    Oracle,
    /// Ask on the terminal.
    Interactive,
    /// Labels from a separate TSV (see --labels).
    File,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub method: MethodArgs,
    #[arg(long, value_enum, default_value = "oracle")]
    pub annotator: Annotator,
    /// Label file for --annotator file: subject, predicate, object, 0/1.
    #[arg(long, value_name = "PATH")]
    pub labels: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write per-iteration rows to this CSV file.
    #[arg(long, value_name = "PATH")]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Dataset TSV.
    #[arg(long, value_name = "PATH", conflicts_with_all = ["dataset", "matrix"])]
    pub data: Option<PathBuf>,
    /// Built-in dataset profile.
    #[arg(long, value_name = "NAME", conflicts_with = "matrix")]
    pub dataset: Option<String>,
    /// TOML file listing `datasets`, `methods` and optionally `samplings`;
    /// every combination becomes one report row.
    #[arg(long, value_name = "PATH")]
    pub matrix: Option<PathBuf>,
    #[command(flatten)]
    pub method: MethodArgs,
    /// Replications per cell.
    #[arg(long)]
    pub reps: usize,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Report path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Report format (default: from the --out extension, else csv).
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Include per-run vectors in JSON reports.
    #[arg(long)]
    pub raw: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Matrix {
    datasets: Vec<String>,
    methods: Vec<MethodName>,
    #[serde(default)]
    samplings: Vec<Sampling>,
}

impl<'de> Deserialize<'de> for MethodName {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        MethodName::from_str(&s, true).map_err(serde::de::Error::custom)
    }
}

impl<'de> Deserialize<'de> for Sampling {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Sampling::from_str(&s, true).map_err(serde::de::Error::custom)
    }
}

impl BenchArgs {
    /// Expands the flags or the matrix file into validated cells.
    pub fn cells(&self) -> Result<Vec<(DataSource, MethodArgs)>> {
        let Some(path) = &self.matrix else {
            let source = match (&self.data, &self.dataset) {
                (Some(p), None) => DataSource::File(p.clone()),
                (None, Some(n)) => profile(n)?,
                _ => return usage("give one of --data, --dataset or --matrix"),
            };
            self.method.config()?;
            return Ok(vec![(source, self.method.clone())]);
        };
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let matrix: Matrix = toml::from_str(&text)
            .map_err(|e| Usage(format!("{}: {}", path.display(), e.message())))?;
        if matrix.datasets.is_empty() || matrix.methods.is_empty() {
            return usage(format!(
                "{}: datasets and methods must be non-empty",
                path.display()
            ));
        }
        let samplings = if matrix.samplings.is_empty() {
            vec![self.method.sampling]
        } else {
            matrix.samplings
        };
        let mut cells = Vec::new();
        for d in &matrix.datasets {
            // a built-in name wins, anything else is a file relative to the matrix
            let source = match datasets::by_name(d) {
                Some(p) => DataSource::Profile(p),
                None => DataSource::File(path.parent().unwrap_or(".".as_ref()).join(d)),
            };
            for &s in &samplings {
                for &m in &matrix.methods {
                    self.method.config_for(s, m, false)?;
                    let mut args = self.method.clone();
                    args.sampling = s;
                    args.method = m;
                    if matches!(m, MethodName::Wald | MethodName::Wilson) {
                        args.priors.clear();
                    }
                    cells.push((source.clone(), args));
                }
            }
        }
        Ok(cells)
    }

    pub fn report_format(&self) -> ReportFormat {
        let json = match self.format {
            Some(f) => f == Format::Json,
            None => self
                .out
                .as_ref()
                .and_then(|p| p.extension())
                .is_some_and(|e| e.eq_ignore_ascii_case("json")),
        };
        if json {
            ReportFormat::Json
        } else {
            ReportFormat::Csv
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WidthMethod {
    Et,
    Hpd,
}

impl From<WidthMethod> for Method {
    fn from(m: WidthMethod) -> Method {
        match m {
            WidthMethod::Et => Method::Et,
            WidthMethod::Hpd => Method::Hpd,
        }
    }
}

#[derive(Debug, Args)]
pub struct PriorWidthArgs {
    /// Annotated sample size.
    #[arg(long, default_value_t = 30)]
    pub n: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, value_delimiter = ',', default_value = "kerman,jeffreys,uniform")]
    pub priors: Vec<String>,
    #[arg(long, value_enum, default_value = "hpd")]
    pub method: WidthMethod,
    /// Output CSV path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Exit with code 3 unless jeffreys is strictly wider than the best
    /// other prior at every grid point.
    #[arg(long)]
    pub assert_jeffreys_dominated: bool,
}
