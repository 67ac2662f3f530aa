//! Monte Carlo replication, significance tests and the prior-width study.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluator::{run_evaluation, EvalConfig, EvalReport, OracleAnnotator};
use crate::intervals::{et_cri, hpd_cri, posterior_update, Method};
use crate::kg::KnowledgeGraph;
use crate::special::{ln_gamma, student_t_sf, BetaParams};

/// Per-run outcomes, kept for significance tests.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RawRuns {
    pub triples: Vec<f64>,
    pub entities: Vec<f64>,
    pub cost_hours: Vec<f64>,
    pub mu_hat: Vec<f64>,
    pub final_moe: Vec<f64>,
    pub converged: Vec<bool>,
}

impl RawRuns {
    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    fn push(&mut self, r: &EvalReport) {
        self.triples.push(r.n_triples as f64);
        self.entities.push(r.n_entities as f64);
        self.cost_hours.push(r.cost_hours);
        self.mu_hat.push(r.mu_hat);
        self.final_moe.push(r.interval.map_or(f64::NAN, |i| i.moe));
        self.converged.push(r.converged());
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationSummary {
    pub method: String,
    pub dataset: String,
    pub sampling: String,
    pub alpha: f64,
    pub epsilon: f64,
    pub repetitions: usize,
    pub base_seed: u64,
    pub triples_mean: f64,
    pub triples_std: f64,
    pub cost_hours_mean: f64,
    pub cost_hours_std: f64,
    pub entities_mean: f64,
    pub mu_hat_mean: f64,
    pub converged_fraction: f64,
    /// Runs that ended in an error rather than a report.
    pub failures: usize,
    pub config: EvalConfig,
    #[serde(default, skip_serializing_if = "RawRuns::is_empty")]
    pub raw: RawRuns,
}

impl ReplicationSummary {
    pub fn without_raw(&self) -> Self {
        ReplicationSummary {
            raw: RawRuns::default(),
            ..self.clone()
        }
    }
}

/// Mean and sample standard deviation (`n - 1` denominator, 0 when n < 2).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
    (mean, (ss / (n - 1) as f64).sqrt())
}

/// Generator for run `index` of a replication seeded with `base_seed`:
/// one ChaCha key, one stream per run.
pub fn run_rng(base_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(index);
    rng
}

/// Runs `reps` oracle-annotated evaluations on the global rayon pool.
pub fn replicate(
    kg: &KnowledgeGraph,
    dataset: &str,
    config: &EvalConfig,
    reps: usize,
    base_seed: u64,
) -> Result<ReplicationSummary> {
    if reps == 0 {
        return Err(Error::Config("repetitions must be >= 1".into()));
    }
    config.validate()?;
    OracleAnnotator::new(kg)?;
    let mut cfg = config.clone();
    cfg.record_trace = false;
    let reports: Vec<Result<EvalReport>> = (0..reps)
        .into_par_iter()
        .map(|i| {
            let ann = OracleAnnotator::new(kg)?;
            run_evaluation(kg, &cfg, ann, &mut run_rng(base_seed, i as u64))
        })
        .collect();
    Ok(summarize(dataset, config, base_seed, &reports))
}

/// [`replicate`] on a dedicated pool of `workers` threads.
pub fn replicate_with_workers(
    kg: &KnowledgeGraph,
    dataset: &str,
    config: &EvalConfig,
    reps: usize,
    base_seed: u64,
    workers: usize,
) -> Result<ReplicationSummary> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| replicate(kg, dataset, config, reps, base_seed))
}

fn summarize(
    dataset: &str,
    config: &EvalConfig,
    base_seed: u64,
    reports: &[Result<EvalReport>],
) -> ReplicationSummary {
    let mut raw = RawRuns::default();
    let mut failures = 0;
    for r in reports {
        match r {
            Ok(rep) => raw.push(rep),
            Err(_) => failures += 1,
        }
    }
    let (triples_mean, triples_std) = mean_std(&raw.triples);
    let (cost_hours_mean, cost_hours_std) = mean_std(&raw.cost_hours);
    let converged = raw.converged.iter().filter(|&&c| c).count();
    ReplicationSummary {
        method: config.method.tag().into(),
        dataset: dataset.into(),
        sampling: config.sampling.tag().into(),
        alpha: config.alpha,
        epsilon: config.epsilon,
        repetitions: reports.len(),
        base_seed,
        triples_mean,
        triples_std,
        cost_hours_mean,
        cost_hours_std,
        entities_mean: mean_std(&raw.entities).0,
        mu_hat_mean: mean_std(&raw.mu_hat).0,
        converged_fraction: converged as f64 / reports.len() as f64,
        failures,
        config: config.clone(),
        raw,
    }
}

/// Welch two-sample t-test. Returns `(t, two-sided p)`.
pub fn t_test(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::Degenerate(
            "each sample needs at least 2 values".into(),
        ));
    }
    let (ma, sa) = mean_std(a);
    let (mb, sb) = mean_std(b);
    let va = sa * sa / a.len() as f64;
    let vb = sb * sb / b.len() as f64;
    let se2 = va + vb;
    if se2 == 0.0 {
        if ma == mb {
            return Err(Error::Degenerate(
                "both samples are constant and equal".into(),
            ));
        }
        let t = if ma > mb {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        };
        return Ok((t, 0.0));
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (va * va / (a.len() - 1) as f64 + vb * vb / (b.len() - 1) as f64);
    let p = (2.0 * student_t_sf(t.abs(), df)?).min(1.0);
    Ok((t, p))
}

/// Binomial probabilities `P(tau = k)` for `k = 0..=n`.
pub fn binomial_weights(n: usize, mu: f64) -> Vec<f64> {
    if mu <= 0.0 || mu >= 1.0 {
        let mut w = vec![0.0; n + 1];
        w[if mu <= 0.0 { 0 } else { n }] = 1.0;
        return w;
    }
    let nf = n as f64;
    let ln_n = ln_gamma(nf + 1.0);
    let (lp, lq) = (mu.ln(), (-mu).ln_1p());
    (0..=n)
        .map(|k| {
            let k = k as f64;
            (ln_n - ln_gamma(k + 1.0) - ln_gamma(nf - k + 1.0) + k * lp + (nf - k) * lq).exp()
        })
        .collect()
}

/// Expected credible-interval width after `n` annotations, averaged
/// exactly over the binomial outcome, for each accuracy in `mu_grid`.
pub fn expected_width(
    prior: BetaParams,
    n: usize,
    alpha: f64,
    mu_grid: &[f64],
    method: Method,
) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::Domain("n must be >= 1".into()));
    }
    if let Some(mu) = mu_grid.iter().find(|m| !(0.0..=1.0).contains(*m)) {
        return Err(Error::Domain(format!("grid value {mu} outside [0, 1]")));
    }
    let build = match method {
        Method::Et => et_cri,
        Method::Hpd => hpd_cri,
        other => {
            return Err(Error::Domain(format!(
                "expected width is defined for et and hpd, not {other}"
            )))
        }
    };
    let widths = (0..=n)
        .map(|tau| {
            let post = posterior_update(prior, tau as f64, n as f64)?;
            Ok(build(post, alpha)?.width())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(mu_grid
        .iter()
        .map(|&mu| {
            binomial_weights(n, mu)
                .iter()
                .zip(&widths)
                .map(|(w, x)| w * x)
                .sum()
        })
        .collect())
}

/// `0.01, 0.02, ..., 0.99`.
pub fn default_mu_grid() -> Vec<f64> {
    (1..=99).map(|i| i as f64 / 100.0).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

pub const CSV_COLUMNS: [&str; 12] = [
    "method",
    "dataset",
    "sampling",
    "alpha",
    "epsilon",
    "R",
    "triples_mean",
    "triples_std",
    "cost_h_mean",
    "cost_h_std",
    "entities_mean",
    "converged_frac",
];

/// Writes one row per summary. JSON keeps per-run vectors only when
/// `include_raw` is set; CSV never has them.
pub fn write_report<W: Write>(
    summaries: &[ReplicationSummary],
    format: ReportFormat,
    include_raw: bool,
    out: W,
) -> Result<()> {
    if summaries.is_empty() {
        return Err(Error::Config("no summaries to report".into()));
    }
    match format {
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(CSV_COLUMNS)?;
            for s in summaries {
                w.write_record([
                    s.method.clone(),
                    s.dataset.clone(),
                    s.sampling.clone(),
                    s.alpha.to_string(),
                    s.epsilon.to_string(),
                    s.repetitions.to_string(),
                    format!("{:.4}", s.triples_mean),
                    format!("{:.4}", s.triples_std),
                    format!("{:.4}", s.cost_hours_mean),
                    format!("{:.4}", s.cost_hours_std),
                    format!("{:.4}", s.entities_mean),
                    format!("{:.4}", s.converged_fraction),
                ])?;
            }
            w.flush().map_err(|e| Error::io("<report>", e))?;
        }
        ReportFormat::Json => {
            let rows: Vec<ReplicationSummary> = if include_raw {
                summaries.to_vec()
            } else {
                summaries
                    .iter()
                    .map(ReplicationSummary::without_raw)
                    .collect()
            };
            serde_json::to_writer_pretty(out, &rows)?;
        }
    }
    Ok(())
}

pub fn emit_report(
    summaries: &[ReplicationSummary],
    format: ReportFormat,
    include_raw: bool,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_report(summaries, format, include_raw, &mut w)?;
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluator::{IntervalMethod, SamplingDesign};
    use crate::kg::{generate_synthetic, SyntheticSpec};

    fn small_kg() -> KnowledgeGraph {
        generate_synthetic(&SyntheticSpec::new(2000, 2.0, 0.8, 9)).unwrap()
    }

    #[test]
    fn mean_std_basics() {
        assert_eq!(mean_std(&[3.0]), (3.0, 0.0));
        let (m, s) = mean_std(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]);
        assert_eq!(m, 5.0);
        assert!((s - (32.0f64 / 7.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn welch_by_hand() {
        let a = [10.0, 12.0, 14.0, 16.0];
        let b = [11.0, 13.0, 15.0, 17.0];
        let (t, p) = t_test(&a, &b).unwrap();
        // equal variances 20/3, equal sizes: se^2 = 10/3 and df = 6
        assert!((t + 1.0 / (10.0f64 / 3.0).sqrt()).abs() < 1e-12);
        let p6 = 2.0 * student_t_sf(t.abs(), 6.0).unwrap();
        assert!((p - p6).abs() < 1e-12);
        assert!((p - 0.603_645_056_510_136).abs() < 1e-10, "{p}");
    }

    #[test]
    fn welch_edge_cases() {
        let a = [1.0, 2.0, 3.0];
        assert_eq!(t_test(&a, &a).unwrap(), (0.0, 1.0));
        let b = [101.0, 102.0, 103.0];
        assert!(t_test(&a, &b).unwrap().1 < 0.01);
        assert!(matches!(
            t_test(&[2.0, 2.0], &[2.0, 2.0]),
            Err(Error::Degenerate(_))
        ));
        assert_eq!(t_test(&[1.0, 1.0], &[2.0, 2.0]).unwrap().1, 0.0);
        assert!(t_test(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn binomial_weights_sum_to_one() {
        for mu in [0.0, 1e-3, 0.3, 0.5, 0.99, 1.0] {
            let s: f64 = binomial_weights(30, mu).iter().sum();
            assert!((s - 1.0).abs() < 1e-12, "{mu}: {s}");
        }
    }

    #[test]
    fn expected_width_symmetry_at_n1() {
        let w = expected_width(BetaParams::UNIFORM, 1, 0.05, &[0.0, 1.0], Method::Et).unwrap();
        assert!((w[0] - w[1]).abs() < 1e-12);
        assert!(expected_width(BetaParams::UNIFORM, 1, 0.05, &[1.5], Method::Et).is_err());
        assert!(expected_width(BetaParams::UNIFORM, 1, 0.05, &[0.5], Method::Wald).is_err());
    }

    #[test]
    fn uniform_beats_kerman_in_the_middle() {
        let k = expected_width(BetaParams::KERMAN, 30, 0.05, &[0.5], Method::Hpd).unwrap();
        let u = expected_width(BetaParams::UNIFORM, 30, 0.05, &[0.5], Method::Hpd).unwrap();
        assert!(u[0] < k[0]);
    }

    #[test]
    fn single_replication_matches_single_run() {
        let kg = small_kg();
        let cfg = EvalConfig::new(SamplingDesign::Srs, IntervalMethod::ahpd_default());
        let s = replicate(&kg, "syn", &cfg, 1, 5).unwrap();
        let mut c = cfg.clone();
        c.record_trace = false;
        let r = run_evaluation(
            &kg,
            &c,
            OracleAnnotator::new(&kg).unwrap(),
            &mut run_rng(5, 0),
        )
        .unwrap();
        assert_eq!(s.triples_mean, r.n_triples as f64);
        assert_eq!(s.triples_std, 0.0);
        assert_eq!(s.cost_hours_mean, r.cost_hours);
    }

    #[test]
    fn replication_is_worker_independent() {
        let kg = small_kg();
        let cfg = EvalConfig::new(SamplingDesign::Twcs { m: 3 }, IntervalMethod::Wilson);
        let a = replicate_with_workers(&kg, "syn", &cfg, 40, 3, 1).unwrap();
        let b = replicate_with_workers(&kg, "syn", &cfg, 40, 3, 4).unwrap();
        let c = replicate(&kg, "syn", &cfg, 40, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
        assert!(replicate(&kg, "syn", &cfg, 0, 3).is_err());
    }

    #[test]
    fn reports_round_trip() {
        let kg = small_kg();
        let cfg = EvalConfig::new(SamplingDesign::Srs, IntervalMethod::Wald);
        let s = replicate(&kg, "syn", &cfg, 5, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();

        let csv_path = dir.path().join("r.csv");
        emit_report(
            std::slice::from_ref(&s),
            ReportFormat::Csv,
            false,
            &csv_path,
        )
        .unwrap();
        let text = std::fs::read_to_string(&csv_path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], CSV_COLUMNS.join(","));

        let json_path = dir.path().join("r.json");
        emit_report(
            std::slice::from_ref(&s),
            ReportFormat::Json,
            true,
            &json_path,
        )
        .unwrap();
        let back: Vec<ReplicationSummary> =
            serde_json::from_str(&std::fs::read_to_string(&json_path).unwrap()).unwrap();
        assert_eq!(back, vec![s.clone()]);

        emit_report(
            std::slice::from_ref(&s),
            ReportFormat::Json,
            false,
            &json_path,
        )
        .unwrap();
        let back: Vec<ReplicationSummary> =
            serde_json::from_str(&std::fs::read_to_string(&json_path).unwrap()).unwrap();
        assert_eq!(back, vec![s.without_raw()]);

        let bad = dir.path().join("missing").join("r.csv");
        assert!(matches!(
            emit_report(&[s], ReportFormat::Csv, false, &bad),
            Err(Error::Io { .. })
        ));
        assert!(emit_report(&[], ReportFormat::Csv, false, &csv_path).is_err());
    }
}
