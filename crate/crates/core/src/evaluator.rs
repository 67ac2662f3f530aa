//! Iterative sample, annotate, estimate loop.
//!
//! Each iteration draws a batch under the configured design, asks the
//! annotator for the labels it has not seen yet, re-estimates the accuracy,
//! builds the configured interval(s) and stops once the margin of error is
//! within `epsilon`. With [`IntervalMethod::Ahpd`] one HPD interval is built
//! per prior and the narrowest one is tested.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::intervals::{et_cri, hpd_cri, posterior_update, wald, wilson, IntervalEstimate};
use crate::kg::KnowledgeGraph;
use crate::sampling::{
    design_effect_adjust, estimate_srs, estimate_twcs, srs_draw, twcs_draw, AnnotatedSample,
    EstimateWithVariance,
};
use crate::special::BetaParams;

pub const SECONDS_PER_ENTITY: f64 = 45.0;
pub const SECONDS_PER_TRIPLE: f64 = 25.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "design", rename_all = "lowercase")]
pub enum SamplingDesign {
    Srs,
    /// Two-stage weighted cluster sampling with second-stage size `m`.
    Twcs {
        m: usize,
    },
}

impl SamplingDesign {
    pub fn tag(&self) -> &'static str {
        match self {
            SamplingDesign::Srs => "srs",
            SamplingDesign::Twcs { .. } => "twcs",
        }
    }
}

impl fmt::Display for SamplingDesign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", content = "priors", rename_all = "lowercase")]
pub enum IntervalMethod {
    Wald,
    Wilson,
    Et(BetaParams),
    Hpd(BetaParams),
    Ahpd(Vec<BetaParams>),
}

impl IntervalMethod {
    /// The three uninformative priors: Kerman, Jeffreys and Uniform.
    pub fn ahpd_default() -> Self {
        IntervalMethod::Ahpd(vec![
            BetaParams::KERMAN,
            BetaParams::JEFFREYS,
            BetaParams::UNIFORM,
        ])
    }

    pub fn tag(&self) -> &'static str {
        match self {
            IntervalMethod::Wald => "wald",
            IntervalMethod::Wilson => "wilson",
            IntervalMethod::Et(_) => "et",
            IntervalMethod::Hpd(_) => "hpd",
            IntervalMethod::Ahpd(_) => "ahpd",
        }
    }

    fn uses_effective_counts(&self) -> bool {
        !matches!(self, IntervalMethod::Wald)
    }
}

impl fmt::Display for IntervalMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub alpha: f64,
    pub epsilon: f64,
    pub sampling: SamplingDesign,
    pub method: IntervalMethod,
    /// Triples (SRS) or clusters (TWCS) in the first batch.
    pub initial_batch: usize,
    /// Triples (SRS) or clusters (TWCS) in every later batch.
    pub step_batch: usize,
    /// The first batch keeps growing by whole units until it holds at least
    /// this many triples.
    pub min_initial_triples: usize,
    pub cost_c1: f64,
    pub cost_c2: f64,
    pub seed: u64,
    /// Stop once this many annotations have been accumulated.
    pub max_annotations: Option<usize>,
    pub record_trace: bool,
}

impl EvalConfig {
    /// Defaults: alpha = epsilon = 0.05, 45 s per entity, 25 s per triple.
    /// SRS starts with 30 triples and TWCS with 10 clusters (topped up to 30
    /// triples); both then grow one unit at a time.
    pub fn new(sampling: SamplingDesign, method: IntervalMethod) -> Self {
        let initial_batch = match sampling {
            SamplingDesign::Srs => 30,
            SamplingDesign::Twcs { .. } => 10,
        };
        EvalConfig {
            alpha: 0.05,
            epsilon: 0.05,
            sampling,
            method,
            initial_batch,
            step_batch: 1,
            min_initial_triples: 30,
            cost_c1: SECONDS_PER_ENTITY,
            cost_c2: SECONDS_PER_TRIPLE,
            seed: 0,
            max_annotations: None,
            record_trace: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 0.5) {
            return bad(format!(
                "epsilon must lie in (0, 0.5), got {}",
                self.epsilon
            ));
        }
        if self.initial_batch == 0 || self.step_batch == 0 {
            return bad("batch sizes must be >= 1".into());
        }
        if let SamplingDesign::Twcs { m } = self.sampling {
            if m == 0 {
                return bad("second-stage size m must be >= 1".into());
            }
            if self.initial_batch < 2 {
                return bad("TWCS needs at least 2 clusters in the first batch".into());
            }
        }
        if !(self.cost_c1 >= 0.0 && self.cost_c2 >= 0.0) {
            return bad("cost constants must be non-negative".into());
        }
        if let IntervalMethod::Ahpd(priors) = &self.method {
            if priors.is_empty() {
                return bad("aHPD needs at least one prior".into());
            }
        }
        if self.max_annotations == Some(0) {
            return bad("max_annotations must be >= 1".into());
        }
        Ok(())
    }
}

/// Supplies correctness labels, one per requested triple, in order.
pub trait AnnotationAdapter {
    fn label(&mut self, triples: &[usize]) -> Result<Vec<bool>>;
}

impl<T: AnnotationAdapter + ?Sized> AnnotationAdapter for &mut T {
    fn label(&mut self, triples: &[usize]) -> Result<Vec<bool>> {
        (**self).label(triples)
    }
}

/// Reads the ground-truth labels stored in the graph.
#[derive(Debug, Clone, Copy)]
pub struct OracleAnnotator<'a> {
    kg: &'a KnowledgeGraph,
}

impl<'a> OracleAnnotator<'a> {
    pub fn new(kg: &'a KnowledgeGraph) -> Result<Self> {
        if let Some(i) = (0..kg.len()).find(|&i| kg.label(i).is_none()) {
            return Err(Error::MissingLabel(i));
        }
        Ok(OracleAnnotator { kg })
    }
}

impl AnnotationAdapter for OracleAnnotator<'_> {
    fn label(&mut self, triples: &[usize]) -> Result<Vec<bool>> {
        triples
            .iter()
            .map(|&t| self.kg.label(t).ok_or(Error::MissingLabel(t)))
            .collect()
    }
}

/// Prompts a human for each triple on `output` and reads `1` or `0` from
/// `input`, asking again on anything else.
pub struct InteractiveAnnotator<'a, R, W> {
    kg: &'a KnowledgeGraph,
    input: R,
    output: W,
}

impl<'a, R: BufRead, W: Write> InteractiveAnnotator<'a, R, W> {
    pub fn new(kg: &'a KnowledgeGraph, input: R, output: W) -> Self {
        InteractiveAnnotator { kg, input, output }
    }

    fn ask(&mut self, triple: usize) -> std::io::Result<Option<bool>> {
        let (s, p, o) = self.kg.spo(triple);
        writeln!(self.output, "[{triple}] {s} | {p} | {o}")?;
        loop {
            write!(self.output, "correct? [1/0] ")?;
            self.output.flush()?;
            let mut line = String::new();
            if self.input.read_line(&mut line)? == 0 {
                return Ok(None);
            }
            match line.trim() {
                "1" => return Ok(Some(true)),
                "0" => return Ok(Some(false)),
                _ => writeln!(self.output, "please answer 1 or 0")?,
            }
        }
    }
}

impl<R: BufRead, W: Write> AnnotationAdapter for InteractiveAnnotator<'_, R, W> {
    fn label(&mut self, triples: &[usize]) -> Result<Vec<bool>> {
        let mut out = Vec::with_capacity(triples.len());
        for &t in triples {
            match self
                .ask(t)
                .map_err(|e| Error::io("<annotation channel>", e))?
            {
                Some(l) => out.push(l),
                None => {
                    return Err(Error::ChannelClosed {
                        labelled: out.len(),
                        requested: triples.len(),
                    })
                }
            }
        }
        Ok(out)
    }
}

/// Looks labels up in a separate annotation file keyed by
/// `subject, predicate, object`.
#[derive(Debug, Clone)]
pub struct FileAnnotator {
    labels: Vec<Option<bool>>,
}

impl FileAnnotator {
    /// `reader` holds `subject<TAB>predicate<TAB>object<TAB>label` rows.
    pub fn from_reader<R: BufRead>(kg: &KnowledgeGraph, reader: R) -> Result<Self> {
        let index: HashMap<(&str, &str, &str), usize> =
            (0..kg.len()).map(|i| (kg.spo(i), i)).collect();
        let mut labels = vec![None; kg.len()];
        for (n, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io("<annotation file>", e))?;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            let parse_err = |msg: &str| Error::Parse {
                line: n + 1,
                msg: msg.into(),
            };
            if f.len() != 4 {
                return Err(parse_err("expected 4 tab-separated fields"));
            }
            let label = match f[3].trim() {
                "1" => true,
                "0" => false,
                _ => return Err(parse_err("label must be 0 or 1")),
            };
            if let Some(&i) = index.get(&(f[0], f[1], f[2])) {
                labels[i] = Some(label);
            }
        }
        Ok(FileAnnotator { labels })
    }

    pub fn load(kg: &KnowledgeGraph, path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(kg, std::io::BufReader::new(file))
    }
}

impl AnnotationAdapter for FileAnnotator {
    fn label(&mut self, triples: &[usize]) -> Result<Vec<bool>> {
        triples
            .iter()
            .map(|&t| {
                self.labels
                    .get(t)
                    .copied()
                    .flatten()
                    .ok_or(Error::MissingLabel(t))
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalStatus {
    Converged,
    PopulationExhausted,
    BudgetExhausted,
    Aborted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub n: usize,
    pub tau: usize,
    pub distinct_triples: usize,
    pub distinct_entities: usize,
    pub mu_hat: f64,
    pub effective_n: f64,
    pub effective_tau: f64,
    pub candidates: Vec<IntervalEstimate>,
    pub chosen_moe: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub status: EvalStatus,
    pub mu_hat: f64,
    /// The interval tested last; the halting one when converged.
    pub interval: Option<IntervalEstimate>,
    /// Distinct annotated triples.
    pub n_triples: usize,
    /// Distinct subject entities among them.
    pub n_entities: usize,
    /// Sample size `n_S` (TWCS counts repeated draws).
    pub n_sample: usize,
    pub cost_seconds: f64,
    pub cost_hours: f64,
    pub iterations: usize,
    pub trace: Vec<IterationRecord>,
}

impl EvalReport {
    pub fn converged(&self) -> bool {
        self.status == EvalStatus::Converged
    }
}

/// `n_entities * c1 + n_triples * c2` seconds.
pub fn annotation_cost(n_entities: usize, n_triples: usize, c1: f64, c2: f64) -> f64 {
    n_entities as f64 * c1 + n_triples as f64 * c2
}

/// Runs one evaluation with a generator seeded from `config.seed`.
pub fn evaluate<A: AnnotationAdapter>(
    kg: &KnowledgeGraph,
    config: &EvalConfig,
    annotator: A,
) -> Result<EvalReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    run_evaluation(kg, config, annotator, &mut rng)
}

pub fn run_evaluation<A: AnnotationAdapter, R: Rng + ?Sized>(
    kg: &KnowledgeGraph,
    config: &EvalConfig,
    mut annotator: A,
    rng: &mut R,
) -> Result<EvalReport> {
    config.validate()?;
    if kg.is_empty() {
        return Err(Error::EmptyGraph);
    }
    let mut state = Loop {
        kg,
        config,
        sample: match config.sampling {
            SamplingDesign::Srs => AnnotatedSample::srs(),
            SamplingDesign::Twcs { .. } => AnnotatedSample::twcs(),
        },
        drawn: HashSet::new(),
        cache: HashMap::new(),
        trace: Vec::new(),
        last: None,
        iterations: 0,
    };

    let status = loop {
        if let Some(cap) = config.max_annotations {
            if state.sample.n() >= cap {
                break EvalStatus::BudgetExhausted;
            }
        }
        let first = state.iterations == 0;
        match state.draw(first, &mut annotator, rng) {
            Ok(true) => {}
            Ok(false) => break EvalStatus::PopulationExhausted,
            Err(Error::ChannelClosed { .. }) => break EvalStatus::Aborted,
            Err(e) => return Err(e),
        }
        state.iterations += 1;
        let interval = state.assess()?;
        if interval.moe <= config.epsilon {
            break EvalStatus::Converged;
        }
    };
    Ok(state.report(status))
}

struct Loop<'a> {
    kg: &'a KnowledgeGraph,
    config: &'a EvalConfig,
    sample: AnnotatedSample,
    drawn: HashSet<usize>,
    cache: HashMap<usize, bool>,
    trace: Vec<IterationRecord>,
    last: Option<(EstimateWithVariance, IntervalEstimate)>,
    iterations: usize,
}

impl Loop<'_> {
    // Draws and annotates one batch. Ok(false) means nothing was left.
    fn draw<A: AnnotationAdapter, R: Rng + ?Sized>(
        &mut self,
        first: bool,
        annotator: &mut A,
        rng: &mut R,
    ) -> Result<bool> {
        let cfg = self.config;
        let units = if first {
            cfg.initial_batch
        } else {
            cfg.step_batch
        };
        let floor = if first { cfg.min_initial_triples } else { 0 };
        match cfg.sampling {
            SamplingDesign::Srs => {
                let remaining = self.kg.len() - self.drawn.len();
                let mut want = units.max(floor).min(remaining);
                if let Some(cap) = cfg.max_annotations {
                    want = want.min(cap - self.sample.n());
                }
                if want == 0 {
                    return Ok(false);
                }
                let batch = srs_draw(self.kg, want, &mut self.drawn, rng)?;
                let labels = annotator.label(&batch)?;
                check_count(&batch, &labels)?;
                for (&t, &l) in batch.iter().zip(&labels) {
                    self.sample.push(self.kg, t, l);
                }
            }
            SamplingDesign::Twcs { m } => {
                let mut draws = twcs_draw(self.kg, units, m, rng)?;
                let mut size: usize = draws.iter().map(|d| d.triples.len()).sum();
                while size < floor {
                    let more = twcs_draw(self.kg, 1, m, rng)?;
                    size += more[0].triples.len();
                    draws.extend(more);
                }
                let mut fresh: Vec<usize> = Vec::new();
                let mut seen = HashSet::new();
                for d in &draws {
                    for &t in &d.triples {
                        if !self.cache.contains_key(&t) && seen.insert(t) {
                            fresh.push(t);
                        }
                    }
                }
                if !fresh.is_empty() {
                    let labels = annotator.label(&fresh)?;
                    check_count(&fresh, &labels)?;
                    self.cache.extend(fresh.into_iter().zip(labels));
                }
                for d in &draws {
                    let labelled: Vec<(usize, bool)> =
                        d.triples.iter().map(|&t| (t, self.cache[&t])).collect();
                    self.sample.push_group(self.kg, d.cluster, &labelled);
                }
            }
        }
        Ok(true)
    }

    fn estimate(&self) -> Result<EstimateWithVariance> {
        match self.config.sampling {
            SamplingDesign::Srs => estimate_srs(&self.sample),
            SamplingDesign::Twcs { .. } if self.config.method.uses_effective_counts() => {
                design_effect_adjust(&self.sample)
            }
            SamplingDesign::Twcs { .. } => estimate_twcs(&self.sample),
        }
    }

    fn assess(&mut self) -> Result<IntervalEstimate> {
        let alpha = self.config.alpha;
        let est = self.estimate()?;
        let n_eff = est.effective_n;
        let tau_eff = est.effective_tau.min(n_eff);
        let credible = |prior: BetaParams, hpd: bool| -> Result<IntervalEstimate> {
            let post = posterior_update(prior, tau_eff, n_eff)?;
            let i = if hpd {
                hpd_cri(post, alpha)?
            } else {
                et_cri(post, alpha)?
            };
            Ok(i.with_prior(prior))
        };
        let candidates = match &self.config.method {
            IntervalMethod::Wald => vec![wald(&est, alpha)?],
            IntervalMethod::Wilson => vec![wilson(est.mu_hat, n_eff, alpha)?],
            IntervalMethod::Et(p) => vec![credible(*p, false)?],
            IntervalMethod::Hpd(p) => vec![credible(*p, true)?],
            IntervalMethod::Ahpd(ps) => ps
                .iter()
                .map(|&p| credible(p, true))
                .collect::<Result<Vec<_>>>()?,
        };
        // narrowest wins; the earliest prior keeps ties
        let chosen = *candidates
            .iter()
            .reduce(|best, c| if c.width() < best.width() { c } else { best })
            .expect("at least one candidate");
        if self.config.record_trace {
            self.trace.push(IterationRecord {
                iteration: self.iterations,
                n: self.sample.n(),
                tau: self.sample.tau(),
                distinct_triples: self.sample.num_distinct_triples(),
                distinct_entities: self.sample.num_distinct_entities(),
                mu_hat: est.mu_hat,
                effective_n: n_eff,
                effective_tau: tau_eff,
                candidates,
                chosen_moe: chosen.moe,
            });
        }
        self.last = Some((est, chosen));
        Ok(chosen)
    }

    fn report(self, status: EvalStatus) -> EvalReport {
        let n_triples = self.sample.num_distinct_triples();
        let n_entities = self.sample.num_distinct_entities();
        let cost_seconds = annotation_cost(
            n_entities,
            n_triples,
            self.config.cost_c1,
            self.config.cost_c2,
        );
        let mu_hat = match &self.last {
            Some((est, _)) => est.mu_hat,
            None if self.sample.n() > 0 => self.sample.tau() as f64 / self.sample.n() as f64,
            None => f64::NAN,
        };
        EvalReport {
            status,
            mu_hat,
            interval: self.last.map(|(_, i)| i),
            n_triples,
            n_entities,
            n_sample: self.sample.n(),
            cost_seconds,
            cost_hours: cost_seconds / 3600.0,
            iterations: self.iterations,
            trace: self.trace,
        }
    }
}

fn check_count(batch: &[usize], labels: &[bool]) -> Result<()> {
    if batch.len() == labels.len() {
        Ok(())
    } else {
        Err(Error::LabelCount {
            expected: batch.len(),
            got: labels.len(),
        })
    }
}
