//! Sampling designs and their accuracy estimators.
//!
//! * SRS draws triples uniformly without replacement.
//! * TWCS draws entity clusters with replacement, with probability
//!   proportional to cluster size, then up to `m` triples per selected
//!   cluster without replacement. Repeated selections of one cluster each
//!   get an independent second-stage draw.

use std::collections::HashSet;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::KnowledgeGraph;

/// Lower bound applied to the estimated design effect.
pub const DEFF_FLOOR: f64 = 0.5;

/// Second-stage sub-sample of one selected cluster.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterDraw {
    pub cluster: u32,
    pub triples: Vec<usize>,
}

/// Per-cluster summary inside a TWCS sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterGroup {
    pub cluster: u32,
    pub drawn: usize,
    pub correct: usize,
}

impl ClusterGroup {
    pub fn proportion(&self) -> f64 {
        self.correct as f64 / self.drawn as f64
    }
}

/// Annotations accumulated over the iterations of an evaluation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedSample {
    entries: Vec<(usize, bool)>,
    distinct_triples: HashSet<usize>,
    distinct_entities: HashSet<u32>,
    tau: usize,
    cluster_groups: Option<Vec<ClusterGroup>>,
}

impl AnnotatedSample {
    pub fn srs() -> Self {
        Self::default()
    }

    pub fn twcs() -> Self {
        AnnotatedSample {
            cluster_groups: Some(Vec::new()),
            ..Self::default()
        }
    }

    /// Builds a TWCS sample directly from per-cluster `(drawn, correct)`
    /// counts. Triple indices are synthetic, so entity and triple sets are
    /// left empty; this is meant for estimator checks.
    pub fn from_groups(groups: &[(usize, usize)]) -> Self {
        let mut s = Self::twcs();
        for (i, &(drawn, correct)) in groups.iter().enumerate() {
            assert!(correct <= drawn && drawn > 0);
            for k in 0..drawn {
                s.entries.push((usize::MAX, k < correct));
            }
            s.tau += correct;
            s.cluster_groups.as_mut().unwrap().push(ClusterGroup {
                cluster: i as u32,
                drawn,
                correct,
            });
        }
        s
    }

    /// Total annotated entries `n_S` (TWCS counts repeated draws).
    pub fn n(&self) -> usize {
        self.entries.len()
    }

    /// Correct entries `tau_S`.
    pub fn tau(&self) -> usize {
        self.tau
    }

    pub fn entries(&self) -> &[(usize, bool)] {
        &self.entries
    }

    pub fn num_distinct_triples(&self) -> usize {
        self.distinct_triples.len()
    }

    pub fn num_distinct_entities(&self) -> usize {
        self.distinct_entities.len()
    }

    pub fn cluster_groups(&self) -> Option<&[ClusterGroup]> {
        self.cluster_groups.as_deref()
    }

    pub fn is_twcs(&self) -> bool {
        self.cluster_groups.is_some()
    }

    /// Adds one SRS draw.
    pub fn push(&mut self, kg: &KnowledgeGraph, triple: usize, label: bool) {
        self.entries.push((triple, label));
        self.tau += usize::from(label);
        self.distinct_triples.insert(triple);
        self.distinct_entities.insert(kg.triple(triple).subject);
    }

    /// Adds one second-stage sub-sample; `labelled` pairs triple indices
    /// with their labels.
    pub fn push_group(&mut self, kg: &KnowledgeGraph, cluster: u32, labelled: &[(usize, bool)]) {
        assert!(!labelled.is_empty(), "empty cluster sub-sample");
        let correct = labelled.iter().filter(|(_, l)| *l).count();
        for &(t, l) in labelled {
            self.entries.push((t, l));
            self.distinct_triples.insert(t);
        }
        self.tau += correct;
        self.distinct_entities.insert(kg.cluster(cluster).id);
        self.cluster_groups
            .get_or_insert_with(Vec::new)
            .push(ClusterGroup {
                cluster,
                drawn: labelled.len(),
                correct,
            });
    }
}

/// Point estimate with its estimated variance and the sample size and
/// success count a binomial model should use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateWithVariance {
    pub mu_hat: f64,
    pub variance: f64,
    pub effective_n: f64,
    pub effective_tau: f64,
    pub design_effect: f64,
}

/// Draws `batch` not-yet-drawn triples uniformly and records them in
/// `already_drawn`.
pub fn srs_draw<R: Rng + ?Sized>(
    kg: &KnowledgeGraph,
    batch: usize,
    already_drawn: &mut HashSet<usize>,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let population = kg.len();
    let remaining = population - already_drawn.len();
    if batch == 0 {
        return Err(Error::Config("batch must be >= 1".into()));
    }
    if batch > remaining {
        return Err(Error::PopulationExhausted {
            requested: batch,
            remaining,
        });
    }
    let mut out = Vec::with_capacity(batch);
    if 2 * already_drawn.len() <= population {
        // rejection: each attempt succeeds with probability >= 1/2
        while out.len() < batch {
            let t = rng.random_range(0..population);
            if already_drawn.insert(t) {
                out.push(t);
            }
        }
    } else {
        let pool: Vec<usize> = (0..population)
            .filter(|t| !already_drawn.contains(t))
            .collect();
        for i in index::sample(rng, pool.len(), batch) {
            already_drawn.insert(pool[i]);
            out.push(pool[i]);
        }
    }
    Ok(out)
}

/// Two-stage weighted cluster sampling of `n_clusters` clusters with
/// second-stage size `min(M_i, m)`.
pub fn twcs_draw<R: Rng + ?Sized>(
    kg: &KnowledgeGraph,
    n_clusters: usize,
    m: usize,
    rng: &mut R,
) -> Result<Vec<ClusterDraw>> {
    if kg.is_empty() {
        return Err(Error::EmptyGraph);
    }
    if n_clusters == 0 || m == 0 {
        return Err(Error::Config("n_clusters and m must be >= 1".into()));
    }
    Ok((0..n_clusters)
        .map(|_| {
            let id = kg.cluster_at_rank(rng.random_range(0..kg.len()));
            let cluster = kg.cluster(id);
            let take = cluster.size().min(m);
            let triples = index::sample(rng, cluster.size(), take)
                .into_iter()
                .map(|i| cluster.triple_refs[i] as usize)
                .collect();
            ClusterDraw {
                cluster: id,
                triples,
            }
        })
        .collect())
}

/// Sample proportion and its binomial variance.
pub fn estimate_srs(sample: &AnnotatedSample) -> Result<EstimateWithVariance> {
    let n = sample.n();
    if n == 0 {
        return Err(Error::EmptySample);
    }
    let mu_hat = sample.tau() as f64 / n as f64;
    Ok(EstimateWithVariance {
        mu_hat,
        variance: mu_hat * (1.0 - mu_hat) / n as f64,
        effective_n: n as f64,
        effective_tau: sample.tau() as f64,
        design_effect: 1.0,
    })
}

/// Mean of per-cluster proportions with its with-replacement variance.
/// Effective counts are left unadjusted (`n` and `mu_hat * n`).
pub fn estimate_twcs(sample: &AnnotatedSample) -> Result<EstimateWithVariance> {
    let groups = sample
        .cluster_groups()
        .ok_or_else(|| Error::Config("sample carries no cluster structure".into()))?;
    let nc = groups.len();
    if nc <= 1 {
        return Err(Error::TooFewClusters(nc));
    }
    let ncf = nc as f64;
    let mu_hat = groups.iter().map(ClusterGroup::proportion).sum::<f64>() / ncf;
    let ss: f64 = groups
        .iter()
        .map(|g| (g.proportion() - mu_hat).powi(2))
        .sum();
    let n = sample.n() as f64;
    Ok(EstimateWithVariance {
        mu_hat,
        variance: ss / (ncf * (ncf - 1.0)),
        effective_n: n,
        effective_tau: mu_hat * n,
        design_effect: 1.0,
    })
}

/// TWCS estimate whose effective sample size is deflated by the design
/// effect `V_twcs / V_srs`, floored at [`DEFF_FLOOR`].
pub fn design_effect_adjust(sample: &AnnotatedSample) -> Result<EstimateWithVariance> {
    let est = estimate_twcs(sample)?;
    let n = sample.n() as f64;
    let srs_variance = est.mu_hat * (1.0 - est.mu_hat) / n;
    let deff = if srs_variance > 0.0 {
        (est.variance / srs_variance).max(DEFF_FLOOR)
    } else {
        1.0
    };
    let effective_n = n / deff;
    Ok(EstimateWithVariance {
        effective_n,
        effective_tau: est.mu_hat * effective_n,
        design_effect: deff,
        ..est
    })
}
