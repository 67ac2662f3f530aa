//! Reference dataset profiles.
//!
//! The labelled audit datasets commonly used for KG accuracy estimation
//! (YAGO, NELL, DBpedia and FactBench samples) are small, but they are not
//! redistributed here. Each profile rebuilds a deterministic stand-in with
//! the same number of facts, entity clusters and ground-truth accuracy. Three
//! extra knobs shape what the summary statistics leave open:
//!
//! * `size_shape` is the gamma shape of the shifted negative-binomial
//!   cluster-size law. It controls how many distinct entities a random
//!   sample of triples touches, and therefore the annotation cost.
//! * `small_share` is the fraction of clusters forced to hold 2 or 3
//!   triples, as happens when wrong facts are derived from a correct fact
//!   about the same subject. The remaining clusters follow the law above.
//! * `label_correlation` couples the correctness of triples within a
//!   cluster. Positive values clump errors into the same entities (design
//!   effect above 1 for cluster sampling); negative values spread errors
//!   evenly across entities (design effect below 1).
//!
//! They were tuned so that simulated audits reproduce published cost
//! figures; see the crate README. Real dataset files in the TSV format can
//! always be used instead through [`crate::kg::load_tsv`].

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::{from_sizes_and_labels, ClusterSizeLaw, KnowledgeGraph};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetProfile {
    pub name: &'static str,
    pub triples: usize,
    pub clusters: usize,
    pub accuracy: f64,
    pub size_shape: f64,
    pub small_share: f64,
    pub label_correlation: f64,
    pub seed: u64,
}

pub const YAGO: DatasetProfile = DatasetProfile {
    name: "yago",
    triples: 1_386,
    clusters: 822,
    accuracy: 0.99,
    size_shape: 0.07,
    small_share: 0.0,
    label_correlation: 0.0,
    seed: 0x5941_474f,
};

pub const NELL: DatasetProfile = DatasetProfile {
    name: "nell",
    triples: 1_860,
    clusters: 817,
    accuracy: 0.91,
    size_shape: 0.35,
    small_share: 0.0,
    label_correlation: 0.12,
    seed: 0x4e45_4c4c,
};

pub const DBPEDIA: DatasetProfile = DatasetProfile {
    name: "dbpedia",
    triples: 9_344,
    clusters: 2_936,
    accuracy: 0.85,
    size_shape: 1.0,
    small_share: 0.0,
    label_correlation: 0.25,
    seed: 0xdb_9ed1a,
};

pub const FACTBENCH: DatasetProfile = DatasetProfile {
    name: "factbench",
    triples: 2_800,
    clusters: 1_157,
    accuracy: 0.54,
    size_shape: 0.1,
    small_share: 0.4,
    label_correlation: -1.0,
    seed: 0xfac7_be9c,
};

pub const ALL: [DatasetProfile; 4] = [YAGO, NELL, DBPEDIA, FACTBENCH];

pub fn by_name(name: &str) -> Option<DatasetProfile> {
    ALL.iter()
        .copied()
        .find(|p| p.name.eq_ignore_ascii_case(name))
}

impl DatasetProfile {
    /// Number of correct triples, `round(accuracy * triples)`.
    pub fn correct_triples(&self) -> usize {
        (self.accuracy * self.triples as f64).round() as usize
    }

    pub fn build(&self) -> Result<KnowledgeGraph> {
        if self.clusters == 0 || self.triples < self.clusters {
            return Err(Error::Config(format!(
                "profile {}: need 1 <= clusters <= triples",
                self.name
            )));
        }
        if !(0.0..1.0).contains(&self.small_share) {
            return Err(Error::Config(format!(
                "profile {}: small-cluster share must lie in [0, 1)",
                self.name
            )));
        }
        if !(-1.0..=1.0).contains(&self.label_correlation) {
            return Err(Error::Config(format!(
                "profile {}: label correlation must lie in [-1, 1]",
                self.name
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let sizes = exact_sizes(self, &mut rng)?;
        let labels = correlated_labels(
            &sizes,
            self.triples - self.correct_triples(),
            self.label_correlation,
            &mut rng,
        );
        Ok(from_sizes_and_labels(&sizes, &labels))
    }
}

// Draw sizes from the law, then nudge random clusters until the total is
// exactly the target while keeping every size >= 1.
fn exact_sizes<R: Rng>(p: &DatasetProfile, rng: &mut R) -> Result<Vec<usize>> {
    let n_small = (p.small_share * p.clusters as f64).round() as usize;
    let n_rest = p.clusters - n_small;
    let rest_mean = if n_rest > 0 {
        ((p.triples as f64 - 2.5 * n_small as f64) / n_rest as f64).max(1.0)
    } else {
        1.0
    };
    let law = ClusterSizeLaw::ShiftedNegBinomial {
        mean: rest_mean,
        shape: p.size_shape,
    };
    law.validate()?;
    let mut sizes: Vec<usize> = (0..p.clusters)
        .map(|i| {
            if i < n_small {
                rng.random_range(2..=3)
            } else {
                law.sample(rng)
            }
        })
        .collect();
    let mut total: usize = sizes.iter().sum();
    while total > p.triples {
        let i = rng.random_range(0..sizes.len());
        if sizes[i] > 1 {
            sizes[i] -= 1;
            total -= 1;
        }
    }
    while total < p.triples {
        let i = rng.random_range(0..sizes.len());
        sizes[i] += 1;
        total += 1;
    }
    Ok(sizes)
}

// Exactly `incorrect` triples get label 0: the ones with the lowest scores.
// For rho >= 0 the score is a Gaussian mix of a per-cluster and a per-triple
// effect. For rho < 0 each cluster gets stratified positions with a random
// offset, which spreads errors evenly over the members of a cluster.
fn correlated_labels<R: Rng>(
    sizes: &[usize],
    incorrect: usize,
    rho: f64,
    rng: &mut R,
) -> Vec<bool> {
    let total: usize = sizes.iter().sum();
    let mut scores = Vec::with_capacity(total);
    for &s in sizes {
        if rho >= 0.0 {
            let shared: f64 = rng.sample(StandardNormal);
            for _ in 0..s {
                let own: f64 = rng.sample(StandardNormal);
                scores.push(rho.sqrt() * shared + (1.0 - rho).sqrt() * own);
            }
        } else {
            let w = -rho;
            let offset: f64 = rng.random();
            let mut slots: Vec<usize> = (0..s).collect();
            slots.shuffle(rng);
            for slot in slots {
                let strat = (slot as f64 + offset) / s as f64;
                let own: f64 = rng.random();
                scores.push(w * strat + (1.0 - w) * own);
            }
        }
    }
    let mut idx: Vec<usize> = (0..total).collect();
    idx.sort_by(|&i, &j| scores[i].total_cmp(&scores[j]));
    let mut labels = vec![true; total];
    for &i in &idx[..incorrect] {
        labels[i] = false;
    }
    labels
}
