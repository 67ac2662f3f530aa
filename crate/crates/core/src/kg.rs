//! Knowledge-graph population model.
//!
//! Triples are grouped into entity clusters (all triples sharing a subject).
//! Cluster membership is stored CSR-style: `order` lists triple indices
//! cluster by cluster and `cum_sizes[i]` is the running total of cluster
//! sizes up to and including cluster `i`, so the same array serves both as
//! slice offsets and as the prefix sums used for size-proportional cluster
//! selection.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Distribution, Gamma, Geometric, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Triple {
    /// Entity (and therefore cluster) index of the subject.
    pub subject: u32,
    pub predicate: u32,
    pub object: u32,
    pub label: Option<bool>,
}

/// Borrowed view of one entity cluster.
#[derive(Debug, Clone, Copy)]
pub struct EntityCluster<'a> {
    pub id: u32,
    pub entity: &'a str,
    pub triple_refs: &'a [u32],
}

impl EntityCluster<'_> {
    pub fn size(&self) -> usize {
        self.triple_refs.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeGraph {
    entities: Vec<String>,
    symbols: Vec<String>,
    triples: Vec<Triple>,
    order: Vec<u32>,
    cum_sizes: Vec<usize>,
}

impl KnowledgeGraph {
    /// Total number of triples `M`.
    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn num_clusters(&self) -> usize {
        self.entities.len()
    }

    pub fn mean_cluster_size(&self) -> f64 {
        self.len() as f64 / self.num_clusters() as f64
    }

    pub fn triple(&self, idx: usize) -> &Triple {
        &self.triples[idx]
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn label(&self, idx: usize) -> Option<bool> {
        self.triples[idx].label
    }

    pub fn entity_name(&self, id: u32) -> &str {
        &self.entities[id as usize]
    }

    pub fn symbol(&self, id: u32) -> &str {
        &self.symbols[id as usize]
    }

    /// `(subject, predicate, object)` strings of a triple.
    pub fn spo(&self, idx: usize) -> (&str, &str, &str) {
        let t = &self.triples[idx];
        (
            self.entity_name(t.subject),
            self.symbol(t.predicate),
            self.symbol(t.object),
        )
    }

    pub fn cluster(&self, id: u32) -> EntityCluster<'_> {
        let i = id as usize;
        let start = if i == 0 { 0 } else { self.cum_sizes[i - 1] };
        EntityCluster {
            id,
            entity: &self.entities[i],
            triple_refs: &self.order[start..self.cum_sizes[i]],
        }
    }

    pub fn clusters(&self) -> impl Iterator<Item = EntityCluster<'_>> + '_ {
        (0..self.num_clusters() as u32).map(move |id| self.cluster(id))
    }

    pub fn cluster_size(&self, id: u32) -> usize {
        let i = id as usize;
        let start = if i == 0 { 0 } else { self.cum_sizes[i - 1] };
        self.cum_sizes[i] - start
    }

    /// Cumulative cluster sizes; strictly increasing, last element `M`.
    pub fn cluster_size_prefix_sums(&self) -> &[usize] {
        &self.cum_sizes
    }

    /// Cluster holding global triple rank `rank` in the cluster-major order.
    /// Drawing `rank` uniformly from `[0, M)` selects cluster `i` with
    /// probability `M_i / M`.
    pub fn cluster_at_rank(&self, rank: usize) -> u32 {
        debug_assert!(rank < self.len());
        self.cum_sizes.partition_point(|&c| c <= rank) as u32
    }

    pub fn is_fully_labelled(&self) -> bool {
        self.triples.iter().all(|t| t.label.is_some())
    }

    /// Writes the graph as `subject<TAB>predicate<TAB>object[<TAB>label]`.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (i, t) in self.triples.iter().enumerate() {
            let (s, p, o) = self.spo(i);
            match t.label {
                Some(l) => writeln!(out, "{s}\t{p}\t{o}\t{}", u8::from(l))?,
                None => writeln!(out, "{s}\t{p}\t{o}")?,
            }
        }
        out.flush()
    }

    pub fn save_tsv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_tsv(BufWriter::new(file))
            .map_err(|e| Error::io(path, e))
    }
}

/// Incremental construction; clusters are ordered by first appearance of
/// their subject.
#[derive(Debug, Default)]
pub struct KgBuilder {
    entities: Vec<String>,
    entity_ids: HashMap<String, u32>,
    symbols: Vec<String>,
    symbol_ids: HashMap<String, u32>,
    triples: Vec<Triple>,
}

impl KgBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, subject: &str, predicate: &str, object: &str, label: Option<bool>) {
        let subject = intern(&mut self.entities, &mut self.entity_ids, subject);
        let predicate = intern(&mut self.symbols, &mut self.symbol_ids, predicate);
        let object = intern(&mut self.symbols, &mut self.symbol_ids, object);
        self.triples.push(Triple {
            subject,
            predicate,
            object,
            label,
        });
    }

    pub fn build(self) -> Result<KnowledgeGraph> {
        if self.triples.is_empty() {
            return Err(Error::EmptyGraph);
        }
        let mut sizes = vec![0usize; self.entities.len()];
        for t in &self.triples {
            sizes[t.subject as usize] += 1;
        }
        let cum_sizes: Vec<usize> = sizes
            .iter()
            .scan(0, |acc, &s| {
                *acc += s;
                Some(*acc)
            })
            .collect();
        let mut cursor: Vec<usize> = std::iter::once(0)
            .chain(cum_sizes.iter().copied())
            .take(sizes.len())
            .collect();
        let mut order = vec![0u32; self.triples.len()];
        for (i, t) in self.triples.iter().enumerate() {
            let c = &mut cursor[t.subject as usize];
            order[*c] = i as u32;
            *c += 1;
        }
        Ok(KnowledgeGraph {
            entities: self.entities,
            symbols: self.symbols,
            triples: self.triples,
            order,
            cum_sizes,
        })
    }
}

fn intern(names: &mut Vec<String>, ids: &mut HashMap<String, u32>, name: &str) -> u32 {
    if let Some(&id) = ids.get(name) {
        return id;
    }
    let id = names.len() as u32;
    names.push(name.to_owned());
    ids.insert(name.to_owned(), id);
    id
}

/// Parses the TSV dataset format. Blank lines and `#` comments are skipped.
pub fn parse_tsv<R: BufRead>(reader: R) -> Result<KnowledgeGraph> {
    let mut builder = KgBuilder::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::Parse {
            line: lineno,
            msg: e.to_string(),
        })?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let label = match fields.len() {
            3 => None,
            4 => match fields[3].trim() {
                "1" => Some(true),
                "0" => Some(false),
                other => {
                    return Err(Error::Parse {
                        line: lineno,
                        msg: format!("label must be 0 or 1, got {other:?}"),
                    })
                }
            },
            n => {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("expected 3 or 4 tab-separated fields, got {n}"),
                })
            }
        };
        if fields[..3].iter().any(|f| f.is_empty()) {
            return Err(Error::Parse {
                line: lineno,
                msg: "subject, predicate and object must be non-empty".into(),
            });
        }
        builder.push(fields[0], fields[1], fields[2], label);
    }
    builder.build()
}

pub fn load_tsv(path: impl AsRef<Path>) -> Result<KnowledgeGraph> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_tsv(BufReader::new(file))
}

/// Proportion of correct triples over the whole graph.
pub fn true_accuracy(kg: &KnowledgeGraph) -> Result<f64> {
    let mut correct = 0usize;
    for (i, t) in kg.triples.iter().enumerate() {
        match t.label {
            Some(true) => correct += 1,
            Some(false) => {}
            None => return Err(Error::MissingLabel(i)),
        }
    }
    Ok(correct as f64 / kg.len() as f64)
}

/// Law of cluster sizes for generated graphs; both variants have support
/// `{1, 2, ...}` and the stated mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "law")]
pub enum ClusterSizeLaw {
    ShiftedGeometric {
        mean: f64,
    },
    /// `1 + NegBin` with the given gamma shape; small shapes give heavy
    /// tails, `shape = 1` is the shifted geometric.
    ShiftedNegBinomial {
        mean: f64,
        shape: f64,
    },
}

impl ClusterSizeLaw {
    pub fn mean(&self) -> f64 {
        match *self {
            ClusterSizeLaw::ShiftedGeometric { mean } => mean,
            ClusterSizeLaw::ShiftedNegBinomial { mean, .. } => mean,
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let mean = self.mean();
        if !(mean.is_finite() && mean >= 1.0) {
            return Err(Error::Config(format!(
                "mean cluster size must be >= 1, got {mean}"
            )));
        }
        if let ClusterSizeLaw::ShiftedNegBinomial { shape, .. } = *self {
            if !(shape.is_finite() && shape > 0.0) {
                return Err(Error::Config(format!(
                    "size-law shape must be > 0, got {shape}"
                )));
            }
        }
        Ok(())
    }

    pub(crate) fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let excess = self.mean() - 1.0;
        if excess <= 0.0 {
            return 1;
        }
        let extra = match *self {
            ClusterSizeLaw::ShiftedGeometric { .. } => Geometric::new(1.0 / (1.0 + excess))
                .expect("valid p")
                .sample(rng),
            ClusterSizeLaw::ShiftedNegBinomial { shape, .. } => {
                let rate = Gamma::new(shape, excess / shape)
                    .expect("valid gamma")
                    .sample(rng);
                if rate > 0.0 {
                    Poisson::new(rate).expect("valid poisson").sample(rng) as u64
                } else {
                    0
                }
            }
        };
        1 + extra as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_clusters: usize,
    pub size_law: ClusterSizeLaw,
    /// Probability that a triple is correct.
    pub mu: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    /// Shifted-geometric cluster sizes with the given mean.
    pub fn new(n_clusters: usize, mean_cluster_size: f64, mu: f64, seed: u64) -> Self {
        SyntheticSpec {
            n_clusters,
            size_law: ClusterSizeLaw::ShiftedGeometric {
                mean: mean_cluster_size,
            },
            mu,
            seed,
        }
    }
}

/// Synthetic graph whose triples are independently correct with probability
/// `mu`. Entities are named `e<i>`, predicates `p<j>`, objects `o<j>`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<KnowledgeGraph> {
    if spec.n_clusters == 0 {
        return Err(Error::Config("n_clusters must be >= 1".into()));
    }
    if !(0.0..=1.0).contains(&spec.mu) {
        return Err(Error::Config(format!(
            "mu must lie in [0, 1], got {}",
            spec.mu
        )));
    }
    spec.size_law.validate()?;

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let sizes: Vec<usize> = (0..spec.n_clusters)
        .map(|_| spec.size_law.sample(&mut rng))
        .collect();
    let coin = Bernoulli::new(spec.mu).expect("mu in [0, 1]");
    let labels: Vec<bool> = (0..sizes.iter().sum::<usize>())
        .map(|_| coin.sample(&mut rng))
        .collect();
    Ok(from_sizes_and_labels(&sizes, &labels))
}

/// Graph with consecutive clusters of the given sizes; `labels` is in
/// cluster-major order.
pub(crate) fn from_sizes_and_labels(sizes: &[usize], labels: &[bool]) -> KnowledgeGraph {
    let total: usize = sizes.iter().sum();
    assert_eq!(total, labels.len());
    let max_size = sizes.iter().copied().max().unwrap_or(0);

    let entities: Vec<String> = (0..sizes.len()).map(|i| format!("e{i}")).collect();
    let mut symbols = Vec::with_capacity(2 * max_size);
    for j in 0..max_size {
        symbols.push(format!("p{j}"));
        symbols.push(format!("o{j}"));
    }
    let mut triples = Vec::with_capacity(total);
    let mut cum_sizes = Vec::with_capacity(sizes.len());
    for (i, &s) in sizes.iter().enumerate() {
        for j in 0..s {
            triples.push(Triple {
                subject: i as u32,
                predicate: (2 * j) as u32,
                object: (2 * j + 1) as u32,
                label: Some(labels[triples.len()]),
            });
        }
        cum_sizes.push(triples.len());
    }
    KnowledgeGraph {
        entities,
        symbols,
        order: (0..total as u32).collect(),
        triples,
        cum_sizes,
    }
}
