//! Random network ensembles for within-cluster structure: Erdős–Rényi,
//! Barabási–Albert preferential attachment, and a stochastic blockmodel whose
//! ten blocks sit on a triangular lattice.
//!
//! Cluster pairs are always drawn with equal edge counts per cluster
//! ([`sample_matched_pair`]), which keeps every rewiring target up to
//! gamma = 1 reachable.

use std::collections::HashSet;

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use thiserror::Error;

use crate::graph::Network;

#[derive(Debug, Error, PartialEq)]
pub enum NetGenError {
    #[error("invalid ensemble spec: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EnsembleKind {
    ErdosRenyi,
    BarabasiAlbert,
    SbmLattice,
}

impl EnsembleKind {
    pub fn label(self) -> &'static str {
        match self {
            EnsembleKind::ErdosRenyi => "er",
            EnsembleKind::BarabasiAlbert => "ba",
            EnsembleKind::SbmLattice => "sbm",
        }
    }
}

/// Number of blocks in the lattice blockmodel.
pub const SBM_BLOCKS: usize = 10;

/// Fraction of a node's expected degree kept inside its own block.
pub const SBM_WITHIN_FRACTION: f64 = 0.9;

/// Parameters of one within-cluster ensemble draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleSpec {
    pub kind: EnsembleKind,
    pub nodes: usize,
    pub mean_degree: f64,
}

impl EnsembleSpec {
    pub fn new(kind: EnsembleKind, nodes: usize, mean_degree: f64) -> Result<Self, NetGenError> {
        let spec = EnsembleSpec {
            kind,
            nodes,
            mean_degree,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), NetGenError> {
        if self.nodes < 2 {
            return Err(NetGenError::InvalidSpec(format!(
                "need at least 2 nodes, got {}",
                self.nodes
            )));
        }
        if !self.mean_degree.is_finite() || self.mean_degree < 0.0 {
            return Err(NetGenError::InvalidSpec(format!(
                "mean degree must be finite and non-negative, got {}",
                self.mean_degree
            )));
        }
        match self.kind {
            // mean_degree = n - 1 is the forced complete graph (p = 1).
            EnsembleKind::ErdosRenyi => {
                if self.mean_degree > (self.nodes - 1) as f64 {
                    return Err(NetGenError::InvalidSpec(format!(
                        "mean degree {} needs edge probability above 1 at n = {}",
                        self.mean_degree, self.nodes
                    )));
                }
            }
            EnsembleKind::BarabasiAlbert => {
                let m = ba_attach_count(self.mean_degree);
                if m == 0 {
                    return Err(NetGenError::InvalidSpec(
                        "preferential attachment needs mean degree >= 1".into(),
                    ));
                }
                if self.nodes <= m {
                    return Err(NetGenError::InvalidSpec(format!(
                        "preferential attachment needs n > {m} for mean degree {}",
                        self.mean_degree
                    )));
                }
            }
            EnsembleKind::SbmLattice => {
                if self.mean_degree > (self.nodes - 1) as f64 {
                    return Err(NetGenError::InvalidSpec(format!(
                        "mean degree {} exceeds n - 1 = {}",
                        self.mean_degree,
                        self.nodes - 1
                    )));
                }
                if self.nodes % SBM_BLOCKS != 0 {
                    return Err(NetGenError::InvalidSpec(format!(
                        "blockmodel needs n divisible by {SBM_BLOCKS}, got {}",
                        self.nodes
                    )));
                }
                let block_size = self.nodes / SBM_BLOCKS;
                if block_size < 2 {
                    return Err(NetGenError::InvalidSpec(
                        "blockmodel blocks need at least 2 nodes".into(),
                    ));
                }
                if sbm_within_probability(self.nodes, self.mean_degree) > 1.0 {
                    return Err(NetGenError::InvalidSpec(format!(
                        "within-block probability exceeds 1 for n={} mean degree {}",
                        self.nodes, self.mean_degree
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Edges each arriving node attaches in the preferential-attachment model.
pub fn ba_attach_count(mean_degree: f64) -> usize {
    (mean_degree / 2.0).round() as usize
}

/// Within-block edge probability giving expected within-block degree of
/// `SBM_WITHIN_FRACTION * mean_degree`.
pub fn sbm_within_probability(nodes: usize, mean_degree: f64) -> f64 {
    let block_size = nodes / SBM_BLOCKS;
    SBM_WITHIN_FRACTION * mean_degree / (block_size - 1) as f64
}

/// The ten blocks arranged as a four-row triangle:
///
/// ```text
///        0
///       1 2
///      3 4 5
///     6 7 8 9
/// ```
///
/// Pairs listed here are lattice-adjacent; all other block pairs have zero
/// edge probability.
pub const SBM_LATTICE_ADJACENCY: [(usize, usize); 18] = [
    (0, 1),
    (0, 2),
    (1, 2),
    (1, 3),
    (1, 4),
    (2, 4),
    (2, 5),
    (3, 4),
    (4, 5),
    (3, 6),
    (3, 7),
    (4, 7),
    (4, 8),
    (5, 8),
    (5, 9),
    (6, 7),
    (7, 8),
    (8, 9),
];

const SBM_CORNER_BLOCKS: [usize; 3] = [0, 6, 9];

/// Share of the between-block degree budget routed through one lattice edge,
/// solved so that every node's expected between-block degree is exactly
/// `(1 - SBM_WITHIN_FRACTION) * mean_degree` despite unequal lattice degrees:
/// corner-incident edges carry 1/2 of a corner node's budget, every other
/// edge carries 1/6 (corners have 2 lattice neighbors, edges 4, the center 6).
fn sbm_edge_budget_share(a: usize, b: usize) -> f64 {
    if SBM_CORNER_BLOCKS.contains(&a) || SBM_CORNER_BLOCKS.contains(&b) {
        0.5
    } else {
        1.0 / 6.0
    }
}

/// Between-block edge probability for lattice-adjacent blocks `a < b`.
pub fn sbm_between_probability(nodes: usize, mean_degree: f64, a: usize, b: usize) -> f64 {
    let block_size = nodes / SBM_BLOCKS;
    let budget = (1.0 - SBM_WITHIN_FRACTION) * mean_degree;
    sbm_edge_budget_share(a, b) * budget / block_size as f64
}

/// Erdős–Rényi draw: every unordered pair is an edge independently with
/// probability `mean_degree / (n - 1)`.
pub fn generate_er<R: Rng + ?Sized>(spec: &EnsembleSpec, rng: &mut R) -> Result<Network, NetGenError> {
    require_kind(spec, EnsembleKind::ErdosRenyi)?;
    let n = spec.nodes;
    let p = spec.mean_degree / (n - 1) as f64;
    let edges = bernoulli_pairs(pair_count(n), p, rng)
        .into_iter()
        .map(|k| unrank_pair(k, n))
        .collect();
    Ok(Network::new(n, edges).expect("generator produced invalid edges"))
}

/// Preferential attachment: `m` seed nodes start edgeless, the first arrival
/// links to all of them, and every later arrival links to `m` distinct
/// existing nodes sampled proportionally to current degree. Edge count is
/// exactly `m * (n - m)`.
pub fn generate_ba<R: Rng + ?Sized>(spec: &EnsembleSpec, rng: &mut R) -> Result<Network, NetGenError> {
    require_kind(spec, EnsembleKind::BarabasiAlbert)?;
    let n = spec.nodes;
    let m = ba_attach_count(spec.mean_degree);
    let mut edges = Vec::with_capacity(m * (n - m));
    let mut targets: Vec<usize> = (0..m).collect();
    // One entry per unit of degree; sampling an index uniformly is
    // degree-proportional sampling.
    let mut repeated: Vec<usize> = Vec::with_capacity(2 * m * (n - m));
    for source in m..n {
        for &t in &targets {
            edges.push((t, source));
        }
        repeated.extend_from_slice(&targets);
        repeated.extend(std::iter::repeat_n(source, m));
        if source + 1 < n {
            targets = distinct_degree_sample(&repeated, m, rng);
        }
    }
    Ok(Network::new(n, edges).expect("generator produced invalid edges"))
}

fn distinct_degree_sample<R: Rng + ?Sized>(repeated: &[usize], m: usize, rng: &mut R) -> Vec<usize> {
    let mut chosen = Vec::with_capacity(m);
    let mut seen = HashSet::with_capacity(m);
    while chosen.len() < m {
        let v = repeated[rng.random_range(0..repeated.len())];
        if seen.insert(v) {
            chosen.push(v);
        }
    }
    chosen
}

/// Blockmodel draw on the triangular block lattice.
pub fn generate_sbm_lattice<R: Rng + ?Sized>(
    spec: &EnsembleSpec,
    rng: &mut R,
) -> Result<Network, NetGenError> {
    require_kind(spec, EnsembleKind::SbmLattice)?;
    let classes = sbm_pair_classes(spec);
    let counts = sample_class_counts(&classes, rng);
    Ok(instantiate_classes(spec, &classes, &counts, rng))
}

/// Draws the two clusters of one pair from the same ensemble with the same
/// number of edges, as required for rewiring to reach any mixing target.
///
/// - Erdős–Rényi: cluster A is a standard draw; cluster B is uniform over
///   graphs with A's edge count (exactly the conditional distribution of a
///   second draw given equal counts).
/// - Barabási–Albert: edge count is deterministic, so two independent draws.
/// - Blockmodel: per-class edge counts are drawn once and both clusters
///   instantiate them uniformly, which preserves the marginal ensemble.
pub fn sample_matched_pair<R: Rng + ?Sized>(
    spec: &EnsembleSpec,
    rng: &mut R,
) -> Result<(Network, Network), NetGenError> {
    spec.validate()?;
    match spec.kind {
        EnsembleKind::ErdosRenyi => {
            let a = generate_er(spec, rng)?;
            let b_edges = uniform_distinct_pairs(pair_count(spec.nodes), a.edge_count(), rng)
                .into_iter()
                .map(|k| unrank_pair(k, spec.nodes))
                .collect();
            let b = Network::new(spec.nodes, b_edges).expect("generator produced invalid edges");
            Ok((a, b))
        }
        EnsembleKind::BarabasiAlbert => Ok((generate_ba(spec, rng)?, generate_ba(spec, rng)?)),
        EnsembleKind::SbmLattice => {
            let classes = sbm_pair_classes(spec);
            let counts = sample_class_counts(&classes, rng);
            let a = instantiate_classes(spec, &classes, &counts, rng);
            let b = instantiate_classes(spec, &classes, &counts, rng);
            Ok((a, b))
        }
    }
}

fn require_kind(spec: &EnsembleSpec, kind: EnsembleKind) -> Result<(), NetGenError> {
    spec.validate()?;
    if spec.kind != kind {
        return Err(NetGenError::InvalidSpec(format!(
            "expected {} spec, got {}",
            kind.label(),
            spec.kind.label()
        )));
    }
    Ok(())
}

fn pair_count(n: usize) -> usize {
    n * (n - 1) / 2
}

/// Indices of the pairs selected by independent Bernoulli(p) trials over a
/// linear pair space, generated with geometric gap skipping (distribution
/// identical to testing every pair).
fn bernoulli_pairs<R: Rng + ?Sized>(total: usize, p: f64, rng: &mut R) -> Vec<usize> {
    if p <= 0.0 {
        return Vec::new();
    }
    if p >= 1.0 {
        return (0..total).collect();
    }
    let ln_q = (1.0 - p).ln();
    let mut picked = Vec::new();
    let mut cursor: usize = 0;
    loop {
        let u: f64 = rng.random();
        // Number of failures before the next success.
        let skip = ((1.0 - u).ln() / ln_q).floor();
        if !skip.is_finite() || cursor as f64 + skip >= total as f64 {
            break;
        }
        cursor += skip as usize;
        picked.push(cursor);
        cursor += 1;
        if cursor >= total {
            break;
        }
    }
    picked
}

/// Uniform sample of `m` distinct pair indices out of `total`.
fn uniform_distinct_pairs<R: Rng + ?Sized>(total: usize, m: usize, rng: &mut R) -> Vec<usize> {
    assert!(m <= total, "cannot place {m} edges in {total} slots");
    let mut seen = HashSet::with_capacity(m);
    let mut picked = Vec::with_capacity(m);
    while picked.len() < m {
        let k = rng.random_range(0..total);
        if seen.insert(k) {
            picked.push(k);
        }
    }
    picked
}

/// Maps linear index `k` to the `k`-th unordered pair `(i, j)`, `i < j`, in
/// lexicographic order over `n` nodes.
fn unrank_pair(k: usize, n: usize) -> (usize, usize) {
    // Pairs with first element < i occupy the first i*(2n - i - 1)/2 slots.
    let kf = k as f64;
    let nf = n as f64;
    let mut i = (nf - 0.5 - ((nf - 0.5) * (nf - 0.5) - 2.0 * kf).sqrt()).floor() as usize;
    // Float sloppiness fixup.
    while row_start(i + 1, n) <= k {
        i += 1;
    }
    while row_start(i, n) > k {
        i -= 1;
    }
    let j = i + 1 + (k - row_start(i, n));
    (i, j)
}

fn row_start(i: usize, n: usize) -> usize {
    i * (2 * n - i - 1) / 2
}

#[derive(Debug, Clone, Copy)]
enum PairClass {
    Within { block: usize },
    Between { a: usize, b: usize },
}

struct ClassSpec {
    class: PairClass,
    slots: usize,
    probability: f64,
}

fn sbm_pair_classes(spec: &EnsembleSpec) -> Vec<ClassSpec> {
    let block_size = spec.nodes / SBM_BLOCKS;
    let p_within = sbm_within_probability(spec.nodes, spec.mean_degree);
    let mut classes = Vec::with_capacity(SBM_BLOCKS + SBM_LATTICE_ADJACENCY.len());
    for block in 0..SBM_BLOCKS {
        classes.push(ClassSpec {
            class: PairClass::Within { block },
            slots: pair_count(block_size),
            probability: p_within,
        });
    }
    for &(a, b) in &SBM_LATTICE_ADJACENCY {
        classes.push(ClassSpec {
            class: PairClass::Between { a, b },
            slots: block_size * block_size,
            probability: sbm_between_probability(spec.nodes, spec.mean_degree, a, b),
        });
    }
    classes
}

fn sample_class_counts<R: Rng + ?Sized>(classes: &[ClassSpec], rng: &mut R) -> Vec<usize> {
    classes
        .iter()
        .map(|c| {
            let binom = Binomial::new(c.slots as u64, c.probability)
                .expect("class probability validated in spec");
            binom.sample(rng) as usize
        })
        .collect()
}

fn instantiate_classes<R: Rng + ?Sized>(
    spec: &EnsembleSpec,
    classes: &[ClassSpec],
    counts: &[usize],
    rng: &mut R,
) -> Network {
    let block_size = spec.nodes / SBM_BLOCKS;
    let mut edges = Vec::with_capacity(counts.iter().sum());
    for (class, &count) in classes.iter().zip(counts) {
        for k in uniform_distinct_pairs(class.slots, count, rng) {
            edges.push(match class.class {
                PairClass::Within { block } => {
                    let (i, j) = unrank_pair(k, block_size);
                    (block * block_size + i, block * block_size + j)
                }
                PairClass::Between { a, b } => {
                    (a * block_size + k / block_size, b * block_size + k % block_size)
                }
            });
        }
    }
    let blocks = (0..spec.nodes).map(|v| v / block_size).collect();
    Network::new(spec.nodes, edges)
        .expect("generator produced invalid edges")
        .with_blocks(blocks)
        .expect("block labels cover all nodes")
}
