//! Mixing estimation from observed communication data: zip-indexed call
//! edge lists are clustered geographically, clusters are paired and
//! randomized to hypothetical arms, and the mixing fraction gamma is
//! summarized over many randomizations.

use std::collections::BTreeMap;
use std::io::{self, Read, Write};
use std::path::Path;

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("empty edge list")]
    EmptyEdges,
    #[error("empty zip map")]
    EmptyZips,
    #[error("node {0} appears in the edge list but has no zip")]
    MissingZip(u64),
    #[error("node {0} is mapped to two different zips")]
    DuplicateZip(u64),
    #[error("self-call record for node {0}")]
    SelfCall(u64),
    #[error("call count must be at least 1 (node pair {0}, {1})")]
    ZeroCount(u64, u64),
    #[error("zip index {zip} outside 1..={zips}")]
    ZipOutOfRange { zip: usize, zips: usize },
    #[error("invalid argument: {0}")]
    InvalidArg(String),
    #[error("row {row}: {message}")]
    Malformed { row: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// A symmetrized call network: distinct node pairs with total call counts,
/// plus a dense 1-based zip index per node.
#[derive(Debug, Clone)]
pub struct CallEdgeList {
    /// Call totals per unordered node pair (internal node indices).
    edges: Vec<(usize, usize, u64)>,
    /// Dense zip index per node, 1..=zip_count.
    node_zip: Vec<usize>,
    zip_count: usize,
    /// Original node ids, sorted; position = internal index.
    node_ids: Vec<u64>,
}

impl CallEdgeList {
    /// Builds the dataset from raw records. Call directions are merged
    /// (d_ij totals both directions); zips are re-indexed densely by sorted
    /// raw value; nodes in calls but missing from the zip map are an error.
    pub fn from_records(
        calls: &[(u64, u64, u64)],
        zips: &[(u64, u64)],
    ) -> Result<Self, DataError> {
        if calls.is_empty() {
            return Err(DataError::EmptyEdges);
        }
        if zips.is_empty() {
            return Err(DataError::EmptyZips);
        }
        let mut zip_of: BTreeMap<u64, u64> = BTreeMap::new();
        for &(node, zip) in zips {
            if let Some(prev) = zip_of.insert(node, zip) {
                if prev != zip {
                    return Err(DataError::DuplicateZip(node));
                }
            }
        }
        let mut raw_zips: Vec<u64> = zip_of.values().copied().collect();
        raw_zips.sort_unstable();
        raw_zips.dedup();
        let zip_index: BTreeMap<u64, usize> = raw_zips
            .iter()
            .enumerate()
            .map(|(i, &z)| (z, i + 1))
            .collect();

        let node_ids: Vec<u64> = zip_of.keys().copied().collect();
        let index_of: BTreeMap<u64, usize> = node_ids
            .iter()
            .enumerate()
            .map(|(i, &id)| (id, i))
            .collect();
        let node_zip: Vec<usize> = node_ids.iter().map(|id| zip_index[&zip_of[id]]).collect();

        let mut totals: BTreeMap<(usize, usize), u64> = BTreeMap::new();
        for &(src, dst, count) in calls {
            if src == dst {
                return Err(DataError::SelfCall(src));
            }
            if count == 0 {
                return Err(DataError::ZeroCount(src, dst));
            }
            let a = *index_of.get(&src).ok_or(DataError::MissingZip(src))?;
            let b = *index_of.get(&dst).ok_or(DataError::MissingZip(dst))?;
            *totals.entry((a.min(b), a.max(b))).or_insert(0) += count;
        }
        Ok(CallEdgeList {
            edges: totals.into_iter().map(|((a, b), c)| (a, b, c)).collect(),
            node_zip,
            zip_count: raw_zips.len(),
            node_ids,
        })
    }

    /// Loads `src,dst,count` and `node,zip` CSV files (header row optional).
    pub fn from_csv_paths(edges: &Path, zips: &Path) -> Result<Self, DataError> {
        let calls = read_numeric_csv::<3>(edges)?
            .into_iter()
            .map(|[a, b, c]| (a, b, c))
            .collect::<Vec<_>>();
        let zip_rows = read_numeric_csv::<2>(zips)?
            .into_iter()
            .map(|[a, b]| (a, b))
            .collect::<Vec<_>>();
        CallEdgeList::from_records(&calls, &zip_rows)
    }

    pub fn node_count(&self) -> usize {
        self.node_ids.len()
    }

    pub fn zip_count(&self) -> usize {
        self.zip_count
    }

    pub fn distinct_pairs(&self) -> usize {
        self.edges.len()
    }

    /// Writes the `src,dst,count` / `node,zip` CSV pair this module reads.
    pub fn write_csv<W: Write, V: Write>(&self, mut edges: W, mut zips: V) -> io::Result<()> {
        writeln!(edges, "src,dst,count")?;
        for &(a, b, count) in &self.edges {
            writeln!(edges, "{},{},{count}", self.node_ids[a], self.node_ids[b])?;
        }
        writeln!(zips, "node,zip")?;
        for (i, &zip) in self.node_zip.iter().enumerate() {
            writeln!(zips, "{},{zip}", self.node_ids[i])?;
        }
        Ok(())
    }
}

fn read_numeric_csv<const W: usize>(path: &Path) -> Result<Vec<[u64; W]>, DataError> {
    let mut file = std::fs::File::open(path)?;
    let mut text = String::new();
    file.read_to_string(&mut text)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(false)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != W {
            return Err(DataError::Malformed {
                row: row + 1,
                message: format!("expected {W} fields, got {}", record.len()),
            });
        }
        // Tolerate one header row.
        if row == 0 && record.iter().any(|f| f.trim().parse::<u64>().is_err()) {
            continue;
        }
        let mut out = [0u64; W];
        for (i, field) in record.iter().enumerate() {
            out[i] = field.trim().parse().map_err(|e| DataError::Malformed {
                row: row + 1,
                message: format!("field {:?}: {e}", field),
            })?;
        }
        rows.push(out);
    }
    Ok(rows)
}

/// Cluster of a zip: `ceil(zip / zips * 2C)`, an index in 1..=2C. Zips are
/// numerically contiguous with geography, so contiguous zips share clusters.
pub fn assign_clusters(zip: usize, zips: usize, pairs: usize) -> Result<usize, DataError> {
    if pairs == 0 {
        return Err(DataError::InvalidArg("need at least one pair".into()));
    }
    if zip == 0 || zip > zips {
        return Err(DataError::ZipOutOfRange { zip, zips });
    }
    Ok((zip * 2 * pairs).div_ceil(zips))
}

/// The dataset reduced to cluster-level edges for a fixed pair count:
/// cluster `2k-1` is paired with cluster `2k`.
#[derive(Debug, Clone)]
pub struct ClusteredCalls {
    /// (cluster_a, cluster_b, distinct_pairs, total_calls) aggregated over
    /// node pairs; clusters are 1-based.
    edges: Vec<(usize, usize, u64, u64)>,
    pairs: usize,
}

impl ClusteredCalls {
    pub fn new(data: &CallEdgeList, pairs: usize) -> Result<Self, DataError> {
        if pairs == 0 {
            return Err(DataError::InvalidArg("need at least one pair".into()));
        }
        let cluster_of: Vec<usize> = data
            .node_zip
            .iter()
            .map(|&z| assign_clusters(z, data.zip_count, pairs))
            .collect::<Result<_, _>>()?;
        let mut agg: BTreeMap<(usize, usize), (u64, u64)> = BTreeMap::new();
        for &(a, b, count) in &data.edges {
            let (ca, cb) = (cluster_of[a], cluster_of[b]);
            let key = (ca.min(cb), ca.max(cb));
            let entry = agg.entry(key).or_insert((0, 0));
            entry.0 += 1;
            entry.1 += count;
        }
        Ok(ClusteredCalls {
            edges: agg
                .into_iter()
                .map(|((a, b), (d, c))| (a, b, d, c))
                .collect(),
            pairs,
        })
    }

    /// Mixing fraction for one arm assignment. `treat_first[k]` puts the
    /// first cluster of pair k (cluster 2k+1, 1-based) in the treatment arm.
    /// Weighted mixing uses call totals as edge weights, unweighted uses
    /// distinct calling pairs.
    pub fn gamma_for_assignment(&self, treat_first: &[bool], weighted: bool) -> f64 {
        assert_eq!(treat_first.len(), self.pairs, "one flag per pair");
        let arm = |cluster: usize| -> bool {
            let pair = (cluster - 1) / 2;
            let first = (cluster - 1) % 2 == 0;
            first == treat_first[pair]
        };
        let mut cross = 0u64;
        let mut total = 0u64;
        for &(ca, cb, distinct, calls) in &self.edges {
            let weight = if weighted { calls } else { distinct };
            total += weight;
            if arm(ca) != arm(cb) {
                cross += weight;
            }
        }
        if total == 0 {
            return 0.0;
        }
        cross as f64 / total as f64
    }
}

/// Distribution of gamma over repeated hypothetical randomizations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaSummary {
    pub pairs: usize,
    pub weighted: bool,
    pub mean: f64,
    pub pct2_5: f64,
    pub pct97_5: f64,
    pub randomizations: usize,
}

/// Clusters the zips into 2C clusters, pairs them contiguously, and for
/// each randomization assigns one cluster per pair to treatment by a fair
/// coin, returning the mean and (2.5, 97.5) percentiles of gamma.
pub fn estimate_gamma_distribution<R: Rng + ?Sized>(
    data: &CallEdgeList,
    pairs: usize,
    randomizations: usize,
    weighted: bool,
    rng: &mut R,
) -> Result<GammaSummary, DataError> {
    if randomizations < 2 {
        return Err(DataError::InvalidArg(
            "need at least 2 randomizations".into(),
        ));
    }
    let clustered = ClusteredCalls::new(data, pairs)?;
    let mut gammas: Vec<f64> = (0..randomizations)
        .map(|_| {
            let flips: Vec<bool> = (0..pairs).map(|_| rng.random_bool(0.5)).collect();
            clustered.gamma_for_assignment(&flips, weighted)
        })
        .collect();
    let mean = crate::stats::mean(&gammas);
    gammas.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(GammaSummary {
        pairs,
        weighted,
        mean,
        pct2_5: crate::stats::quantile_sorted(&gammas, 0.025),
        pct97_5: crate::stats::quantile_sorted(&gammas, 0.975),
        randomizations,
    })
}

/// Per-node degrees: distinct contacts (unweighted) or total calls
/// (weighted).
pub fn node_degrees(data: &CallEdgeList, weighted: bool) -> Vec<u64> {
    let mut degrees = vec![0u64; data.node_count()];
    for &(a, b, count) in &data.edges {
        let w = if weighted { count } else { 1 };
        degrees[a] += w;
        degrees[b] += w;
    }
    degrees
}

/// Logarithmically binned degree histogram: bins are [2^i, 2^(i+1)).
#[derive(Debug, Clone)]
pub struct DegreeHistogram {
    pub bins: Vec<(u64, u64, usize)>,
}

/// Histogram of node degrees in powers-of-two bins, for the degree
/// distribution export.
pub fn degree_distribution(data: &CallEdgeList, weighted: bool) -> DegreeHistogram {
    let degrees = node_degrees(data, weighted);
    let max = degrees.iter().copied().max().unwrap_or(0);
    let mut bins = Vec::new();
    let mut lo = 1u64;
    while lo <= max {
        let hi = lo * 2;
        let count = degrees.iter().filter(|&&d| d >= lo && d < hi).count();
        bins.push((lo, hi, count));
        lo = hi;
    }
    DegreeHistogram { bins }
}

impl DegreeHistogram {
    /// CSV rows `bin_lo,bin_hi,count`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "bin_lo,bin_hi,count")?;
        for &(lo, hi, count) in &self.bins {
            writeln!(w, "{lo},{hi},{count}")?;
        }
        Ok(())
    }
}

/// Header for the gamma summary CSV.
pub const GAMMA_CSV_HEADER: &str = "C,weighted,mean_gamma,pct2_5,pct97_5,randomizations";

/// One gamma summary as a CSV row matching [`GAMMA_CSV_HEADER`].
pub fn write_gamma_row<W: Write>(mut w: W, summary: &GammaSummary) -> io::Result<()> {
    writeln!(
        w,
        "{},{},{:.6},{:.6},{:.6},{}",
        summary.pairs,
        summary.weighted,
        summary.mean,
        summary.pct2_5,
        summary.pct97_5,
        summary.randomizations
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn zips_for(nodes: usize, zip_of: impl Fn(u64) -> u64) -> Vec<(u64, u64)> {
        (0..nodes as u64).map(|n| (n, zip_of(n))).collect()
    }

    #[test]
    fn assign_clusters_examples() {
        // Last zip always lands in the last cluster.
        assert_eq!(assign_clusters(3806, 3806, 5).unwrap(), 10);
        // First of many zips lands in cluster 1: ceil(10/3806) = 1.
        assert_eq!(assign_clusters(1, 3806, 5).unwrap(), 1);
        assert!(matches!(
            assign_clusters(0, 10, 2),
            Err(DataError::ZipOutOfRange { .. })
        ));
        assert!(matches!(
            assign_clusters(11, 10, 2),
            Err(DataError::ZipOutOfRange { .. })
        ));
    }

    #[test]
    fn assign_clusters_is_monotone_in_zip() {
        let (zips, pairs) = (137, 7);
        let mut last = 0;
        for z in 1..=zips {
            let c = assign_clusters(z, zips, pairs).unwrap();
            assert!(c >= last, "not monotone at zip {z}");
            assert!((1..=2 * pairs).contains(&c));
            last = c;
        }
        assert_eq!(last, 2 * pairs);
    }

    #[test]
    fn symmetrizes_and_validates_records() {
        let calls = [(0u64, 1u64, 3u64), (1, 0, 2)];
        let zips = zips_for(2, |_| 1);
        let data = CallEdgeList::from_records(&calls, &zips).unwrap();
        assert_eq!(data.edges, vec![(0, 1, 5)]);

        let bad = CallEdgeList::from_records(&[(0, 0, 1)], &zips);
        assert!(matches!(bad, Err(DataError::SelfCall(0))));
        let missing = CallEdgeList::from_records(&[(0, 9, 1)], &zips);
        assert!(matches!(missing, Err(DataError::MissingZip(9))));
        let zero = CallEdgeList::from_records(&[(0, 1, 0)], &zips);
        assert!(matches!(zero, Err(DataError::ZeroCount(0, 1))));
    }

    #[test]
    fn single_zip_data_has_zero_gamma() {
        let calls: Vec<(u64, u64, u64)> = (0..20).map(|i| (i, (i + 1) % 21, 2)).collect();
        let zips = zips_for(21, |_| 77);
        let data = CallEdgeList::from_records(&calls, &zips).unwrap();
        for pairs in [1, 2, 5] {
            let summary =
                estimate_gamma_distribution(&data, pairs, 50, false, &mut seeded(1)).unwrap();
            assert_eq!(summary.mean, 0.0);
            assert_eq!(summary.pct97_5, 0.0);
        }
    }

    #[test]
    fn cross_only_toy_data_has_gamma_one() {
        // Four zips, C = 1: zips 1-2 form cluster 1, zips 3-4 cluster 2;
        // calls exist only between zip 1 and zip 3.
        let calls = [(0u64, 2u64, 1u64), (1, 3, 4)];
        let zips: Vec<(u64, u64)> = vec![(0, 1), (1, 1), (2, 3), (3, 3), (4, 2), (5, 4)];
        let data = CallEdgeList::from_records(&calls, &zips).unwrap();
        for weighted in [false, true] {
            let summary =
                estimate_gamma_distribution(&data, 1, 20, weighted, &mut seeded(2)).unwrap();
            assert_eq!(summary.mean, 1.0, "weighted={weighted}");
            assert_eq!(summary.pct2_5, 1.0);
        }
    }

    #[test]
    fn gamma_invariant_to_flipping_all_labels() {
        let calls = [
            (0u64, 1u64, 5u64),
            (0, 2, 1),
            (1, 3, 2),
            (2, 3, 7),
            (0, 3, 1),
        ];
        let zips = zips_for(4, |n| n + 1);
        let data = CallEdgeList::from_records(&calls, &zips).unwrap();
        let clustered = ClusteredCalls::new(&data, 2).unwrap();
        for weighted in [false, true] {
            for mask in 0..4u8 {
                let flips = [mask & 1 == 1, mask & 2 == 2];
                let inverted = [!flips[0], !flips[1]];
                let a = clustered.gamma_for_assignment(&flips, weighted);
                let b = clustered.gamma_for_assignment(&inverted, weighted);
                assert_eq!(a, b);
                assert!((0.0..=1.0).contains(&a));
            }
        }
    }

    #[test]
    fn degree_examples() {
        let calls = [(10u64, 20u64, 7u64)];
        let zips = vec![(10, 1), (20, 1)];
        let data = CallEdgeList::from_records(&calls, &zips).unwrap();
        assert_eq!(node_degrees(&data, false), vec![1, 1]);
        assert_eq!(node_degrees(&data, true), vec![7, 7]);

        // Star with a hub and 5 leaves.
        let calls: Vec<(u64, u64, u64)> = (1..=5).map(|leaf| (0, leaf, 1)).collect();
        let zips = zips_for(6, |_| 1);
        let star = CallEdgeList::from_records(&calls, &zips).unwrap();
        assert_eq!(node_degrees(&star, false)[0], 5);
    }

    #[test]
    fn histogram_bins_are_powers_of_two() {
        let calls = [(0u64, 1u64, 7u64), (0, 2, 1), (0, 3, 1)];
        let zips = zips_for(4, |_| 1);
        let data = CallEdgeList::from_records(&calls, &zips).unwrap();
        let hist = degree_distribution(&data, true);
        // Weighted degrees: node 0 = 9, node 1 = 7, nodes 2-3 = 1.
        assert_eq!(hist.bins[0], (1, 2, 2));
        let total: usize = hist.bins.iter().map(|b| b.2).sum();
        assert_eq!(total, 4);
    }

    #[test]
    fn csv_round_trip() {
        let calls = [(5u64, 9u64, 3u64), (9, 12, 1)];
        let zips = vec![(5, 100), (9, 200), (12, 200)];
        let data = CallEdgeList::from_records(&calls, &zips).unwrap();
        let dir = std::env::temp_dir().join("crtsim-empirical-test");
        std::fs::create_dir_all(&dir).unwrap();
        let edges_path = dir.join("edges.csv");
        let zips_path = dir.join("zips.csv");
        let mut edges_buf = Vec::new();
        let mut zips_buf = Vec::new();
        data.write_csv(&mut edges_buf, &mut zips_buf).unwrap();
        std::fs::write(&edges_path, &edges_buf).unwrap();
        std::fs::write(&zips_path, &zips_buf).unwrap();
        let reloaded = CallEdgeList::from_csv_paths(&edges_path, &zips_path).unwrap();
        assert_eq!(reloaded.edges, data.edges);
        assert_eq!(reloaded.node_zip, data.node_zip);
    }
}
