//! Between-cluster mixing: the mixing fraction gamma, modularity of the
//! two-arm partition, and degree-preserving rewiring of a cluster pair
//! toward a target gamma.

use std::collections::HashSet;

use rand::Rng;
use thiserror::Error;

use crate::graph::Network;

#[derive(Debug, Error, PartialEq)]
pub enum MixingError {
    #[error("graph has no edges")]
    EmptyEdgeSet,
    #[error("arm labels must cover all {nodes} nodes (got {got})")]
    ArmLabelMismatch { nodes: usize, got: usize },
    #[error("clusters must have equal node counts ({0} vs {1})")]
    UnequalClusters(usize, usize),
}

#[derive(Debug, Error, PartialEq)]
pub enum RewireError {
    #[error("target gamma {0} outside [0, 1]")]
    TargetOutOfRange(f64),
    #[error("rewiring must start from an unmixed pair (found {cross_edges} cross edges)")]
    NotUnmixed { cross_edges: usize },
    #[error(
        "target gamma {target} unreachable: arm edge counts {within_control}/{within_treatment} \
         cap gamma at {max_gamma}"
    )]
    TargetUnreachable {
        target: f64,
        within_control: usize,
        within_treatment: usize,
        max_gamma: f64,
    },
    #[error("exhausted {attempts} swap attempts at {swaps_done}/{swaps_needed} swaps")]
    SwapExhausted {
        attempts: usize,
        swaps_done: usize,
        swaps_needed: usize,
    },
    #[error(transparent)]
    Mixing(#[from] MixingError),
}

/// Treatment arm of a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arm {
    Control,
    Treatment,
}

impl Arm {
    pub fn index(self) -> usize {
        match self {
            Arm::Control => 0,
            Arm::Treatment => 1,
        }
    }
}

/// A merged two-cluster graph with per-node arm labels. Nodes `0..n` are the
/// control cluster, `n..2n` the treatment cluster.
#[derive(Debug, Clone)]
pub struct ClusterPair {
    graph: Network,
    cluster_size: usize,
    achieved_gamma: f64,
}

impl ClusterPair {
    /// Joins two equal-sized clusters into an unmixed pair (gamma = 0);
    /// treatment-cluster node ids are offset by the cluster size.
    pub fn from_clusters(control: Network, treatment: Network) -> Result<Self, MixingError> {
        if control.node_count() != treatment.node_count() {
            return Err(MixingError::UnequalClusters(
                control.node_count(),
                treatment.node_count(),
            ));
        }
        let n = control.node_count();
        let mut edges = control.edges().to_vec();
        edges.extend(treatment.edges().iter().map(|&(a, b)| (a + n, b + n)));
        let graph = Network::new(2 * n, edges).expect("cluster join produced invalid edges");
        Ok(ClusterPair {
            graph,
            cluster_size: n,
            achieved_gamma: 0.0,
        })
    }

    pub fn graph(&self) -> &Network {
        &self.graph
    }

    pub fn cluster_size(&self) -> usize {
        self.cluster_size
    }

    pub fn achieved_gamma(&self) -> f64 {
        self.achieved_gamma
    }

    pub fn arm_of(&self, node: usize) -> Arm {
        if node < self.cluster_size {
            Arm::Control
        } else {
            Arm::Treatment
        }
    }

    /// Arm labels as a vector aligned with node ids.
    pub fn arms(&self) -> Vec<Arm> {
        (0..self.graph.node_count()).map(|v| self.arm_of(v)).collect()
    }
}

fn check_labels(graph: &Network, arm_of: &[Arm]) -> Result<(), MixingError> {
    if arm_of.len() != graph.node_count() {
        return Err(MixingError::ArmLabelMismatch {
            nodes: graph.node_count(),
            got: arm_of.len(),
        });
    }
    if graph.edge_count() == 0 {
        return Err(MixingError::EmptyEdgeSet);
    }
    Ok(())
}

/// Fraction of edges whose endpoints lie in different arms:
/// `1 - (1/2m) * sum_ij A_ij * delta(r_i, r_j)`.
pub fn mixing_fraction(graph: &Network, arm_of: &[Arm]) -> Result<f64, MixingError> {
    check_labels(graph, arm_of)?;
    let cross = graph
        .edges()
        .iter()
        .filter(|&&(a, b)| arm_of[a] != arm_of[b])
        .count();
    Ok(cross as f64 / graph.edge_count() as f64)
}

/// Modularity of the two-arm partition,
/// `Q = (1/2m) * sum_ij (A_ij - k_i k_j / 2m) * delta(r_i, r_j)`,
/// summed over all ordered pairs including the diagonal. Accumulated with
/// integer aggregates so the gamma + Q = 1/2 identity on balanced pairs is
/// exact to the last bit.
pub fn modularity(graph: &Network, arm_of: &[Arm]) -> Result<f64, MixingError> {
    check_labels(graph, arm_of)?;
    let m = graph.edge_count();
    let within = graph
        .edges()
        .iter()
        .filter(|&&(a, b)| arm_of[a] == arm_of[b])
        .count();
    let degrees = graph.degrees();
    let mut arm_degree_sum = [0u64; 2];
    for (node, arm) in arm_of.iter().enumerate() {
        arm_degree_sum[arm.index()] += degrees[node] as u64;
    }
    // sum_ij A_ij delta = 2 * within; sum_ij k_i k_j delta = D0^2 + D1^2.
    let two_m = 2.0 * m as f64;
    let degree_term =
        (arm_degree_sum[0].pow(2) + arm_degree_sum[1].pow(2)) as f64 / (two_m * two_m);
    Ok(2.0 * within as f64 / two_m - degree_term)
}

/// Per-swap resampling budget before giving up, scaled by edge count.
const SWAP_ATTEMPT_FACTOR: usize = 100;

/// Degree- and gamma-preserving relocation moves used when a conversion
/// swap is blocked by existing edges. On dense pairs a blocked swap can be
/// a dead end rather than bad luck; these shuffles keep every node's degree
/// and the cross-edge count while re-randomizing edge placement, so every
/// reachable gamma stays reachable.
fn relax_blocked_state<R: Rng + ?Sized>(
    within: &mut [Vec<(usize, usize)>; 2],
    cross: &mut [(usize, usize)],
    existing: &mut HashSet<(usize, usize)>,
    rng: &mut R,
) {
    if cross.is_empty() {
        return;
    }
    match rng.random_range(0..3) {
        0 => {
            // Re-pair two cross edges (a-c), (b-d) into (a-d), (b-c).
            if cross.len() < 2 {
                return;
            }
            let i = rng.random_range(0..cross.len());
            let j = rng.random_range(0..cross.len());
            if i == j {
                return;
            }
            let (a, c) = cross[i];
            let (b, d) = cross[j];
            if a == b || c == d {
                return;
            }
            let e1 = (a, d);
            let e2 = (b, c);
            if existing.contains(&e1) || existing.contains(&e2) {
                return;
            }
            existing.remove(&cross[i]);
            existing.remove(&cross[j]);
            existing.insert(e1);
            existing.insert(e2);
            cross[i] = e1;
            cross[j] = e2;
        }
        arm_choice => {
            // Swap a within-arm edge with a cross edge: (a, b) within plus
            // a cross edge through x in the same arm becomes (a, x) within
            // plus a cross edge through b (or the mirrored pairing).
            let arm = arm_choice - 1;
            if within[arm].is_empty() {
                return;
            }
            let i = rng.random_range(0..within[arm].len());
            let j = rng.random_range(0..cross.len());
            let (a, b) = within[arm][i];
            let (x, y) = cross[j];
            let own = if arm == 0 { x } else { y };
            let other = if arm == 0 { y } else { x };
            if own == a || own == b {
                return;
            }
            let (keep, move_out) = if rng.random_bool(0.5) { (a, b) } else { (b, a) };
            let new_within = (keep.min(own), keep.max(own));
            let new_cross = if arm == 0 { (move_out, other) } else { (other, move_out) };
            if existing.contains(&new_within) || existing.contains(&new_cross) {
                return;
            }
            existing.remove(&within[arm][i]);
            existing.remove(&cross[j]);
            existing.insert(new_within);
            existing.insert(new_cross);
            within[arm][i] = new_within;
            cross[j] = new_cross;
        }
    }
}

/// Rewires an unmixed pair toward `target_gamma` by repeatedly removing one
/// uniformly random within-arm edge from each arm and adding two cross-arm
/// edges over the four endpoints, choosing between the two valid cross
/// pairings with equal probability. Swaps that would duplicate an existing
/// edge are resampled. Every node's degree is unchanged.
///
/// Stops at the reachable gamma closest to the target (multiples of
/// 2/m); if that value is further than 1/m from the target the pair cannot
/// express the request and the call fails rather than degrade silently.
pub fn rewire_to_gamma<R: Rng + ?Sized>(
    pair: &ClusterPair,
    target_gamma: f64,
    rng: &mut R,
) -> Result<ClusterPair, RewireError> {
    if !(0.0..=1.0).contains(&target_gamma) {
        return Err(RewireError::TargetOutOfRange(target_gamma));
    }
    let arms = pair.arms();
    let graph = pair.graph();
    check_labels(graph, &arms)?;
    let m = graph.edge_count();

    let mut within = [Vec::new(), Vec::new()];
    let mut cross = Vec::new();
    for &(a, b) in graph.edges() {
        if arms[a] == arms[b] {
            within[arms[a].index()].push((a, b));
        } else {
            cross.push((a, b));
        }
    }
    if !cross.is_empty() {
        return Err(RewireError::NotUnmixed {
            cross_edges: cross.len(),
        });
    }

    // Each successful swap converts two within edges into two cross edges.
    let swaps_needed = (target_gamma * m as f64 / 2.0).round() as usize;
    let max_swaps = within[0].len().min(within[1].len());
    if swaps_needed > max_swaps {
        let max_gamma = 2.0 * max_swaps as f64 / m as f64;
        if (max_gamma - target_gamma).abs() > 1.0 / m as f64 {
            return Err(RewireError::TargetUnreachable {
                target: target_gamma,
                within_control: within[0].len(),
                within_treatment: within[1].len(),
                max_gamma,
            });
        }
    }
    let swaps_needed = swaps_needed.min(max_swaps);

    let mut existing: HashSet<(usize, usize)> = graph.edges().iter().copied().collect();
    let attempt_budget = SWAP_ATTEMPT_FACTOR * m;
    for swap in 0..swaps_needed {
        let mut attempts = 0;
        loop {
            if attempts >= attempt_budget {
                return Err(RewireError::SwapExhausted {
                    attempts,
                    swaps_done: swap,
                    swaps_needed,
                });
            }
            attempts += 1;
            let i0 = rng.random_range(0..within[0].len());
            let i1 = rng.random_range(0..within[1].len());
            let (a, b) = within[0][i0];
            let (c, d) = within[1][i1];
            // Control nodes are below the treatment offset, so both cross
            // edges are already canonical (low, high).
            let (e1, e2) = if rng.random_bool(0.5) {
                ((a, c), (b, d))
            } else {
                ((a, d), (b, c))
            };
            if existing.contains(&e1) || existing.contains(&e2) {
                relax_blocked_state(&mut within, &mut cross, &mut existing, rng);
                continue;
            }
            within[0].swap_remove(i0);
            within[1].swap_remove(i1);
            existing.remove(&(a, b));
            existing.remove(&(c, d));
            existing.insert(e1);
            existing.insert(e2);
            cross.push(e1);
            cross.push(e2);
            break;
        }
    }

    let mut edges = Vec::with_capacity(m);
    edges.extend_from_slice(&within[0]);
    edges.extend_from_slice(&within[1]);
    edges.extend_from_slice(&cross);
    let rewired = Network::new(graph.node_count(), edges).expect("rewiring produced invalid edges");
    let achieved = mixing_fraction(&rewired, &arms)?;
    Ok(ClusterPair {
        graph: rewired,
        cluster_size: pair.cluster_size,
        achieved_gamma: achieved,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netgen::{sample_matched_pair, EnsembleKind, EnsembleSpec};
    use crate::rng::seeded;

    fn arms_split(n: usize) -> Vec<Arm> {
        (0..2 * n)
            .map(|v| if v < n { Arm::Control } else { Arm::Treatment })
            .collect()
    }

    /// Brute-force modularity straight from the ordered-pair double sum;
    /// independent of the aggregate-based implementation.
    fn modularity_brute(graph: &Network, arm_of: &[Arm]) -> f64 {
        let n = graph.node_count();
        let degrees = graph.degrees();
        let mut adj = vec![vec![0u8; n]; n];
        for &(a, b) in graph.edges() {
            adj[a][b] = 1;
            adj[b][a] = 1;
        }
        let two_m = 2.0 * graph.edge_count() as f64;
        let mut q = 0.0;
        for i in 0..n {
            for j in 0..n {
                if arm_of[i] == arm_of[j] {
                    q += adj[i][j] as f64 - degrees[i] as f64 * degrees[j] as f64 / two_m;
                }
            }
        }
        q / two_m
    }

    #[test]
    fn gamma_zero_without_cross_edges() {
        let g = Network::new(4, vec![(0, 1), (2, 3)]).unwrap();
        assert_eq!(mixing_fraction(&g, &arms_split(2)).unwrap(), 0.0);
    }

    #[test]
    fn gamma_one_for_bipartite_pair() {
        let mut edges = Vec::new();
        for i in 0..3 {
            for j in 3..6 {
                edges.push((i, j));
            }
        }
        let g = Network::new(6, edges).unwrap();
        assert_eq!(mixing_fraction(&g, &arms_split(3)).unwrap(), 1.0);
    }

    #[test]
    fn gamma_counts_cross_edges() {
        let g = Network::new(4, vec![(0, 1), (2, 3), (1, 2)]).unwrap();
        let got = mixing_fraction(&g, &arms_split(2)).unwrap();
        assert!((got - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn gamma_errors_on_empty_graph() {
        let g = Network::new(2, vec![]).unwrap();
        assert_eq!(
            mixing_fraction(&g, &arms_split(1)).unwrap_err(),
            MixingError::EmptyEdgeSet
        );
    }

    #[test]
    fn modularity_single_within_edge() {
        // Direct evaluation of the ordered-pair sum, diagonal included:
        // A-term 2/(2m) = 1, degree term (1+1)^2 + 0 over (2m)^2 = 1.
        let g = Network::new(4, vec![(0, 1)]).unwrap();
        let q = modularity(&g, &arms_split(2)).unwrap();
        assert!((q - 0.0).abs() < 1e-15);
        assert!((q - modularity_brute(&g, &arms_split(2))).abs() < 1e-12);
    }

    #[test]
    fn modularity_single_cross_edge() {
        // All edges cross with equal arm degree sums: Q = -1/2.
        let g = Network::new(2, vec![(0, 1)]).unwrap();
        let q = modularity(&g, &arms_split(1)).unwrap();
        assert!((q + 0.5).abs() < 1e-15);
    }

    #[test]
    fn modularity_matches_brute_force_on_random_pairs() {
        let spec = EnsembleSpec::new(EnsembleKind::ErdosRenyi, 30, 4.0).unwrap();
        let mut rng = seeded(41);
        for _ in 0..25 {
            let (a, b) = sample_matched_pair(&spec, &mut rng).unwrap();
            let pair = ClusterPair::from_clusters(a, b).unwrap();
            let target = rng.random_range(0.0..=1.0);
            let Ok(rewired) = rewire_to_gamma(&pair, target, &mut rng) else {
                continue;
            };
            let arms = rewired.arms();
            let q = modularity(rewired.graph(), &arms).unwrap();
            let brute = modularity_brute(rewired.graph(), &arms);
            assert!((q - brute).abs() < 1e-12, "q={q} brute={brute}");
        }
    }

    #[test]
    fn gamma_plus_modularity_is_half_on_balanced_pairs() {
        let spec = EnsembleSpec::new(EnsembleKind::ErdosRenyi, 40, 4.0).unwrap();
        let mut rng = seeded(43);
        for _ in 0..50 {
            let (a, b) = sample_matched_pair(&spec, &mut rng).unwrap();
            let pair = ClusterPair::from_clusters(a, b).unwrap();
            let target = rng.random_range(0.0..=1.0);
            let rewired = rewire_to_gamma(&pair, target, &mut rng).unwrap();
            let arms = rewired.arms();
            let gamma = mixing_fraction(rewired.graph(), &arms).unwrap();
            let q = modularity(rewired.graph(), &arms).unwrap();
            assert!((gamma + q - 0.5).abs() <= 1e-12, "gamma={gamma} q={q}");
        }
    }

    #[test]
    fn rewire_target_zero_is_identity() {
        let spec = EnsembleSpec::new(EnsembleKind::ErdosRenyi, 50, 4.0).unwrap();
        let mut rng = seeded(47);
        let (a, b) = sample_matched_pair(&spec, &mut rng).unwrap();
        let pair = ClusterPair::from_clusters(a, b).unwrap();
        let before: Vec<_> = pair.graph().edges().to_vec();
        let rewired = rewire_to_gamma(&pair, 0.0, &mut rng).unwrap();
        assert_eq!(rewired.achieved_gamma(), 0.0);
        assert_eq!(rewired.graph().edges(), &before[..]);
    }

    #[test]
    fn rewire_balanced_pair_hits_half_exactly() {
        // 600 + 600 edges: target 0.5 is exactly 300 swaps.
        let n = 300;
        let spec = EnsembleSpec::new(EnsembleKind::ErdosRenyi, n, 4.0).unwrap();
        let mut rng = seeded(53);
        loop {
            let (a, b) = sample_matched_pair(&spec, &mut rng).unwrap();
            if a.edge_count() != 600 {
                continue;
            }
            let pair = ClusterPair::from_clusters(a, b).unwrap();
            let rewired = rewire_to_gamma(&pair, 0.5, &mut rng).unwrap();
            assert_eq!(rewired.achieved_gamma(), 0.5);
            let cross = rewired
                .graph()
                .edges()
                .iter()
                .filter(|&&(x, y)| (x < n) != (y < n))
                .count();
            assert_eq!(cross, 600);
            break;
        }
    }

    #[test]
    fn rewire_preserves_degree_multiset() {
        let specs = [
            EnsembleSpec::new(EnsembleKind::ErdosRenyi, 60, 4.0).unwrap(),
            EnsembleSpec::new(EnsembleKind::BarabasiAlbert, 60, 4.0).unwrap(),
            EnsembleSpec::new(EnsembleKind::SbmLattice, 60, 4.0).unwrap(),
        ];
        let mut rng = seeded(59);
        for _ in 0..40 {
            let spec = &specs[rng.random_range(0..3)];
            let (a, b) = sample_matched_pair(spec, &mut rng).unwrap();
            let pair = ClusterPair::from_clusters(a, b).unwrap();
            let before = pair.graph().degrees();
            let target = rng.random_range(0.0..=1.0);
            let rewired = rewire_to_gamma(&pair, target, &mut rng).unwrap();
            // Degrees per node, not just the multiset, are preserved.
            assert_eq!(rewired.graph().degrees(), before);
            let gap = (rewired.achieved_gamma() - target).abs();
            assert!(
                gap <= 1.0 / pair.graph().edge_count() as f64,
                "gap {gap} at target {target}"
            );
        }
    }

    #[test]
    fn achieved_gamma_monotone_in_swap_count() {
        let spec = EnsembleSpec::new(EnsembleKind::ErdosRenyi, 80, 4.0).unwrap();
        let mut rng = seeded(61);
        let (a, b) = sample_matched_pair(&spec, &mut rng).unwrap();
        let pair = ClusterPair::from_clusters(a, b).unwrap();
        let m = pair.graph().edge_count() as f64;
        let mut last = 0.0;
        let mut swaps = 0;
        while (2.0 * swaps as f64) / m <= 0.5 {
            let target = 2.0 * swaps as f64 / m;
            let got = rewire_to_gamma(&pair, target, &mut seeded(7)).unwrap().achieved_gamma();
            assert!(got >= last, "gamma decreased: {got} < {last}");
            last = got;
            swaps += 8;
        }
    }

    #[test]
    fn rewire_rejects_mixed_start_and_bad_targets() {
        let g = Network::new(4, vec![(0, 2), (1, 3)]).unwrap();
        let control = Network::new(2, vec![(0, 1)]).unwrap();
        let treatment = Network::new(2, vec![(0, 1)]).unwrap();
        let pair = ClusterPair::from_clusters(control, treatment).unwrap();
        assert!(matches!(
            rewire_to_gamma(&pair, 1.5, &mut seeded(1)),
            Err(RewireError::TargetOutOfRange(_))
        ));
        // Force a pre-mixed pair through the internals.
        let mixed = ClusterPair {
            graph: g,
            cluster_size: 2,
            achieved_gamma: 1.0,
        };
        assert!(matches!(
            rewire_to_gamma(&mixed, 0.5, &mut seeded(1)),
            Err(RewireError::NotUnmixed { cross_edges: 2 })
        ));
    }

    #[test]
    fn rewire_unbalanced_arms_cannot_reach_one() {
        // Control arm has two edges, treatment arm one: gamma caps at 2/3.
        let control = Network::new(3, vec![(0, 1), (1, 2)]).unwrap();
        let treatment = Network::new(3, vec![(0, 1)]).unwrap();
        let pair = ClusterPair::from_clusters(control, treatment).unwrap();
        let err = rewire_to_gamma(&pair, 1.0, &mut seeded(2)).unwrap_err();
        assert!(matches!(err, RewireError::TargetUnreachable { .. }));
    }
}
