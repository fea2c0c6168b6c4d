//! Synthetic call-data fixtures. The real calling dataset is proprietary,
//! so tests and demos run on constructed data with known structure.

use rand::Rng;

use crate::empirical::CallEdgeList;

/// Parameters of the spatially-local calling fixture: zips sit on a line,
/// within-neighborhood calls are frequent, long-range calls are rare and
/// light, mirroring the observed "people call nearby people more" pattern.
#[derive(Debug, Clone, Copy)]
pub struct LocalCallParams {
    pub zips: usize,
    pub nodes_per_zip: usize,
    /// Partners per node within `local_reach` zips.
    pub local_partners: usize,
    /// Calls logged with each local partner.
    pub local_calls: u64,
    /// Partners per node beyond `local_reach` zips.
    pub far_partners: usize,
    /// Calls logged with each far partner.
    pub far_calls: u64,
    /// Zip distance still considered local.
    pub local_reach: usize,
}

impl Default for LocalCallParams {
    fn default() -> Self {
        LocalCallParams {
            zips: 40,
            nodes_per_zip: 25,
            local_partners: 6,
            local_calls: 5,
            far_partners: 2,
            far_calls: 1,
            local_reach: 1,
        }
    }
}

/// Spatially-local call network. Cross-neighborhood call counts are
/// constructed below the within-neighborhood average, so unweighted gamma
/// dominates weighted gamma on this fixture.
pub fn spatially_local<R: Rng + ?Sized>(params: &LocalCallParams, rng: &mut R) -> CallEdgeList {
    assert!(params.zips >= 4 && params.nodes_per_zip >= 2);
    assert!(params.local_calls > params.far_calls);
    let node_count = params.zips * params.nodes_per_zip;
    let zip_of = |node: usize| node / params.nodes_per_zip;
    let mut calls = Vec::new();
    for node in 0..node_count {
        let zip = zip_of(node);
        for _ in 0..params.local_partners {
            let lo = zip.saturating_sub(params.local_reach);
            let hi = (zip + params.local_reach).min(params.zips - 1);
            let partner_zip = rng.random_range(lo..=hi);
            let partner = partner_zip * params.nodes_per_zip
                + rng.random_range(0..params.nodes_per_zip);
            if partner != node {
                calls.push((node as u64, partner as u64, params.local_calls));
            }
        }
        for _ in 0..params.far_partners {
            let partner = rng.random_range(0..node_count);
            if partner != node && zip_of(partner).abs_diff(zip) > params.local_reach {
                calls.push((node as u64, partner as u64, params.far_calls));
            }
        }
    }
    let zips: Vec<(u64, u64)> = (0..node_count)
        .map(|n| (n as u64, zip_of(n) as u64 + 1))
        .collect();
    CallEdgeList::from_records(&calls, &zips).expect("fixture records are valid")
}

/// Every call inside one zip: gamma is zero for any clustering.
pub fn single_zip<R: Rng + ?Sized>(nodes: usize, calls_per_node: usize, rng: &mut R) -> CallEdgeList {
    assert!(nodes >= 2);
    let mut calls = Vec::new();
    for node in 0..nodes {
        for _ in 0..calls_per_node {
            let partner = rng.random_range(0..nodes);
            if partner != node {
                calls.push((node as u64, partner as u64, 1 + rng.random_range(0..4)));
            }
        }
    }
    // A ring guarantees at least one record per node.
    for node in 0..nodes {
        calls.push((node as u64, ((node + 1) % nodes) as u64, 1));
    }
    let zips: Vec<(u64, u64)> = (0..nodes as u64).map(|n| (n, 1)).collect();
    CallEdgeList::from_records(&calls, &zips).expect("fixture records are valid")
}

/// Four zips with calls only between zip 1 and zip 3: with C = 1 the two
/// endpoints always land in opposite clusters, so gamma is exactly one.
pub fn cross_only() -> CallEdgeList {
    let calls = vec![(0u64, 2u64, 2u64), (1, 3, 5), (0, 3, 1)];
    let zips = vec![(0, 1), (1, 1), (2, 3), (3, 3), (4, 2), (5, 4)];
    CallEdgeList::from_records(&calls, &zips).expect("fixture records are valid")
}

/// Heavy-tailed call network: target degrees follow a discrete power law
/// `P(k) ~ k^-alpha` on [k_min, k_max], realized by stub matching (self
/// pairs and duplicates dropped). Zips are assigned uniformly.
pub fn power_law_calls<R: Rng + ?Sized>(
    nodes: usize,
    alpha: f64,
    k_min: u64,
    k_max: u64,
    zips: usize,
    rng: &mut R,
) -> CallEdgeList {
    assert!(alpha > 1.0 && k_min >= 1 && k_max > k_min && nodes >= 4);
    let sample_degree = |rng: &mut R| -> u64 {
        // Inverse-CDF sampling of the continuous approximation.
        let u: f64 = rng.random();
        let k = ((k_min as f64 - 0.5) * (1.0 - u).powf(-1.0 / (alpha - 1.0)) + 0.5).floor() as u64;
        k.clamp(k_min, k_max)
    };
    let mut stubs: Vec<usize> = Vec::new();
    for node in 0..nodes {
        let k = sample_degree(rng);
        stubs.extend(std::iter::repeat_n(node, k as usize));
    }
    if stubs.len() % 2 == 1 {
        stubs.pop();
    }
    // Fisher-Yates shuffle, then pair consecutive stubs.
    for i in (1..stubs.len()).rev() {
        stubs.swap(i, rng.random_range(0..=i));
    }
    let mut calls = Vec::new();
    for pair in stubs.chunks_exact(2) {
        if pair[0] != pair[1] {
            calls.push((pair[0] as u64, pair[1] as u64, 1));
        }
    }
    let zip_rows: Vec<(u64, u64)> = (0..nodes)
        .map(|n| (n as u64, (n % zips) as u64 + 1))
        .collect();
    CallEdgeList::from_records(&calls, &zip_rows).expect("fixture records are valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::empirical::{estimate_gamma_distribution, node_degrees};
    use crate::rng::seeded;
    use crate::stats;

    #[test]
    fn local_fixture_gamma_grows_with_pair_count() {
        let data = spatially_local(&LocalCallParams::default(), &mut seeded(4));
        let mut last = -1.0;
        for pairs in [2, 4, 8, 10] {
            let summary =
                estimate_gamma_distribution(&data, pairs, 200, false, &mut seeded(5)).unwrap();
            assert!(
                summary.mean >= last,
                "gamma fell from {last} to {} at C={pairs}",
                summary.mean
            );
            assert!(summary.pct2_5 <= summary.mean && summary.mean <= summary.pct97_5);
            last = summary.mean;
        }
        assert!(last > 0.0, "locality fixture should mix at large C");
    }

    #[test]
    fn local_fixture_unweighted_gamma_dominates_weighted() {
        let data = spatially_local(&LocalCallParams::default(), &mut seeded(6));
        for pairs in [2, 5, 10] {
            let unweighted =
                estimate_gamma_distribution(&data, pairs, 200, false, &mut seeded(7)).unwrap();
            let weighted =
                estimate_gamma_distribution(&data, pairs, 200, true, &mut seeded(7)).unwrap();
            assert!(
                unweighted.mean >= weighted.mean,
                "C={pairs}: unweighted {} < weighted {}",
                unweighted.mean,
                weighted.mean
            );
        }
    }

    #[test]
    fn power_law_fixture_recovers_tail_exponent() {
        // CCDF of P(k) ~ k^-alpha decays like k^-(alpha-1); fit the log-log
        // slope over the mid range and compare.
        let alpha = 2.5;
        let data = power_law_calls(20000, alpha, 3, 300, 10, &mut seeded(8));
        let mut degrees: Vec<f64> = node_degrees(&data, false)
            .into_iter()
            .filter(|&d| d > 0)
            .map(|d| d as f64)
            .collect();
        degrees.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = degrees.len() as f64;
        let ccdf = |k: f64| degrees.iter().filter(|&&d| d >= k).count() as f64 / n;
        let grid: Vec<f64> = (0..12)
            .map(|i| 6.0 * 1.35f64.powi(i))
            .take_while(|&k| ccdf(k) > 20.0 / n)
            .collect();
        assert!(grid.len() >= 4, "degree range too short for a fit");
        let points: Vec<(f64, f64)> = grid.iter().map(|&k| (k.ln(), ccdf(k).ln())).collect();
        let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
        let (mx, my) = (stats::mean(&xs), stats::mean(&ys));
        let slope = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| (x - mx) * (y - my))
            .sum::<f64>()
            / xs.iter().map(|x| (x - mx) * (x - mx)).sum::<f64>();
        let expected = -(alpha - 1.0);
        assert!(
            (slope - expected).abs() <= 0.3,
            "fitted slope {slope}, expected {expected}"
        );
    }

    #[test]
    fn fixtures_produce_loadable_data() {
        let data = single_zip(30, 3, &mut seeded(9));
        assert!(data.node_count() == 30 && data.zip_count() == 1);
        let cross = cross_only();
        assert_eq!(cross.zip_count(), 4);
    }
}
