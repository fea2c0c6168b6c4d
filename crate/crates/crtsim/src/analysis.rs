//! Trial analysis: the log risk ratio with simulated cutoffs (Scenario 1),
//! the logrank permutation test on infection times (Scenario 2), empirical
//! power for both, the intracluster correlation coefficient, and the
//! closed-form design-effect power comparison.

use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::mixing::Arm;
use crate::rng::{replicate_rng, SimRng};
use crate::stats;
use crate::trial::{simulate_trial, TrialConfig, TrialError, TrialOutcome};

#[derive(Debug, Error, PartialEq)]
pub enum StatError {
    #[error("an arm has zero infections; log risk ratio undefined")]
    ZeroArm,
    #[error("no events in the pooled sample")]
    NoEvents,
    #[error("mean cluster proportion is degenerate (0 or 1)")]
    DegenerateMean,
    #[error("invalid statistic input: {0}")]
    InvalidInput(String),
}

#[derive(Debug, Error)]
pub enum PowerError {
    #[error(transparent)]
    Trial(#[from] TrialError),
    #[error(transparent)]
    Stat(#[from] StatError),
    #[error("{stalled} of {replicates} replicates stalled (limit 1%)")]
    TooManyStalled { stalled: usize, replicates: usize },
}

/// Empirical power with its Monte Carlo uncertainty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerEstimate {
    pub power: f64,
    /// Completed (non-stalled) replicates behind the estimate.
    pub replicates: usize,
    /// Wilson 95% interval for the rejection probability.
    pub ci95: (f64, f64),
    pub scenario: u8,
    pub stalled: usize,
}

impl PowerEstimate {
    fn from_rejections(rejections: usize, replicates: usize, scenario: u8, stalled: usize) -> Self {
        PowerEstimate {
            power: rejections as f64 / replicates as f64,
            replicates,
            ci95: stats::wilson_interval_95(rejections, replicates),
            scenario,
            stalled,
        }
    }
}

// ---------------------------------------------------------------------------
// Scenario 1: log risk ratio against simulated null cutoffs
// ---------------------------------------------------------------------------

/// Mean over pairs of `log I_control - log I_treatment` at each pair's end
/// time, where `I` is the final infected proportion of an arm.
pub fn log_risk_ratio(outcome: &TrialOutcome) -> Result<f64, StatError> {
    let props = outcome.arm_proportions();
    if props.iter().any(|[c, t]| *c == 0.0 || *t == 0.0) {
        return Err(StatError::ZeroArm);
    }
    Ok(props.iter().map(|[c, t]| c.ln() - t.ln()).sum::<f64>() / props.len() as f64)
}

/// [`log_risk_ratio`] with a continuity correction: when any arm count is
/// zero, 0.5 is added to every arm count before forming proportions. The
/// raw counts in the outcome are untouched.
pub fn log_risk_ratio_corrected(outcome: &TrialOutcome) -> f64 {
    match log_risk_ratio(outcome) {
        Ok(v) => v,
        Err(_) => {
            let sum: f64 = outcome
                .records
                .iter()
                .map(|r| {
                    let c = r.final_count_by_arm[0] as f64 + 0.5;
                    let t = r.final_count_by_arm[1] as f64 + 0.5;
                    c.ln() - t.ln()
                })
                .sum();
            sum / outcome.records.len() as f64
        }
    }
}

const PHASE_NULL: u64 = 0;
const PHASE_ALT: u64 = 1;
const PHASE_SCENARIO2: u64 = 2;
const PHASE_ICC: u64 = 3;

/// Runs `replicates` independent trials and collects a statistic from each.
/// Stalled replicates are dropped and counted; more than 1% of them fails
/// the run. Replicate RNG streams are derived from (seed, phase, index), so
/// the result is independent of thread scheduling.
fn replicate_statistics<F>(
    config: &TrialConfig,
    replicates: usize,
    seed: u64,
    phase: u64,
    statistic: F,
) -> Result<(Vec<f64>, usize), PowerError>
where
    F: Fn(&TrialOutcome, &mut SimRng) -> Result<f64, StatError> + Sync,
{
    config.validate()?;
    let results: Vec<Option<f64>> = (0..replicates)
        .into_par_iter()
        .map(|rep| {
            let mut rng = replicate_rng(seed, phase, rep as u64);
            match simulate_trial(config, &mut rng) {
                Ok(outcome) => statistic(&outcome, &mut rng).map(Some).map_err(PowerError::Stat),
                Err(e) if e.is_stalled() => Ok(None),
                Err(e) => Err(PowerError::Trial(e)),
            }
        })
        .collect::<Result<_, _>>()?;
    let stalled = results.iter().filter(|r| r.is_none()).count();
    if stalled * 100 > replicates {
        return Err(PowerError::TooManyStalled {
            stalled,
            replicates,
        });
    }
    Ok((results.into_iter().flatten().collect(), stalled))
}

/// Log risk ratios over independent replicates of `config`; used for the
/// metrics sweep and by the power machinery.
pub fn simulate_log_risk_ratios(
    config: &TrialConfig,
    replicates: usize,
    seed: u64,
    null_phase: bool,
) -> Result<(Vec<f64>, usize), PowerError> {
    let phase = if null_phase { PHASE_NULL } else { PHASE_ALT };
    replicate_statistics(config, replicates, seed, phase, |outcome, _| {
        Ok(log_risk_ratio_corrected(outcome))
    })
}

/// Scenario 1 empirical power: cutoffs at the alpha/2 and 1 - alpha/2
/// quantiles of the simulated null statistic; power is the share of
/// alternative statistics strictly outside them.
pub fn scenario1_power(
    config: &TrialConfig,
    null_replicates: usize,
    alt_replicates: usize,
    alpha: f64,
    seed: u64,
) -> Result<PowerEstimate, PowerError> {
    if null_replicates < 100 || alt_replicates < 100 {
        return Err(StatError::InvalidInput(
            "scenario 1 needs at least 100 null and 100 alternative replicates".into(),
        )
        .into());
    }
    check_alpha(alpha)?;
    let (lo, hi, null_stalled) =
        scenario1_cutoffs(&config.null_hypothesis(), null_replicates, alpha, seed)?;
    let (alt_stats, alt_stalled) =
        simulate_log_risk_ratios(config, alt_replicates, seed, false)?;
    let rejections = alt_stats.iter().filter(|&&s| s < lo || s > hi).count();
    Ok(PowerEstimate::from_rejections(
        rejections,
        alt_stats.len(),
        1,
        null_stalled + alt_stalled,
    ))
}

/// Empirical null cutoffs `(I*_{alpha/2}, I*_{1-alpha/2})` for Scenario 1.
pub fn scenario1_cutoffs(
    null_config: &TrialConfig,
    replicates: usize,
    alpha: f64,
    seed: u64,
) -> Result<(f64, f64, usize), PowerError> {
    let (mut stats_vec, stalled) =
        simulate_log_risk_ratios(null_config, replicates, seed, true)?;
    if stats_vec.is_empty() {
        return Err(StatError::InvalidInput("no completed null replicates".into()).into());
    }
    stats_vec.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let lo = stats::quantile_sorted(&stats_vec, alpha / 2.0);
    let hi = stats::quantile_sorted(&stats_vec, 1.0 - alpha / 2.0);
    Ok((lo, hi, stalled))
}

fn check_alpha(alpha: f64) -> Result<(), StatError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(StatError::InvalidInput(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Scenario 2: logrank statistic and per-pair permutation test
// ---------------------------------------------------------------------------

/// One subject's follow-up: infection step, or censoring time when no event
/// was observed by the end of the pair's trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SurvivalTime {
    pub time: u32,
    pub event: bool,
}

impl SurvivalTime {
    pub fn event(time: u32) -> Self {
        SurvivalTime { time, event: true }
    }

    pub fn censored(time: u32) -> Self {
        SurvivalTime { time, event: false }
    }
}

/// Grouped discrete-time logrank Z over two arms, ties handled with the
/// hypergeometric variance. Positive values mean the control arm saw more
/// events than expected. Censored subjects stay in the risk set through
/// their censoring time.
pub fn logrank_statistic(
    control: &[SurvivalTime],
    treatment: &[SurvivalTime],
) -> Result<f64, StatError> {
    let mut event_times: Vec<u32> = control
        .iter()
        .chain(treatment)
        .filter(|s| s.event)
        .map(|s| s.time)
        .collect();
    if event_times.is_empty() {
        return Err(StatError::NoEvents);
    }
    event_times.sort_unstable();
    event_times.dedup();

    let groups = [control, treatment];
    let mut observed_minus_expected = 0.0;
    let mut variance = 0.0;
    for &t in &event_times {
        let mut at_risk = [0u64; 2];
        let mut events = [0u64; 2];
        for (g, subjects) in groups.iter().enumerate() {
            for s in *subjects {
                if s.time >= t {
                    at_risk[g] += 1;
                }
                if s.event && s.time == t {
                    events[g] += 1;
                }
            }
        }
        accumulate_logrank_time(
            at_risk,
            events,
            &mut observed_minus_expected,
            &mut variance,
        );
    }
    if variance <= 0.0 {
        return Err(StatError::NoEvents);
    }
    Ok(observed_minus_expected / variance.sqrt())
}

fn accumulate_logrank_time(
    at_risk: [u64; 2],
    events: [u64; 2],
    observed_minus_expected: &mut f64,
    variance: &mut f64,
) {
    let n = (at_risk[0] + at_risk[1]) as f64;
    let d = (events[0] + events[1]) as f64;
    if n == 0.0 || d == 0.0 {
        return;
    }
    let n0 = at_risk[0] as f64;
    let n1 = at_risk[1] as f64;
    *observed_minus_expected += events[0] as f64 - d * n0 / n;
    if n > 1.0 {
        *variance += d * (n0 / n) * (n1 / n) * (n - d) / (n - 1.0);
    }
}

/// Per-arm survival data pooled from a trial. Seed nodes are prevalent at
/// baseline: they are neither events nor at risk. Uninfected nodes are
/// censored at their pair's end time.
pub fn arm_survival(outcome: &TrialOutcome) -> (Vec<SurvivalTime>, Vec<SurvivalTime>) {
    let arms = outcome.arms();
    let mut by_arm = (Vec::new(), Vec::new());
    for record in &outcome.records {
        for (node, infected_at) in record.infected_at.iter().enumerate() {
            let s = match infected_at {
                Some(0) => continue,
                Some(t) => SurvivalTime::event(*t),
                None => SurvivalTime::censored(record.end_time),
            };
            match arms[node] {
                Arm::Control => by_arm.0.push(s),
                Arm::Treatment => by_arm.1.push(s),
            }
        }
    }
    by_arm
}

/// Per-pair event and at-risk counts over the pooled event-time grid;
/// flipping a pair's treatment label is a column swap.
struct PairGrid {
    events: [Vec<u32>; 2],
    at_risk: [Vec<u32>; 2],
}

fn build_grids(outcome: &TrialOutcome) -> (Vec<u32>, Vec<PairGrid>) {
    let n = outcome.cluster_size;
    let mut times: Vec<u32> = outcome
        .records
        .iter()
        .flat_map(|r| r.infected_at.iter().flatten().copied())
        .filter(|&t| t > 0)
        .collect();
    times.sort_unstable();
    times.dedup();

    let grids = outcome
        .records
        .iter()
        .map(|record| {
            let mut events = [vec![0u32; times.len()], vec![0u32; times.len()]];
            let mut at_risk = [vec![0u32; times.len()], vec![0u32; times.len()]];
            let mut seeds = [0u32; 2];
            let mut event_times: [Vec<u32>; 2] = [Vec::new(), Vec::new()];
            for (node, infected_at) in record.infected_at.iter().enumerate() {
                let arm = usize::from(node >= n);
                match infected_at {
                    Some(0) => seeds[arm] += 1,
                    Some(t) => event_times[arm].push(*t),
                    None => {}
                }
            }
            for arm in 0..2 {
                event_times[arm].sort_unstable();
                let total_at_risk = n as u32 - seeds[arm];
                let mut consumed = 0u32;
                let mut cursor = 0usize;
                for (k, &t) in times.iter().enumerate() {
                    while cursor < event_times[arm].len() && event_times[arm][cursor] < t {
                        consumed += 1;
                        cursor += 1;
                    }
                    // Censoring happens at the pair's end time, after any
                    // events recorded there.
                    at_risk[arm][k] = if t <= record.end_time {
                        total_at_risk - consumed
                    } else {
                        0
                    };
                    events[arm][k] = event_times[arm][cursor..]
                        .iter()
                        .take_while(|&&e| e == t)
                        .count() as u32;
                }
            }
            PairGrid { events, at_risk }
        })
        .collect();
    (times, grids)
}

fn z_for_flips(times: &[u32], grids: &[PairGrid], flips: u64) -> Option<f64> {
    let mut observed_minus_expected = 0.0;
    let mut variance = 0.0;
    for k in 0..times.len() {
        let mut at_risk = [0u64; 2];
        let mut events = [0u64; 2];
        for (pair, grid) in grids.iter().enumerate() {
            let f = ((flips >> pair) & 1) as usize;
            at_risk[0] += grid.at_risk[f][k] as u64;
            at_risk[1] += grid.at_risk[1 - f][k] as u64;
            events[0] += grid.events[f][k] as u64;
            events[1] += grid.events[1 - f][k] as u64;
        }
        accumulate_logrank_time(at_risk, events, &mut observed_minus_expected, &mut variance);
    }
    if variance <= 0.0 {
        None
    } else {
        Some(observed_minus_expected / variance.sqrt())
    }
}

/// Pair count up to which the per-pair label flips are enumerated exactly.
pub const PERMUTATION_EXACT_MAX_PAIRS: usize = 12;

/// Permutation p-value for the pooled logrank statistic under independent
/// per-pair treatment label flips. Enumerates all `2^C` flips exactly when
/// `C <= 12`, otherwise samples `n_permutations` uniform flips.
pub fn permutation_test<R: Rng + ?Sized>(
    outcome: &TrialOutcome,
    n_permutations: usize,
    rng: &mut R,
) -> Result<f64, StatError> {
    if outcome.pair_count() <= PERMUTATION_EXACT_MAX_PAIRS {
        permutation_test_exact(outcome)
    } else {
        permutation_test_sampled(outcome, n_permutations, rng)
    }
}

/// Exact enumeration over all `2^C` per-pair flips; the p-value is the
/// fraction of flips whose |statistic| is at least the observed one.
pub fn permutation_test_exact(outcome: &TrialOutcome) -> Result<f64, StatError> {
    let (times, grids, observed) = observed_statistic(outcome)?;
    let c = grids.len();
    assert!(c <= PERMUTATION_EXACT_MAX_PAIRS, "enumeration over 2^{c} flips");
    let total = 1u64 << c;
    let mut extreme = 0u64;
    for mask in 0..total {
        if is_extreme(z_for_flips(&times, &grids, mask), observed) {
            extreme += 1;
        }
    }
    Ok(extreme as f64 / total as f64)
}

/// Monte Carlo permutation p-value `(1 + #extreme) / (1 + n_permutations)`.
pub fn permutation_test_sampled<R: Rng + ?Sized>(
    outcome: &TrialOutcome,
    n_permutations: usize,
    rng: &mut R,
) -> Result<f64, StatError> {
    if n_permutations == 0 {
        return Err(StatError::InvalidInput("need at least one permutation".into()));
    }
    let (times, grids, observed) = observed_statistic(outcome)?;
    let c = grids.len();
    let mut extreme = 0usize;
    for _ in 0..n_permutations {
        let mask: u64 = rng.random::<u64>() & mask_low_bits(c);
        if is_extreme(z_for_flips(&times, &grids, mask), observed) {
            extreme += 1;
        }
    }
    Ok((1 + extreme) as f64 / (1 + n_permutations) as f64)
}

fn observed_statistic(outcome: &TrialOutcome) -> Result<(Vec<u32>, Vec<PairGrid>, f64), StatError> {
    if outcome.pair_count() < 2 {
        return Err(StatError::InvalidInput(
            "permutation test needs at least 2 pairs".into(),
        ));
    }
    if outcome.pair_count() > 64 {
        return Err(StatError::InvalidInput(
            "flip masks support at most 64 pairs".into(),
        ));
    }
    let (times, grids) = build_grids(outcome);
    let observed = z_for_flips(&times, &grids, 0).ok_or(StatError::NoEvents)?;
    Ok((times, grids, observed))
}

fn is_extreme(permuted: Option<f64>, observed: f64) -> bool {
    // A degenerate permuted variance cannot be ranked; count it as extreme
    // so the p-value errs conservative.
    permuted.is_none_or(|z| z.abs() >= observed.abs())
}

fn mask_low_bits(c: usize) -> u64 {
    if c == 64 {
        u64::MAX
    } else {
        (1u64 << c) - 1
    }
}

/// Scenario 2 empirical power: the share of alternative-hypothesis trials
/// whose permutation p-value falls below alpha.
pub fn scenario2_power(
    config: &TrialConfig,
    trial_replicates: usize,
    n_permutations: usize,
    alpha: f64,
    seed: u64,
) -> Result<PowerEstimate, PowerError> {
    if trial_replicates == 0 {
        return Err(StatError::InvalidInput("need at least one trial".into()).into());
    }
    check_alpha(alpha)?;
    let (p_values, stalled) =
        replicate_statistics(config, trial_replicates, seed, PHASE_SCENARIO2, |outcome, rng| {
            permutation_test(outcome, n_permutations, rng)
        })?;
    let rejections = p_values.iter().filter(|&&p| p < alpha).count();
    Ok(PowerEstimate::from_rejections(
        rejections,
        p_values.len(),
        2,
        stalled,
    ))
}

// ---------------------------------------------------------------------------
// ICC and the analytic comparison
// ---------------------------------------------------------------------------

/// Intracluster correlation coefficient for binary outcomes: the ratio of
/// between-cluster variance to total outcome variance,
/// `Var(pi_c) / (mean(pi) * (1 - mean(pi)))`.
pub fn icc(cluster_proportions: &[f64]) -> Result<f64, StatError> {
    if cluster_proportions.is_empty() {
        return Err(StatError::InvalidInput("no cluster proportions".into()));
    }
    if cluster_proportions.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(StatError::InvalidInput(
            "cluster proportions must lie in [0, 1]".into(),
        ));
    }
    let mean = stats::mean(cluster_proportions);
    let total_variance = mean * (1.0 - mean);
    if total_variance == 0.0 {
        return Err(StatError::DegenerateMean);
    }
    Ok(stats::population_variance(cluster_proportions) / total_variance)
}

/// ICC of one trial's 2C final cluster proportions.
pub fn trial_icc(outcome: &TrialOutcome) -> Result<f64, StatError> {
    icc(&outcome.cluster_proportions())
}

/// Mean trial ICC over independent replicates of `config`.
pub fn simulate_iccs(
    config: &TrialConfig,
    replicates: usize,
    seed: u64,
) -> Result<(Vec<f64>, usize), PowerError> {
    replicate_statistics(config, replicates, seed, PHASE_ICC, |outcome, _| {
        trial_icc(outcome)
    })
}

/// Plausible ICC range used for the analytic comparison band.
pub const PLAUSIBLE_ICC_RANGE: (f64, f64) = (0.003, 0.06);

/// Closed-form power of an unmatched two-proportion comparison with the
/// cluster design effect `1 + (n - 1) * icc`:
///
/// ```text
/// n_eff  = C * n / (1 + (n - 1) * icc)          (per arm)
/// se     = sqrt((p0(1-p0) + p1(1-p1)) / n_eff)
/// power  = Phi(|p0 - p1| / se - z_{1-alpha/2})
/// ```
///
/// `p0_expected` and `p1_expected` are the expected final infected
/// proportions per arm.
pub fn analytic_power_hayes(
    pairs: usize,
    cluster_size: usize,
    p0_expected: f64,
    p1_expected: f64,
    icc: f64,
    alpha: f64,
) -> Result<f64, StatError> {
    if pairs == 0 || cluster_size == 0 {
        return Err(StatError::InvalidInput("need pairs >= 1 and n >= 1".into()));
    }
    for (name, p) in [("p0", p0_expected), ("p1", p1_expected)] {
        if !(0.0 < p && p < 1.0) {
            return Err(StatError::InvalidInput(format!(
                "{name} must lie in (0, 1), got {p}"
            )));
        }
    }
    if !(0.0..=1.0).contains(&icc) {
        return Err(StatError::InvalidInput(format!(
            "icc must lie in [0, 1], got {icc}"
        )));
    }
    check_alpha(alpha)?;
    let design_effect = 1.0 + (cluster_size as f64 - 1.0) * icc;
    let n_eff = (pairs * cluster_size) as f64 / design_effect;
    let se = ((p0_expected * (1.0 - p0_expected) + p1_expected * (1.0 - p1_expected)) / n_eff)
        .sqrt();
    let z = (p0_expected - p1_expected).abs() / se - stats::normal_quantile(1.0 - alpha / 2.0);
    Ok(stats::normal_cdf(z))
}

/// Analytic power interval over [`PLAUSIBLE_ICC_RANGE`] (low end from the
/// largest ICC, high end from the smallest).
pub fn hayes_band(
    pairs: usize,
    cluster_size: usize,
    p0_expected: f64,
    p1_expected: f64,
    alpha: f64,
) -> Result<(f64, f64), StatError> {
    let (icc_lo, icc_hi) = PLAUSIBLE_ICC_RANGE;
    let hi = analytic_power_hayes(pairs, cluster_size, p0_expected, p1_expected, icc_lo, alpha)?;
    let lo = analytic_power_hayes(pairs, cluster_size, p0_expected, p1_expected, icc_hi, alpha)?;
    Ok((lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::epidemic::{InfectionRecord, Infectivity};
    use crate::netgen::{EnsembleKind, EnsembleSpec};
    use crate::rng::seeded;

    /// Outcome with given per-pair arm counts; infection times filled so a
    /// count of k means nodes infected at steps 1..=k (seedless, n = 100).
    fn synthetic_outcome(counts: &[[usize; 2]]) -> TrialOutcome {
        let n = 100;
        let records = counts
            .iter()
            .map(|&[c, t]| {
                let mut infected_at = vec![None; 2 * n];
                for (i, slot) in infected_at.iter_mut().take(c).enumerate() {
                    *slot = Some(i as u32 + 1);
                }
                for (i, slot) in infected_at[n..].iter_mut().take(t).enumerate() {
                    *slot = Some(i as u32 + 1);
                }
                InfectionRecord {
                    infected_at,
                    final_count_by_arm: [c, t],
                    end_time: c.max(t) as u32 + 1,
                }
            })
            .collect();
        TrialOutcome {
            records,
            cluster_size: n,
        }
    }

    #[test]
    fn log_risk_ratio_zero_for_identical_arms() {
        let outcome = synthetic_outcome(&[[10, 10], [12, 12]]);
        assert_eq!(log_risk_ratio(&outcome).unwrap(), 0.0);
    }

    #[test]
    fn log_risk_ratio_example_value() {
        // Proportions (0.12, 0.08) and (0.10, 0.10): (ln 1.5 + ln 1) / 2.
        let outcome = synthetic_outcome(&[[12, 8], [10, 10]]);
        let got = log_risk_ratio(&outcome).unwrap();
        assert!((got - 0.5 * 1.5f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn log_risk_ratio_is_antisymmetric() {
        let outcome = synthetic_outcome(&[[12, 8], [15, 11]]);
        let swapped = synthetic_outcome(&[[8, 12], [11, 15]]);
        let a = log_risk_ratio(&outcome).unwrap();
        let b = log_risk_ratio(&swapped).unwrap();
        assert!((a + b).abs() < 1e-14);
    }

    #[test]
    fn zero_arm_errors_and_correction_applies_everywhere() {
        let outcome = synthetic_outcome(&[[10, 0], [10, 10]]);
        assert_eq!(log_risk_ratio(&outcome).unwrap_err(), StatError::ZeroArm);
        let corrected = log_risk_ratio_corrected(&outcome);
        let expected = ((10.5f64.ln() - 0.5f64.ln()) + (10.5f64.ln() - 10.5f64.ln())) / 2.0;
        assert!((corrected - expected).abs() < 1e-14);
    }

    #[test]
    fn logrank_zero_for_identical_event_multisets() {
        let times: Vec<SurvivalTime> = [1, 2, 5].iter().map(|&t| SurvivalTime::event(t)).collect();
        let z = logrank_statistic(&times, &times.clone()).unwrap();
        assert!(z.abs() < 1e-14);
    }

    #[test]
    fn logrank_positive_when_all_events_in_control() {
        let control: Vec<SurvivalTime> =
            [1, 2, 3].iter().map(|&t| SurvivalTime::event(t)).collect();
        let treatment: Vec<SurvivalTime> =
            [3, 3, 3].iter().map(|&t| SurvivalTime::censored(t)).collect();
        assert!(logrank_statistic(&control, &treatment).unwrap() > 0.0);
    }

    #[test]
    fn logrank_matches_hand_computed_table() {
        // Control events at 1, 2, 3; treatment at 2, 3, 4; 3 per arm.
        // Hand table over times 1..=4:
        //   t=1: O-E = 1 - 3/6,            V = (3/6)(3/6)(5/5)
        //   t=2: O-E = 1 - 2*2/5,          V = 2*(2/5)(3/5)(3/4)
        //   t=3: O-E = 1 - 2*1/3,          V = 2*(1/3)(2/3)(1/2)
        //   t=4: no control at risk, no contribution
        // Total O-E = 31/30, V = 749/900, Z = 31/sqrt(749).
        let control: Vec<SurvivalTime> =
            [1, 2, 3].iter().map(|&t| SurvivalTime::event(t)).collect();
        let treatment: Vec<SurvivalTime> =
            [2, 3, 4].iter().map(|&t| SurvivalTime::event(t)).collect();
        let z = logrank_statistic(&control, &treatment).unwrap();
        assert!((z - 31.0 / 749.0f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn logrank_errors_without_events() {
        let censored: Vec<SurvivalTime> =
            [4, 4].iter().map(|&t| SurvivalTime::censored(t)).collect();
        assert_eq!(
            logrank_statistic(&censored, &censored.clone()).unwrap_err(),
            StatError::NoEvents
        );
    }

    #[test]
    fn permutation_identity_matches_standalone_logrank() {
        let ensemble = EnsembleSpec::new(EnsembleKind::ErdosRenyi, 80, 4.0).unwrap();
        let config =
            TrialConfig::standard(ensemble, 4, 0.1, Infectivity::Unit, 0.3, 0.2);
        let outcome = simulate_trial(&config, &mut seeded(31)).unwrap();
        let (times, grids) = build_grids(&outcome);
        let via_grids = z_for_flips(&times, &grids, 0).unwrap();
        let (control, treatment) = arm_survival(&outcome);
        let via_lists = logrank_statistic(&control, &treatment).unwrap();
        assert!(
            (via_grids - via_lists).abs() < 1e-12,
            "{via_grids} vs {via_lists}"
        );
    }

    #[test]
    fn exact_permutation_p_is_a_multiple_of_one_eighth() {
        let outcome = synthetic_outcome(&[[12, 8], [9, 11], [14, 7]]);
        let p = permutation_test_exact(&outcome).unwrap();
        let eighths = p * 8.0;
        assert!((eighths - eighths.round()).abs() < 1e-12, "p = {p}");
        assert!(p > 0.0 && p <= 1.0);
    }

    #[test]
    fn zero_observed_statistic_gives_maximal_p() {
        let outcome = synthetic_outcome(&[[10, 10], [12, 12], [9, 9]]);
        let p = permutation_test_exact(&outcome).unwrap();
        assert!(p >= 0.99, "p = {p}");
    }

    #[test]
    fn flipping_every_pair_preserves_p_value() {
        let counts = [[12, 8], [9, 11], [14, 7], [10, 13]];
        let flipped: Vec<[usize; 2]> = counts.iter().map(|&[c, t]| [t, c]).collect();
        let p1 = permutation_test_exact(&synthetic_outcome(&counts)).unwrap();
        let p2 = permutation_test_exact(&synthetic_outcome(&flipped)).unwrap();
        assert_eq!(p1, p2);
    }

    #[test]
    fn icc_zero_for_equal_proportions() {
        assert_eq!(icc(&[0.1, 0.1, 0.1, 0.1]).unwrap(), 0.0);
    }

    #[test]
    fn icc_one_for_all_or_nothing_clusters() {
        // Var = 0.25, mean 0.5: total variance is all between-cluster.
        assert!((icc(&[0.0, 1.0]).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn icc_matches_complement_identity() {
        // Var(pi)/total = 1 - mean(pi(1-pi))/total; check the algebra on
        // random inputs.
        let mut rng = seeded(37);
        for _ in 0..200 {
            let props: Vec<f64> = (0..10).map(|_| rng.random_range(0.01..0.99)).collect();
            let direct = icc(&props).unwrap();
            let mean = stats::mean(&props);
            let within = stats::mean(&props.iter().map(|p| p * (1.0 - p)).collect::<Vec<_>>());
            let complement = 1.0 - within / (mean * (1.0 - mean));
            assert!((direct - complement).abs() < 1e-12);
            assert!((0.0..=1.0).contains(&direct));
        }
    }

    #[test]
    fn icc_rejects_degenerate_mean() {
        assert_eq!(icc(&[0.0, 0.0]).unwrap_err(), StatError::DegenerateMean);
        assert_eq!(icc(&[1.0, 1.0]).unwrap_err(), StatError::DegenerateMean);
    }

    #[test]
    fn hayes_reduces_to_classic_two_proportion_power() {
        // icc = 0, n = 1: design effect 1, C individuals per arm.
        let (p0, p1, alpha, c) = (0.30, 0.20, 0.05, 400);
        let got = analytic_power_hayes(c, 1, p0, p1, 0.0, alpha).unwrap();
        let se = ((p0 * (1.0 - p0) + p1 * (1.0 - p1)) / c as f64).sqrt();
        let classic =
            stats::normal_cdf((p0 - p1).abs() / se - stats::normal_quantile(1.0 - alpha / 2.0));
        assert!((got - classic).abs() < 1e-14);
    }

    #[test]
    fn hayes_power_decreases_with_icc() {
        let mut last = f64::INFINITY;
        for icc_val in [0.0, 0.003, 0.01, 0.03, 0.06, 0.2] {
            let p = analytic_power_hayes(20, 300, 0.12, 0.08, icc_val, 0.05).unwrap();
            assert!(p < last, "power not decreasing at icc {icc_val}");
            last = p;
        }
    }

    #[test]
    fn hayes_band_is_ordered() {
        let (lo, hi) = hayes_band(20, 300, 0.12, 0.08, 0.05).unwrap();
        assert!(0.0 < lo && lo < hi && hi <= 1.0);
    }

    #[test]
    fn statistics_invariant_to_pair_relabeling() {
        let ensemble = EnsembleSpec::new(EnsembleKind::ErdosRenyi, 60, 4.0).unwrap();
        let config = TrialConfig::standard(ensemble, 5, 0.2, Infectivity::Unit, 0.3, 0.22);
        let outcome = simulate_trial(&config, &mut seeded(55)).unwrap();
        let mut relabeled = outcome.clone();
        relabeled.records.reverse();
        relabeled.records.swap(0, 2);
        assert_eq!(
            log_risk_ratio(&outcome).unwrap(),
            log_risk_ratio(&relabeled).unwrap()
        );
        assert_eq!(
            permutation_test_exact(&outcome).unwrap(),
            permutation_test_exact(&relabeled).unwrap()
        );
    }

    #[test]
    fn mean_log_risk_ratio_reverses_sign_past_half_mixing() {
        let ensemble = EnsembleSpec::new(EnsembleKind::ErdosRenyi, 100, 4.0).unwrap();
        let mean_at = |gamma: f64| {
            let config = TrialConfig::standard(ensemble, 4, gamma, Infectivity::Unit, 0.3, 0.25);
            let (ratios, _) = simulate_log_risk_ratios(&config, 300, 77, false).unwrap();
            stats::mean(&ratios)
        };
        let separated = mean_at(0.0);
        let inverted = mean_at(1.0);
        assert!(
            separated > 0.0 && inverted < 0.0,
            "expected sign reversal: gamma 0 -> {separated}, gamma 1 -> {inverted}"
        );
    }

    #[test]
    fn scenario_smoke_runs_and_null_stats_are_sign_balanced() {
        let ensemble = EnsembleSpec::new(EnsembleKind::ErdosRenyi, 60, 4.0).unwrap();
        let config = TrialConfig::standard(ensemble, 3, 0.0, Infectivity::Unit, 0.3, 0.25);
        let (stats_null, stalled) =
            simulate_log_risk_ratios(&config.null_hypothesis(), 400, 99, true).unwrap();
        assert!(stalled <= 4, "too many stalls: {stalled}");
        let pos = stats_null.iter().filter(|&&s| s > 0.0).count() as f64;
        let neg = stats_null.iter().filter(|&&s| s < 0.0).count() as f64;
        assert!((pos - neg).abs() <= 3.0 * (pos + neg).sqrt());

        let estimate = scenario1_power(&config, 200, 200, 0.05, 4).unwrap();
        assert!(estimate.ci95.0 <= estimate.power && estimate.power <= estimate.ci95.1);
        assert_eq!(estimate.scenario, 1);
    }
}
