//! Monte Carlo experiments tying the samplers to the exact formulas.
//!
//! Every experiment derives per-trial seeds from `(master_seed, index)`, so
//! a report is a pure function of its inputs: trial order, partitioning, and
//! thread count cannot change a single byte of it. Counting experiments
//! aggregate u64 counts (associative and commutative); nothing is read off
//! the clock inside this module.
//!
//! Verdict conventions: equality checks are two-sided at 4 sigma, bound
//! checks one-sided at 3 sigma (a VIOLATION requires the estimate plus
//! three standard errors to sit below the bound). Both fall back to a
//! Wilson interval when either success or failure counts are small.

use num_rational::BigRational;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure::{measure_of_clopen, ClopenSet, DyadicMeasure};
use crate::moments::{
    exact_first_moment, exact_second_moment, frontier_hits, hitting_lower_bound, pz_bound,
    HittingTarget,
};
use crate::params::Params;
use crate::prob::pair_chain_prob;
use crate::rational::{format_rational, serde_rat};
use crate::rng;
use crate::sampler::{
    reconstruct_prefix, subset_to_integers, survival_counts, survival_exact, SampledTree,
};
use crate::strings::KString;
use crate::surd::Surd;

/// Trials per parallel work unit. Fixed so that partitioning is part of the
/// experiment definition, not a runtime choice.
const BLOCK: u64 = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    #[serde(rename = "CONSISTENT")]
    Consistent,
    #[serde(rename = "VIOLATION")]
    Violation,
}

impl Verdict {
    pub fn is_violation(self) -> bool {
        self == Verdict::Violation
    }
}

/// One Monte Carlo estimate against one reference value, with the
/// comparison rule spelled out.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub label: String,
    pub trials: u64,
    pub successes: u64,
    pub estimate: f64,
    pub standard_error: f64,
    pub reference: f64,
    pub comparison: String,
    pub verdict: Verdict,
}

/// Wilson score interval for a binomial proportion at `z` standard errors.
pub fn wilson_bounds(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = (z / denom) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Two-sided equality check of a binomial frequency against an exact
/// reference probability. The standard error comes from the reference (the
/// null hypothesis), with a Wilson-interval fallback when either count is
/// below 10.
fn equality_report(
    label: String,
    successes: u64,
    trials: u64,
    reference: f64,
    z: f64,
) -> ExperimentReport {
    let estimate = successes as f64 / trials as f64;
    let standard_error = (reference * (1.0 - reference) / trials as f64).sqrt();
    let failures = trials - successes;
    let (comparison, consistent) = if successes < 10 || failures < 10 {
        // pad the interval by float dust: the closed-form endpoints land a
        // few ulps inside their exact values (hi = 1 computes as 1 - 1e-16
        // when successes = trials), and a reference sitting exactly on the
        // boundary must not be flagged
        let (lo, hi) = wilson_bounds(successes, trials, z);
        (
            format!("two-sided {z} sigma (wilson interval)"),
            lo - 1e-12 <= reference && reference <= hi + 1e-12,
        )
    } else {
        (
            format!("two-sided {z} sigma"),
            (estimate - reference).abs() <= z * standard_error,
        )
    };
    ExperimentReport {
        label,
        trials,
        successes,
        estimate,
        standard_error,
        reference,
        comparison,
        verdict: if consistent {
            Verdict::Consistent
        } else {
            Verdict::Violation
        },
    }
}

/// One-sided lower-bound check: VIOLATION only when the estimate plus
/// `z` standard errors still falls short of the bound. Standard error from
/// the observed proportion, Wilson upper limit when counts are small.
fn bound_report(
    label: String,
    successes: u64,
    trials: u64,
    bound: f64,
    z: f64,
) -> ExperimentReport {
    let estimate = successes as f64 / trials as f64;
    let standard_error = (estimate * (1.0 - estimate) / trials as f64).sqrt();
    let failures = trials - successes;
    let (comparison, consistent) = if successes < 10 || failures < 10 {
        // same float-dust padding as the two-sided check
        let (_, hi) = wilson_bounds(successes, trials, z);
        (
            format!("one-sided {z} sigma lower bound (wilson interval)"),
            hi + 1e-12 >= bound,
        )
    } else {
        (
            format!("one-sided {z} sigma lower bound"),
            estimate + z * standard_error >= bound,
        )
    };
    ExperimentReport {
        label,
        trials,
        successes,
        estimate,
        standard_error,
        reference: bound,
        comparison,
        verdict: if consistent {
            Verdict::Consistent
        } else {
            Verdict::Violation
        },
    }
}

/// Count trials satisfying a pure per-trial predicate, in fixed blocks.
fn count_trials(trials: u64, pred: impl Fn(u64) -> bool + Sync) -> u64 {
    (0..trials.div_ceil(BLOCK))
        .into_par_iter()
        .map(|b| {
            let lo = b * BLOCK;
            let hi = ((b + 1) * BLOCK).min(trials);
            (lo..hi).filter(|&t| pred(t)).count() as u64
        })
        .sum()
}

/// Do both prefix chains survive in the tree keyed by `seed`? Shared
/// prefixes share node states, so the two events are coupled exactly as in
/// one tree.
fn chains_survive(params: &Params, sigma: &KString, tau: &KString, seed: u64) -> bool {
    let threshold = params.membership_threshold();
    let common = sigma
        .symbols()
        .iter()
        .zip(tau.symbols())
        .take_while(|(a, b)| a == b)
        .count();
    let mut state = rng::root_state(seed);
    for &symbol in &sigma.symbols()[..common] {
        state = rng::child_state(state, symbol);
        if rng::membership_draw(state) >= threshold {
            return false;
        }
    }
    for branch in [sigma, tau] {
        let mut s = state;
        for &symbol in &branch.symbols()[common..] {
            s = rng::child_state(s, symbol);
            if rng::membership_draw(s) >= threshold {
                return false;
            }
        }
    }
    true
}

/// Estimate the probability that the prefix chains of two equal-length
/// strings both survive, against the exact closed form. Two-sided 4 sigma.
pub fn run_pair_prob_check(
    params: &Params,
    sigma: &KString,
    tau: &KString,
    trials: u64,
    master_seed: u64,
) -> Result<ExperimentReport> {
    if trials == 0 {
        return Err(Error::InvalidParams("at least one trial required".into()));
    }
    if params.is_degenerate() {
        return Err(Error::DegenerateSampling);
    }
    let reference = pair_chain_prob(sigma, tau, params)?.to_f64();
    let successes = count_trials(trials, |t| {
        chains_survive(params, sigma, tau, rng::trial_seed(master_seed, t))
    });
    let label = format!(
        "co-membership of chains {sigma} and {tau} at k={} ell={}",
        params.k(),
        format_rational(params.ell())
    );
    Ok(equality_report(label, successes, trials, reference, 4.0))
}

/// Per-depth survival frequencies of sampled trees against the exact
/// extinction recursion. Two-sided 3 sigma per depth.
pub fn run_survival_curve(
    params: &Params,
    depth: usize,
    trials: u64,
    master_seed: u64,
) -> Result<Vec<ExperimentReport>> {
    if trials == 0 || depth == 0 {
        return Err(Error::InvalidParams(
            "survival curve needs depth >= 1 and trials >= 1".into(),
        ));
    }
    if params.is_degenerate() {
        return Err(Error::DegenerateSampling);
    }
    let counts = survival_counts(params, depth, trials, master_seed);
    Ok(counts
        .iter()
        .enumerate()
        .map(|(i, &successes)| {
            let d = i + 1;
            equality_report(
                format!("survival to depth {d}"),
                successes,
                trials,
                survival_exact(params, d),
                3.0,
            )
        })
        .collect())
}

/// Monte Carlo hitting frequency against the energy lower bound, with the
/// exact finite-level moments reported alongside.
#[derive(Debug, Clone, Serialize)]
pub struct HittingCheckReport {
    pub k: u32,
    #[serde(serialize_with = "serde_rat")]
    pub ell: BigRational,
    #[serde(serialize_with = "serde_rat")]
    pub gamma: BigRational,
    pub depth: usize,
    /// Binary frontier length k * depth.
    pub level: usize,
    pub target_mass_exact: String,
    pub target_mass: f64,
    pub energy_total: Surd,
    pub bound_exact: Surd,
    pub first_moment_exact: String,
    pub second_moment: Surd,
    pub pz_bound_exact: Surd,
    pub pz_bound: f64,
    pub check: ExperimentReport,
}

/// Estimate P{frontier meets target} over fresh trees and compare, one-sided
/// at 3 sigma, against mu(A)^2 / I_gamma(mu). Errors when the energy
/// diverges (gamma >= 1): there is no finite bound to check.
pub fn run_hitting_check(
    params: &Params,
    depth: usize,
    trials: u64,
    master_seed: u64,
    mu: &DyadicMeasure,
    target: &HittingTarget,
) -> Result<HittingCheckReport> {
    if trials == 0 {
        return Err(Error::InvalidParams("at least one trial required".into()));
    }
    if params.is_degenerate() {
        return Err(Error::DegenerateSampling);
    }
    let n = params.k() as usize * depth;
    let hb = hitting_lower_bound(mu, target.set(), params.gamma())?;
    if hb.divergent {
        return Err(Error::InvalidParams(format!(
            "gamma-energy diverges at gamma={}; no finite hitting bound to check",
            format_rational(params.gamma())
        )));
    }
    let first = exact_first_moment(mu, target, n, params)?;
    let second = exact_second_moment(mu, target, n, params)?;
    let pz = pz_bound(&first, &second.total)?;
    let successes = count_trials(trials, |t| {
        let tree = SampledTree::sample(params, depth, rng::trial_seed(master_seed, t))
            .expect("non-degenerate params");
        frontier_hits(&tree, target)
    });
    let label = format!(
        "frontier of depth-{depth} trees meets a {}-cylinder target",
        target.set().cylinders().len()
    );
    let check = bound_report(label, successes, trials, hb.bound, 3.0);
    Ok(HittingCheckReport {
        k: params.k(),
        ell: params.ell().clone(),
        gamma: params.gamma().clone(),
        depth,
        level: n,
        target_mass_exact: hb.target_mass_exact,
        target_mass: hb.target_mass,
        energy_total: hb.energy_total.expect("finite energy checked above"),
        bound_exact: hb.bound_exact.expect("finite energy checked above"),
        first_moment_exact: format_rational(&first),
        second_moment: second.total,
        pz_bound: pz.value.to_f64(),
        pz_bound_exact: pz.value,
        check,
    })
}

/// End-to-end demonstration: the diluted measure's support is hit with
/// probability at least mass^2 / energy, and a hitting branch converts to
/// the integer view of a member subset and back.
#[derive(Debug, Clone, Serialize)]
pub struct PipelineReport {
    pub k: u32,
    #[serde(serialize_with = "serde_rat")]
    pub ell: BigRational,
    #[serde(serialize_with = "serde_rat")]
    pub gamma: BigRational,
    pub depth: usize,
    /// Binary frontier length k * depth.
    pub level: usize,
    pub dilution_period: usize,
    pub target_cylinders: usize,
    pub target_mass_exact: String,
    pub energy_total: Surd,
    pub bound: f64,
    pub pz_bound: f64,
    pub check: ExperimentReport,
    pub first_hit_trial: Option<u64>,
    /// The hitting branch prefix, as a binary string.
    pub branch: Option<String>,
    /// The extracted member subset: one surviving string per length.
    pub witness_strings: Vec<String>,
    /// Positions of the witness strings in the length-then-lexicographic
    /// enumeration, as decimal integers.
    pub witness_indices: Vec<String>,
    pub reconstructed: Option<String>,
    pub round_trip_ok: Option<bool>,
}

/// Run the demonstration at gamma = 1/k < 1/2 (so k >= 3), ell = 1, against
/// the period-2 diluted measure of binary depth k * depth. When no trial
/// hits, the report carries the (suspicious) frequency statistics and empty
/// extraction fields.
pub fn run_pipeline_demo(
    k: u32,
    depth: usize,
    trials: u64,
    master_seed: u64,
) -> Result<PipelineReport> {
    if k < 3 {
        return Err(Error::InvalidParams(
            "demonstration needs gamma = 1/k < 1/2, i.e. k >= 3".into(),
        ));
    }
    if depth == 0 || trials == 0 {
        return Err(Error::InvalidParams(
            "demonstration needs depth >= 1 and trials >= 1".into(),
        ));
    }
    let params = Params::new_int(k, 1)?;
    let n = k as usize * depth;
    let mu = DyadicMeasure::diluted(n, 2)?;
    let target_set = ClopenSet::new(mu.support_leaves());
    let target = HittingTarget::new(target_set);
    let mass = measure_of_clopen(&mu, target.set())?;

    let hb = hitting_lower_bound(&mu, target.set(), params.gamma())?;
    debug_assert!(!hb.divergent, "gamma = 1/k <= 1/3 keeps the energy finite");
    let first = exact_first_moment(&mu, &target, n, &params)?;
    let second = exact_second_moment(&mu, &target, n, &params)?;
    let pz = pz_bound(&first, &second.total)?;

    let hit = |t: u64| {
        let tree = SampledTree::sample(&params, depth, rng::trial_seed(master_seed, t))
            .expect("ell = 1 is not degenerate");
        frontier_hits(&tree, &target)
    };
    let hits = count_trials(trials, hit);
    let first_hit_trial = (0..trials).into_par_iter().find_first(|&t| hit(t));

    let check = bound_report(
        format!("frontier of depth-{depth} trees meets the diluted support"),
        hits,
        trials,
        hb.bound,
        3.0,
    );

    let mut branch = None;
    let mut witness_strings = Vec::new();
    let mut witness_indices = Vec::new();
    let mut reconstructed = None;
    let mut round_trip_ok = None;
    if let Some(t) = first_hit_trial {
        let tree = SampledTree::sample(&params, depth, rng::trial_seed(master_seed, t))?;
        let x = tree
            .frontier_binary()
            .into_iter()
            .find(|b| target.hits(b))
            .expect("trial was counted as hitting");
        let witness = tree.extract(&x)?;
        witness_strings = witness.strings().iter().map(ToString::to_string).collect();
        witness_indices = subset_to_integers(&witness)
            .iter()
            .map(ToString::to_string)
            .collect();
        let back = reconstruct_prefix(&witness, x.len())?;
        round_trip_ok = Some(back == x);
        reconstructed = Some(back.to_string());
        branch = Some(x.to_string());
    }

    Ok(PipelineReport {
        k,
        ell: params.ell().clone(),
        gamma: params.gamma().clone(),
        depth,
        level: n,
        dilution_period: 2,
        target_cylinders: target.set().cylinders().len(),
        target_mass_exact: format_rational(&mass),
        energy_total: hb.energy_total.expect("finite energy"),
        bound: hb.bound,
        pz_bound: pz.value.to_f64(),
        check,
        first_hit_trial,
        branch,
        witness_strings,
        witness_indices,
        reconstructed,
        round_trip_ok,
    })
}

/// One detected photon: its time slot and its fair bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Observation {
    pub position: u64,
    pub bit: u8,
}

/// A run of the two-detector experiment: each photon carries a fair bit
/// (which detector fires) and is observed independently with probability
/// eta (detector efficiency). The observed positions with bit 1 form a
/// subset of the true bit-1 positions — the physical source of the
/// "infinite subset of a random set" picture.
#[derive(Debug, Clone, Serialize)]
pub struct BeamSplitterReport {
    /// Scope note: the detection model here is an i.i.d. Bernoulli mask.
    pub note: &'static str,
    pub eta: f64,
    pub photons: u64,
    pub detected: u64,
    pub detected_ones: u64,
    pub detection_check: ExperimentReport,
    pub ones_check: ExperimentReport,
    /// The first observations, capped.
    pub observations: Vec<Observation>,
    pub observations_truncated: bool,
    /// Detected positions whose bit is 1, capped at the same limit.
    pub subset_positions: Vec<u64>,
    pub subset_truncated: bool,
}

const BEAM_NOTE: &str = "detection is an independent Bernoulli(eta) mask per photon; \
     weaker schedules that only promise infinitely many detections are not simulated";

pub fn run_beam_splitter(
    eta: f64,
    photons: u64,
    master_seed: u64,
    observation_cap: usize,
) -> Result<BeamSplitterReport> {
    if !(eta > 0.0 && eta <= 1.0) || !eta.is_finite() {
        return Err(Error::InvalidParams(format!(
            "detection probability must lie in (0, 1], got {eta}"
        )));
    }
    if photons == 0 {
        return Err(Error::InvalidParams("at least one photon required".into()));
    }
    let threshold = rng::threshold_for(eta);
    let detect = |i: u64| eta >= 1.0 || rng::photon_detect_draw(master_seed, i) < threshold;

    // Per-block partial results merged in block order, so the observation
    // list is the true prefix of the full record.
    struct BlockStats {
        detected: u64,
        ones: u64,
        observations: Vec<Observation>,
    }
    let blocks: Vec<BlockStats> = (0..photons.div_ceil(BLOCK))
        .into_par_iter()
        .map(|b| {
            let lo = b * BLOCK;
            let hi = ((b + 1) * BLOCK).min(photons);
            let mut stats = BlockStats {
                detected: 0,
                ones: 0,
                observations: Vec::new(),
            };
            for i in lo..hi {
                if detect(i) {
                    let bit = rng::photon_bit(master_seed, i);
                    stats.detected += 1;
                    stats.ones += u64::from(bit);
                    stats.observations.push(Observation { position: i, bit });
                }
            }
            stats
        })
        .collect();

    let detected: u64 = blocks.iter().map(|b| b.detected).sum();
    let detected_ones: u64 = blocks.iter().map(|b| b.ones).sum();
    let mut observations = Vec::with_capacity(observation_cap.min(detected as usize));
    'outer: for block in &blocks {
        for obs in &block.observations {
            if observations.len() >= observation_cap {
                break 'outer;
            }
            observations.push(*obs);
        }
    }
    let observations_truncated = (detected as usize) > observations.len();
    let mut subset_positions: Vec<u64> = Vec::new();
    'ones: for block in &blocks {
        for obs in &block.observations {
            if subset_positions.len() >= observation_cap {
                break 'ones;
            }
            if obs.bit == 1 {
                subset_positions.push(obs.position);
            }
        }
    }
    let subset_truncated = (detected_ones as usize) > subset_positions.len();

    let detection_check = equality_report(
        "detected fraction".into(),
        detected,
        photons,
        eta,
        4.0,
    );
    let ones_check = equality_report(
        "detected-ones fraction".into(),
        detected_ones,
        photons,
        eta / 2.0,
        4.0,
    );
    Ok(BeamSplitterReport {
        note: BEAM_NOTE,
        eta,
        photons,
        detected,
        detected_ones,
        detection_check,
        ones_check,
        observations,
        observations_truncated,
        subset_positions,
        subset_truncated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strings::BitString;

    fn params(k: u32, ell: u32) -> Params {
        Params::new_int(k, ell).unwrap()
    }

    fn ks(symbols: &[u32]) -> KString {
        KString::from_symbols(symbols.to_vec())
    }

    #[test]
    fn wilson_interval_contains_proportion() {
        let (lo, hi) = wilson_bounds(50, 100, 3.0);
        assert!(lo < 0.5 && 0.5 < hi);
        let (lo0, hi0) = wilson_bounds(0, 100, 3.0);
        assert_eq!(lo0, 0.0);
        assert!(hi0 > 0.0 && hi0 < 0.2);
        let (lo1, hi1) = wilson_bounds(100, 100, 3.0);
        assert!(lo1 > 0.8);
        assert!(hi1 > 1.0 - 1e-12);
    }

    #[test]
    fn pair_prob_golden_case() {
        // k=2, ell=1, chains of length 3 sharing 1 symbol: exact 1/32
        let p = params(2, 1);
        let report = run_pair_prob_check(&p, &ks(&[3, 2, 1]), &ks(&[3, 0, 1]), 40_000, 11).unwrap();
        assert_eq!(report.verdict, Verdict::Consistent);
        assert!((report.reference - 1.0 / 32.0).abs() < 1e-15);
        assert!((report.estimate - report.reference).abs() < 4.0 * report.standard_error);
    }

    #[test]
    fn pair_prob_with_identical_chains_is_chain_prob() {
        let p = params(2, 2);
        let sigma = ks(&[1, 2]);
        let report = run_pair_prob_check(&p, &sigma, &sigma, 40_000, 5).unwrap();
        let chain = crate::prob::chain_prob(2, &p).to_f64();
        assert!((report.reference - chain).abs() < 1e-15);
        assert_eq!(report.verdict, Verdict::Consistent);
    }

    #[test]
    fn pair_prob_rejects_bad_input() {
        let p = params(2, 1);
        assert!(run_pair_prob_check(&p, &ks(&[1]), &ks(&[1, 2]), 100, 0).is_err());
        assert!(run_pair_prob_check(&params(2, 0), &ks(&[1]), &ks(&[1]), 100, 0).is_err());
        assert!(run_pair_prob_check(&p, &ks(&[1]), &ks(&[1]), 0, 0).is_err());
    }

    #[test]
    fn reports_do_not_depend_on_thread_count() {
        let p = params(2, 1);
        let run = || {
            let pair =
                run_pair_prob_check(&p, &ks(&[3, 2]), &ks(&[3, 0]), 20_000, 99).unwrap();
            let surv = run_survival_curve(&p, 4, 20_000, 7).unwrap();
            let beam = run_beam_splitter(0.25, 50_000, 3, 100).unwrap();
            (
                serde_json::to_string(&pair).unwrap(),
                serde_json::to_string(&surv).unwrap(),
                serde_json::to_string(&beam).unwrap(),
            )
        };
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(run);
        let quad = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(run);
        assert_eq!(single, quad);
    }

    #[test]
    fn survival_curve_consistent_at_every_depth() {
        let p = params(2, 1);
        let reports = run_survival_curve(&p, 5, 30_000, 2024).unwrap();
        assert_eq!(reports.len(), 5);
        for r in &reports {
            assert_eq!(r.verdict, Verdict::Consistent, "{}", r.label);
        }
        // depth-1 reference is exactly 15/16
        assert!((reports[0].reference - 15.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn survival_curve_subcritical_goes_extinct() {
        // k=1, ell=2: mean offspring 1/2; survival decays to 0
        let p = params(1, 2);
        let reports = run_survival_curve(&p, 10, 20_000, 9).unwrap();
        for r in &reports {
            assert_eq!(r.verdict, Verdict::Consistent, "{}", r.label);
        }
        assert!(reports[9].reference < 1e-3);
        assert!(reports[9].estimate < 1e-2);
    }

    #[test]
    fn hitting_check_whole_space_uniform() {
        let p = params(2, 1);
        let mu = DyadicMeasure::uniform(4).unwrap();
        let target = HittingTarget::new(ClopenSet::whole_space());
        let report = run_hitting_check(&p, 2, 30_000, 31, &mu, &target).unwrap();
        assert_eq!(report.check.verdict, Verdict::Consistent);
        // bound = 1 / (1/(2 - sqrt2)) = 2 - sqrt2
        assert!((report.check.reference - (2.0 - 2.0f64.sqrt())).abs() < 1e-12);
        // the estimate approximates depth-2 survival, well above the bound
        assert!(report.check.estimate > 0.9);
        assert!(report.pz_bound >= report.check.reference - 1e-12);
    }

    #[test]
    fn hitting_check_rejects_divergent_energy() {
        // k=1, ell=1: gamma = 1 diverges
        let p = params(1, 1);
        let mu = DyadicMeasure::uniform(2).unwrap();
        let target = HittingTarget::new(ClopenSet::whole_space());
        assert!(run_hitting_check(&p, 2, 100, 0, &mu, &target).is_err());
    }

    #[test]
    fn y_moment_mc_matches_exact_moments() {
        // MC means of Y and Y^2 must sit within 4 sample standard errors
        // of the exact moments (worked case: 1 and 5/4)
        let p = params(2, 1);
        let mu = DyadicMeasure::uniform(2).unwrap();
        let target = HittingTarget::new(ClopenSet::whole_space());
        let trials = 40_000u64;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        let mut sum_4 = 0.0;
        for t in 0..trials {
            let tree = SampledTree::sample(&p, 1, rng::trial_seed(17, t)).unwrap();
            let y = crate::moments::y_statistic(&tree, &mu, &target, 2).unwrap();
            sum += y;
            sum_sq += y * y;
            sum_4 += y * y * y * y;
        }
        let n = trials as f64;
        let mean = sum / n;
        let mean_sq = sum_sq / n;
        let se_mean = ((mean_sq - mean * mean) / n).sqrt();
        let se_sq = ((sum_4 / n - mean_sq * mean_sq) / n).sqrt();
        assert!((mean - 1.0).abs() <= 4.0 * se_mean, "mean {mean} se {se_mean}");
        assert!(
            (mean_sq - 1.25).abs() <= 4.0 * se_sq,
            "mean square {mean_sq} se {se_sq}"
        );
    }

    #[test]
    fn pipeline_round_trips_a_hitting_branch() {
        let report = run_pipeline_demo(3, 2, 400, 12).unwrap();
        assert_eq!(report.level, 6);
        assert_eq!(report.target_cylinders, 8); // 2^{6/2}
        assert_eq!(report.target_mass_exact, "1");
        assert_eq!(report.check.verdict, Verdict::Consistent);
        assert!(report.bound > 0.0);
        assert!(report.pz_bound >= report.bound - 1e-12);
        assert_eq!(report.round_trip_ok, Some(true));
        let branch = report.branch.unwrap();
        assert_eq!(branch.len(), 6);
        assert_eq!(report.reconstructed.unwrap(), branch);
        // witness: one string per length 1..=depth
        assert_eq!(report.witness_strings.len(), 2);
        assert_eq!(report.witness_indices.len(), 2);
        // branch lies in the diluted support: odd positions are 0
        let bits: BitString = branch.parse().unwrap();
        for (i, &b) in bits.bits().iter().enumerate() {
            if i % 2 == 1 {
                assert_eq!(b, 0, "position {i}");
            }
        }
    }

    #[test]
    fn pipeline_rejects_small_k() {
        assert!(run_pipeline_demo(2, 2, 10, 0).is_err());
        assert!(run_pipeline_demo(3, 0, 10, 0).is_err());
    }

    #[test]
    fn beam_splitter_full_efficiency_sees_everything() {
        let report = run_beam_splitter(1.0, 2_000, 5, usize::MAX).unwrap();
        assert_eq!(report.detected, 2_000);
        assert_eq!(report.observations.len(), 2_000);
        assert!(!report.observations_truncated);
        assert_eq!(report.detection_check.verdict, Verdict::Consistent);
        assert_eq!(report.ones_check.verdict, Verdict::Consistent);
        // positions are exactly 0..photons
        for (i, obs) in report.observations.iter().enumerate() {
            assert_eq!(obs.position, i as u64);
        }
    }

    #[test]
    fn beam_splitter_statistics_and_subset_structure() {
        let report = run_beam_splitter(0.5, 100_000, 42, usize::MAX).unwrap();
        assert_eq!(report.detection_check.verdict, Verdict::Consistent);
        assert_eq!(report.ones_check.verdict, Verdict::Consistent);
        // subset view = observed positions with bit 1, in order
        let expect: Vec<u64> = report
            .observations
            .iter()
            .filter(|o| o.bit == 1)
            .map(|o| o.position)
            .collect();
        assert_eq!(report.subset_positions, expect);
        assert_eq!(report.detected_ones as usize, expect.len());
    }

    #[test]
    fn beam_splitter_caps_observations() {
        let report = run_beam_splitter(0.5, 10_000, 9, 25).unwrap();
        assert_eq!(report.observations.len(), 25);
        assert!(report.observations_truncated);
        assert!(report.subset_positions.len() <= 25);
        assert!(report.subset_truncated);
        // counts still cover the whole run
        assert!(report.detected > 4_000);
    }

    #[test]
    fn beam_splitter_rejects_bad_eta() {
        assert!(run_beam_splitter(0.0, 10, 0, 10).is_err());
        assert!(run_beam_splitter(-0.5, 10, 0, 10).is_err());
        assert!(run_beam_splitter(1.5, 10, 0, 10).is_err());
        assert!(run_beam_splitter(f64::NAN, 10, 0, 10).is_err());
        assert!(run_beam_splitter(0.5, 0, 0, 10).is_err());
    }
}
