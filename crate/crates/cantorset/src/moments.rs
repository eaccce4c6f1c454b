//! First and second moments of the frontier statistic, and the hitting
//! bounds they yield.
//!
//! For a target clopen set A and a depth-d sample (binary frontier length
//! n = k*d), the statistic is
//!
//! ```text
//!     Y = 2^{gamma n} * sum { mu(s) : |s| = n, s survives, [s] meets A }.
//! ```
//!
//! Each length-n string survives with probability 2^{-gamma n}, so
//! E[Y] is the mu-mass of the strings meeting A — at least mu(A), exactly
//! mu(A) once n reaches the target's resolution. The second moment
//! decomposes over the meet of each pair of strings: writing H(r) for the
//! hitting mass below r and m' = k*floor(m/k) for the blockwise-rounded
//! depth of a length-m meet,
//!
//! ```text
//!     E[Y^2] = sum_{m<n} 2^{gamma m'} sum_{|r|=m} 2 H(r0) H(r1)
//!              + 2^{gamma n} sum_{|s|=n} H(s)^2,
//! ```
//!
//! every term exact in the field of rational powers of two. The
//! Paley-Zygmund ratio E[Y]^2 / E[Y^2] then lower-bounds the probability
//! that the frontier meets A, and the gamma-energy of the measure gives
//! the depth-independent version of the same bound, mu(A)^2 / I_gamma(mu).

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure::{energy, id_bits, measure_of_clopen, ClopenSet, DyadicMeasure};
use crate::params::Params;
use crate::rational::{format_rational, rational_to_f64, serde_rat};
use crate::sampler::SampledTree;
use crate::strings::BitString;
use crate::surd::Surd;

const NO_CHILD: u32 = u32::MAX;

/// A clopen target with an index for constant-time-per-bit hit tests:
/// `hits(s)` decides whether the cylinder at `s` meets the target, i.e.
/// whether `s` extends into or beyond one of its cylinders.
#[derive(Debug, Clone)]
pub struct HittingTarget {
    set: ClopenSet,
    children: Vec<[u32; 2]>,
    terminal: Vec<bool>,
}

impl HittingTarget {
    pub fn new(set: ClopenSet) -> Self {
        let mut children = vec![[NO_CHILD; 2]];
        let mut terminal = vec![false];
        for cyl in set.cylinders() {
            let mut node = 0usize;
            for &bit in cyl.bits() {
                let next = children[node][bit as usize];
                node = if next == NO_CHILD {
                    children[node][bit as usize] = children.len() as u32;
                    children.push([NO_CHILD; 2]);
                    terminal.push(false);
                    children.len() - 1
                } else {
                    next as usize
                };
            }
            terminal[node] = true;
        }
        HittingTarget {
            set,
            children,
            terminal,
        }
    }

    pub fn set(&self) -> &ClopenSet {
        &self.set
    }

    /// Does the cylinder at `bits` meet the target? True when some target
    /// cylinder is a prefix of `bits` or vice versa.
    pub fn hits(&self, bits: &BitString) -> bool {
        let mut node = 0usize;
        if self.terminal[node] {
            return true;
        }
        for &bit in bits.bits() {
            let next = self.children[node][bit as usize];
            if next == NO_CHILD {
                return false;
            }
            node = next as usize;
            if self.terminal[node] {
                return true;
            }
        }
        // bits ran out inside the trie: extendable into a deeper cylinder,
        // unless the trie is the empty set's bare root
        self.children[node] != [NO_CHILD; 2]
    }
}

/// Does the sampled tree's binary frontier meet the target?
pub fn frontier_hits(tree: &SampledTree, target: &HittingTarget) -> bool {
    tree.frontier_binary().iter().any(|b| target.hits(b))
}

fn check_level(mu: &DyadicMeasure, params: &Params, n: usize) -> Result<()> {
    if n % params.k() as usize != 0 {
        return Err(Error::LengthNotMultiple {
            len: n,
            k: params.k(),
        });
    }
    if n > mu.depth() {
        return Err(Error::DepthExceeded {
            len: n,
            depth: mu.depth(),
        });
    }
    Ok(())
}

/// The frontier statistic of one sampled tree: 2^{gamma n} times the
/// mu-mass of the surviving length-n strings meeting the target. `n` must
/// be the tree's binary frontier length k * depth, and the measure must
/// resolve to depth n.
pub fn y_statistic(
    tree: &SampledTree,
    mu: &DyadicMeasure,
    target: &HittingTarget,
    n: usize,
) -> Result<f64> {
    let frontier_len = tree.params().k() as usize * tree.depth();
    if n != frontier_len {
        return Err(Error::InvalidParams(format!(
            "statistic level {n} does not match the tree's frontier length {frontier_len}"
        )));
    }
    check_level(mu, tree.params(), n)?;
    let mut hit_mass = BigRational::zero();
    for bits in tree.frontier_binary() {
        if target.hits(&bits) {
            hit_mass += mu.mass(&bits)?;
        }
    }
    let gamma = rational_to_f64(tree.params().gamma());
    Ok(rational_to_f64(&hit_mass) * (gamma * n as f64).exp2())
}

/// E[Y] at frontier length n: the mu-mass of the length-n strings whose
/// cylinders meet the target. At least mu(target); equal once n covers the
/// target's resolution.
pub fn exact_first_moment(
    mu: &DyadicMeasure,
    target: &HittingTarget,
    n: usize,
    params: &Params,
) -> Result<BigRational> {
    check_level(mu, params, n)?;
    let mut sum = BigRational::zero();
    for (id, mass) in mu.level_nodes(n) {
        if target.hits(&id_bits(id)) {
            sum += mass;
        }
    }
    Ok(sum)
}

/// Exact second moment of the frontier statistic, split into the
/// contribution of each meet depth and the diagonal, with the coarser
/// unrounded-exponent bound computed alongside.
#[derive(Debug, Clone, Serialize)]
pub struct SecondMoment {
    /// Term for pairs whose meet has length m, for m = 0..n-1.
    pub meet_terms: Vec<Surd>,
    /// Term for identical pairs.
    pub diagonal: Surd,
    pub total: Surd,
    /// Same double sum with the meet exponent m in place of k*floor(m/k):
    /// an upper bound sandwiched between the total and the gamma-energy.
    pub upper_bound: Surd,
}

/// Hitting mass below each node: H(s) = mu(s) for hitting length-n strings,
/// summed up the tree.
fn hitting_masses(
    mu: &DyadicMeasure,
    target: &HittingTarget,
    n: usize,
) -> BTreeMap<u64, BigRational> {
    let mut h: BTreeMap<u64, BigRational> = BTreeMap::new();
    for (id, mass) in mu.level_nodes(n) {
        if target.hits(&id_bits(id)) {
            h.insert(id, mass.clone());
        }
    }
    for level in (1..=n).rev() {
        let ids: Vec<u64> = h
            .range((1u64 << level)..(1u64 << (level + 1)))
            .map(|(&id, _)| id)
            .collect();
        for id in ids {
            let val = h[&id].clone();
            *h.entry(id >> 1).or_insert_with(BigRational::zero) += val;
        }
    }
    h
}

/// E[Y^2] at frontier length n, exactly. Requires k | n (the survival
/// probability of a length-n string is then exactly 2^{-gamma n}) and a
/// measure resolving to depth n.
pub fn exact_second_moment(
    mu: &DyadicMeasure,
    target: &HittingTarget,
    n: usize,
    params: &Params,
) -> Result<SecondMoment> {
    check_level(mu, params, n)?;
    let k = params.k() as usize;
    let gamma = params.gamma();
    let h = hitting_masses(mu, target, n);
    let two = BigRational::from_integer(BigInt::from(2));
    let mut meet_terms = Vec::with_capacity(n);
    let mut total = Surd::zero();
    let mut upper = Surd::zero();
    for m in 0..n {
        let mut pair_sum = BigRational::zero();
        for (&id, _) in h.range((1u64 << m)..(1u64 << (m + 1))) {
            if let (Some(a), Some(b)) = (h.get(&(id << 1)), h.get(&((id << 1) | 1))) {
                pair_sum += a * b * &two;
            }
        }
        let rounded = k * (m / k);
        let exp = gamma * BigRational::from_integer(BigInt::from(rounded));
        let term = Surd::two_pow(&exp)?.scale(&pair_sum);
        total = total.add(&term);
        let coarse_exp = gamma * BigRational::from_integer(BigInt::from(m));
        upper = upper.add(&Surd::two_pow(&coarse_exp)?.scale(&pair_sum));
        meet_terms.push(term);
    }
    let mut sq = BigRational::zero();
    for (_, mass) in h.range((1u64 << n)..(1u64 << (n + 1))) {
        sq += mass * mass;
    }
    let exp = gamma * BigRational::from_integer(BigInt::from(n));
    let diagonal = Surd::two_pow(&exp)?.scale(&sq);
    total = total.add(&diagonal);
    upper = upper.add(&diagonal);
    Ok(SecondMoment {
        meet_terms,
        diagonal,
        total,
        upper_bound: upper,
    })
}

/// Paley-Zygmund lower bound E[Y]^2 / E[Y^2] for P{Y > 0}, clamped into
/// [0, 1] with the clamping recorded.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PzBound {
    pub value: Surd,
    /// True when the raw ratio exceeded 1 — impossible for genuine moments.
    pub clamped: bool,
}

/// Zero moments give a zero bound; a zero second moment with a nonzero
/// first cannot come from genuine moments.
pub fn pz_bound(first: &BigRational, second: &Surd) -> Result<PzBound> {
    if second.is_zero() {
        if first.is_zero() {
            return Ok(PzBound {
                value: Surd::zero(),
                clamped: false,
            });
        }
        return Err(Error::InconsistentMoments(format!(
            "first moment {} with zero second moment",
            format_rational(first)
        )));
    }
    let num = Surd::from_rational(first * first);
    let ratio = num.div(second).expect("nonzero divisor");
    if ratio.to_f64() > 1.0 {
        return Ok(PzBound {
            value: Surd::one(),
            clamped: true,
        });
    }
    Ok(PzBound {
        value: ratio,
        clamped: false,
    })
}

/// Moments and the resulting Paley-Zygmund bound for one measure, target
/// and frontier length.
#[derive(Debug, Clone, Serialize)]
pub struct MomentReport {
    pub k: u32,
    #[serde(serialize_with = "serde_rat")]
    pub ell: BigRational,
    #[serde(serialize_with = "serde_rat")]
    pub gamma: BigRational,
    /// Binary frontier length n.
    pub level: usize,
    pub target_mass_exact: String,
    pub target_mass: f64,
    pub first_moment_exact: String,
    pub first_moment: f64,
    pub second_moment: Surd,
    pub second_moment_upper: Surd,
    pub meet_terms: Vec<Surd>,
    pub diagonal_term: Surd,
    pub pz_bound: Surd,
    pub pz_clamped: bool,
}

pub fn moment_report(
    mu: &DyadicMeasure,
    target: &HittingTarget,
    n: usize,
    params: &Params,
) -> Result<MomentReport> {
    let mu_a = measure_of_clopen(mu, target.set())?;
    let first = exact_first_moment(mu, target, n, params)?;
    let second = exact_second_moment(mu, target, n, params)?;
    let pz = pz_bound(&first, &second.total)?;
    Ok(MomentReport {
        k: params.k(),
        ell: params.ell().clone(),
        gamma: params.gamma().clone(),
        level: n,
        target_mass_exact: format_rational(&mu_a),
        target_mass: rational_to_f64(&mu_a),
        first_moment_exact: format_rational(&first),
        first_moment: rational_to_f64(&first),
        second_moment: second.total,
        second_moment_upper: second.upper_bound,
        meet_terms: second.meet_terms,
        diagonal_term: second.diagonal,
        pz_bound: pz.value,
        pz_clamped: pz.clamped,
    })
}

/// Restrict a measure to the leaves covered by a clopen set and rescale to
/// total mass 1. The measure must resolve the set (depth >= max cylinder
/// length), so each leaf is either inside or disjoint.
pub fn condition_measure(mu: &DyadicMeasure, set: &ClopenSet) -> Result<DyadicMeasure> {
    if set.max_len() > mu.depth() {
        return Err(Error::DepthExceeded {
            len: set.max_len(),
            depth: mu.depth(),
        });
    }
    let mut kept: BTreeMap<BitString, BigRational> = BTreeMap::new();
    let mut total = BigRational::zero();
    for (id, mass) in mu.level_nodes(mu.depth()) {
        let bits = id_bits(id);
        if set.covers_cylinder(&bits) {
            total += mass;
            kept.insert(bits, mass.clone());
        }
    }
    if total.is_zero() {
        return Err(Error::InvalidParams(
            "target carries no mass; nothing to condition on".into(),
        ));
    }
    let scaled = kept
        .into_iter()
        .map(|(bits, mass)| (bits, mass / &total))
        .collect();
    DyadicMeasure::from_leaf_masses(mu.depth(), scaled)
}

/// Energy-based lower bound for the probability that the sampled closed set
/// meets the target: mu(A)^2 / I_gamma(mu). The bound is zero (and flagged)
/// when the energy diverges.
#[derive(Debug, Clone, Serialize)]
pub struct HittingBound {
    #[serde(serialize_with = "serde_rat")]
    pub gamma: BigRational,
    pub target_mass_exact: String,
    pub target_mass: f64,
    pub divergent: bool,
    pub energy_total: Option<Surd>,
    pub bound_exact: Option<Surd>,
    pub bound: f64,
}

pub fn hitting_lower_bound(
    mu: &DyadicMeasure,
    target: &ClopenSet,
    gamma: &BigRational,
) -> Result<HittingBound> {
    let report = energy(mu, gamma, None)?;
    let mass = measure_of_clopen(mu, target)?;
    let (bound_exact, bound) = match &report.total {
        None => (None, 0.0),
        Some(total) => {
            if total.is_zero() {
                return Err(Error::InconsistentMoments(
                    "zero energy for a nonempty measure".into(),
                ));
            }
            let b = Surd::from_rational(&mass * &mass)
                .div(total)
                .expect("nonzero energy");
            let f = b.to_f64();
            (Some(b), f)
        }
    };
    Ok(HittingBound {
        gamma: gamma.clone(),
        target_mass_exact: format_rational(&mass),
        target_mass: rational_to_f64(&mass),
        divergent: report.divergent,
        energy_total: report.total,
        bound_exact,
        bound,
    })
}
