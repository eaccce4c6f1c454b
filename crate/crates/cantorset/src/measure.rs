//! Depth-limited dyadic measures and their energies.
//!
//! A measure assigns a mass to every binary string of length at most N, with
//! mass(s) = mass(s0) + mass(s1) and total mass 1. Only nonzero masses are
//! stored (keyed by the heap-style node id 2^len + value); internal masses
//! are precomputed sums of leaf masses, so conservation holds by
//! construction.
//!
//! The gamma-energy of a measure integrates (distance)^{-gamma} over pairs,
//! where the distance between branches splitting after m common bits is
//! 2^{-m}. Pairs that agree through depth N are handled by extending every
//! leaf uniformly, which closes the within-leaf sum into
//! 2^{N gamma} / (2 - 2^gamma) per unit of squared leaf mass; gamma >= 1
//! makes that series diverge and the total is reported as divergent.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rational::{format_rational, parse_rational, rational_to_f64};
use crate::strings::BitString;
use crate::surd::Surd;

/// Hard depth cap for any measure (guards parsers against allocation bombs).
pub const MAX_MEASURE_DEPTH: usize = 32;
/// Node-count cap for the dense builders.
const MAX_BUILDER_NODES: u64 = 1 << 21;

pub(crate) fn node_id(bits: &BitString) -> u64 {
    bits.bits().iter().fold(1u64, |acc, &b| (acc << 1) | u64::from(b))
}

fn id_level(id: u64) -> usize {
    (63 - id.leading_zeros()) as usize
}

pub(crate) fn id_bits(id: u64) -> BitString {
    let level = id_level(id);
    let bits = (0..level)
        .map(|j| ((id >> (level - 1 - j)) & 1) as u8)
        .collect();
    BitString::from_bits(bits).expect("bits from id are 0/1")
}

#[derive(Debug, Clone, PartialEq)]
pub struct DyadicMeasure {
    depth: usize,
    /// Nonzero node masses, internal nodes included.
    nodes: BTreeMap<u64, BigRational>,
    /// True when the total mass is exactly 1.
    exact: bool,
}

impl DyadicMeasure {
    /// The fair-coin measure: mass 2^{-len} everywhere, down to `depth`.
    pub fn uniform(depth: usize) -> Result<Self> {
        check_builder_size(depth, depth)?;
        let mut nodes = BTreeMap::new();
        for level in 0..=depth {
            let mass = BigRational::new(BigInt::one(), BigInt::from(2u32).pow(level as u32));
            for value in 0..(1u64 << level) {
                nodes.insert((1u64 << level) | value, mass.clone());
            }
        }
        Ok(DyadicMeasure {
            depth,
            nodes,
            exact: true,
        })
    }

    /// A measure supported on branches whose positions not divisible by
    /// `period` are 0; the free positions carry fair coin flips. With
    /// period 1 this is the uniform measure. Support leaves at depth N
    /// number 2^{ceil(N/period)}, each of that mass.
    pub fn diluted(depth: usize, period: usize) -> Result<Self> {
        if period == 0 {
            return Err(Error::InvalidParams("dilution period must be >= 1".into()));
        }
        let free = depth.div_ceil(period);
        check_builder_size(depth, free)?;
        let mut nodes = BTreeMap::new();
        // Walk the support tree: at a free position both children carry half
        // the parent's mass, at a forced position only the 0-child keeps it.
        let mut frontier: Vec<u64> = vec![1];
        nodes.insert(1, BigRational::one());
        for pos in 0..depth {
            let half = BigRational::new(BigInt::one(), BigInt::from(2));
            let mut next = Vec::with_capacity(frontier.len() * 2);
            for &id in &frontier {
                let mass = nodes[&id].clone();
                if pos % period == 0 {
                    nodes.insert(id << 1, &mass * &half);
                    nodes.insert((id << 1) | 1, &mass * &half);
                    next.push(id << 1);
                    next.push((id << 1) | 1);
                } else {
                    nodes.insert(id << 1, mass);
                    next.push(id << 1);
                }
            }
            frontier = next;
        }
        Ok(DyadicMeasure {
            depth,
            nodes,
            exact: true,
        })
    }

    /// Build from explicit leaf masses. Masses must be nonnegative and sum
    /// to 1 within 1e-12; `exact` is recorded as whether the sum is exactly 1.
    pub fn from_leaf_masses(
        depth: usize,
        leaves: BTreeMap<BitString, BigRational>,
    ) -> Result<Self> {
        if depth > MAX_MEASURE_DEPTH {
            return Err(Error::TooLarge(format!(
                "measure depth {depth} exceeds {MAX_MEASURE_DEPTH}"
            )));
        }
        let mut nodes: BTreeMap<u64, BigRational> = BTreeMap::new();
        for (bits, mass) in &leaves {
            if bits.len() != depth {
                return Err(Error::MeasureFormat(format!(
                    "leaf {bits} has length {}, expected {depth}",
                    bits.len()
                )));
            }
            if mass.is_negative() {
                return Err(Error::MeasureFormat(format!(
                    "leaf {bits} has negative mass {}",
                    format_rational(mass)
                )));
            }
            if mass.is_zero() {
                continue;
            }
            let mut id = node_id(bits);
            loop {
                *nodes.entry(id).or_insert_with(BigRational::zero) += mass;
                if id == 1 {
                    break;
                }
                id >>= 1;
            }
        }
        let total = nodes.get(&1).cloned().unwrap_or_else(BigRational::zero);
        let exact = total.is_one();
        if !exact {
            let err = rational_to_f64(&(&total - BigRational::one())).abs();
            if err > 1e-12 {
                return Err(Error::MeasureFormat(format!(
                    "total mass {} differs from 1 by {err:.3e}",
                    format_rational(&total)
                )));
            }
        }
        Ok(DyadicMeasure {
            depth,
            nodes,
            exact,
        })
    }

    /// Parse the measure file format:
    /// `{"depth": N, "masses": {"<bits>": "p/q" | "0.125" | 0.125, ...}}`
    /// listing the nonzero leaves. String masses are parsed exactly; JSON
    /// numbers contribute their exact binary (f64) value.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let obj = value
            .as_object()
            .ok_or_else(|| Error::MeasureFormat("top level must be an object".into()))?;
        for key in obj.keys() {
            if key != "depth" && key != "masses" {
                return Err(Error::MeasureFormat(format!("unknown key {key:?}")));
            }
        }
        let depth = obj
            .get("depth")
            .and_then(|d| d.as_u64())
            .ok_or_else(|| Error::MeasureFormat("missing or non-integer \"depth\"".into()))?;
        if depth as usize > MAX_MEASURE_DEPTH {
            return Err(Error::TooLarge(format!(
                "measure depth {depth} exceeds {MAX_MEASURE_DEPTH}"
            )));
        }
        let masses = obj
            .get("masses")
            .and_then(|m| m.as_object())
            .ok_or_else(|| Error::MeasureFormat("missing \"masses\" object".into()))?;
        let mut leaves = BTreeMap::new();
        for (key, val) in masses {
            let bits: BitString = key
                .parse()
                .map_err(|e| Error::MeasureFormat(format!("bad leaf key {key:?}: {e}")))?;
            let mass = match val {
                serde_json::Value::String(s) => parse_rational(s)
                    .map_err(|e| Error::MeasureFormat(format!("bad mass for {key:?}: {e}")))?,
                serde_json::Value::Number(n) => {
                    let f = n.as_f64().ok_or_else(|| {
                        Error::MeasureFormat(format!("non-finite mass for {key:?}"))
                    })?;
                    BigRational::from_float(f).ok_or_else(|| {
                        Error::MeasureFormat(format!("non-finite mass for {key:?}"))
                    })?
                }
                _ => {
                    return Err(Error::MeasureFormat(format!(
                        "mass for {key:?} must be a string or number"
                    )))
                }
            };
            if leaves.insert(bits, mass).is_some() {
                return Err(Error::MeasureFormat(format!("duplicate leaf {key:?}")));
            }
        }
        Self::from_leaf_masses(depth as usize, leaves)
    }

    /// Emit the same format `from_json_str` accepts (leaves only, exact
    /// `p/q` masses, sorted keys).
    pub fn to_json_string(&self) -> String {
        let mut masses = serde_json::Map::new();
        for (id, mass) in self.level_nodes(self.depth) {
            masses.insert(
                id_bits(id).to_string(),
                serde_json::Value::String(format_rational(mass)),
            );
        }
        serde_json::json!({ "depth": self.depth, "masses": masses }).to_string()
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Whether the total mass is exactly 1 (false only for file-loaded
    /// measures that relied on the 1e-12 tolerance).
    pub fn is_exact(&self) -> bool {
        self.exact
    }

    pub fn total_mass(&self) -> BigRational {
        self.nodes.get(&1).cloned().unwrap_or_else(BigRational::zero)
    }

    /// Mass of the cylinder at `bits`; zero off the support.
    pub fn mass(&self, bits: &BitString) -> Result<BigRational> {
        if bits.len() > self.depth {
            return Err(Error::DepthExceeded {
                len: bits.len(),
                depth: self.depth,
            });
        }
        Ok(self
            .nodes
            .get(&node_id(bits))
            .cloned()
            .unwrap_or_else(BigRational::zero))
    }

    /// Nonzero nodes at one level, as (id, mass) pairs in value order.
    pub fn level_nodes(&self, level: usize) -> impl Iterator<Item = (u64, &BigRational)> {
        self.nodes
            .range((1u64 << level)..(1u64 << (level + 1)))
            .map(|(&id, mass)| (id, mass))
    }

    /// Nonzero support leaves (depth-N strings) in lexicographic order.
    pub fn support_leaves(&self) -> Vec<BitString> {
        self.level_nodes(self.depth).map(|(id, _)| id_bits(id)).collect()
    }

    fn child_masses(&self, id: u64) -> (Option<&BigRational>, Option<&BigRational>) {
        (self.nodes.get(&(id << 1)), self.nodes.get(&((id << 1) | 1)))
    }
}

fn check_builder_size(depth: usize, free_levels: usize) -> Result<()> {
    if depth > MAX_MEASURE_DEPTH {
        return Err(Error::TooLarge(format!(
            "measure depth {depth} exceeds {MAX_MEASURE_DEPTH}"
        )));
    }
    if free_levels >= 63 || (depth as u64).saturating_mul(1u64 << free_levels) > MAX_BUILDER_NODES {
        return Err(Error::TooLarge(format!(
            "builder would allocate more than {MAX_BUILDER_NODES} nodes"
        )));
    }
    Ok(())
}

/// A finite union of cylinders in canonical form: a sorted antichain with
/// sibling pairs merged, so no shorter representation of the same clopen set
/// exists.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClopenSet {
    cylinders: Vec<BitString>,
}

impl ClopenSet {
    pub fn new(cylinders: Vec<BitString>) -> Self {
        use std::collections::BTreeSet;
        // Antichain: keep a cylinder only if no proper prefix of it is
        // present (shortest-first scan).
        let mut sorted = cylinders;
        sorted.sort_by_key(|c| (c.len(), c.clone()));
        sorted.dedup();
        let mut kept: Vec<BitString> = Vec::new();
        for c in sorted {
            if !kept.iter().any(|k| k.is_prefix_of(&c)) {
                kept.push(c);
            }
        }
        // Merge sibling pairs until stable.
        let mut set: BTreeSet<BitString> = kept.into_iter().collect();
        loop {
            let mut merged = false;
            let snapshot: Vec<BitString> = set.iter().cloned().collect();
            for c in snapshot {
                if c.is_empty() || !set.contains(&c) {
                    continue;
                }
                let parent = c.prefix(c.len() - 1);
                let a = parent.child(0);
                let b = parent.child(1);
                if set.contains(&a) && set.contains(&b) {
                    set.remove(&a);
                    set.remove(&b);
                    set.insert(parent);
                    merged = true;
                }
            }
            if !merged {
                break;
            }
        }
        ClopenSet {
            cylinders: set.into_iter().collect(),
        }
    }

    /// The whole space [empty string].
    pub fn whole_space() -> Self {
        ClopenSet {
            cylinders: vec![BitString::empty()],
        }
    }

    pub fn empty() -> Self {
        ClopenSet { cylinders: vec![] }
    }

    pub fn cylinders(&self) -> &[BitString] {
        &self.cylinders
    }

    pub fn is_empty(&self) -> bool {
        self.cylinders.is_empty()
    }

    /// Longest cylinder length (0 for the whole space or the empty set).
    pub fn max_len(&self) -> usize {
        self.cylinders.iter().map(BitString::len).max().unwrap_or(0)
    }

    /// Does `[bits]` meet the union? True when some cylinder is a prefix of
    /// `bits` or extends it.
    pub fn meets_cylinder(&self, bits: &BitString) -> bool {
        self.cylinders
            .iter()
            .any(|c| c.is_prefix_of(bits) || bits.is_prefix_of(c))
    }

    /// Is `[bits]` entirely inside the union?
    pub fn covers_cylinder(&self, bits: &BitString) -> bool {
        self.cylinders.iter().any(|c| c.is_prefix_of(bits))
    }

    /// Parse `{"cylinders": ["110", "0010", ...]}`.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let obj = value
            .as_object()
            .ok_or_else(|| Error::Parse("target file must be an object".into()))?;
        for key in obj.keys() {
            if key != "cylinders" {
                return Err(Error::Parse(format!("unknown key {key:?} in target file")));
            }
        }
        let arr = obj
            .get("cylinders")
            .and_then(|v| v.as_array())
            .ok_or_else(|| Error::Parse("missing \"cylinders\" array".into()))?;
        let mut cylinders = Vec::with_capacity(arr.len());
        for v in arr {
            let s = v
                .as_str()
                .ok_or_else(|| Error::Parse("cylinders must be strings".into()))?;
            cylinders.push(s.parse()?);
        }
        Ok(ClopenSet::new(cylinders))
    }

    pub fn to_json_string(&self) -> String {
        let cyls: Vec<String> = self.cylinders.iter().map(BitString::to_string).collect();
        serde_json::json!({ "cylinders": cyls }).to_string()
    }
}

/// Measure of a canonical clopen set: the sum of its (disjoint) cylinder
/// masses.
pub fn measure_of_clopen(mu: &DyadicMeasure, set: &ClopenSet) -> Result<BigRational> {
    let mut total = BigRational::zero();
    for c in set.cylinders() {
        total += mu.mass(c)?;
    }
    Ok(total)
}

/// gamma-weight of a finite set of binary strings: sum of 2^{-gamma |w|}.
pub fn gamma_weight(strings: &[BitString], gamma: &BigRational) -> Result<Surd> {
    if gamma.is_negative() {
        return Err(Error::InvalidParams("gamma must be nonnegative".into()));
    }
    let mut by_len: BTreeMap<usize, u64> = BTreeMap::new();
    let mut seen = std::collections::BTreeSet::new();
    for w in strings {
        if seen.insert(w) {
            *by_len.entry(w.len()).or_insert(0) += 1;
        }
    }
    let mut total = Surd::zero();
    for (len, count) in by_len {
        let exp = -(gamma * BigRational::from_integer(BigInt::from(len)));
        let term = Surd::two_pow(&exp)?.scale(&BigRational::from_integer(BigInt::from(count)));
        total = total.add(&term);
    }
    Ok(total)
}

/// A capacity-style certificate: mass(s) <= c_r * 2^{-beta |s|} for all s
/// with |s| <= N, witnessed by `c_r` = max mass(s) 2^{beta |s|}.
#[derive(Debug, Clone, Serialize)]
pub struct EnergyCertificate {
    #[serde(serialize_with = "crate::rational::serde_rat")]
    pub beta: BigRational,
    pub c_r: Surd,
}

/// The smallest constant c with mass(s) <= c * 2^{-gamma |s|} over all
/// strings of length <= N; equivalently max_s mass(s) * 2^{gamma |s|}.
/// Cross-level comparisons are exact: candidates are compared through their
/// q-th powers, which are rational.
pub fn capacity_constant(mu: &DyadicMeasure, gamma: &BigRational) -> Result<Surd> {
    if gamma.is_negative() {
        return Err(Error::InvalidParams("gamma must be nonnegative".into()));
    }
    let q = gamma
        .denom()
        .to_u32()
        .filter(|&q| q <= crate::surd::MAX_SURD_BASE)
        .ok_or_else(|| Error::TooLarge("gamma denominator too large".into()))?;
    let p = gamma.numer().clone();
    let mut best: Option<(BigRational, usize, BigRational)> = None; // (key, level, mass)
    for level in 0..=mu.depth() {
        let Some(level_max) = mu.level_nodes(level).map(|(_, m)| m).max() else {
            continue;
        };
        // key = mass^q * 2^{p * level}, the q-th power of the candidate
        let exp = &p * BigInt::from(level);
        let pow2 = BigRational::from_integer(BigInt::one() << exp.to_u64().ok_or_else(|| {
            Error::TooLarge("capacity exponent out of range".into())
        })?);
        let key = level_max.pow(q as i32) * pow2;
        let better = match &best {
            None => true,
            Some((best_key, _, _)) => key > *best_key,
        };
        if better {
            best = Some((key, level, level_max.clone()));
        }
    }
    let (_, level, mass) =
        best.ok_or_else(|| Error::MeasureFormat("measure has empty support".into()))?;
    let exp = gamma * BigRational::from_integer(BigInt::from(level));
    Ok(Surd::two_pow(&exp)?.scale(&mass))
}

/// Exact gamma-energy of a measure, split into the contribution of pairs
/// that part ways strictly above depth N and the closed-form within-leaf
/// remainder under uniform extension.
#[derive(Debug, Clone, Serialize)]
pub struct EnergyReport {
    #[serde(serialize_with = "crate::rational::serde_rat")]
    pub gamma: BigRational,
    pub depth: usize,
    /// Pairs splitting at depths 0..N.
    pub split_sum: Surd,
    /// Within-leaf remainder; `None` when gamma >= 1 (divergent).
    pub leaf_sum: Option<Surd>,
    /// split_sum + leaf_sum; `None` when divergent.
    pub total: Option<Surd>,
    pub divergent: bool,
    /// c_r / (2^beta - 2^gamma), when a certificate was supplied.
    pub bound: Option<Surd>,
    pub certificate: Option<EnergyCertificate>,
    /// How mass below depth N is distributed for the within-leaf term.
    pub extension: &'static str,
}

pub fn energy(
    mu: &DyadicMeasure,
    gamma: &BigRational,
    certificate: Option<EnergyCertificate>,
) -> Result<EnergyReport> {
    if gamma.is_negative() {
        return Err(Error::InvalidParams("gamma must be nonnegative".into()));
    }
    let two = BigRational::from_integer(BigInt::from(2));
    let mut split_sum = Surd::zero();
    for level in 0..mu.depth() {
        // Sum of 2 * mass(s0) * mass(s1) over this level, then one exact
        // power of two for the whole level.
        let mut level_pairs = BigRational::zero();
        for (id, _) in mu.level_nodes(level) {
            if let (Some(a), Some(b)) = mu.child_masses(id) {
                level_pairs += a * b * &two;
            }
        }
        if level_pairs.is_zero() {
            continue;
        }
        let exp = gamma * BigRational::from_integer(BigInt::from(level));
        split_sum = split_sum.add(&Surd::two_pow(&exp)?.scale(&level_pairs));
    }

    let divergent = *gamma >= BigRational::one();
    let (leaf_sum, total) = if divergent {
        (None, None)
    } else {
        let mut sq = BigRational::zero();
        for (_, mass) in mu.level_nodes(mu.depth()) {
            sq += mass * mass;
        }
        let denom = Surd::from_int(2).sub(&Surd::two_pow(gamma)?);
        let inv = denom.inverse().expect("2 - 2^gamma is nonzero for gamma < 1");
        let exp = gamma * BigRational::from_integer(BigInt::from(mu.depth()));
        let leaf = Surd::two_pow(&exp)?.scale(&sq).mul(&inv);
        let total = split_sum.add(&leaf);
        (Some(leaf), Some(total))
    };

    let bound = match &certificate {
        None => None,
        Some(cert) => {
            if cert.beta <= *gamma {
                return Err(Error::InvalidParams(format!(
                    "certificate exponent beta={} must exceed gamma={}",
                    format_rational(&cert.beta),
                    format_rational(gamma)
                )));
            }
            let denom = Surd::two_pow(&cert.beta)?.sub(&Surd::two_pow(gamma)?);
            let inv = denom.inverse().expect("2^beta - 2^gamma nonzero for beta > gamma");
            Some(cert.c_r.mul(&inv))
        }
    };

    Ok(EnergyReport {
        gamma: gamma.clone(),
        depth: mu.depth(),
        split_sum,
        leaf_sum,
        total,
        divergent,
        bound,
        certificate,
        extension: "uniform",
    })
}

/// Inner approximation of a union of cylinders by a clopen set: disjointify
/// the cylinders in their given order, then keep the shortest prefix of the
/// pieces whose tail mass is at most `eps`.
#[derive(Debug, Clone, Serialize)]
pub struct ClopenApprox {
    pub set: ClopenSet,
    #[serde(serialize_with = "crate::rational::serde_rat")]
    pub mu_union: BigRational,
    #[serde(serialize_with = "crate::rational::serde_rat")]
    pub mu_kept: BigRational,
    /// How many of the disjointified pieces were kept.
    pub pieces_kept: usize,
    pub pieces_total: usize,
}

pub fn clopen_inner_approx(
    ordered_cylinders: &[BitString],
    mu: &DyadicMeasure,
    eps: &BigRational,
) -> Result<ClopenApprox> {
    if eps.is_negative() {
        return Err(Error::InvalidParams("eps must be nonnegative".into()));
    }
    for c in ordered_cylinders {
        if c.len() > mu.depth() {
            return Err(Error::DepthExceeded {
                len: c.len(),
                depth: mu.depth(),
            });
        }
    }
    // Disjointify in order: piece i is [c_i] minus the earlier cylinders.
    let mut pieces: Vec<Vec<BitString>> = Vec::with_capacity(ordered_cylinders.len());
    for (i, c) in ordered_cylinders.iter().enumerate() {
        pieces.push(cylinder_minus(c, &ordered_cylinders[..i]));
    }
    let piece_mass = |piece: &[BitString]| -> Result<BigRational> {
        let mut m = BigRational::zero();
        for b in piece {
            m += mu.mass(b)?;
        }
        Ok(m)
    };
    let masses: Vec<BigRational> = pieces
        .iter()
        .map(|p| piece_mass(p))
        .collect::<Result<_>>()?;
    let mu_union: BigRational = masses.iter().sum();
    // Shortest prefix with tail <= eps.
    let mut kept = 0usize;
    let mut covered = BigRational::zero();
    while &mu_union - &covered > *eps {
        covered += &masses[kept];
        kept += 1;
    }
    let set = ClopenSet::new(
        pieces[..kept]
            .iter()
            .flat_map(|p| p.iter().cloned())
            .collect(),
    );
    Ok(ClopenApprox {
        set,
        mu_union,
        mu_kept: covered,
        pieces_kept: kept,
        pieces_total: pieces.len(),
    })
}

/// `[base]` minus the union of `[b]` for b in `blockers`, as disjoint
/// cylinders below `base`.
fn cylinder_minus(base: &BitString, blockers: &[BitString]) -> Vec<BitString> {
    if blockers.iter().any(|b| b.is_prefix_of(base)) {
        return vec![];
    }
    let extending: Vec<&BitString> = blockers
        .iter()
        .filter(|b| base.is_prefix_of(b) && b.len() > base.len())
        .collect();
    if extending.is_empty() {
        return vec![base.clone()];
    }
    let mut out = Vec::new();
    for bit in [0u8, 1u8] {
        let child = base.child(bit);
        let child_blockers: Vec<BitString> = extending
            .iter()
            .filter(|b| child.is_prefix_of(b) || b.is_prefix_of(&child))
            .map(|b| (*b).clone())
            .collect();
        out.extend(cylinder_minus(&child, &child_blockers));
    }
    out
}
