//! Probabilities carried as exact powers of two.
//!
//! Joint survival probabilities in the K-ary tree are always of the form
//! 2^e with rational e, so they are stored as the exponent and only turned
//! into floats at reporting boundaries. Multiplying probabilities is adding
//! exponents; comparisons are exact rational comparisons.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::Params;
use crate::rational::{format_rational, rational_to_f64};
use crate::strings::{split_depths, BitString, KString};

/// A probability of the form 2^exponent with exponent a rational <= 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Log2Prob {
    exponent: BigRational,
}

impl Log2Prob {
    pub fn new(exponent: BigRational) -> Result<Self> {
        if exponent.is_positive() {
            return Err(Error::InvalidParams(format!(
                "2^{} exceeds 1 and is not a probability",
                format_rational(&exponent)
            )));
        }
        Ok(Log2Prob { exponent })
    }

    pub fn one() -> Self {
        Log2Prob {
            exponent: BigRational::zero(),
        }
    }

    pub fn exponent(&self) -> &BigRational {
        &self.exponent
    }

    /// Float value 2^exponent; monotone in the exponent up to f64 rounding.
    pub fn to_f64(&self) -> f64 {
        rational_to_f64(&self.exponent).exp2()
    }

    /// Product of probabilities: exponents add.
    pub fn product(&self, other: &Log2Prob) -> Log2Prob {
        Log2Prob {
            exponent: &self.exponent + &other.exponent,
        }
    }
}

impl PartialOrd for Log2Prob {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Log2Prob {
    fn cmp(&self, other: &Self) -> Ordering {
        self.exponent.cmp(&other.exponent)
    }
}

impl Serialize for Log2Prob {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("Log2Prob", 2)?;
        st.serialize_field("log2", &format_rational(&self.exponent))?;
        st.serialize_field("decimal", &self.to_f64())?;
        st.end()
    }
}

fn rat_usize(n: usize) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// Probability that a fixed K-ary word of length `n_symbols` survives along
/// with its whole prefix chain: 2^{-ell * n}.
pub fn chain_prob(n_symbols: usize, params: &Params) -> Log2Prob {
    Log2Prob {
        exponent: -(params.ell() * rat_usize(n_symbols)),
    }
}

/// Probability that two equal-length K-ary words both survive together with
/// all their prefixes. With n the common length and m the length of their
/// longest common prefix, the chains cover m + 2(n − m) distinct words, so
/// the probability is 2^{ell * (m − 2n)}.
pub fn pair_chain_prob(a: &KString, b: &KString, params: &Params) -> Result<Log2Prob> {
    if a.len() != b.len() {
        return Err(Error::UnequalLengths {
            a: a.len(),
            b: b.len(),
        });
    }
    a.validate(params)?;
    b.validate(params)?;
    let n = rat_usize(a.len());
    let m = rat_usize(a.common_prefix_len(b));
    Ok(Log2Prob {
        exponent: params.ell() * (m - n * BigRational::from_integer(BigInt::from(2))),
    })
}

/// The binary-side view of [`pair_chain_prob`], together with the two upper
/// bounds that sandwich it. For binary words of length n whose longest
/// common prefix has length m, with m' = k * floor(m/k):
///
/// * `exact`        = 2^{gamma (m' − 2n)}  (equals the K-ary pair probability)
/// * `aligned_bound`= 2^{gamma (m' − 2n)}  (the symbol-aligned estimate)
/// * `common_bound` = 2^{gamma (m − 2n)}   (coarser, ignores alignment)
///
/// `exact == aligned_bound <= common_bound` always, with equality on the
/// right exactly when m is already a multiple of k.
#[derive(Debug, Clone, Serialize)]
pub struct PairProbBinary {
    pub exact: Log2Prob,
    pub aligned_bound: Log2Prob,
    pub common_bound: Log2Prob,
}

pub fn pair_chain_prob_binary(
    a: &BitString,
    b: &BitString,
    params: &Params,
) -> Result<PairProbBinary> {
    let k = params.k() as usize;
    if a.len() % k != 0 {
        return Err(Error::LengthNotMultiple {
            len: a.len(),
            k: params.k(),
        });
    }
    if a.len() != b.len() {
        return Err(Error::UnequalLengths {
            a: a.len(),
            b: b.len(),
        });
    }
    let d = split_depths(a, b, params)?;
    let two_n = rat_usize(2 * a.len());
    let exp_aligned = params.gamma() * (rat_usize(d.aligned_bits) - &two_n);
    let exp_common = params.gamma() * (rat_usize(d.common_bits) - &two_n);
    Ok(PairProbBinary {
        exact: Log2Prob {
            exponent: exp_aligned.clone(),
        },
        aligned_bound: Log2Prob {
            exponent: exp_aligned,
        },
        common_bound: Log2Prob {
            exponent: exp_common,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::parse_rational;

    fn params(k: u32, ell: u32) -> Params {
        Params::new_int(k, ell).unwrap()
    }

    fn ks(symbols: &[u32]) -> KString {
        KString::from_symbols(symbols.to_vec())
    }

    #[test]
    fn chain_prob_is_ell_per_symbol() {
        let p = params(2, 1);
        assert_eq!(chain_prob(3, &p).exponent(), &parse_rational("-3").unwrap());
        assert_eq!(chain_prob(0, &p), Log2Prob::one());
        let p12 = Params::new(2, parse_rational("1/2").unwrap()).unwrap();
        assert_eq!(
            chain_prob(3, &p12).exponent(),
            &parse_rational("-3/2").unwrap()
        );
    }

    #[test]
    fn pair_chain_prob_worked_values() {
        // k=2, ell=1, n=3, common prefix 1 -> 2^(1-6) = 1/32
        let p = params(2, 1);
        let a = ks(&[3, 2, 1]);
        let b = ks(&[3, 0, 1]);
        let q = pair_chain_prob(&a, &b, &p).unwrap();
        assert_eq!(q.exponent(), &parse_rational("-5").unwrap());
        assert_eq!(q.to_f64(), 1.0 / 32.0);

        // ell=2, n=2, disjoint -> 2^{2(0-4)} = 2^-8
        let p2 = params(2, 2);
        let q2 = pair_chain_prob(&ks(&[0, 0]), &ks(&[1, 1]), &p2).unwrap();
        assert_eq!(q2.exponent(), &parse_rational("-8").unwrap());
    }

    #[test]
    fn pair_of_equal_strings_is_chain_prob() {
        let p = params(2, 1);
        let a = ks(&[1, 2, 3]);
        assert_eq!(
            pair_chain_prob(&a, &a, &p).unwrap(),
            chain_prob(a.len(), &p)
        );
    }

    #[test]
    fn pair_chain_prob_binary_golden() {
        // k=2, ell=1, sigma=1110, tau=1111: m=3, m'=2, n=4
        let p = params(2, 1);
        let a: BitString = "1110".parse().unwrap();
        let b: BitString = "1111".parse().unwrap();
        let r = pair_chain_prob_binary(&a, &b, &p).unwrap();
        assert_eq!(r.exact.exponent(), &parse_rational("-3").unwrap());
        assert_eq!(r.aligned_bound, r.exact);
        assert_eq!(r.common_bound.exponent(), &parse_rational("-5/2").unwrap());
        assert!(r.exact <= r.common_bound);
    }

    #[test]
    fn binary_view_agrees_with_kary_view() {
        let p = params(2, 1);
        let a = ks(&[3, 2]);
        let b = ks(&[3, 1]);
        let bits_a = crate::strings::encode_kstring(&a, &p).unwrap();
        let bits_b = crate::strings::encode_kstring(&b, &p).unwrap();
        let kary = pair_chain_prob(&a, &b, &p).unwrap();
        let binary = pair_chain_prob_binary(&bits_a, &bits_b, &p).unwrap();
        assert_eq!(binary.exact, kary);
    }

    #[test]
    fn rejects_bad_shapes() {
        let p = params(2, 1);
        assert!(pair_chain_prob(&ks(&[1]), &ks(&[1, 2]), &p).is_err());
        assert!(pair_chain_prob(&ks(&[7]), &ks(&[1]), &p).is_err());
        let a: BitString = "110".parse().unwrap();
        assert!(pair_chain_prob_binary(&a, &a, &p).is_err());
        assert!(Log2Prob::new(parse_rational("1").unwrap()).is_err());
    }

    #[test]
    fn serializes_exponent_and_decimal() {
        let p = chain_prob(3, &params(2, 1));
        let j = serde_json::to_value(&p).unwrap();
        assert_eq!(j["log2"], "-3");
        assert_eq!(j["decimal"], 0.125);
    }
}
