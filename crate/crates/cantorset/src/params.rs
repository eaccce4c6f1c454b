//! Process parameters shared by every operation.
//!
//! A parameter pair consists of the symbol width `k` (each symbol of the
//! K-ary alphabet spans `k` bits, K = 2^k) and a nonnegative rational
//! `ell`; every string of the K-ary tree independently survives with
//! probability 2^{-ell}. The induced dimension-like exponent is
//! `gamma = ell / k`, measured in bits.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{format_rational, rational_to_f64};

/// Widest supported symbol (alphabet size 2^16).
pub const MAX_SYMBOL_BITS: u32 = 16;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ParamsRepr", into = "ParamsRepr")]
pub struct Params {
    k: u32,
    ell: BigRational,
    gamma: BigRational,
}

impl Params {
    pub fn new(k: u32, ell: BigRational) -> Result<Self> {
        if k == 0 || k > MAX_SYMBOL_BITS {
            return Err(Error::InvalidParams(format!(
                "symbol width k must be in 1..={MAX_SYMBOL_BITS}, got {k}"
            )));
        }
        if ell.is_negative() {
            return Err(Error::InvalidParams(format!(
                "ell must be nonnegative, got {}",
                format_rational(&ell)
            )));
        }
        let gamma = &ell / BigRational::from_integer(BigInt::from(k));
        Ok(Params { k, ell, gamma })
    }

    /// Convenience constructor for integer `ell`.
    pub fn new_int(k: u32, ell: u32) -> Result<Self> {
        Self::new(k, BigRational::from_integer(BigInt::from(ell)))
    }

    /// Symbol width in bits.
    pub fn k(&self) -> u32 {
        self.k
    }

    /// Alphabet size K = 2^k.
    pub fn alphabet_size(&self) -> u64 {
        1u64 << self.k
    }

    /// The survival exponent: each string is kept with probability 2^{-ell}.
    pub fn ell(&self) -> &BigRational {
        &self.ell
    }

    /// gamma = ell / k.
    pub fn gamma(&self) -> &BigRational {
        &self.gamma
    }

    /// Per-string membership probability 2^{-ell} as a float.
    pub fn membership_prob(&self) -> f64 {
        (-rational_to_f64(&self.ell)).exp2()
    }

    /// True when membership probability is 1 and sampling degenerates to the
    /// full tree.
    pub fn is_degenerate(&self) -> bool {
        self.ell.is_zero()
    }

    /// 64-bit acceptance threshold for membership draws: a node survives when
    /// its draw is strictly below this value. Exact for integer `ell` (the
    /// threshold 2^{64-ell} is a representable power of two).
    pub fn membership_threshold(&self) -> u64 {
        let p = self.membership_prob();
        if p >= 1.0 {
            u64::MAX
        } else {
            (p * (u64::MAX as f64 + 1.0)) as u64
        }
    }
}

impl std::fmt::Display for Params {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "k={}, ell={}", self.k, format_rational(&self.ell))
    }
}

#[derive(Serialize, Deserialize)]
struct ParamsRepr {
    k: u32,
    ell: String,
}

impl TryFrom<ParamsRepr> for Params {
    type Error = Error;
    fn try_from(r: ParamsRepr) -> Result<Self> {
        Params::new(r.k, crate::rational::parse_rational(&r.ell)?)
    }
}

impl From<Params> for ParamsRepr {
    fn from(p: Params) -> Self {
        ParamsRepr {
            k: p.k,
            ell: format_rational(&p.ell),
        }
    }
}
