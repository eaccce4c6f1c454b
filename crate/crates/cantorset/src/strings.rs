//! Binary strings, K-ary strings, and the block encoding between them.
//!
//! A `KString` is a finite word over the alphabet {0, …, 2^k − 1}. The block
//! encoding maps each symbol to its `k` bits most-significant-first and
//! concatenates, so a K-ary word of length j becomes a binary word of length
//! k·j. `enumerate_kstring`/`kstring_index` give the length-lexicographic
//! bijection between naturals and K-ary words, with the empty word at
//! index 0.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::Params;

/// A finite word over {0, 1}.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct BitString(Vec<u8>);

impl BitString {
    pub fn empty() -> Self {
        BitString(Vec::new())
    }

    pub fn from_bits(bits: Vec<u8>) -> Result<Self> {
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::Parse("bit strings may only contain 0 and 1".into()));
        }
        Ok(BitString(bits))
    }

    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// First `n` bits.
    pub fn prefix(&self, n: usize) -> BitString {
        BitString(self.0[..n].to_vec())
    }

    pub fn is_prefix_of(&self, other: &BitString) -> bool {
        other.0.len() >= self.0.len() && other.0[..self.0.len()] == self.0[..]
    }

    pub fn child(&self, bit: u8) -> BitString {
        let mut v = self.0.clone();
        v.push(bit & 1);
        BitString(v)
    }

    /// Length of the longest common prefix with `other`.
    pub fn common_prefix_len(&self, other: &BitString) -> usize {
        self.0
            .iter()
            .zip(other.0.iter())
            .take_while(|(a, b)| a == b)
            .count()
    }
}

impl FromStr for BitString {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let mut bits = Vec::with_capacity(s.len());
        for c in s.chars() {
            match c {
                '0' => bits.push(0),
                '1' => bits.push(1),
                _ => {
                    return Err(Error::Parse(format!(
                        "bit strings are 0/1 text, found {c:?}"
                    )))
                }
            }
        }
        Ok(BitString(bits))
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.0 {
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

impl TryFrom<String> for BitString {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<BitString> for String {
    fn from(b: BitString) -> String {
        b.to_string()
    }
}

/// A finite word over a 2^k-ary alphabet; symbols are plain naturals.
/// Validity against a concrete alphabet is checked where a `Params` is in
/// scope.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct KString(Vec<u32>);

impl KString {
    pub fn empty() -> Self {
        KString(Vec::new())
    }

    pub fn from_symbols(symbols: Vec<u32>) -> Self {
        KString(symbols)
    }

    pub fn symbols(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn prefix(&self, n: usize) -> KString {
        KString(self.0[..n].to_vec())
    }

    pub fn child(&self, symbol: u32) -> KString {
        let mut v = self.0.clone();
        v.push(symbol);
        KString(v)
    }

    pub fn is_prefix_of(&self, other: &KString) -> bool {
        other.0.len() >= self.0.len() && other.0[..self.0.len()] == self.0[..]
    }

    pub fn common_prefix_len(&self, other: &KString) -> usize {
        self.0
            .iter()
            .zip(other.0.iter())
            .take_while(|(a, b)| a == b)
            .count()
    }

    /// Check every symbol against the alphabet of `params`.
    pub fn validate(&self, params: &Params) -> Result<()> {
        let alphabet = params.alphabet_size();
        for &s in &self.0 {
            if u64::from(s) >= alphabet {
                return Err(Error::SymbolOutOfRange { symbol: s, alphabet });
            }
        }
        Ok(())
    }
}

impl FromStr for KString {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s.trim().is_empty() {
            return Ok(KString::empty());
        }
        let mut symbols = Vec::new();
        for part in s.split(',') {
            let part = part.trim();
            let sym: u32 = part
                .parse()
                .map_err(|_| Error::Parse(format!("bad symbol {part:?} in K-ary string")))?;
            symbols.push(sym);
        }
        Ok(KString(symbols))
    }
}

impl fmt::Display for KString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|s| s.to_string()).collect();
        write!(f, "{}", parts.join(","))
    }
}

impl TryFrom<String> for KString {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<KString> for String {
    fn from(k: KString) -> String {
        k.to_string()
    }
}

/// Encode one symbol as its `k` bits, most significant first.
pub fn encode_symbol(symbol: u32, params: &Params) -> Result<BitString> {
    let k = params.k();
    if u64::from(symbol) >= params.alphabet_size() {
        return Err(Error::SymbolOutOfRange {
            symbol,
            alphabet: params.alphabet_size(),
        });
    }
    let bits = (0..k).map(|j| ((symbol >> (k - 1 - j)) & 1) as u8).collect();
    Ok(BitString(bits))
}

/// Encode a K-ary word blockwise; the image has binary length k·|word|.
pub fn encode_kstring(word: &KString, params: &Params) -> Result<BitString> {
    let mut bits = Vec::with_capacity(word.len() * params.k() as usize);
    for &s in word.symbols() {
        bits.extend_from_slice(encode_symbol(s, params)?.bits());
    }
    Ok(BitString(bits))
}

/// Decode a binary word into symbols; the length must be a multiple of `k`.
pub fn decode_bitstring(bits: &BitString, params: &Params) -> Result<KString> {
    let k = params.k() as usize;
    if bits.len() % k != 0 {
        return Err(Error::LengthNotMultiple {
            len: bits.len(),
            k: params.k(),
        });
    }
    let symbols = bits
        .bits()
        .chunks(k)
        .map(|chunk| chunk.iter().fold(0u32, |acc, &b| (acc << 1) | u32::from(b)))
        .collect();
    Ok(KString(symbols))
}

/// Where two equal-length binary words part ways, in three granularities:
/// the longest common binary prefix, that length rounded down to a symbol
/// boundary, and the same in symbols.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SplitDepths {
    /// Longest common binary prefix length (m).
    pub common_bits: usize,
    /// `common_bits` rounded down to a multiple of k (m').
    pub aligned_bits: usize,
    /// `aligned_bits / k`, the number of whole common symbols (m^).
    pub common_symbols: usize,
}

pub fn split_depths(a: &BitString, b: &BitString, params: &Params) -> Result<SplitDepths> {
    if a.len() != b.len() {
        return Err(Error::UnequalLengths {
            a: a.len(),
            b: b.len(),
        });
    }
    let m = a.common_prefix_len(b);
    let k = params.k() as usize;
    let m_hat = m / k;
    Ok(SplitDepths {
        common_bits: m,
        aligned_bits: m_hat * k,
        common_symbols: m_hat,
    })
}

fn alphabet(k: u32) -> BigUint {
    BigUint::one() << k
}

/// Number of K-ary words of length at most `len`: (K^{len+1} − 1)/(K − 1).
fn words_up_to(len: usize, k: u32) -> BigUint {
    let big_k = alphabet(k);
    (big_k.pow(len as u32 + 1) - 1u32) / (alphabet(k) - 1u32)
}

/// The word at position `index` in length-lexicographic order (empty word at
/// index 0, then the K words of length 1 in symbol order, and so on).
pub fn enumerate_kstring(index: &BigUint, k: u32) -> KString {
    if index.is_zero() {
        return KString::empty();
    }
    let big_k = alphabet(k);
    let mut len = 0usize;
    let mut below = BigUint::zero(); // words of length < len+1 ... maintained as words_up_to(len)
    let mut count_at = BigUint::one(); // K^len
    loop {
        // words of length <= len is `below + count_at` with count_at = K^len
        let upto = &below + &count_at;
        if *index < upto {
            break;
        }
        below = upto;
        count_at *= &big_k;
        len += 1;
    }
    // index falls among words of length `len`; offset in symbol order:
    let mut value = index - &below;
    let mut symbols = vec![0u32; len];
    for pos in (0..len).rev() {
        let digit = (&value % &big_k).to_u32().expect("digit below 2^16");
        symbols[pos] = digit;
        value /= &big_k;
    }
    KString(symbols)
}

/// Position of `word` in length-lexicographic order. Inverse of
/// [`enumerate_kstring`].
pub fn kstring_index(word: &KString, k: u32) -> BigUint {
    if word.is_empty() {
        return BigUint::zero();
    }
    let big_k = alphabet(k);
    let below = words_up_to(word.len() - 1, k);
    let mut value = BigUint::zero();
    for &s in word.symbols() {
        value = value * &big_k + BigUint::from(s);
    }
    below + value
}
