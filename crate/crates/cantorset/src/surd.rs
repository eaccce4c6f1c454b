//! Exact arithmetic with rational powers of two.
//!
//! Energies and second moments are sums of terms c * 2^{e} with rational c
//! and rational e. With q the common denominator of the exponents, every
//! such value lives in Q(2^{1/q}) = Q[x]/(x^q - 2), which is a field
//! (x^q - 2 is irreducible over Q by Eisenstein at 2). A [`Surd`] stores the
//! coordinates over the basis {2^{i/q} : 0 <= i < q} as big rationals, so
//! addition, multiplication, and division are exact; floats appear only at
//! reporting boundaries.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rational::{format_rational, rational_to_f64};

/// Largest supported exponent denominator. Values are vectors of this
/// length, so the cap guards against absurd inputs like gamma = 1/1000003.
pub const MAX_SURD_BASE: u32 = 64;

#[derive(Debug, Clone)]
pub struct Surd {
    /// Denominator q of the exponents; coords has exactly q entries.
    base: u32,
    /// coords[i] is the coefficient of 2^{i/q}.
    coords: Vec<BigRational>,
}

impl Surd {
    pub fn zero() -> Self {
        Surd::from_rational(BigRational::zero())
    }

    pub fn one() -> Self {
        Surd::from_rational(BigRational::one())
    }

    pub fn from_rational(r: BigRational) -> Self {
        Surd {
            base: 1,
            coords: vec![r],
        }
    }

    pub fn from_int(n: i64) -> Self {
        Surd::from_rational(BigRational::from_integer(BigInt::from(n)))
    }

    /// Exact 2^exp for rational exp. Fails only when the reduced denominator
    /// of `exp` exceeds [`MAX_SURD_BASE`].
    pub fn two_pow(exp: &BigRational) -> Result<Self> {
        let q_big = exp.denom();
        let q = q_big.to_u32().filter(|&q| q <= MAX_SURD_BASE).ok_or_else(|| {
            Error::TooLarge(format!(
                "exponent denominator {} exceeds {}",
                q_big, MAX_SURD_BASE
            ))
        })?;
        let p = exp.numer();
        let q_int = BigInt::from(q);
        let floor = p.div_floor(&q_int);
        let rem = (p - &floor * &q_int)
            .to_u32()
            .expect("remainder below base");
        // 2^exp = 2^floor * 2^{rem/q}
        let scale = if floor.is_negative() {
            let e = (-&floor).to_u32().ok_or_else(|| {
                Error::TooLarge(format!("exponent {} out of range", format_rational(exp)))
            })?;
            BigRational::new(BigInt::one(), BigInt::from(2u32).pow(e))
        } else {
            let e = floor.to_u32().ok_or_else(|| {
                Error::TooLarge(format!("exponent {} out of range", format_rational(exp)))
            })?;
            BigRational::from_integer(BigInt::from(2u32).pow(e))
        };
        let mut coords = vec![BigRational::zero(); q as usize];
        coords[rem as usize] = scale;
        Ok(Surd { base: q, coords })
    }

    pub fn base(&self) -> u32 {
        self.base
    }

    pub fn is_zero(&self) -> bool {
        self.coords.iter().all(|c| c.is_zero())
    }

    /// The rational value when no genuine root of two is involved.
    pub fn as_rational(&self) -> Option<BigRational> {
        if self.coords[1..].iter().all(|c| c.is_zero()) {
            Some(self.coords[0].clone())
        } else {
            None
        }
    }

    pub fn to_f64(&self) -> f64 {
        let q = f64::from(self.base);
        self.coords
            .iter()
            .enumerate()
            .map(|(i, c)| rational_to_f64(c) * (i as f64 / q).exp2())
            .sum()
    }

    /// Re-express over a base that is a multiple of the current one.
    fn rebase(&self, new_base: u32) -> Surd {
        debug_assert_eq!(new_base % self.base, 0);
        if new_base == self.base {
            return self.clone();
        }
        let stride = (new_base / self.base) as usize;
        let mut coords = vec![BigRational::zero(); new_base as usize];
        for (i, c) in self.coords.iter().enumerate() {
            if !c.is_zero() {
                coords[i * stride] = c.clone();
            }
        }
        Surd {
            base: new_base,
            coords,
        }
    }

    fn aligned(&self, other: &Surd) -> (Surd, Surd) {
        let q = self.base.lcm(&other.base);
        (self.rebase(q), other.rebase(q))
    }

    pub fn add(&self, other: &Surd) -> Surd {
        let (mut a, b) = self.aligned(other);
        for (x, y) in a.coords.iter_mut().zip(b.coords.iter()) {
            *x += y;
        }
        a
    }

    pub fn sub(&self, other: &Surd) -> Surd {
        let (mut a, b) = self.aligned(other);
        for (x, y) in a.coords.iter_mut().zip(b.coords.iter()) {
            *x -= y;
        }
        a
    }

    pub fn neg(&self) -> Surd {
        Surd {
            base: self.base,
            coords: self.coords.iter().map(|c| -c).collect(),
        }
    }

    pub fn mul(&self, other: &Surd) -> Surd {
        let (a, b) = self.aligned(other);
        let q = a.base as usize;
        let two = BigRational::from_integer(BigInt::from(2));
        let mut coords = vec![BigRational::zero(); q];
        for (i, x) in a.coords.iter().enumerate() {
            if x.is_zero() {
                continue;
            }
            for (j, y) in b.coords.iter().enumerate() {
                if y.is_zero() {
                    continue;
                }
                let idx = i + j;
                let term = x * y;
                if idx < q {
                    coords[idx] += term;
                } else {
                    coords[idx - q] += term * &two;
                }
            }
        }
        Surd {
            base: a.base,
            coords,
        }
    }

    /// Scale by a rational without base juggling.
    pub fn scale(&self, r: &BigRational) -> Surd {
        Surd {
            base: self.base,
            coords: self.coords.iter().map(|c| c * r).collect(),
        }
    }

    /// Multiplicative inverse; `None` for zero. Uses the extended Euclidean
    /// algorithm on polynomials modulo x^q - 2.
    pub fn inverse(&self) -> Option<Surd> {
        if self.is_zero() {
            return None;
        }
        if let Some(r) = self.as_rational() {
            return Some(Surd {
                base: self.base,
                coords: {
                    let mut c = vec![BigRational::zero(); self.base as usize];
                    c[0] = BigRational::one() / r;
                    c
                },
            });
        }
        let q = self.base as usize;
        // modulus m(x) = x^q - 2
        let mut modulus = vec![BigRational::zero(); q + 1];
        modulus[0] = -BigRational::from_integer(BigInt::from(2));
        modulus[q] = BigRational::one();

        let mut r0 = modulus;
        let mut r1 = self.coords.clone();
        let mut s0: Vec<BigRational> = vec![];
        let mut s1 = vec![BigRational::one()];
        poly_trim(&mut r1);
        while poly_deg(&r1) > 0 {
            let (quot, rem) = poly_divmod(&r0, &r1);
            let s2 = poly_sub(&s0, &poly_mul(&quot, &s1));
            r0 = r1;
            r1 = rem;
            s0 = s1;
            s1 = s2;
            if r1.is_empty() {
                // gcd not constant: impossible for an irreducible modulus
                // unless the element were zero, which was excluded above.
                return None;
            }
        }
        let c = r1[0].clone();
        debug_assert!(!c.is_zero());
        let mut coords: Vec<BigRational> = s1.into_iter().map(|v| v / &c).collect();
        coords.resize(q, BigRational::zero());
        Some(Surd {
            base: self.base,
            coords,
        })
    }

    pub fn div(&self, other: &Surd) -> Option<Surd> {
        let (a, b) = self.aligned(other);
        Some(a.mul(&b.inverse()?))
    }

    /// Human-readable exact form: plain `p/q` when rational, otherwise a sum
    /// of `c*2^(i/q)` terms.
    pub fn exact_string(&self) -> String {
        if let Some(r) = self.as_rational() {
            return format_rational(&r);
        }
        let mut parts = Vec::new();
        for (i, c) in self.coords.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            if i == 0 {
                parts.push(format_rational(c));
            } else {
                parts.push(format!("{}*2^({}/{})", format_rational(c), i, self.base));
            }
        }
        parts.join(" + ")
    }
}

impl PartialEq for Surd {
    fn eq(&self, other: &Self) -> bool {
        let (a, b) = self.aligned(other);
        a.coords == b.coords
    }
}

impl Eq for Surd {}

impl fmt::Display for Surd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.exact_string())
    }
}

impl Serialize for Surd {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("Surd", 2)?;
        st.serialize_field("exact", &self.exact_string())?;
        st.serialize_field("decimal", &self.to_f64())?;
        st.end()
    }
}

fn poly_trim(p: &mut Vec<BigRational>) {
    while p.last().is_some_and(|c| c.is_zero()) {
        p.pop();
    }
}

fn poly_deg(p: &[BigRational]) -> usize {
    p.len().saturating_sub(1)
}

fn poly_sub(a: &[BigRational], b: &[BigRational]) -> Vec<BigRational> {
    let n = a.len().max(b.len());
    let mut out = vec![BigRational::zero(); n];
    for (i, c) in a.iter().enumerate() {
        out[i] += c;
    }
    for (i, c) in b.iter().enumerate() {
        out[i] -= c;
    }
    poly_trim(&mut out);
    out
}

fn poly_mul(a: &[BigRational], b: &[BigRational]) -> Vec<BigRational> {
    if a.is_empty() || b.is_empty() {
        return vec![];
    }
    let mut out = vec![BigRational::zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        if x.is_zero() {
            continue;
        }
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    poly_trim(&mut out);
    out
}

/// Division with remainder; `b` must be nonempty with nonzero lead.
fn poly_divmod(a: &[BigRational], b: &[BigRational]) -> (Vec<BigRational>, Vec<BigRational>) {
    let mut rem = a.to_vec();
    poly_trim(&mut rem);
    let db = poly_deg(b);
    let lead = b.last().expect("nonzero divisor").clone();
    if rem.len() < b.len() {
        return (vec![], rem);
    }
    let mut quot = vec![BigRational::zero(); rem.len() - b.len() + 1];
    while rem.len() >= b.len() && !rem.is_empty() {
        let da = poly_deg(&rem);
        let coef = rem.last().unwrap() / &lead;
        let shift = da - db;
        quot[shift] = coef.clone();
        for (j, c) in b.iter().enumerate() {
            let idx = shift + j;
            let delta = c * &coef;
            rem[idx] -= delta;
        }
        poly_trim(&mut rem);
    }
    poly_trim(&mut quot);
    (quot, rem)
}
