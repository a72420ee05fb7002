//! Arithmetic in GF(2^t) over a polynomial basis.
//!
//! Elements are stored as bitmasks of their coefficients (bit `m` is the
//! coefficient of `x^m`), so the F_2-linear isomorphism to bitvectors is the
//! identity on the stored bits. Degrees up to 63 fit in one machine word.

use std::fmt;

use thiserror::Error;

/// Largest supported extension degree.
pub const MAX_DEGREE: u32 = 63;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GfError {
    #[error("extension degree {0} outside 1..={MAX_DEGREE}")]
    Degree(u32),
    #[error("modulus {modulus:#x} does not have degree {t}")]
    ModulusDegree { modulus: u64, t: u32 },
    #[error("modulus {modulus:#x} is reducible: divisible by {factor:#x}")]
    Reducible { modulus: u64, factor: u64 },
    #[error("zero has no multiplicative inverse")]
    ZeroInverse,
    #[error("bitvector has length {got}, expected {expected}")]
    BitLength { got: usize, expected: usize },
    #[error("value {value:#x} is not an element of GF(2^{t})")]
    OutOfRange { value: u64, t: u32 },
}

/// Element of GF(2^t) in polynomial-basis coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct FieldElement(pub u64);

impl FieldElement {
    pub const ZERO: FieldElement = FieldElement(0);
    pub const ONE: FieldElement = FieldElement(1);

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#x}", self.0)
    }
}

fn degree(p: u64) -> u32 {
    63 - p.leading_zeros()
}

/// Carry-less product of two polynomials with degrees summing below 128.
fn clmul(a: u64, b: u64) -> u128 {
    let mut acc = 0u128;
    let mut a = a as u128;
    let mut b = b;
    while b != 0 {
        if b & 1 == 1 {
            acc ^= a;
        }
        a <<= 1;
        b >>= 1;
    }
    acc
}

/// Remainder of `a` modulo `m` (`m` nonzero) as polynomials over F_2.
fn poly_rem(mut a: u128, m: u64) -> u64 {
    let dm = degree(m);
    let m = m as u128;
    while a != 0 {
        let da = 127 - a.leading_zeros();
        if da < dm {
            break;
        }
        a ^= m << (da - dm);
    }
    a as u64
}

fn poly_divmod(mut a: u128, b: u128) -> (u128, u128) {
    let db = 127 - b.leading_zeros();
    let mut q = 0u128;
    while a != 0 {
        let da = 127 - a.leading_zeros();
        if da < db {
            break;
        }
        q |= 1 << (da - db);
        a ^= b << (da - db);
    }
    (q, a)
}

fn clmul128(a: u128, mut b: u128) -> u128 {
    let mut acc = 0u128;
    let mut a = a;
    while b != 0 && a != 0 {
        if b & 1 == 1 {
            acc ^= a;
        }
        a <<= 1;
        b >>= 1;
    }
    acc
}

fn poly_gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        let (_, r) = poly_divmod(a, b);
        a = b;
        b = r;
    }
    a
}

/// Smallest factor of degree exactly `deg` dividing `p`, by trial division.
fn factor_of_degree(p: u64, deg: u32) -> Option<u64> {
    ((1u64 << deg)..(1u64 << (deg + 1))).find(|&f| poly_rem(p as u128, f) == 0)
}

/// A nontrivial factor of `p` of degree at most `deg(p)/2`, if any.
///
/// Small degrees use plain trial division. Larger ones first locate the
/// smallest factor degree `i` through `gcd(x^(2^i) - x, p)` and only then
/// trial-divide, which keeps degree 63 tractable.
fn small_factor(p: u64) -> Option<u64> {
    let dp = degree(p);
    let half = dp / 2;
    if dp <= 24 {
        return (1..=half).find_map(|deg| factor_of_degree(p, deg));
    }
    let mut power = 2u64; // x^(2^i) mod p
    for i in 1..=half {
        power = poly_rem(clmul(power, power), p);
        let g = poly_gcd(p as u128, (power ^ 2) as u128) as u64;
        if g != 1 {
            if g != p {
                return Some(g);
            }
            return factor_of_degree(p, i);
        }
    }
    None
}

/// Parameters of GF(2^t): the degree and an irreducible modulus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FieldParams {
    t: u32,
    modulus: u64,
}

impl FieldParams {
    /// Builds the field. Without an explicit modulus the lexicographically
    /// smallest irreducible polynomial of degree `t` with nonzero constant
    /// term is used.
    pub fn new(t: u32, modulus: Option<u64>) -> Result<Self, GfError> {
        if t == 0 || t > MAX_DEGREE {
            return Err(GfError::Degree(t));
        }
        match modulus {
            Some(m) => {
                if m == 0 || degree(m) != t {
                    return Err(GfError::ModulusDegree { modulus: m, t });
                }
                if let Some(factor) = small_factor(m) {
                    return Err(GfError::Reducible { modulus: m, factor });
                }
                Ok(FieldParams { t, modulus: m })
            }
            None => {
                let lead = 1u64 << t;
                // odd candidates only: for t = 1 this picks x + 1 over x, and
                // for t >= 2 every irreducible has a constant term anyway
                let modulus = (0..lead)
                    .map(|low| lead | low)
                    .filter(|m| m & 1 == 1)
                    .find(|&m| small_factor(m).is_none())
                    .expect("an irreducible polynomial exists in every degree");
                Ok(FieldParams { t, modulus })
            }
        }
    }

    pub fn t(&self) -> u32 {
        self.t
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    /// Number of field elements, `2^t`.
    pub fn order(&self) -> u128 {
        1u128 << self.t
    }

    fn mask(&self) -> u64 {
        if self.t == 64 {
            u64::MAX
        } else {
            (1u64 << self.t) - 1
        }
    }

    pub fn element(&self, value: u64) -> Result<FieldElement, GfError> {
        if value & !self.mask() != 0 {
            return Err(GfError::OutOfRange { value, t: self.t });
        }
        Ok(FieldElement(value))
    }

    /// The class of `x`, a generator of the basis.
    pub fn x(&self) -> FieldElement {
        if self.t == 1 {
            // x = 1 modulo x + 1
            FieldElement(1)
        } else {
            FieldElement(2)
        }
    }

    pub fn add(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        FieldElement(a.0 ^ b.0)
    }

    pub fn mul(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        FieldElement(poly_rem(clmul(a.0, b.0), self.modulus))
    }

    pub fn inv(&self, a: FieldElement) -> Result<FieldElement, GfError> {
        if a.is_zero() {
            return Err(GfError::ZeroInverse);
        }
        // extended Euclid on (modulus, a), tracking the cofactor of a
        let (mut r0, mut r1) = (self.modulus as u128, a.0 as u128);
        let (mut s0, mut s1) = (0u128, 1u128);
        while r1 != 0 {
            let (q, r) = poly_divmod(r0, r1);
            r0 = r1;
            r1 = r;
            let next = s0 ^ clmul128(q, s1);
            s0 = s1;
            s1 = next;
        }
        let s = poly_rem(s0, self.modulus);
        debug_assert_eq!(self.mul(a, FieldElement(s)), FieldElement::ONE);
        Ok(FieldElement(s))
    }

    pub fn pow(&self, a: FieldElement, mut e: u64) -> FieldElement {
        let mut base = a;
        let mut acc = FieldElement::ONE;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }

    /// All elements in canonical order (by coefficient bitmask).
    pub fn elements(&self) -> impl Iterator<Item = FieldElement> {
        assert!(self.t <= 32, "enumeration of GF(2^{}) is not supported", self.t);
        (0..(1u64 << self.t)).map(FieldElement)
    }

    /// Coefficient bits of `a`, lowest degree first.
    pub fn pi(&self, a: FieldElement) -> Vec<u8> {
        (0..self.t).map(|m| ((a.0 >> m) & 1) as u8).collect()
    }

    pub fn pi_inv(&self, bits: &[u8]) -> Result<FieldElement, GfError> {
        if bits.len() != self.t as usize {
            return Err(GfError::BitLength {
                got: bits.len(),
                expected: self.t as usize,
            });
        }
        let mut v = 0u64;
        for (m, &b) in bits.iter().enumerate() {
            v |= ((b & 1) as u64) << m;
        }
        Ok(FieldElement(v))
    }

    /// Matrix of multiplication by `alpha` acting on coefficient vectors.
    pub fn mul_matrix(&self, alpha: FieldElement) -> MulMatrix {
        let t = self.t as usize;
        let mut rows = vec![0u64; t];
        for col in 0..t {
            let image = self.mul(alpha, FieldElement(1u64 << col));
            for (row, r) in rows.iter_mut().enumerate() {
                *r |= ((image.0 >> row) & 1) << col;
            }
        }
        MulMatrix { t: self.t, rows }
    }
}

/// A t×t matrix over F_2; row `i` is a bitmask over columns.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MulMatrix {
    t: u32,
    rows: Vec<u64>,
}

impl MulMatrix {
    pub fn rows(&self) -> &[u64] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> u64 {
        self.rows[i]
    }

    pub fn identity(t: u32) -> Self {
        MulMatrix {
            t,
            rows: (0..t).map(|i| 1u64 << i).collect(),
        }
    }

    /// Matrix-vector product over F_2 on a coefficient bitmask.
    pub fn apply(&self, v: u64) -> u64 {
        self.rows
            .iter()
            .enumerate()
            .fold(0u64, |acc, (i, r)| acc | (((r & v).count_ones() as u64 & 1) << i))
    }

    pub fn compose(&self, other: &MulMatrix) -> MulMatrix {
        // (AB) row i = sum over j of A[i][j] * (row j of B)
        let rows = self
            .rows
            .iter()
            .map(|&r| {
                (0..self.t as usize)
                    .filter(|&j| (r >> j) & 1 == 1)
                    .fold(0u64, |acc, j| acc ^ other.rows[j])
            })
            .collect();
        MulMatrix { t: self.t, rows }
    }

    pub fn rank(&self) -> usize {
        let mut rows = self.rows.clone();
        let mut rank = 0;
        for col in 0..self.t as usize {
            let Some(p) = (rank..rows.len()).find(|&r| (rows[r] >> col) & 1 == 1) else {
                continue;
            };
            rows.swap(rank, p);
            for r in 0..rows.len() {
                if r != rank && (rows[r] >> col) & 1 == 1 {
                    rows[r] ^= rows[rank];
                }
            }
            rank += 1;
        }
        rank
    }
}

/// Inner product over F_2 of two bitmasks.
pub fn dot2(a: u64, b: u64) -> u8 {
    ((a & b).count_ones() & 1) as u8
}
