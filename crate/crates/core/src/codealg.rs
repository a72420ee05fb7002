//! Linear algebra for linear codes over small finite fields.
//!
//! Scalars are `u32` values interpreted by a runtime [`Field`] descriptor:
//! residues for prime fields, coefficient bitmasks for GF(2^t). Every
//! [`Subspace`] is kept in reduced row-echelon form, so two subspaces are equal
//! exactly when their representations are.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use thiserror::Error;

use crate::gf::{FieldElement, FieldParams};

pub type Scalar = u32;

/// Largest field order handled here.
pub const MAX_FIELD_ORDER: u32 = 1 << 16;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodeError {
    #[error("unsupported field: {0}")]
    Field(String),
    #[error("length mismatch: got {got}, expected {expected}")]
    Length { got: usize, expected: usize },
    #[error("scalar {0} is not a field element")]
    Scalar(Scalar),
    #[error("generator matrix has rank {rank}, expected {k}")]
    Rank { rank: usize, k: usize },
    #[error("invalid dimensions k={k}, n={n}")]
    Dimensions { k: usize, n: usize },
    #[error("subspace containment violated")]
    Containment,
    #[error("constraint <0, b> = {0} has no solution")]
    Infeasible(Scalar),
    #[error("index {index} out of range 0..{bound}")]
    Index { index: usize, bound: usize },
    #[error("parse error: {0}")]
    Parse(String),
}

/// Runtime descriptor of a finite field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Field {
    /// Integers modulo a prime `p ≤ 251`.
    Prime(u32),
    /// GF(2^t), `t ≤ 16`.
    Binary(FieldParams),
}

fn is_prime(p: u32) -> bool {
    p >= 2 && (2..p).take_while(|d| d * d <= p).all(|d| p % d != 0)
}

impl Field {
    pub fn prime(p: u32) -> Result<Field, CodeError> {
        if !is_prime(p) || p > 251 {
            return Err(CodeError::Field(format!("F{p}: need a prime p <= 251")));
        }
        Ok(Field::Prime(p))
    }

    pub fn binary(t: u32) -> Result<Field, CodeError> {
        let params = FieldParams::new(t, None).map_err(|e| CodeError::Field(e.to_string()))?;
        Field::from_params(params)
    }

    pub fn from_params(params: FieldParams) -> Result<Field, CodeError> {
        if params.t() > 16 {
            return Err(CodeError::Field(format!("GF(2^{}) is too large", params.t())));
        }
        Ok(Field::Binary(params))
    }

    pub fn f2() -> Field {
        Field::Prime(2)
    }

    pub fn size(&self) -> u32 {
        match self {
            Field::Prime(p) => *p,
            Field::Binary(f) => 1 << f.t(),
        }
    }

    pub fn contains(&self, a: Scalar) -> bool {
        a < self.size()
    }

    pub fn add(&self, a: Scalar, b: Scalar) -> Scalar {
        match self {
            Field::Prime(p) => (a + b) % p,
            Field::Binary(_) => a ^ b,
        }
    }

    pub fn neg(&self, a: Scalar) -> Scalar {
        match self {
            Field::Prime(p) => (p - a) % p,
            Field::Binary(_) => a,
        }
    }

    pub fn sub(&self, a: Scalar, b: Scalar) -> Scalar {
        self.add(a, self.neg(b))
    }

    pub fn mul(&self, a: Scalar, b: Scalar) -> Scalar {
        match self {
            Field::Prime(p) => (a * b) % p,
            Field::Binary(f) => f.mul(FieldElement(a as u64), FieldElement(b as u64)).0 as Scalar,
        }
    }

    /// Multiplicative inverse; `None` for zero.
    pub fn inv(&self, a: Scalar) -> Option<Scalar> {
        if a == 0 {
            return None;
        }
        match self {
            Field::Prime(p) => {
                // a^(p-2) by square-and-multiply
                let (mut base, mut e, mut acc) = (a % p, p - 2, 1u32);
                while e > 0 {
                    if e & 1 == 1 {
                        acc = acc * base % p;
                    }
                    base = base * base % p;
                    e >>= 1;
                }
                Some(acc)
            }
            Field::Binary(f) => f.inv(FieldElement(a as u64)).ok().map(|x| x.0 as Scalar),
        }
    }

    pub fn div(&self, a: Scalar, b: Scalar) -> Option<Scalar> {
        self.inv(b).map(|ib| self.mul(a, ib))
    }

    pub fn elements(&self) -> std::ops::Range<Scalar> {
        0..self.size()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Scalar {
        rng.gen_range(0..self.size())
    }

    pub fn sample_nonzero<R: Rng + ?Sized>(&self, rng: &mut R) -> Scalar {
        rng.gen_range(1..self.size())
    }

    pub fn dot(&self, a: &[Scalar], b: &[Scalar]) -> Scalar {
        debug_assert_eq!(a.len(), b.len());
        a.iter()
            .zip(b)
            .fold(0, |acc, (&x, &y)| self.add(acc, self.mul(x, y)))
    }

    /// `y += c·x` in place.
    pub fn axpy(&self, y: &mut [Scalar], c: Scalar, x: &[Scalar]) {
        if c == 0 {
            return;
        }
        for (yi, &xi) in y.iter_mut().zip(x) {
            *yi = self.add(*yi, self.mul(c, xi));
        }
    }

    pub fn scale(&self, c: Scalar, x: &[Scalar]) -> Vec<Scalar> {
        x.iter().map(|&xi| self.mul(c, xi)).collect()
    }

    pub fn vec_add(&self, a: &[Scalar], b: &[Scalar]) -> Vec<Scalar> {
        a.iter().zip(b).map(|(&x, &y)| self.add(x, y)).collect()
    }

    pub fn vec_sub(&self, a: &[Scalar], b: &[Scalar]) -> Vec<Scalar> {
        a.iter().zip(b).map(|(&x, &y)| self.sub(x, y)).collect()
    }

    /// Number of vectors of length `len`, if it fits in a `u64`.
    pub fn count(&self, len: usize) -> Option<u64> {
        (self.size() as u64).checked_pow(len as u32)
    }

    pub fn random_vector<R: Rng + ?Sized>(&self, len: usize, rng: &mut R) -> Vec<Scalar> {
        (0..len).map(|_| self.sample(rng)).collect()
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Field::Prime(p) => write!(f, "F{p}"),
            Field::Binary(params) => write!(f, "GF2^{}/{:#x}", params.t(), params.modulus()),
        }
    }
}

impl FromStr for Field {
    type Err = CodeError;

    /// Accepts `F<p>`, `GF2^<t>` and `GF2^<t>/<hex modulus>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let bad = || CodeError::Parse(format!("bad field descriptor {s:?}"));
        if let Some(rest) = s.strip_prefix("GF2^") {
            let (t, modulus) = match rest.split_once('/') {
                Some((t, m)) => {
                    let m = m.trim_start_matches("0x");
                    (t, Some(u64::from_str_radix(m, 16).map_err(|_| bad())?))
                }
                None => (rest, None),
            };
            let t: u32 = t.parse().map_err(|_| bad())?;
            let params = FieldParams::new(t, modulus).map_err(|e| CodeError::Field(e.to_string()))?;
            Field::from_params(params)
        } else if let Some(p) = s.strip_prefix('F') {
            Field::prime(p.parse().map_err(|_| bad())?)
        } else {
            Err(bad())
        }
    }
}

/// Iterator over all vectors of a given length in lexicographic order.
pub struct VectorIter {
    q: Scalar,
    next: Option<Vec<Scalar>>,
}

impl Iterator for VectorIter {
    type Item = Vec<Scalar>;

    fn next(&mut self) -> Option<Vec<Scalar>> {
        let cur = self.next.take()?;
        let mut succ = cur.clone();
        let mut pos = succ.len();
        loop {
            if pos == 0 {
                break;
            }
            pos -= 1;
            succ[pos] += 1;
            if succ[pos] < self.q {
                self.next = Some(succ);
                break;
            }
            succ[pos] = 0;
        }
        Some(cur)
    }
}

/// All of `F^len`, first coordinate most significant.
pub fn all_vectors(field: &Field, len: usize) -> VectorIter {
    tuples(field.size(), len)
}

/// All tuples over `0..radix` of length `len`, lexicographically.
pub fn tuples(radix: Scalar, len: usize) -> VectorIter {
    VectorIter {
        q: radix,
        next: if radix == 0 && len > 0 { None } else { Some(vec![0; len]) },
    }
}

/// Reduced row-echelon form; returns the nonzero rows and their pivot columns.
pub fn rref(field: &Field, mut rows: Vec<Vec<Scalar>>, ncols: usize) -> (Vec<Vec<Scalar>>, Vec<usize>) {
    let mut pivots = Vec::new();
    let mut r = 0;
    for col in 0..ncols {
        let Some(p) = (r..rows.len()).find(|&i| rows[i][col] != 0) else {
            continue;
        };
        rows.swap(r, p);
        let inv = field.inv(rows[r][col]).expect("pivot is nonzero");
        rows[r] = field.scale(inv, &rows[r]);
        let pivot_row = rows[r].clone();
        for (i, row) in rows.iter_mut().enumerate() {
            if i != r && row[col] != 0 {
                let c = field.neg(row[col]);
                field.axpy(row, c, &pivot_row);
            }
        }
        pivots.push(col);
        r += 1;
        if r == rows.len() {
            break;
        }
    }
    rows.truncate(r);
    (rows, pivots)
}

pub fn rank(field: &Field, rows: &[Vec<Scalar>], ncols: usize) -> usize {
    rref(field, rows.to_vec(), ncols).1.len()
}

/// Basis of `{y : row·y = 0 for every row}`.
pub fn kernel(field: &Field, rows: &[Vec<Scalar>], ncols: usize) -> Vec<Vec<Scalar>> {
    let (red, pivots) = rref(field, rows.to_vec(), ncols);
    let mut is_pivot = vec![false; ncols];
    for &p in &pivots {
        is_pivot[p] = true;
    }
    (0..ncols)
        .filter(|&c| !is_pivot[c])
        .map(|free| {
            let mut y = vec![0; ncols];
            y[free] = 1;
            for (row, &p) in red.iter().zip(&pivots) {
                y[p] = field.neg(row[free]);
            }
            y
        })
        .collect()
}

/// Some solution of `row·x = rhs[row]` for every row, if the system is consistent.
pub fn solve(field: &Field, rows: &[Vec<Scalar>], rhs: &[Scalar], ncols: usize) -> Option<Vec<Scalar>> {
    let aug: Vec<Vec<Scalar>> = rows
        .iter()
        .zip(rhs)
        .map(|(r, &b)| {
            let mut a = r.clone();
            a.push(b);
            a
        })
        .collect();
    let (red, pivots) = rref(field, aug, ncols + 1);
    if pivots.last() == Some(&ncols) {
        return None;
    }
    let mut x = vec![0; ncols];
    for (row, &p) in red.iter().zip(&pivots) {
        x[p] = row[ncols];
    }
    Some(x)
}

/// A linear subspace of `F^ambient` in canonical echelon form.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Subspace {
    field: Field,
    ambient: usize,
    basis: Vec<Vec<Scalar>>,
    pivots: Vec<usize>,
}

impl Subspace {
    pub fn span(field: Field, ambient: usize, vectors: Vec<Vec<Scalar>>) -> Subspace {
        debug_assert!(vectors.iter().all(|v| v.len() == ambient));
        let (basis, pivots) = rref(&field, vectors, ambient);
        Subspace {
            field,
            ambient,
            basis,
            pivots,
        }
    }

    pub fn zero(field: Field, ambient: usize) -> Subspace {
        Subspace::span(field, ambient, Vec::new())
    }

    pub fn full(field: Field, ambient: usize) -> Subspace {
        let id = (0..ambient)
            .map(|i| (0..ambient).map(|j| (i == j) as Scalar).collect())
            .collect();
        Subspace::span(field, ambient, id)
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn ambient(&self) -> usize {
        self.ambient
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[Vec<Scalar>] {
        &self.basis
    }

    /// Remainder of `v` after elimination against the echelon basis.
    fn reduce(&self, v: &[Scalar]) -> Vec<Scalar> {
        let mut r = v.to_vec();
        for (row, &p) in self.basis.iter().zip(&self.pivots) {
            if r[p] != 0 {
                let c = self.field.neg(r[p]);
                self.field.axpy(&mut r, c, row);
            }
        }
        r
    }

    pub fn contains(&self, v: &[Scalar]) -> bool {
        v.len() == self.ambient && self.reduce(v).iter().all(|&x| x == 0)
    }

    pub fn is_subspace_of(&self, other: &Subspace) -> bool {
        self.ambient == other.ambient && self.basis.iter().all(|b| other.contains(b))
    }

    /// Orthogonal complement under the standard bilinear form.
    pub fn dual(&self) -> Subspace {
        Subspace::span(self.field, self.ambient, kernel(&self.field, &self.basis, self.ambient))
    }

    /// Elements whose support lies inside `support`, still in `F^ambient`.
    pub fn support_subcode(&self, support: &[usize]) -> Subspace {
        let mut inside = vec![false; self.ambient];
        for &j in support {
            inside[j] = true;
        }
        // coefficient vectors c with (Σ c_r basis_r)_j = 0 off the support
        let constraints: Vec<Vec<Scalar>> = (0..self.ambient)
            .filter(|&j| !inside[j])
            .map(|j| self.basis.iter().map(|b| b[j]).collect())
            .collect();
        let coeffs = kernel(&self.field, &constraints, self.dim());
        let vectors = coeffs
            .iter()
            .map(|c| self.combine(c))
            .collect();
        Subspace::span(self.field, self.ambient, vectors)
    }

    /// Projection onto the listed coordinates, in the listed order.
    pub fn restrict(&self, coords: &[usize]) -> Subspace {
        let vectors = self
            .basis
            .iter()
            .map(|b| coords.iter().map(|&j| b[j]).collect())
            .collect();
        Subspace::span(self.field, coords.len(), vectors)
    }

    /// Linear combination of the basis with the given coefficients.
    pub fn combine(&self, coeffs: &[Scalar]) -> Vec<Scalar> {
        let mut v = vec![0; self.ambient];
        for (b, &c) in self.basis.iter().zip(coeffs) {
            self.field.axpy(&mut v, c, b);
        }
        v
    }

    pub fn sum(&self, other: &Subspace) -> Subspace {
        let mut vs = self.basis.clone();
        vs.extend(other.basis.iter().cloned());
        Subspace::span(self.field, self.ambient, vs)
    }

    /// Every element, in the order of the coefficient enumeration.
    pub fn elements(&self) -> impl Iterator<Item = Vec<Scalar>> + '_ {
        all_vectors(&self.field, self.dim()).map(move |c| self.combine(&c))
    }
}

/// `dim(W) - dim(V)` after checking `V ⊆ W`.
pub fn quotient_dim(w: &Subspace, v: &Subspace) -> Result<usize, CodeError> {
    if !v.is_subspace_of(w) {
        return Err(CodeError::Containment);
    }
    Ok(w.dim() - v.dim())
}

/// An injective linear map `F^k → F^n` given by its generator rows.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LinearCode {
    field: Field,
    k: usize,
    rows: Vec<Vec<Scalar>>,
}

impl LinearCode {
    pub fn new(field: Field, k: usize, rows: Vec<Vec<Scalar>>) -> Result<LinearCode, CodeError> {
        let n = rows.len();
        if k == 0 || k > n {
            return Err(CodeError::Dimensions { k, n });
        }
        for row in &rows {
            if row.len() != k {
                return Err(CodeError::Length {
                    got: row.len(),
                    expected: k,
                });
            }
            if let Some(&bad) = row.iter().find(|&&x| !field.contains(x)) {
                return Err(CodeError::Scalar(bad));
            }
        }
        let r = rank(&field, &rows, k);
        if r != k {
            return Err(CodeError::Rank { rank: r, k });
        }
        Ok(LinearCode { field, k, rows })
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, j: usize) -> &[Scalar] {
        &self.rows[j]
    }

    pub fn rows(&self) -> &[Vec<Scalar>] {
        &self.rows
    }

    pub fn encode(&self, b: &[Scalar]) -> Result<Vec<Scalar>, CodeError> {
        if b.len() != self.k {
            return Err(CodeError::Length {
                got: b.len(),
                expected: self.k,
            });
        }
        Ok(self.encode_unchecked(b))
    }

    pub fn encode_unchecked(&self, b: &[Scalar]) -> Vec<Scalar> {
        self.rows.iter().map(|r| self.field.dot(r, b)).collect()
    }

    /// Symbols of `C(b)` at the listed coordinates.
    pub fn encode_at(&self, b: &[Scalar], coords: &[usize]) -> Vec<Scalar> {
        coords.iter().map(|&j| self.field.dot(&self.rows[j], b)).collect()
    }

    /// Coefficients `c` with `Σ c_j v_j = v` over the rows in `set`, if any.
    pub fn in_span(&self, v: &[Scalar], set: &[usize]) -> Option<Vec<Scalar>> {
        // one equation per message coordinate, one unknown per row in the set
        let eqs: Vec<Vec<Scalar>> = (0..self.k)
            .map(|l| set.iter().map(|&j| self.rows[j][l]).collect())
            .collect();
        let c = solve(&self.field, &eqs, v, set.len())?;
        let mut check = vec![0; self.k];
        for (&j, &cj) in set.iter().zip(&c) {
            self.field.axpy(&mut check, cj, &self.rows[j]);
        }
        assert_eq!(check, v, "in_span produced a wrong combination");
        Some(c)
    }

    /// `C|_S` as a subspace of `F^|S|`.
    pub fn restrict(&self, set: &[usize]) -> Subspace {
        let vectors = (0..self.k)
            .map(|l| set.iter().map(|&j| self.rows[j][l]).collect())
            .collect();
        Subspace::span(self.field, set.len(), vectors)
    }

    pub fn as_subspace(&self) -> Subspace {
        let all: Vec<usize> = (0..self.n()).collect();
        self.restrict(&all)
    }

    pub fn dual(&self) -> Subspace {
        self.as_subspace().dual()
    }

    pub fn message_count(&self) -> Option<u64> {
        self.field.count(self.k)
    }

    pub fn messages(&self) -> VectorIter {
        all_vectors(&self.field, self.k)
    }

    /// A particular solution and a kernel basis for `{b : <vstar, b> = sigma}`.
    pub fn hyperplane(
        &self,
        vstar: &[Scalar],
        sigma: Scalar,
    ) -> Result<(Vec<Scalar>, Vec<Vec<Scalar>>), CodeError> {
        if vstar.len() != self.k {
            return Err(CodeError::Length {
                got: vstar.len(),
                expected: self.k,
            });
        }
        let mut particular = vec![0; self.k];
        match vstar.iter().position(|&x| x != 0) {
            Some(p) => particular[p] = self.field.div(sigma, vstar[p]).expect("nonzero"),
            None if sigma != 0 => return Err(CodeError::Infeasible(sigma)),
            None => {}
        }
        let ker = kernel(&self.field, &[vstar.to_vec()], self.k);
        Ok((particular, ker))
    }

    /// Uniform message `b` on the affine hyperplane `<vstar, b> = sigma`.
    pub fn random_codeword_constrained<R: Rng + ?Sized>(
        &self,
        vstar: &[Scalar],
        sigma: Scalar,
        rng: &mut R,
    ) -> Result<Vec<Scalar>, CodeError> {
        let (mut b, ker) = self.hyperplane(vstar, sigma)?;
        for kv in &ker {
            let c = self.field.sample(rng);
            self.field.axpy(&mut b, c, kv);
        }
        Ok(b)
    }

    /// All messages on the affine hyperplane, in coefficient order.
    pub fn hyperplane_points(&self, vstar: &[Scalar], sigma: Scalar) -> Result<Vec<Vec<Scalar>>, CodeError> {
        let (p, ker) = self.hyperplane(vstar, sigma)?;
        Ok(all_vectors(&self.field, ker.len())
            .map(|c| {
                let mut b = p.clone();
                for (kv, &ci) in ker.iter().zip(&c) {
                    self.field.axpy(&mut b, ci, kv);
                }
                b
            })
            .collect())
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("field {}; k {}; n {}\n", self.field, self.k, self.n());
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|x| x.to_string()).collect();
            out.push_str(&cells.join(" "));
            out.push('\n');
        }
        out
    }

    /// Parses the text format; blank lines and `#` comments are skipped.
    pub fn from_text(text: &str) -> Result<LinearCode, CodeError> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines
            .next()
            .ok_or_else(|| CodeError::Parse("missing header".into()))?;
        let mut field = None;
        let mut k = None;
        let mut n = None;
        for part in header.split(';') {
            let part = part.trim();
            let (key, value) = part
                .split_once(' ')
                .ok_or_else(|| CodeError::Parse(format!("bad header item {part:?}")))?;
            let value = value.trim();
            let num = || {
                value
                    .parse::<usize>()
                    .map_err(|_| CodeError::Parse(format!("bad number {value:?}")))
            };
            match key {
                "field" => field = Some(value.parse::<Field>()?),
                "k" => k = Some(num()?),
                "n" => n = Some(num()?),
                other => return Err(CodeError::Parse(format!("unknown header key {other:?}"))),
            }
        }
        let (Some(field), Some(k), Some(n)) = (field, k, n) else {
            return Err(CodeError::Parse("header needs field, k and n".into()));
        };
        let rows = lines
            .map(|l| {
                l.split_whitespace()
                    .map(|x| {
                        x.parse::<Scalar>()
                            .map_err(|_| CodeError::Parse(format!("bad scalar {x:?}")))
                    })
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        if rows.len() != n {
            return Err(CodeError::Length {
                got: rows.len(),
                expected: n,
            });
        }
        LinearCode::new(field, k, rows)
    }

    /// Random full-rank code; rows are resampled until the rank is `k`.
    pub fn random<R: Rng + ?Sized>(field: Field, k: usize, n: usize, rng: &mut R) -> LinearCode {
        assert!(1 <= k && k <= n);
        loop {
            let rows = (0..n).map(|_| field.random_vector(k, rng)).collect();
            if let Ok(c) = LinearCode::new(field, k, rows) {
                return c;
            }
        }
    }
}

/// Unit vector `e_i` of length `len`.
pub fn unit(len: usize, i: usize) -> Vec<Scalar> {
    let mut v = vec![0; len];
    v[i] = 1;
    v
}

/// Hamming distance between equal-length words.
pub fn distance(a: &[Scalar], b: &[Scalar]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeSet;

    fn toy() -> LinearCode {
        LinearCode::new(Field::f2(), 2, vec![vec![1, 0], vec![0, 1], vec![1, 1]]).unwrap()
    }

    #[test]
    fn encode_examples() {
        let c = toy();
        assert_eq!(c.encode(&[0, 0]).unwrap(), vec![0, 0, 0]);
        assert_eq!(c.encode(&[1, 0]).unwrap(), vec![1, 0, 1]);
        assert_eq!(c.encode(&[1, 1]).unwrap(), vec![1, 1, 0]);
        assert!(c.encode(&[1]).is_err());
    }

    #[test]
    fn rejects_rank_deficient() {
        let err = LinearCode::new(Field::f2(), 2, vec![vec![1, 1], vec![1, 1]]).unwrap_err();
        assert_eq!(err, CodeError::Rank { rank: 1, k: 2 });
        assert!(LinearCode::new(Field::f2(), 3, vec![vec![1, 0, 0]]).is_err());
    }

    #[test]
    fn in_span_examples() {
        let c = toy();
        assert_eq!(c.in_span(&[1, 0], &[0]), Some(vec![1]));
        assert_eq!(c.in_span(&[1, 0], &[1, 2]), Some(vec![1, 1]));
        assert_eq!(c.in_span(&[1, 0], &[1]), None);
        assert_eq!(c.in_span(&[0, 0], &[]), Some(vec![]));
        assert_eq!(c.in_span(&[1, 0], &[]), None);
    }

    #[test]
    fn restrict_examples() {
        let c = toy();
        assert_eq!(c.restrict(&[0, 1]), Subspace::full(Field::f2(), 2));
        let all = c.restrict(&[0, 1, 2]);
        assert_eq!(all.dim(), 2);
        let elems: BTreeSet<_> = all.elements().collect();
        let expect: BTreeSet<_> = all_vectors(&Field::f2(), 3)
            .filter(|z| (z[0] + z[1] + z[2]) % 2 == 0)
            .collect();
        assert_eq!(elems, expect);
        assert_eq!(c.restrict(&[0]), Subspace::full(Field::f2(), 1));
    }

    #[test]
    fn dual_examples() {
        let c = toy();
        let d = c.dual();
        assert_eq!(d, Subspace::span(Field::f2(), 3, vec![vec![1, 1, 1]]));
        assert_eq!(d.support_subcode(&[0, 1]).dim(), 0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let vs = (0..4).map(|_| Field::f2().random_vector(8, &mut rng)).collect();
            let x = Subspace::span(Field::f2(), 8, vs);
            assert_eq!(x.dual().dual(), x);
            assert_eq!(x.dim() + x.dual().dim(), 8);
        }
    }

    #[test]
    fn quotient_examples() {
        let f = Field::f2();
        let w = Subspace::full(f, 2);
        assert_eq!(quotient_dim(&w, &w).unwrap(), 0);
        assert_eq!(quotient_dim(&w, &Subspace::zero(f, 2)).unwrap(), 2);
        let v = Subspace::span(f, 2, vec![vec![1, 0]]);
        assert_eq!(quotient_dim(&w, &v).unwrap(), 1);
        assert_eq!(quotient_dim(&v, &w), Err(CodeError::Containment));
    }

    #[test]
    fn constrained_sampling() {
        let c = toy();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut counts = [0u32; 2];
        for _ in 0..10_000 {
            let b = c.random_codeword_constrained(&[1, 0], 1, &mut rng).unwrap();
            assert_eq!(b[0], 1);
            counts[b[1] as usize] += 1;
        }
        // chi-square with one degree of freedom, 99.9% critical value 10.83
        let chi: f64 = counts
            .iter()
            .map(|&o| (o as f64 - 5000.0).powi(2) / 5000.0)
            .sum();
        assert!(chi < 10.83, "chi-square {chi}");
        for _ in 0..100 {
            assert_eq!(c.random_codeword_constrained(&[1, 0], 0, &mut rng).unwrap()[0], 0);
        }
        let pts: BTreeSet<_> = c.hyperplane_points(&[1, 1], 0).unwrap().into_iter().collect();
        assert_eq!(pts, BTreeSet::from([vec![0, 0], vec![1, 1]]));
        assert_eq!(
            c.random_codeword_constrained(&[0, 0], 1, &mut rng),
            Err(CodeError::Infeasible(1))
        );
    }

    #[test]
    fn text_round_trip() {
        let c = toy();
        let text = c.to_text();
        assert_eq!(text, "field F2; k 2; n 3\n1 0\n0 1\n1 1\n");
        assert_eq!(LinearCode::from_text(&text).unwrap(), c);
        let g = LinearCode::new(Field::binary(2).unwrap(), 1, vec![vec![3], vec![2]]).unwrap();
        assert_eq!(LinearCode::from_text(&g.to_text()).unwrap(), g);
        assert!(LinearCode::from_text("field F4; k 1; n 1\n1\n").is_err());
        assert!(LinearCode::from_text("field F2; k 1; n 2\n1\n").is_err());
    }

    #[test]
    fn prime_field_arithmetic() {
        let f = Field::prime(7).unwrap();
        for a in 1..7 {
            assert_eq!(f.mul(a, f.inv(a).unwrap()), 1);
        }
        assert_eq!(f.sub(2, 5), 4);
        assert!(Field::prime(9).is_err());
        assert!(Field::prime(257).is_err());
        assert!(Field::binary(17).is_err());
    }

    fn arb_code() -> impl Strategy<Value = LinearCode> {
        (prop_oneof![Just(2u32), Just(3), Just(4)], 1usize..=3, 0usize..=3, any::<u64>()).prop_map(
            |(q, k, extra, seed)| {
                let field = if q == 4 {
                    Field::binary(2).unwrap()
                } else {
                    Field::prime(q).unwrap()
                };
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                LinearCode::random(field, k, k + extra, &mut rng)
            },
        )
    }

    fn subsets(n: usize) -> impl Iterator<Item = Vec<usize>> {
        (0u32..(1 << n)).map(move |m| (0..n).filter(|&j| (m >> j) & 1 == 1).collect())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn restrict_matches_enumeration(code in arb_code()) {
            for s in subsets(code.n()) {
                let sub = code.restrict(&s);
                let by_enum: BTreeSet<_> = code.messages().map(|b| code.encode_at(&b, &s)).collect();
                let from_space: BTreeSet<_> = sub.elements().collect();
                prop_assert_eq!(by_enum, from_space);
            }
        }

        #[test]
        fn restriction_dual_is_support_subcode(code in arb_code()) {
            let dual = code.dual();
            for s in subsets(code.n()) {
                let lhs = code.restrict(&s).dual();
                let rhs = dual.support_subcode(&s).restrict(&s);
                prop_assert_eq!(lhs, rhs);
            }
        }

        #[test]
        fn independent_rows_leave_target_free(code in arb_code(), target in 0usize..3) {
            let target = target % code.k();
            let v = unit(code.k(), target);
            let field = *code.field();
            for s in subsets(code.n()) {
                if code.in_span(&v, &s).is_some() {
                    continue;
                }
                for base in code.messages() {
                    let view = code.encode_at(&base, &s);
                    let reached: BTreeSet<Scalar> = code
                        .messages()
                        .filter(|b| code.encode_at(b, &s) == view)
                        .map(|b| field.dot(&v, &b))
                        .collect();
                    prop_assert_eq!(reached.len() as u32, field.size());
                }
            }
        }
    }
}
