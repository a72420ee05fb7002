//! Line code over GF(2^t)^n.
//!
//! A message is a polynomial `f` of total degree at most `d` in `n`
//! variables. For every affine line `L` the codeword carries the Hadamard
//! encoding of `f` evaluated on `d + 1` fixed points of `L`. Because the
//! restriction of `f` to a line is a univariate polynomial of degree at most
//! `d`, any single value `π(α f(z))_i` with `z ∈ L` is one linear form on
//! that block, which is what both decoders exploit.
//!
//! Points are packed into a `u64`, coordinate `x_1` in the most significant
//! `t` bits. A block is stored as the mask `w_L` of its linear function, so
//! bit `v` of the block is `parity(v & w_L)`; corruptions are kept sparse.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::gf::{dot2, FieldElement, FieldParams, GfError};
use crate::report::{prob, trial_rng, Estimate, Prob};

/// Cap on the number of lines we are willing to enumerate.
pub const MAX_LINES: u128 = 1 << 20;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LineCodeError {
    #[error("degree {d} needs d < 2^t with t = {t}")]
    Degree { t: u32, d: u32 },
    #[error("parameters too large: {0}")]
    TooLarge(String),
    #[error("point {point:#x} is not on line {line}")]
    OffLine { point: u64, line: usize },
    #[error("point {0:#x} outside the ambient space")]
    Point(u64),
    #[error("index {got} out of range (limit {limit})")]
    Index { got: usize, limit: usize },
    #[error("length {got}, expected {expected}")]
    Length { got: usize, expected: usize },
    #[error("query reuse needs at least one consistency round")]
    Reuse,
    #[error("decoder made {got} line queries, budget is {budget}")]
    Budget { got: usize, budget: usize },
    #[error("malformed word: {0}")]
    Format(String),
    #[error(transparent)]
    Gf(#[from] GfError),
}

/// An affine line `{base + λ·dir}`; `dir` has leading coordinate 1 and
/// `base` is the least point of the line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Line {
    pub base: u64,
    pub dir: u64,
}

#[derive(Debug, Clone)]
pub struct LineCodeParams {
    t: u32,
    n: u32,
    d: u32,
    field: FieldParams,
    lines: Vec<Line>,
    index: HashMap<Line, usize>,
    through: Vec<Vec<usize>>,
    monomials: Vec<Vec<u32>>,
}

/// Builds the code parameters and the canonical line enumeration.
pub fn mk_params(t: u32, n: u32, d: u32) -> Result<LineCodeParams, LineCodeError> {
    if t == 0 || n == 0 {
        return Err(LineCodeError::TooLarge("t and n must be positive".into()));
    }
    if t >= 32 || d as u64 >= 1u64 << t {
        return Err(LineCodeError::Degree { t, d });
    }
    if t as u64 * n as u64 > 63 {
        return Err(LineCodeError::TooLarge(format!("t·n = {} exceeds 63", t * n)));
    }
    if t as u64 * (d as u64 + 1) > 63 {
        return Err(LineCodeError::TooLarge(format!("block index needs {} bits", t * (d + 1))));
    }
    let count = line_count(t, n);
    if count > MAX_LINES {
        return Err(LineCodeError::TooLarge(format!("{count} lines")));
    }
    let field = FieldParams::new(t, None)?;
    let mut params = LineCodeParams {
        t,
        n,
        d,
        field,
        lines: Vec::new(),
        index: HashMap::new(),
        through: vec![Vec::new(); 1usize << (t * n)],
        monomials: monomials(n, d),
    };
    params.enumerate_lines();
    debug_assert_eq!(params.lines.len() as u128, count);
    Ok(params)
}

/// `2^{tn}(2^{tn} − 1) / (2^t(2^t − 1))`.
pub fn line_count(t: u32, n: u32) -> u128 {
    let q = 1u128 << t;
    let space = 1u128 << (t * n);
    space * (space - 1) / (q * (q - 1))
}

/// All exponent vectors of total degree at most `d`, ordered by degree and
/// then lexicographically.
fn monomials(n: u32, d: u32) -> Vec<Vec<u32>> {
    fn rec(n: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        for e in 0..=left {
            cur.push(e);
            rec(n, left - e, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(n as usize, d, &mut Vec::new(), &mut out);
    out.sort_by(|a, b| (a.iter().sum::<u32>(), a).cmp(&(b.iter().sum::<u32>(), b)));
    out
}

impl LineCodeParams {
    pub fn t(&self) -> u32 {
        self.t
    }
    pub fn n(&self) -> u32 {
        self.n
    }
    pub fn d(&self) -> u32 {
        self.d
    }
    pub fn field(&self) -> &FieldParams {
        &self.field
    }
    pub fn lines(&self) -> &[Line] {
        &self.lines
    }
    pub fn line(&self, idx: usize) -> Line {
        self.lines[idx]
    }
    pub fn line_index(&self, line: &Line) -> Option<usize> {
        self.index.get(line).copied()
    }
    /// Indices of the lines through `p`.
    pub fn lines_through(&self, p: u64) -> &[usize] {
        &self.through[p as usize]
    }
    pub fn monomials(&self) -> &[Vec<u32>] {
        &self.monomials
    }
    pub fn point_count(&self) -> u64 {
        1u64 << (self.t * self.n)
    }
    pub fn field_size(&self) -> u64 {
        1u64 << self.t
    }
    /// Bits of the index `v` into one block, `t(d+1)`.
    pub fn block_bits(&self) -> u32 {
        self.t * (self.d + 1)
    }
    pub fn block_len(&self) -> u64 {
        1u64 << self.block_bits()
    }
    /// Total codeword length in bits.
    pub fn length(&self) -> u128 {
        self.lines.len() as u128 * self.block_len() as u128
    }
    pub fn message_bits(&self) -> usize {
        self.t as usize * self.monomials.len()
    }

    fn mask(&self) -> u64 {
        (1u64 << self.t) - 1
    }

    pub fn coord(&self, p: u64, i: u32) -> FieldElement {
        FieldElement((p >> (self.t * (self.n - 1 - i))) & self.mask())
    }

    pub fn point(&self, coords: &[FieldElement]) -> u64 {
        coords.iter().fold(0u64, |acc, c| (acc << self.t) | c.0)
    }

    fn check_point(&self, p: u64) -> Result<(), LineCodeError> {
        if p >= self.point_count() {
            return Err(LineCodeError::Point(p));
        }
        Ok(())
    }

    /// Coordinatewise `λ·p`.
    pub fn scale(&self, lambda: FieldElement, p: u64) -> u64 {
        let coords: Vec<FieldElement> = (0..self.n)
            .map(|i| self.field.mul(lambda, self.coord(p, i)))
            .collect();
        self.point(&coords)
    }

    fn leading(&self, p: u64) -> Option<FieldElement> {
        (0..self.n).map(|i| self.coord(p, i)).find(|c| !c.is_zero())
    }

    /// Canonical line through `a` in direction `dir`.
    pub fn canonical_line(&self, a: u64, dir: u64) -> Result<Line, LineCodeError> {
        self.check_point(a)?;
        self.check_point(dir)?;
        let lead = self.leading(dir).ok_or(LineCodeError::Point(dir))?;
        let dir = self.scale(self.field.inv(lead)?, dir);
        let base = self
            .field
            .elements()
            .map(|l| a ^ self.scale(l, dir))
            .min()
            .expect("field is nonempty");
        Ok(Line { base, dir })
    }

    /// The point `base + λ·dir`.
    pub fn point_on(&self, line: &Line, lambda: FieldElement) -> u64 {
        line.base ^ self.scale(lambda, line.dir)
    }

    pub fn points(&self, line: &Line) -> Vec<u64> {
        self.field.elements().map(|l| self.point_on(line, l)).collect()
    }

    /// Parameter `μ` with `z = base + μ·dir`, if `z` lies on the line.
    pub fn param_of(&self, line: &Line, z: u64) -> Option<FieldElement> {
        let diff = z ^ line.base;
        let c = (0..self.n).find(|&i| !self.coord(line.dir, i).is_zero())?;
        let mu = self.coord(diff, c);
        (self.scale(mu, line.dir) == diff).then_some(mu)
    }

    pub fn contains(&self, line: &Line, z: u64) -> bool {
        z < self.point_count() && self.param_of(line, z).is_some()
    }

    /// The ordered interpolation set: parameters 0, 1, ..., d in the
    /// canonical field order.
    pub fn sl(&self, line: &Line) -> Vec<u64> {
        (0..=self.d as u64)
            .map(|j| self.point_on(line, FieldElement(j)))
            .collect()
    }

    fn enumerate_lines(&mut self) {
        let space = self.point_count();
        for dir in 1..space {
            if self.leading(dir) != Some(FieldElement::ONE) {
                continue;
            }
            let mut seen = vec![false; space as usize];
            for a in 0..space {
                if seen[a as usize] {
                    continue;
                }
                // a is the least unseen point, hence least on its line
                let line = Line { base: a, dir };
                let idx = self.lines.len();
                for p in self.points(&line) {
                    seen[p as usize] = true;
                    self.through[p as usize].push(idx);
                }
                self.index.insert(line, idx);
                self.lines.push(line);
            }
        }
    }

    /// Lagrange weights expressing the value at parameter `mu` through the
    /// values at parameters 0..=d.
    fn lagrange(&self, mu: FieldElement) -> Vec<FieldElement> {
        let f = &self.field;
        let nodes: Vec<FieldElement> = (0..=self.d as u64).map(FieldElement).collect();
        nodes
            .iter()
            .map(|&xj| {
                nodes.iter().filter(|&&xm| xm != xj).fold(FieldElement::ONE, |acc, &xm| {
                    let num = f.add(mu, xm);
                    let den = f.inv(f.add(xj, xm)).expect("nodes are distinct");
                    f.mul(acc, f.mul(num, den))
                })
            })
            .collect()
    }
}

/// Polynomial in the monomial basis of the parameters.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Poly {
    pub coeffs: Vec<FieldElement>,
}

impl Poly {
    pub fn zero(params: &LineCodeParams) -> Self {
        Poly { coeffs: vec![FieldElement::ZERO; params.monomials.len()] }
    }

    pub fn constant(params: &LineCodeParams, c: FieldElement) -> Self {
        let mut p = Self::zero(params);
        p.coeffs[0] = c;
        p
    }

    pub fn random<R: Rng + ?Sized>(params: &LineCodeParams, rng: &mut R) -> Self {
        let q = params.field_size();
        Poly { coeffs: (0..params.monomials.len()).map(|_| FieldElement(rng.gen_range(0..q))).collect() }
    }

    /// The `idx`-th polynomial in the order of coefficient tuples, first
    /// coefficient most significant.
    pub fn nth(params: &LineCodeParams, mut idx: u64) -> Self {
        let q = params.field_size();
        let mut coeffs = vec![FieldElement::ZERO; params.monomials.len()];
        for c in coeffs.iter_mut().rev() {
            *c = FieldElement(idx % q);
            idx /= q;
        }
        Poly { coeffs }
    }

    /// Number of polynomials, if it fits in a u64.
    pub fn count(params: &LineCodeParams) -> Option<u64> {
        params.field_size().checked_pow(params.monomials.len() as u32)
    }

    pub fn add(&self, other: &Poly) -> Poly {
        Poly { coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| FieldElement(a.0 ^ b.0)).collect() }
    }

    pub fn scale(&self, params: &LineCodeParams, c: FieldElement) -> Poly {
        Poly { coeffs: self.coeffs.iter().map(|&a| params.field.mul(a, c)).collect() }
    }

    pub fn eval(&self, params: &LineCodeParams, p: u64) -> FieldElement {
        let f = &params.field;
        let pows: Vec<Vec<FieldElement>> = (0..params.n)
            .map(|i| {
                let x = params.coord(p, i);
                let mut row = vec![FieldElement::ONE];
                for e in 1..=params.d {
                    row.push(f.mul(row[e as usize - 1], x));
                }
                row
            })
            .collect();
        params
            .monomials
            .iter()
            .zip(&self.coeffs)
            .filter(|(_, c)| !c.is_zero())
            .fold(FieldElement::ZERO, |acc, (mono, &c)| {
                let term = mono
                    .iter()
                    .enumerate()
                    .fold(c, |t, (i, &e)| f.mul(t, pows[i][e as usize]));
                f.add(acc, term)
            })
    }

    /// Product of two polynomials whose degrees sum to at most `d`.
    pub fn mul(&self, params: &LineCodeParams, other: &Poly) -> Option<Poly> {
        let pos: HashMap<&Vec<u32>, usize> = params.monomials.iter().enumerate().map(|(i, m)| (m, i)).collect();
        let mut out = Poly::zero(params);
        for (ma, a) in params.monomials.iter().zip(&self.coeffs) {
            if a.is_zero() {
                continue;
            }
            for (mb, b) in params.monomials.iter().zip(&other.coeffs) {
                if b.is_zero() {
                    continue;
                }
                let m: Vec<u32> = ma.iter().zip(mb).map(|(x, y)| x + y).collect();
                let idx = *pos.get(&m)?;
                out.coeffs[idx] = params.field.add(out.coeffs[idx], params.field.mul(*a, *b));
            }
        }
        Some(out)
    }

    pub fn json(&self) -> Value {
        json!(self.coeffs.iter().map(|c| c.0).collect::<Vec<_>>())
    }

    pub fn degree(&self, params: &LineCodeParams) -> Option<u32> {
        params
            .monomials
            .iter()
            .zip(&self.coeffs)
            .filter(|(_, c)| !c.is_zero())
            .map(|(m, _)| m.iter().sum())
            .max()
    }
}

/// A (possibly corrupted) codeword. Uncorrupted block `L` is the linear
/// function with mask `blocks[L]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineCodeword {
    pub t: u32,
    pub n: u32,
    pub d: u32,
    pub blocks: Vec<u64>,
    pub flips: BTreeSet<(usize, u64)>,
    pub erased: BTreeSet<usize>,
}

/// Mask of the Hadamard block for the field tuple `vals`.
pub fn block_mask(params: &LineCodeParams, vals: &[FieldElement]) -> u64 {
    vals.iter().enumerate().fold(0u64, |acc, (j, v)| acc | (v.0 << (params.t * j as u32)))
}

pub fn encode(params: &LineCodeParams, f: &Poly) -> LineCodeword {
    let blocks = params
        .lines
        .iter()
        .map(|l| {
            let vals: Vec<FieldElement> = params.sl(l).into_iter().map(|z| f.eval(params, z)).collect();
            block_mask(params, &vals)
        })
        .collect();
    LineCodeword {
        t: params.t,
        n: params.n,
        d: params.d,
        blocks,
        flips: BTreeSet::new(),
        erased: BTreeSet::new(),
    }
}

/// Reads blocks of `t` bits as the monomial coefficients, in order.
pub fn message_poly(params: &LineCodeParams, bits: &[u8]) -> Result<Poly, LineCodeError> {
    if bits.len() != params.message_bits() {
        return Err(LineCodeError::Length { got: bits.len(), expected: params.message_bits() });
    }
    let coeffs = bits
        .chunks(params.t as usize)
        .map(|c| params.field.pi_inv(c))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Poly { coeffs })
}

pub fn encode_message(params: &LineCodeParams, bits: &[u8]) -> Result<LineCodeword, LineCodeError> {
    Ok(encode(params, &message_poly(params, bits)?))
}

impl LineCodeword {
    /// Bit `v` of block `line`; `None` for an erased block.
    pub fn symbol(&self, line: usize, v: u64) -> Option<u8> {
        if self.erased.contains(&line) {
            return None;
        }
        Some(dot2(v, self.blocks[line]) ^ self.flips.contains(&(line, v)) as u8)
    }

    /// Bit read by a decoder; erased symbols read as 0.
    pub fn bit(&self, line: usize, v: u64) -> u8 {
        self.symbol(line, v).unwrap_or(0)
    }

    pub fn flip(&mut self, line: usize, v: u64) {
        if !self.flips.remove(&(line, v)) {
            self.flips.insert((line, v));
        }
    }

    /// Replaces block `line` with the linear function of mask `w`, dropping
    /// flips inside it.
    pub fn overwrite(&mut self, line: usize, w: u64) {
        self.blocks[line] = w;
        self.flips.retain(|&(l, _)| l != line);
    }

    pub fn xor(&self, other: &LineCodeword) -> LineCodeword {
        let mut out = self.clone();
        for (a, b) in out.blocks.iter_mut().zip(&other.blocks) {
            *a ^= b;
        }
        for &f in &other.flips {
            out.flip(f.0, f.1);
        }
        out
    }

    /// Hamming distance between the bit strings, counting erased blocks as
    /// differing wherever the other word is nonzero.
    pub fn distance(&self, params: &LineCodeParams, other: &LineCodeword) -> u128 {
        let len = params.block_len();
        (0..self.blocks.len())
            .map(|l| {
                let same_lin = self.blocks[l] == other.blocks[l] && !self.erased.contains(&l) && !other.erased.contains(&l);
                if same_lin {
                    let a: BTreeSet<u64> = self.flips.range((l, 0)..=(l, u64::MAX)).map(|x| x.1).collect();
                    let b: BTreeSet<u64> = other.flips.range((l, 0)..=(l, u64::MAX)).map(|x| x.1).collect();
                    a.symmetric_difference(&b).count() as u128
                } else {
                    (0..len).filter(|&v| self.bit(l, v) != other.bit(l, v)).count() as u128
                }
            })
            .sum()
    }

    /// JSON form: header, block masks, sparse corruptions, and optionally
    /// every bit of every block as a hex string.
    pub fn to_json(&self, params: &LineCodeParams, dense: bool) -> Value {
        let mut v = json!({
            "t": self.t,
            "n": self.n,
            "d": self.d,
            "blocks": self.blocks.iter().map(|b| format!("{b:x}")).collect::<Vec<_>>(),
            "flips": self.flips.iter().map(|(l, v)| json!([l, v])).collect::<Vec<_>>(),
            "erased": self.erased.iter().collect::<Vec<_>>(),
        });
        if dense {
            v["dense"] = Value::String(self.dense_hex(params));
        }
        v
    }

    fn dense_hex(&self, params: &LineCodeParams) -> String {
        let len = params.block_len();
        let mut bits = Vec::with_capacity(params.length() as usize);
        for l in 0..self.blocks.len() {
            for v in 0..len {
                bits.push(self.bit(l, v));
            }
        }
        bits.chunks(4)
            .map(|c| {
                let nib = c.iter().enumerate().fold(0u8, |a, (i, &b)| a | (b << (3 - i)));
                char::from_digit(nib as u32, 16).expect("nibble")
            })
            .collect()
    }

    pub fn from_json(params: &LineCodeParams, v: &Value) -> Result<Self, LineCodeError> {
        #[derive(Deserialize)]
        struct Raw {
            t: u32,
            n: u32,
            d: u32,
            blocks: Vec<String>,
            flips: Vec<(usize, u64)>,
            erased: Vec<usize>,
            dense: Option<String>,
        }
        let raw: Raw = serde_json::from_value(v.clone()).map_err(|e| LineCodeError::Format(e.to_string()))?;
        if (raw.t, raw.n, raw.d) != (params.t, params.n, params.d) {
            return Err(LineCodeError::Format("header does not match parameters".into()));
        }
        if raw.blocks.len() != params.lines.len() {
            return Err(LineCodeError::Length { got: raw.blocks.len(), expected: params.lines.len() });
        }
        let blocks = raw
            .blocks
            .iter()
            .map(|s| u64::from_str_radix(s, 16).map_err(|e| LineCodeError::Format(e.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        let limit = params.block_len();
        if blocks.iter().any(|&b| b >= limit) || raw.flips.iter().any(|&(l, v)| l >= blocks.len() || v >= limit) {
            return Err(LineCodeError::Format("entry out of range".into()));
        }
        if raw.erased.iter().any(|&l| l >= blocks.len()) {
            return Err(LineCodeError::Format("erased line out of range".into()));
        }
        let word = LineCodeword {
            t: raw.t,
            n: raw.n,
            d: raw.d,
            blocks,
            flips: raw.flips.into_iter().collect(),
            erased: raw.erased.into_iter().collect(),
        };
        if let Some(dense) = raw.dense {
            if dense != word.dense_hex(params) {
                return Err(LineCodeError::Format("dense dump disagrees with blocks".into()));
            }
        }
        Ok(word)
    }
}

/// `v^{L,z,α,i}`: the block index whose bit is `π(α f(z))_i` on an
/// uncorrupted block.
pub fn interp_vector(
    params: &LineCodeParams,
    line: usize,
    z: u64,
    alpha: FieldElement,
    i: usize,
) -> Result<u64, LineCodeError> {
    if i >= params.t as usize {
        return Err(LineCodeError::Index { got: i, limit: params.t as usize });
    }
    let l = params.lines.get(line).ok_or(LineCodeError::Index { got: line, limit: params.lines.len() })?;
    let mu = params.param_of(l, z).filter(|_| z < params.point_count()).ok_or(LineCodeError::OffLine { point: z, line })?;
    let weights = params.lagrange(mu);
    Ok(weights.iter().enumerate().fold(0u64, |acc, (j, &w)| {
        let row = params.field.mul_matrix(params.field.mul(alpha, w)).row(i);
        acc | (row << (params.t * j as u32))
    }))
}

/// Query-counting access to a word.
pub struct Reader<'a> {
    word: &'a LineCodeword,
    queries: usize,
}

impl<'a> Reader<'a> {
    pub fn new(word: &'a LineCodeword) -> Self {
        Reader { word, queries: 0 }
    }

    pub fn queries(&self) -> usize {
        self.queries
    }

    pub fn read(&mut self, line: usize, v: u64) -> u8 {
        self.queries += 1;
        self.word.bit(line, v)
    }

    /// One linearity round on block `line` (three queries).
    pub fn blr_test<R: Rng + ?Sized>(&mut self, params: &LineCodeParams, line: usize, rng: &mut R) -> bool {
        let v1 = rng.gen_range(0..params.block_len());
        let v2 = rng.gen_range(0..params.block_len());
        self.read(line, v1) ^ self.read(line, v2) ^ self.read(line, v1 ^ v2) == 0
    }

    /// `G(v + r) + G(r)` at a fresh `r` (two queries).
    pub fn self_correct<R: Rng + ?Sized>(&mut self, params: &LineCodeParams, line: usize, v: u64, rng: &mut R) -> u8 {
        let r = rng.gen_range(0..params.block_len());
        self.self_correct_with(line, v, r).0
    }

    /// Self-correction with a given shift; also returns `G(r)`.
    fn self_correct_with(&mut self, line: usize, v: u64, r: u64) -> (u8, u8) {
        let gr = self.read(line, r);
        (self.read(line, v ^ r) ^ gr, gr)
    }
}

/// Rounds of the point decoder. With `reuse` the final read borrows the
/// shift of the first consistency round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodeConfig {
    pub r1: usize,
    pub r2: usize,
    pub reuse: bool,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig { r1: 2, r2: 2, reuse: true }
    }
}

impl DecodeConfig {
    pub fn queries(&self) -> usize {
        3 * self.r1 + 4 * self.r2 + if self.reuse { 1 } else { 2 }
    }

    fn check(&self) -> Result<(), LineCodeError> {
        if self.reuse && self.r2 == 0 {
            return Err(LineCodeError::Reuse);
        }
        Ok(())
    }
}

/// Rounds of the block-bit decoder; `inner` configures the point decoder it
/// calls in each consistency round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrectConfig {
    pub r1: usize,
    pub r2: usize,
    pub inner: DecodeConfig,
}

impl Default for CorrectConfig {
    fn default() -> Self {
        CorrectConfig { r1: 2, r2: 2, inner: DecodeConfig::default() }
    }
}

impl CorrectConfig {
    pub fn queries(&self) -> usize {
        3 * self.r1 + (2 + self.inner.queries()) * self.r2 + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecodeOutcome {
    /// `None` is ⊥.
    pub output: Option<u8>,
    pub queries: usize,
    /// The line the decoder committed to.
    pub line: usize,
}

fn check_target(params: &LineCodeParams, x: u64, i: usize) -> Result<(), LineCodeError> {
    params.check_point(x)?;
    if i >= params.t as usize {
        return Err(LineCodeError::Index { got: i, limit: params.t as usize });
    }
    Ok(())
}

/// Decodes `π(α* f(x*))_{i*}`, or ⊥.
pub fn rldc_decode<R: Rng + ?Sized>(
    params: &LineCodeParams,
    word: &LineCodeword,
    x: u64,
    alpha: FieldElement,
    i: usize,
    cfg: DecodeConfig,
    rng: &mut R,
) -> Result<DecodeOutcome, LineCodeError> {
    check_target(params, x, i)?;
    let through = params.lines_through(x);
    let line = through[rng.gen_range(0..through.len())];
    rldc_decode_on(params, word, line, x, alpha, i, cfg, rng)
}

/// As [`rldc_decode`] with the starting line fixed.
#[allow(clippy::too_many_arguments)]
pub fn rldc_decode_on<R: Rng + ?Sized>(
    params: &LineCodeParams,
    word: &LineCodeword,
    line: usize,
    x: u64,
    alpha: FieldElement,
    i: usize,
    cfg: DecodeConfig,
    rng: &mut R,
) -> Result<DecodeOutcome, LineCodeError> {
    cfg.check()?;
    check_target(params, x, i)?;
    let target = interp_vector(params, line, x, alpha, i)?;
    let mut reader = Reader::new(word);
    let out = rldc_body(params, &mut reader, line, x, target, cfg, rng);
    Ok(DecodeOutcome { output: out, queries: reader.queries(), line })
}

fn rldc_body<R: Rng + ?Sized>(
    params: &LineCodeParams,
    reader: &mut Reader<'_>,
    line: usize,
    x: u64,
    target: u64,
    cfg: DecodeConfig,
    rng: &mut R,
) -> Option<u8> {
    for _ in 0..cfg.r1 {
        if !reader.blr_test(params, line, rng) {
            return None;
        }
    }
    let others: Vec<u64> = params.points(&params.lines[line]).into_iter().filter(|&p| p != x).collect();
    let mut first_shift: Option<(u64, u8)> = None;
    for _ in 0..cfg.r2 {
        let y = others[rng.gen_range(0..others.len())];
        let alpha = FieldElement(rng.gen_range(0..params.field_size()));
        let i = rng.gen_range(0..params.t as usize);
        let v4 = rng.gen_range(0..params.block_len());
        let vl = interp_vector(params, line, y, alpha, i).expect("y lies on the line");
        let (a, g4) = reader.self_correct_with(line, vl, v4);
        first_shift.get_or_insert((v4, g4));
        let through = params.lines_through(y);
        let other = through[rng.gen_range(0..through.len())];
        let vo = interp_vector(params, other, y, alpha, i).expect("y lies on the line");
        let b = reader.self_correct(params, other, vo, rng);
        if a != b {
            return None;
        }
    }
    match (cfg.reuse, first_shift) {
        (true, Some((v6, g6))) => Some(reader.read(line, target ^ v6) ^ g6),
        _ => Some(reader.self_correct(params, line, target, rng)),
    }
}

/// Decodes bit `v*` of block `line`, or ⊥.
pub fn rlcc_decode<R: Rng + ?Sized>(
    params: &LineCodeParams,
    word: &LineCodeword,
    line: usize,
    vstar: u64,
    cfg: CorrectConfig,
    rng: &mut R,
) -> Result<DecodeOutcome, LineCodeError> {
    cfg.inner.check()?;
    if line >= params.lines.len() {
        return Err(LineCodeError::Index { got: line, limit: params.lines.len() });
    }
    if vstar >= params.block_len() {
        return Err(LineCodeError::Index { got: vstar as usize, limit: params.block_len() as usize });
    }
    let mut reader = Reader::new(word);
    let out = rlcc_body(params, &mut reader, line, vstar, cfg, rng);
    Ok(DecodeOutcome { output: out, queries: reader.queries(), line })
}

fn rlcc_body<R: Rng + ?Sized>(
    params: &LineCodeParams,
    reader: &mut Reader<'_>,
    line: usize,
    vstar: u64,
    cfg: CorrectConfig,
    rng: &mut R,
) -> Option<u8> {
    for _ in 0..cfg.r1 {
        if !reader.blr_test(params, line, rng) {
            return None;
        }
    }
    let pts = params.points(&params.lines[line]);
    let mut first_shift: Option<(u64, u8)> = None;
    for _ in 0..cfg.r2 {
        let y = pts[rng.gen_range(0..pts.len())];
        let alpha = FieldElement(rng.gen_range(0..params.field_size()));
        let i = rng.gen_range(0..params.t as usize);
        let v4 = rng.gen_range(0..params.block_len());
        let vl = interp_vector(params, line, y, alpha, i).expect("y lies on the line");
        let (a, g4) = reader.self_correct_with(line, vl, v4);
        first_shift.get_or_insert((v4, g4));
        let through = params.lines_through(y);
        let inner_line = through[rng.gen_range(0..through.len())];
        let target = interp_vector(params, inner_line, y, alpha, i).expect("y lies on the line");
        let b = rldc_body(params, reader, inner_line, y, target, cfg.inner, rng)?;
        if a != b {
            return None;
        }
    }
    match first_shift {
        Some((v6, g6)) => Some(reader.read(line, vstar ^ v6) ^ g6),
        None => Some(reader.self_correct(params, line, vstar, rng)),
    }
}

/// The soundness envelope of the point decoder as a function of the
/// linearity-test rejection threshold `epsilon`.
pub fn eta_bound(epsilon: f64, delta: f64, d_over_n: f64, r1: u32, r2: u32) -> f64 {
    let c = delta.cbrt();
    let pass = (1.0 - epsilon).powi(r1 as i32);
    let consistency = c + d_over_n + (1.0 - d_over_n) * (0.5 + c + epsilon);
    c.max(pass * consistency.powi(r2 as i32)).max(pass * 2.0 * epsilon)
}

/// Supremum of [`eta_bound`] over a uniform grid of `steps + 1` values of
/// epsilon in [0, 1].
pub fn eta_sup(delta: f64, d_over_n: f64, r1: u32, r2: u32, steps: u32) -> f64 {
    (0..=steps)
        .map(|s| eta_bound(s as f64 / steps as f64, delta, d_over_n, r1, r2))
        .fold(0.0, f64::max)
}

/// The corrector's envelope: the inner decoder's soundness `eta_inner`
/// replaces the per-round slack of the point decoder.
pub fn eta_correct_bound(epsilon: f64, d_over_n: f64, eta_inner: f64, r1: u32, r2: u32) -> f64 {
    let pass = (1.0 - epsilon).powi(r1 as i32);
    let round = d_over_n + (1.0 - d_over_n) * 0.5 * (1.0 + eta_inner + (1.0 - eta_inner) * 2.0 * epsilon);
    (pass * round.powi(r2 as i32)).max(pass * 2.0 * epsilon)
}

/// Flips `⌈ρN⌉` distinct uniformly random bits.
pub fn corrupt_random<R: Rng + ?Sized>(
    params: &LineCodeParams,
    word: &LineCodeword,
    rho: f64,
    rng: &mut R,
) -> LineCodeword {
    let total = params.length();
    let m = ((rho * total as f64).ceil() as u128).min(total);
    let mut picked = BTreeSet::new();
    while (picked.len() as u128) < m {
        let l = rng.gen_range(0..params.lines.len());
        let v = rng.gen_range(0..params.block_len());
        picked.insert((l, v));
    }
    let mut out = word.clone();
    for (l, v) in picked {
        out.flip(l, v);
    }
    out
}

/// Result of a random-corruption sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct CorruptionReport {
    pub rho: f64,
    pub flips: u128,
    /// Wrong non-⊥ outputs.
    pub error: Estimate,
    pub bottom: Estimate,
    pub max_queries: usize,
}

impl CorruptionReport {
    pub fn json(&self) -> Value {
        json!({
            "rho": self.rho,
            "flips": self.flips.to_string(),
            "error": self.error.json(),
            "bottom": self.bottom.json(),
            "queries": self.max_queries,
        })
    }
}

/// Which decoder a sweep exercises.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepDecoder {
    Point(DecodeConfig),
    Block(CorrectConfig),
}

/// Random message, random target, `⌈ρN⌉` random flips; one trial per seed.
pub fn corruption_sweep(
    params: &LineCodeParams,
    rho: f64,
    decoder: SweepDecoder,
    trials: u64,
    seed: u64,
) -> Result<CorruptionReport, LineCodeError> {
    let (SweepDecoder::Point(inner) | SweepDecoder::Block(CorrectConfig { inner, .. })) = decoder;
    inner.check()?;
    let results: Vec<(bool, bool, usize)> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(seed, trial);
            let f = Poly::random(params, &mut rng);
            let clean = encode(params, &f);
            let word = corrupt_random(params, &clean, rho, &mut rng);
            let (truth, out) = match decoder {
                SweepDecoder::Point(cfg) => {
                    let x = rng.gen_range(0..params.point_count());
                    let alpha = FieldElement(rng.gen_range(0..params.field_size()));
                    let i = rng.gen_range(0..params.t as usize);
                    let truth = (params.field.mul(alpha, f.eval(params, x)).0 >> i) as u8 & 1;
                    let out = rldc_decode(params, &word, x, alpha, i, cfg, &mut rng).expect("validated");
                    (truth, out)
                }
                SweepDecoder::Block(cfg) => {
                    let line = rng.gen_range(0..params.lines.len());
                    let v = rng.gen_range(0..params.block_len());
                    let truth = clean.bit(line, v);
                    (truth, rlcc_decode(params, &word, line, v, cfg, &mut rng).expect("validated"))
                }
            };
            let wrong = matches!(out.output, Some(b) if b != truth);
            (wrong, out.output.is_none(), out.queries)
        })
        .collect();
    let error = Estimate { hits: results.iter().filter(|r| r.0).count() as u64, trials };
    let bottom = Estimate { hits: results.iter().filter(|r| r.1).count() as u64, trials };
    Ok(CorruptionReport {
        rho,
        flips: ((rho * params.length() as f64).ceil() as u128).min(params.length()),
        error,
        bottom,
        max_queries: results.iter().map(|r| r.2).max().unwrap_or(0),
    })
}

/// Word encoding `f` except that block `line` holds the block of `g`.
pub fn overwrite_line(params: &LineCodeParams, f: &Poly, g: &Poly, line: usize) -> LineCodeword {
    let mut word = encode(params, f);
    let vals: Vec<FieldElement> = params.sl(&params.lines[line]).into_iter().map(|z| g.eval(params, z)).collect();
    word.overwrite(line, block_mask(params, &vals));
    word
}

/// Exact probability that the point decoder, started on the overwritten
/// line `line` at `x`, outputs ⊥. Each consistency round passes when the
/// second line is the overwritten one again, when `f` and `g` agree at `y`,
/// or otherwise with probability 1/2.
pub fn overwrite_catch_rate(
    params: &LineCodeParams,
    f: &Poly,
    g: &Poly,
    line: usize,
    x: u64,
    r2: usize,
) -> Prob {
    let pts: Vec<u64> = params.points(&params.lines[line]).into_iter().filter(|&p| p != x).collect();
    let agree = pts.iter().filter(|&&y| f.eval(params, y) == g.eval(params, y)).count() as i128;
    let others = pts.len() as i128;
    let through = params.lines_through(x).len() as i128;
    let same = prob(1, through);
    let pass = same + (prob(1, 1) - same) * (prob(agree, others) + prob(others - agree, 2 * others));
    prob(1, 1) - crate::report::pow(&pass, r2 as u32)
}

/// Monte Carlo ⊥ rate of the point decoder started on `line` at `x`
/// against [`overwrite_line`].
#[allow(clippy::too_many_arguments)]
pub fn overwrite_sweep(
    params: &LineCodeParams,
    f: &Poly,
    g: &Poly,
    line: usize,
    x: u64,
    cfg: DecodeConfig,
    trials: u64,
    seed: u64,
) -> Result<Estimate, LineCodeError> {
    let word = overwrite_line(params, f, g, line);
    if !params.contains(&params.lines[line], x) {
        return Err(LineCodeError::OffLine { point: x, line });
    }
    let hits = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(seed, trial);
            let alpha = FieldElement(rng.gen_range(0..params.field_size()));
            let i = rng.gen_range(0..params.t as usize);
            rldc_decode_on(params, &word, line, x, alpha, i, cfg, &mut rng).map(|o| o.output.is_none() as u64)
        })
        .collect::<Result<Vec<u64>, _>>()?
        .into_iter()
        .sum();
    Ok(Estimate { hits, trials })
}

/// Fraction of `(v1, v2)` pairs rejected by one linearity round on a truth
/// table over `F_2^m`.
pub fn blr_reject_rate(table: &[u8]) -> Prob {
    let size = table.len();
    let mut bad = 0i128;
    for v1 in 0..size {
        for v2 in 0..size {
            bad += (table[v1] ^ table[v2] ^ table[v1 ^ v2]) as i128;
        }
    }
    prob(bad, (size * size) as i128)
}

/// Nearest linear function (least mask on ties) and the relative distance.
pub fn nearest_linear(table: &[u8]) -> (u64, Prob) {
    let size = table.len() as u64;
    (0..size)
        .map(|w| {
            let dist = (0..size).filter(|&v| dot2(v, w) != table[v as usize]).count() as i128;
            (w, prob(dist, size as i128))
        })
        .min_by(|a, b| a.1.cmp(&b.1).then(a.0.cmp(&b.0)))
        .expect("table is nonempty")
}

/// Fraction of shifts `r` with `G(x + r) + G(r) ≠ ⟨x, w⟩`.
pub fn self_correct_error(table: &[u8], w: u64, x: u64) -> Prob {
    let size = table.len() as u64;
    let bad = (0..size)
        .filter(|&r| table[(x ^ r) as usize] ^ table[r as usize] != dot2(x, w))
        .count() as i128;
    prob(bad, size as i128)
}

/// Summary of the parameters as JSON.
pub fn params_json(params: &LineCodeParams) -> Value {
    json!({
        "t": params.t,
        "n": params.n,
        "d": params.d,
        "lines": params.lines.len(),
        "block_bits": params.block_len(),
        "length": params.length().to_string(),
        "message_bits": params.message_bits(),
    })
}

/// Lines grouped by direction, for reporting.
pub fn lines_by_direction(params: &LineCodeParams) -> BTreeMap<u64, Vec<usize>> {
    let mut out: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (i, l) in params.lines.iter().enumerate() {
        out.entry(l.dir).or_default().push(i);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy() -> LineCodeParams {
        mk_params(2, 2, 1).unwrap()
    }

    fn truth(params: &LineCodeParams, f: &Poly, x: u64, alpha: FieldElement, i: usize) -> u8 {
        (params.field.mul(alpha, f.eval(params, x)).0 >> i) as u8 & 1
    }

    #[test]
    fn toy_sizes() {
        let p = toy();
        assert_eq!(p.lines().len(), 20);
        assert_eq!(p.block_len(), 16);
        assert_eq!(p.length(), 320);
        assert_eq!(p.message_bits(), 6);
        let p = mk_params(1, 1, 0).unwrap();
        assert_eq!((p.lines().len(), p.block_len(), p.length()), (1, 2, 2));
        assert!(mk_params(2, 1, 2).is_ok());
        assert!(matches!(mk_params(2, 1, 4), Err(LineCodeError::Degree { .. })));
    }

    #[test]
    fn line_enumeration_is_canonical() {
        for (t, n) in [(1, 2), (1, 3), (2, 2), (3, 2), (2, 3)] {
            let p = mk_params(t, n, 0).unwrap();
            assert_eq!(p.lines().len() as u128, line_count(t, n));
            let mut sets = BTreeSet::new();
            for (i, l) in p.lines().iter().enumerate() {
                let mut pts = p.points(l);
                assert_eq!(*pts.iter().min().unwrap(), l.base);
                pts.sort();
                pts.dedup();
                assert_eq!(pts.len() as u64, p.field_size());
                assert!(sets.insert(pts.clone()));
                for &a in &pts {
                    assert_eq!(p.canonical_line(a, p.scale(FieldElement(1), l.dir)).unwrap(), *l);
                    assert!(p.lines_through(a).contains(&i));
                }
            }
            let per_point = ((1u64 << (t * n)) - 1) / ((1u64 << t) - 1);
            for x in 0..p.point_count() {
                assert_eq!(p.lines_through(x).len() as u64, per_point);
            }
        }
    }

    #[test]
    fn monomial_count_is_binomial() {
        let p = mk_params(3, 3, 2).unwrap();
        assert_eq!(p.monomials().len(), 10);
        assert_eq!(p.monomials()[0], vec![0, 0, 0]);
    }

    #[test]
    fn encode_examples() {
        let p = toy();
        let zero = encode(&p, &Poly::zero(&p));
        assert!(zero.blocks.iter().all(|&b| b == 0));
        let p1 = mk_params(1, 1, 0).unwrap();
        let w = encode(&p1, &Poly::constant(&p1, FieldElement::ONE));
        assert_eq!((w.bit(0, 0), w.bit(0, 1)), (0, 1));
        let w = encode_message(&p1, &[1]).unwrap();
        assert_eq!(w.blocks, vec![1]);
        assert!(matches!(encode_message(&p, &[0; 5]), Err(LineCodeError::Length { .. })));
    }

    #[test]
    fn encode_is_linear() {
        let p = toy();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let f = Poly::random(&p, &mut rng);
            let g = Poly::random(&p, &mut rng);
            assert_eq!(encode(&p, &f.add(&g)), encode(&p, &f).xor(&encode(&p, &g)));
        }
    }

    #[test]
    fn interpolation_identity_exhaustive() {
        let p = toy();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let f = Poly::random(&p, &mut rng);
            let w = encode(&p, &f);
            for l in 0..p.lines().len() {
                for z in p.points(&p.line(l)) {
                    for a in p.field().elements() {
                        for i in 0..2 {
                            let v = interp_vector(&p, l, z, a, i).unwrap();
                            assert_eq!(w.bit(l, v), truth(&p, &f, z, a, i));
                            if a.is_zero() {
                                assert_eq!(v, 0);
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn interpolation_on_higher_degree() {
        let p = mk_params(3, 2, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let f = Poly::random(&p, &mut rng);
            let w = encode(&p, &f);
            let l = rng.gen_range(0..p.lines().len());
            for z in p.sl(&p.line(l)) {
                let v = interp_vector(&p, l, z, FieldElement::ONE, 1).unwrap();
                assert_eq!(w.bit(l, v), truth(&p, &f, z, FieldElement::ONE, 1));
            }
        }
    }

    #[test]
    fn interp_rejects_points_off_the_line() {
        let p = toy();
        let l = p.line(0);
        let off = (0..p.point_count()).find(|&z| !p.contains(&l, z)).unwrap();
        assert!(matches!(interp_vector(&p, 0, off, FieldElement::ONE, 0), Err(LineCodeError::OffLine { .. })));
    }

    fn flipped_tables(flips: usize) -> Vec<(u64, Vec<u8>)> {
        let mut out = Vec::new();
        for w in 0..16u64 {
            for set in crate::decoder::combinations(16, flips) {
                let mut table: Vec<u8> = (0..16).map(|v| dot2(v, w)).collect();
                for &s in &set {
                    table[s] ^= 1;
                }
                out.push((w, table));
            }
        }
        out
    }

    #[test]
    fn blr_bounds_exhaustive() {
        for flips in [1usize, 2] {
            let dist = prob(flips as i128, 16);
            for (w, table) in flipped_tables(flips) {
                assert_eq!(nearest_linear(&table), (w, dist));
                assert!(blr_reject_rate(&table) >= dist);
                for x in 0..16 {
                    assert!(self_correct_error(&table, w, x) <= dist * 2);
                }
            }
        }
        let linear: Vec<u8> = (0..16).map(|v| dot2(v, 0b1011)).collect();
        assert_eq!(blr_reject_rate(&linear), prob(0, 1));
    }

    #[test]
    fn query_counts() {
        let p = toy();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let f = Poly::random(&p, &mut rng);
        let w = encode(&p, &f);
        let on = DecodeConfig::default();
        let off = DecodeConfig { reuse: false, ..on };
        assert_eq!(rldc_decode(&p, &w, 5, FieldElement(3), 1, on, &mut rng).unwrap().queries, 15);
        assert_eq!(rldc_decode(&p, &w, 5, FieldElement(3), 1, off, &mut rng).unwrap().queries, 16);
        let c2 = CorrectConfig::default();
        let c3 = CorrectConfig { r2: 3, ..c2 };
        assert_eq!((c2.queries(), c3.queries()), (41, 58));
        assert_eq!(rlcc_decode(&p, &w, 7, 9, c2, &mut rng).unwrap().queries, 41);
        assert_eq!(rlcc_decode(&p, &w, 7, 9, c3, &mut rng).unwrap().queries, 58);
        let bad = DecodeConfig { r2: 0, ..on };
        assert_eq!(rldc_decode(&p, &w, 5, FieldElement(3), 1, bad, &mut rng), Err(LineCodeError::Reuse));
    }

    #[test]
    fn completeness_sample() {
        let p = toy();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for idx in 0..Poly::count(&p).unwrap() {
            let f = Poly::nth(&p, idx);
            let w = encode(&p, &f);
            for _ in 0..20 {
                let x = rng.gen_range(0..p.point_count());
                let a = FieldElement(rng.gen_range(0..4));
                let i = rng.gen_range(0..2);
                let out = rldc_decode(&p, &w, x, a, i, DecodeConfig::default(), &mut rng).unwrap();
                assert_eq!(out.output, Some(truth(&p, &f, x, a, i)));
                let l = rng.gen_range(0..20);
                let v = rng.gen_range(0..16);
                let out = rlcc_decode(&p, &w, l, v, CorrectConfig::default(), &mut rng).unwrap();
                assert_eq!(out.output, Some(w.bit(l, v)));
            }
        }
    }

    #[test]
    fn eta_examples() {
        let (delta, dn) = (0.001f64, 0.1);
        let c = delta.cbrt();
        let at_zero = c.max((c + dn + (1.0 - dn) * (0.5 + c)).powi(2));
        assert!((eta_bound(0.0, delta, dn, 2, 2) - at_zero).abs() < 1e-12);
        let sup = eta_sup(1e-12, 1e-9, 2, 2, 100_000);
        assert!((sup - 0.75f64.powi(4)).abs() < 1e-3);
        assert!(sup <= 1.0 / 3.0);
        for s in 1..=100 {
            let e = s as f64 / 100.0;
            for r1 in 0..6 {
                assert!(eta_bound(e, delta, dn, r1 + 1, 2) <= eta_bound(e, delta, dn, r1, 2) + 1e-15);
            }
        }
        assert!(eta_correct_bound(0.0, 0.0, 1.0 / 3.0, 2, 2) <= 4.0 / 9.0 + 1e-12);
    }

    #[test]
    fn word_json_round_trip() {
        let p = toy();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let w = corrupt_random(&p, &encode(&p, &Poly::random(&p, &mut rng)), 0.02, &mut rng);
        assert_eq!(w.flips.len(), 7);
        for dense in [false, true] {
            let back = LineCodeword::from_json(&p, &w.to_json(&p, dense)).unwrap();
            assert_eq!(back, w);
        }
        let mut bad = w.to_json(&p, true);
        bad["flips"] = json!([]);
        assert!(LineCodeword::from_json(&p, &bad).is_err());
    }

    #[test]
    fn distance_counts_flips() {
        let p = toy();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let clean = encode(&p, &Poly::random(&p, &mut rng));
        let noisy = corrupt_random(&p, &clean, 0.01, &mut rng);
        assert_eq!(clean.distance(&p, &noisy), 4);
    }

    #[test]
    fn overwrite_rate_matches_prediction() {
        let p = toy();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let f = Poly::random(&p, &mut rng);
        let g = f.add(&Poly::random(&p, &mut rng));
        let line = 3;
        let x = p.points(&p.line(line))[1];
        let predicted = crate::report::to_f64(&overwrite_catch_rate(&p, &f, &g, line, x, 2));
        let est = overwrite_sweep(&p, &f, &g, line, x, DecodeConfig::default(), 4000, 12).unwrap();
        assert!((est.mean() - predicted).abs() <= est.half_width().max(1e-9));
    }
}
