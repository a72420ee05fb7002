//! Heavy/light partitions, smooth-part extraction and matching decoders.
//!
//! A coordinate is heavy for a target when the decoder reads it with
//! probability strictly above `q/(δn)`. Query sets whose light part already
//! determines the target are "smoothable"; the decoder restricted to those
//! (and trimmed to their light part) is smooth, hence an LDC decoder.

use std::collections::BTreeMap;

use num_traits::{One, Zero};
use serde_json::{json, Value};
use thiserror::Error;

use crate::codealg::{LinearCode, Scalar};
use crate::decoder::{
    combinations, eval, DecodeRule, DecoderError, EvalReport, Exhaustive, LocalDecoder, Mode, NonadaptiveDecoder,
    QueryDistribution, Target,
};
use crate::report::{prob_json, Prob};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SmoothError {
    #[error("coordinate {coordinate} is read with probability {prob}, above 1/(ηn) = {limit}")]
    NotSmooth { coordinate: usize, prob: Prob, limit: Prob },
    #[error("matching search needs {needed} subsets, budget is {budget}")]
    Budget { needed: u128, budget: u128 },
    #[error("empty matching for target {0}")]
    EmptyMatching(Target),
    #[error(transparent)]
    Decoder(#[from] DecoderError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeavyLightPartition {
    pub target: Target,
    pub heavy: Vec<usize>,
    pub light: Vec<usize>,
    /// `q/(δn)`; coordinates read with larger probability are heavy.
    pub threshold: Prob,
}

/// Splits `[n]` by per-coordinate query probability against `q/(δn)`.
pub fn heavy_light(dist: &QueryDistribution, target: Target, q: usize, delta: &Prob, n: usize) -> HeavyLightPartition {
    assert!(*delta > Prob::zero() && *delta <= Prob::one(), "delta must lie in (0, 1]");
    let threshold = Prob::from_integer(q as i128) / (delta * Prob::from_integer(n as i128));
    let (heavy, light): (Vec<usize>, Vec<usize>) = (0..n).partition(|&j| dist.coordinate_prob(j) > threshold);
    // q ≥ Σ_j Pr[j ∈ Q] ≥ |H|·q/(δn)
    assert!(
        Prob::from_integer(heavy.len() as i128) <= delta * Prob::from_integer(n as i128),
        "heavy set larger than δn"
    );
    HeavyLightPartition {
        target,
        heavy,
        light,
        threshold,
    }
}

/// Whether the light part of `set` already spans the decoding vector.
pub fn is_smoothable(code: &LinearCode, set: &[usize], light: &[usize], vstar: &[Scalar]) -> bool {
    let trimmed: Vec<usize> = set.iter().copied().filter(|j| light.contains(j)).collect();
    code.in_span(vstar, &trimmed).is_some()
}

#[derive(Debug, Clone)]
pub struct SmoothExtraction {
    /// Smoothable sets trimmed to their light part, decoded linearly.
    pub ldc_part: NonadaptiveDecoder,
    /// The remaining (non-smoothable) sets, decoded canonically.
    pub rldc_part: NonadaptiveDecoder,
    /// Smoothable sets before trimming, decoded canonically.
    pub good_part: NonadaptiveDecoder,
    pub p_good: BTreeMap<Target, Prob>,
    pub partitions: BTreeMap<Target, HeavyLightPartition>,
    /// Targets with no smoothable set at all.
    pub flagged: Vec<Target>,
}

impl SmoothExtraction {
    pub fn report(&self, code: &LinearCode) -> Vec<Value> {
        self.partitions
            .iter()
            .map(|(t, part)| {
                let p = self.p_good[t];
                let smooth = self
                    .ldc_part
                    .query_distribution(*t)
                    .map(|d| (0..code.n()).map(|j| d.coordinate_prob(j)).max().unwrap_or_else(Prob::zero));
                json!({
                    "schema": crate::report::SCHEMA,
                    "target": t.to_string(),
                    "p_good": prob_json(&p),
                    "heavy": part.heavy.len(),
                    "light": part.light.len(),
                    "smoothness": smooth.map(|s| prob_json(&s)),
                    "flagged": self.flagged.contains(t),
                })
            })
            .collect()
    }
}

fn renormalize(entries: Vec<(Vec<usize>, Prob)>) -> Result<Option<QueryDistribution>, DecoderError> {
    let total = entries.iter().fold(Prob::zero(), |a, (_, w)| a + w);
    if total.is_zero() {
        return Ok(None);
    }
    QueryDistribution::new(entries.into_iter().map(|(s, w)| (s, w / total)).collect()).map(Some)
}

/// Splits a decoder into its smooth part and the rest, target by target.
pub fn extract_smooth(
    decoder: &NonadaptiveDecoder,
    code: &LinearCode,
    delta: &Prob,
) -> Result<SmoothExtraction, DecoderError> {
    let q = decoder.q();
    let mut ldc = BTreeMap::new();
    let mut good = BTreeMap::new();
    let mut bad = BTreeMap::new();
    let mut p_good = BTreeMap::new();
    let mut partitions = BTreeMap::new();
    let mut flagged = Vec::new();
    for target in decoder.targets() {
        let dist = decoder.query_distribution(target).expect("listed target");
        let part = heavy_light(&dist, target, q, delta, code.n());
        let vstar = target.vstar(code);
        let mut trimmed = Vec::new();
        let mut good_sets = Vec::new();
        let mut bad_sets = Vec::new();
        let mut mass = Prob::zero();
        for (set, w) in dist.entries() {
            if is_smoothable(code, set, &part.light, &vstar) {
                mass += w;
                good_sets.push((set.clone(), *w));
                trimmed.push((set.iter().copied().filter(|j| part.light.contains(j)).collect(), *w));
            } else {
                bad_sets.push((set.clone(), *w));
            }
        }
        if let Some(d) = renormalize(trimmed)? {
            ldc.insert(target, d);
        } else {
            flagged.push(target);
        }
        if let Some(d) = renormalize(good_sets)? {
            good.insert(target, d);
        }
        if let Some(d) = renormalize(bad_sets)? {
            bad.insert(target, d);
        }
        p_good.insert(target, mass);
        partitions.insert(target, part);
    }
    Ok(SmoothExtraction {
        ldc_part: NonadaptiveDecoder::new(code, q, DecodeRule::Linear, ldc)?,
        rldc_part: NonadaptiveDecoder::new(code, q, DecodeRule::Canonical, bad)?,
        good_part: NonadaptiveDecoder::new(code, q, DecodeRule::Canonical, good)?,
        p_good,
        partitions,
        flagged,
    })
}

/// Largest probability with which any coordinate is read, over all targets.
pub fn smoothness(decoder: &NonadaptiveDecoder, n: usize) -> Prob {
    smoothness_witness(decoder, n).1
}

fn smoothness_witness(decoder: &NonadaptiveDecoder, n: usize) -> (usize, Prob) {
    let mut best = (0, Prob::zero());
    for t in decoder.targets() {
        let d = decoder.query_distribution(t).expect("listed target");
        for j in 0..n {
            let p = d.coordinate_prob(j);
            if p > best.1 {
                best = (j, p);
            }
        }
    }
    best
}

/// Parameters `(q, δ, completeness, soundness)` of an LDC certificate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LdcCertificate {
    pub q: usize,
    pub delta: Prob,
    pub completeness: Prob,
    pub soundness: Prob,
}

/// An η-smooth perfectly complete decoder is a `(q, ηε, 1, ε)` LDC decoder.
pub fn smooth_to_ldc(decoder: &NonadaptiveDecoder, n: usize, eta: &Prob, epsilon: &Prob) -> Result<LdcCertificate, SmoothError> {
    let limit = Prob::one() / (eta * Prob::from_integer(n as i128));
    let (coordinate, prob) = smoothness_witness(decoder, n);
    if prob > limit {
        return Err(SmoothError::NotSmooth { coordinate, prob, limit });
    }
    Ok(LdcCertificate {
        q: decoder.q(),
        delta: eta * epsilon,
        completeness: Prob::one(),
        soundness: *epsilon,
    })
}

/// Exhaustive check of a certificate: every word within `⌊δn⌋` of a codeword.
pub fn verify_ldc(
    decoder: &NonadaptiveDecoder,
    code: &LinearCode,
    cert: &LdcCertificate,
    budget: u128,
) -> Result<(EvalReport, bool), DecoderError> {
    let r = eval(decoder, code, Mode::Exact { budget }, &Exhaustive, &cert.delta)?;
    let ok = r.completeness.exact() == Some(Prob::one())
        && r.strict_error.exact().is_some_and(|e| e <= cert.soundness);
    Ok((r, ok))
}

/// Pairwise-disjoint sparse decoding vectors for one target.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Matching {
    pub target: Target,
    /// Each vector as (coordinate, coefficient) pairs with nonzero coefficients.
    pub vectors: Vec<Vec<(usize, Scalar)>>,
}

impl Matching {
    pub fn supports(&self) -> Vec<Vec<usize>> {
        self.vectors.iter().map(|v| v.iter().map(|&(j, _)| j).collect()).collect()
    }
}

/// Greedy search over supports ordered by (size, lexicographic).
pub fn find_matchings(code: &LinearCode, target: Target, q: usize, budget: u128) -> Result<Matching, SmoothError> {
    let n = code.n();
    let needed: u128 = (1..=q.min(n)).map(|s| combinations_count(n, s)).sum();
    if needed > budget {
        return Err(SmoothError::Budget { needed, budget });
    }
    let vstar = target.vstar(code);
    let mut used = vec![false; n];
    let mut vectors = Vec::new();
    for size in 1..=q.min(n) {
        for set in combinations(n, size) {
            if set.iter().any(|&j| used[j]) {
                continue;
            }
            let Some(c) = code.in_span(&vstar, &set) else {
                continue;
            };
            let v: Vec<(usize, Scalar)> = set.iter().copied().zip(c).filter(|&(_, c)| c != 0).collect();
            for &(j, _) in &v {
                used[j] = true;
            }
            vectors.push(v);
        }
    }
    Ok(Matching { target, vectors })
}

fn combinations_count(n: usize, k: usize) -> u128 {
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Uniform choice of one matching vector, answered by its inner product with the word.
pub fn matching_decoder(code: &LinearCode, matchings: &[Matching]) -> Result<NonadaptiveDecoder, SmoothError> {
    let mut branches = BTreeMap::new();
    let mut q = 0;
    for m in matchings {
        if m.vectors.is_empty() {
            return Err(SmoothError::EmptyMatching(m.target));
        }
        let w = Prob::new(1, m.vectors.len() as i128);
        let list = m
            .vectors
            .iter()
            .map(|v| {
                q = q.max(v.len());
                (v.iter().map(|&(j, _)| j).collect(), w, v.iter().map(|&(_, c)| c).collect())
            })
            .collect();
        branches.insert(m.target, list);
    }
    Ok(NonadaptiveDecoder::with_coefficients(code, q, branches)?)
}

/// Outcome of the exhaustive strong-soundness check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StrongSoundness {
    pub checked: u64,
    pub violations: u64,
    /// Smallest `bound - error` seen.
    pub min_slack: Prob,
}

/// Checks `Pr[output ≠ truth] ≤ qΔ/(δn)` with `δ = q|matching|/n`, that is
/// `Δ/|matching|`, for every word within `⌊δn/q⌋ = |matching|` of a codeword.
pub fn check_strong_soundness(
    decoder: &NonadaptiveDecoder,
    code: &LinearCode,
    matchings: &[Matching],
    budget: u128,
) -> Result<StrongSoundness, DecoderError> {
    let mut out = StrongSoundness {
        checked: 0,
        violations: 0,
        min_slack: Prob::one(),
    };
    for m in matchings {
        let size = m.vectors.len();
        let adv = Exhaustive;
        let patterns = crate::decoder::Adversary::pattern_count(&adv, code, size).unwrap_or(u128::MAX);
        let needed = patterns.saturating_mul(code.message_count().map(u128::from).unwrap_or(u128::MAX));
        if needed > budget {
            return Err(DecoderError::Budget { needed, budget });
        }
        for b in code.messages() {
            let cw = code.encode_unchecked(&b);
            let truth = m.target.truth(code, &b);
            let words = crate::decoder::Adversary::enumerate(&adv, code, &cw, m.target, size).expect("enumerable");
            for y in words {
                let dist = crate::codealg::distance(&y, &cw);
                let err = decoder.distribution(m.target, &y).strict_error(truth);
                let bound = Prob::new(dist as i128, size as i128);
                out.checked += 1;
                if err > bound {
                    out.violations += 1;
                }
                out.min_slack = out.min_slack.min(bound - err);
            }
        }
    }
    Ok(out)
}
