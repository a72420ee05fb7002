//! Two-query relaxed decoders over any field contain ordinary two-query
//! decoders: pairs that read only coordinates proportional to the target
//! behave like a repetition code and are dropped, the few targets that own
//! many such coordinates are zeroed out of the code, and what is left never
//! outputs ⊥.

use std::collections::BTreeMap;

use num_traits::{One, Zero};
use serde_json::{json, Value};
use thiserror::Error;

use crate::codealg::{kernel, LinearCode, Scalar};
use crate::decoder::{DecoderError, LocalDecoder, NonadaptiveDecoder, Target};
use crate::report::{prob_json, Prob, SCHEMA};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReductionError {
    #[error("decoder reads more than two symbols")]
    QueryCount,
    #[error("target {0} does not match the reduction mode")]
    Mode(Target),
    #[error("target {0} has no mass on pairs outside its fixed set")]
    NoHadamard(Target),
    #[error("coordinate {coordinate} is fixed by both {a} and {b}")]
    Overlap { coordinate: usize, a: Target, b: Target },
    #[error("every message coordinate was removed")]
    Empty,
    #[error(transparent)]
    Decoder(#[from] DecoderError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReductionMode {
    /// Message targets; the removed ones are set to zero in the encoder.
    Decoding,
    /// Codeword targets; the removed ones are constrained to zero.
    Correcting,
}

impl ReductionMode {
    fn targets(self, code: &LinearCode) -> Vec<Target> {
        match self {
            ReductionMode::Decoding => Target::all_messages(code),
            ReductionMode::Correcting => Target::all_codeword(code),
        }
    }

    fn name(self) -> &'static str {
        match self {
            ReductionMode::Decoding => "rldc",
            ReductionMode::Correcting => "rlcc",
        }
    }
}

/// Coordinates whose row is a nonzero multiple of the target's decoding vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixedSet {
    pub target: Target,
    pub members: Vec<(usize, Scalar)>,
}

impl FixedSet {
    pub fn contains(&self, j: usize) -> bool {
        self.members.iter().any(|&(m, _)| m == j)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// `α` with `row = α·v`, if one exists and is nonzero.
fn multiple(code: &LinearCode, row: &[Scalar], v: &[Scalar]) -> Option<Scalar> {
    let f = code.field();
    let p = v.iter().position(|&x| x != 0)?;
    let alpha = f.div(row[p], v[p])?;
    (alpha != 0 && row.iter().zip(v).all(|(&r, &x)| r == f.mul(alpha, x))).then_some(alpha)
}

pub fn fixed_set(code: &LinearCode, target: Target) -> FixedSet {
    let v = target.vstar(code);
    let members = (0..code.n())
        .filter_map(|j| multiple(code, code.row(j), &v).map(|a| (j, a)))
        .collect();
    FixedSet { target, members }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum PairClass {
    HadamardLike,
    RepetitionLike,
    /// Exactly one query fixed; behaves as that single query.
    DegenerateSingle(usize),
}

/// Classifies a query set of size one or two against the target's fixed set.
pub fn classify_pair(fixed: &FixedSet, set: &[usize]) -> PairClass {
    let inside: Vec<usize> = set.iter().copied().filter(|&j| fixed.contains(j)).collect();
    match (inside.len(), set.len()) {
        (0, _) => PairClass::HadamardLike,
        (a, b) if a == b => PairClass::RepetitionLike,
        _ => PairClass::DegenerateSingle(inside[0]),
    }
}

/// Targets owning more than `δn/2` fixed coordinates.
pub fn big_targets(code: &LinearCode, delta: &Prob, mode: ReductionMode) -> Vec<Target> {
    let half = delta * Prob::from_integer(code.n() as i128) / Prob::from_integer(2);
    mode.targets(code)
        .into_iter()
        .filter(|&t| Prob::from_integer(fixed_set(code, t).len() as i128) > half)
        .collect()
}

/// Groups of targets with identical fixed sets (codeword targets with
/// proportional rows share one), each reported once.
pub fn fixed_classes(code: &LinearCode, mode: ReductionMode) -> Result<Vec<FixedSet>, ReductionError> {
    let mut owner: BTreeMap<usize, Target> = BTreeMap::new();
    let mut classes: Vec<FixedSet> = Vec::new();
    for t in mode.targets(code) {
        let s = fixed_set(code, t);
        if s.is_empty() || classes.iter().any(|c| same_members(c, &s)) {
            continue;
        }
        for &(j, _) in &s.members {
            if let Some(&a) = owner.get(&j) {
                return Err(ReductionError::Overlap { coordinate: j, a, b: t });
            }
            owner.insert(j, t);
        }
        classes.push(s);
    }
    Ok(classes)
}

fn same_members(a: &FixedSet, b: &FixedSet) -> bool {
    a.members.len() == b.members.len() && a.members.iter().all(|&(j, _)| b.contains(j))
}

/// Hadamard-like, repetition-like and single-query mass of one target.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassMass {
    pub hadamard: Prob,
    pub repetition: Prob,
    pub single: Prob,
}

#[derive(Debug, Clone)]
pub struct Reduction {
    pub mode: ReductionMode,
    /// Removed targets, in the original indexing.
    pub removed: Vec<Target>,
    /// Distinct fixed-set classes among the removed targets.
    pub removed_classes: usize,
    pub k: usize,
    pub k_prime: usize,
    pub code: LinearCode,
    pub decoder: NonadaptiveDecoder,
    /// Decoding mode: original message index of each reduced message index.
    /// Correcting mode: basis of the kept messages, as original messages.
    pub message_map: MessageMap,
    pub mass: BTreeMap<Target, ClassMass>,
    /// The reduced decoder's radius parameter, `δ/2`.
    pub delta: Prob,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MessageMap {
    Permutation(Vec<usize>),
    Basis(Vec<Vec<Scalar>>),
}

impl Reduction {
    /// Original message for a reduced one.
    pub fn lift(&self, b: &[Scalar]) -> Vec<Scalar> {
        let f = self.code.field();
        match &self.message_map {
            MessageMap::Permutation(perm) => {
                let mut out = vec![0; self.k];
                for (&old, &x) in perm.iter().zip(b) {
                    out[old] = x;
                }
                out
            }
            MessageMap::Basis(basis) => {
                let mut out = vec![0; self.k];
                for (v, &x) in basis.iter().zip(b) {
                    f.axpy(&mut out, x, v);
                }
                out
            }
        }
    }

    pub fn json(&self) -> Value {
        let mass: serde_json::Map<String, Value> = self
            .mass
            .iter()
            .map(|(t, m)| {
                (
                    t.to_string(),
                    json!({
                        "hadamard": prob_json(&m.hadamard),
                        "repetition": prob_json(&m.repetition),
                        "single": prob_json(&m.single),
                    }),
                )
            })
            .collect();
        json!({
            "schema": SCHEMA,
            "mode": self.mode.name(),
            "X": self.removed.len(),
            "X_classes": self.removed_classes,
            "removed": self.removed.iter().map(|t| t.to_string()).collect::<Vec<_>>(),
            "k": self.k,
            "k_prime": self.k_prime,
            "mass": mass,
        })
    }
}

pub fn reduce(
    code: &LinearCode,
    decoder: &NonadaptiveDecoder,
    delta: &Prob,
    mode: ReductionMode,
) -> Result<Reduction, ReductionError> {
    if decoder.q() > 2 {
        return Err(ReductionError::QueryCount);
    }
    for t in decoder.targets() {
        let ok = matches!(
            (mode, t),
            (ReductionMode::Decoding, Target::Message(_)) | (ReductionMode::Correcting, Target::Codeword(_))
        );
        if !ok {
            return Err(ReductionError::Mode(t));
        }
    }
    let classes = fixed_classes(code, mode)?;
    let removed = big_targets(code, delta, mode);
    let removed_classes = classes
        .iter()
        .filter(|c| removed.iter().any(|&t| same_members(c, &fixed_set(code, t))))
        .count();
    let bound = (Prob::from_integer(2) / delta).floor().to_integer() as usize;
    assert!(removed_classes <= bound, "{removed_classes} removed classes exceed ⌊2/δ⌋ = {bound}");

    let f = *code.field();
    let (reduced, map, rename): (LinearCode, MessageMap, BTreeMap<Target, Target>) = match mode {
        ReductionMode::Decoding => {
            let kept: Vec<usize> = (0..code.k())
                .filter(|&i| !removed.contains(&Target::Message(i)))
                .collect();
            if kept.is_empty() {
                return Err(ReductionError::Empty);
            }
            let rows = (0..code.n())
                .map(|j| kept.iter().map(|&i| code.row(j)[i]).collect())
                .collect();
            let c2 = LinearCode::new(f, kept.len(), rows).map_err(DecoderError::from)?;
            let rename = kept
                .iter()
                .enumerate()
                .map(|(new, &old)| (Target::Message(old), Target::Message(new)))
                .collect();
            (c2, MessageMap::Permutation(kept), rename)
        }
        ReductionMode::Correcting => {
            let cons: Vec<Vec<Scalar>> = removed.iter().map(|t| t.vstar(code)).collect();
            let basis = kernel(&f, &cons, code.k());
            if basis.is_empty() {
                return Err(ReductionError::Empty);
            }
            let rows = (0..code.n())
                .map(|j| basis.iter().map(|b| f.dot(code.row(j), b)).collect())
                .collect();
            let c2 = LinearCode::new(f, basis.len(), rows).map_err(DecoderError::from)?;
            let rename = (0..code.n()).map(|u| (Target::Codeword(u), Target::Codeword(u))).collect();
            (c2, MessageMap::Basis(basis), rename)
        }
    };

    let mut branches = BTreeMap::new();
    let mut mass = BTreeMap::new();
    for t in decoder.targets() {
        let new_t = match rename.get(&t) {
            Some(&nt) => nt,
            None => continue,
        };
        let trivial = removed.contains(&t) || t.vstar(code).iter().all(|&x| x == 0);
        let fixed = fixed_set(code, t);
        let mut m = ClassMass {
            hadamard: Prob::zero(),
            repetition: Prob::zero(),
            single: Prob::zero(),
        };
        let mut kept = Vec::new();
        for br in decoder.branches(t) {
            match classify_pair(&fixed, &br.set) {
                PairClass::HadamardLike => {
                    m.hadamard += br.weight;
                    let coeffs = code.in_span(&t.vstar(code), &br.set).expect("complete decoder");
                    kept.push((br.set.clone(), br.weight, coeffs));
                }
                PairClass::RepetitionLike => m.repetition += br.weight,
                PairClass::DegenerateSingle(_) => m.single += br.weight,
            }
        }
        mass.insert(t, m.clone());
        if trivial {
            // the reduced code is identically zero here
            branches.insert(new_t, vec![(Vec::new(), Prob::one(), Vec::new())]);
            continue;
        }
        if m.hadamard.is_zero() {
            return Err(ReductionError::NoHadamard(t));
        }
        let list = kept.into_iter().map(|(s, w, c)| (s, w / m.hadamard, c)).collect();
        branches.insert(new_t, list);
    }
    let reduced_decoder = NonadaptiveDecoder::with_coefficients(&reduced, 2, branches)?;
    let k_prime = reduced.k();
    assert!(k_prime + bound >= code.k(), "k' = {k_prime} below k - ⌊2/δ⌋");
    Ok(Reduction {
        mode,
        removed,
        removed_classes,
        k: code.k(),
        k_prime,
        code: reduced,
        decoder: reduced_decoder,
        message_map: map,
        mass,
        delta: delta / Prob::from_integer(2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codealg::{all_vectors, Field};
    use crate::decoder::{eval, DecodeRule, Exhaustive, Mode, Outcome, QueryDistribution};
    use crate::report::prob;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mixed() -> LinearCode {
        LinearCode::new(Field::f2(), 2, vec![vec![1, 0], vec![1, 0], vec![0, 1], vec![1, 1]]).unwrap()
    }

    #[test]
    fn fixed_set_examples() {
        let c = mixed();
        assert_eq!(fixed_set(&c, Target::Message(0)).members, vec![(0, 1), (1, 1)]);
        assert_eq!(fixed_set(&c, Target::Message(1)).members, vec![(2, 1)]);
        let z = LinearCode::new(Field::f2(), 1, vec![vec![1], vec![0]]).unwrap();
        assert_eq!(fixed_set(&z, Target::Message(0)).members, vec![(0, 1)]);
        let f3 = LinearCode::new(Field::prime(3).unwrap(), 1, vec![vec![2], vec![1]]).unwrap();
        assert_eq!(fixed_set(&f3, Target::Message(0)).members, vec![(0, 2), (1, 1)]);
    }

    #[test]
    fn pair_examples() {
        let c = mixed();
        let s = fixed_set(&c, Target::Message(0));
        assert_eq!(classify_pair(&s, &[0, 1]), PairClass::RepetitionLike);
        assert_eq!(classify_pair(&s, &[2, 3]), PairClass::HadamardLike);
        assert_eq!(classify_pair(&s, &[0, 2]), PairClass::DegenerateSingle(0));
    }

    #[test]
    fn big_target_examples() {
        let rep = LinearCode::new(Field::f2(), 1, vec![vec![1]; 5]).unwrap();
        assert_eq!(big_targets(&rep, &prob(1, 3), ReductionMode::Decoding), vec![Target::Message(0)]);
        let had = LinearCode::new(
            Field::f2(),
            2,
            vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]],
        )
        .unwrap();
        assert!(big_targets(&had, &prob(1, 2), ReductionMode::Decoding).is_empty());
        assert_eq!(big_targets(&mixed(), &prob(1, 2), ReductionMode::Decoding), vec![Target::Message(0)]);
    }

    fn decoder(code: &LinearCode, per: Vec<(Target, Vec<(Vec<usize>, Prob)>)>) -> NonadaptiveDecoder {
        let m = per.into_iter().map(|(t, s)| (t, QueryDistribution::new(s).unwrap())).collect();
        NonadaptiveDecoder::new(code, 2, DecodeRule::Canonical, m).unwrap()
    }

    #[test]
    fn reduce_example() {
        let c = mixed();
        let d = decoder(
            &c,
            vec![
                (Target::Message(0), vec![(vec![0, 1], prob(1, 2)), (vec![2, 3], prob(1, 2))]),
                (Target::Message(1), vec![(vec![0, 3], prob(1, 1))]),
            ],
        );
        let r = reduce(&c, &d, &prob(1, 2), ReductionMode::Decoding).unwrap();
        assert_eq!(r.removed, vec![Target::Message(0)]);
        assert_eq!(r.k_prime, 1);
        assert_eq!(r.message_map, MessageMap::Permutation(vec![1]));
        assert_eq!(r.code.rows(), &[vec![0], vec![0], vec![1], vec![1]]);
        let s = eval(&d, &c, Mode::Exact { budget: 1000 }, &Exhaustive, &prob(1, 2)).unwrap();
        let rep = eval(&r.decoder, &r.code, Mode::Exact { budget: 1000 }, &Exhaustive, &r.delta).unwrap();
        assert!(rep.strict_error.exact().unwrap() <= s.soundness_error.exact().unwrap());
        assert_eq!(rep.completeness.exact(), Some(prob(1, 1)));
        for b in r.code.messages() {
            assert_eq!(r.code.encode_unchecked(&b), c.encode_unchecked(&r.lift(&b)));
        }
    }

    #[test]
    fn pure_hadamard_is_kept() {
        let c = LinearCode::new(Field::f2(), 2, vec![vec![1, 0], vec![0, 1], vec![1, 1], vec![1, 1]]).unwrap();
        let d = decoder(&c, vec![(Target::Message(0), vec![(vec![1, 2], prob(1, 2)), (vec![1, 3], prob(1, 2))])]);
        let r = reduce(&c, &d, &prob(1, 2), ReductionMode::Decoding).unwrap();
        assert!(r.removed.is_empty());
        assert_eq!(r.code, c);
        assert_eq!(r.decoder.distributions(), d.distributions());
    }

    #[test]
    fn correcting_mode_repetition() {
        // every coordinate of a repetition code shares one fixed set
        let c = LinearCode::new(Field::f2(), 1, vec![vec![1]; 4]).unwrap();
        let m = Target::all_codeword(&c)
            .into_iter()
            .map(|t| (t, QueryDistribution::point(vec![t_index(t)])))
            .collect();
        let d = NonadaptiveDecoder::new(&c, 2, DecodeRule::Canonical, m).unwrap();
        assert_eq!(big_targets(&c, &prob(1, 2), ReductionMode::Correcting).len(), 4);
        assert_eq!(fixed_classes(&c, ReductionMode::Correcting).unwrap().len(), 1);
        assert!(matches!(reduce(&c, &d, &prob(1, 2), ReductionMode::Correcting), Err(ReductionError::Empty)));
        // one extra independent coordinate survives
        let c = LinearCode::new(Field::f2(), 2, vec![vec![1, 0], vec![1, 0], vec![1, 0], vec![0, 1], vec![1, 1]]).unwrap();
        let mut m = BTreeMap::new();
        for t in Target::all_codeword(&c) {
            let u = t_index(t);
            let set = match u {
                0..=2 => vec![3, 4],
                3 => vec![0, 4],
                _ => vec![0, 3],
            };
            m.insert(t, QueryDistribution::point(set));
        }
        let d = NonadaptiveDecoder::new(&c, 2, DecodeRule::Canonical, m).unwrap();
        let r = reduce(&c, &d, &prob(1, 2), ReductionMode::Correcting).unwrap();
        assert_eq!(r.removed.len(), 3);
        assert_eq!(r.removed_classes, 1);
        assert_eq!(r.k_prime, 1);
        for b in r.code.messages() {
            let cw = r.code.encode_unchecked(&b);
            assert_eq!(&cw[..3], &[0, 0, 0]);
            assert_eq!(cw, c.encode_unchecked(&r.lift(&b)));
        }
    }

    fn t_index(t: Target) -> usize {
        match t {
            Target::Message(i) | Target::Codeword(i) => i,
        }
    }

    /// Random complete two-query decoders.
    fn random_instance(seed: u64, mode: ReductionMode) -> Option<(LinearCode, NonadaptiveDecoder, Prob)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let field = if rng.gen_bool(0.5) { Field::f2() } else { Field::prime(3).unwrap() };
        let k = rng.gen_range(1..=3);
        let n = rng.gen_range(k + 1..=6);
        // pad with repeated rows so fixed sets are not all tiny
        let mut code = LinearCode::random(field, k, n, &mut rng);
        if rng.gen_bool(0.5) {
            let mut rows = code.rows().to_vec();
            rows.push(code.row(0).to_vec());
            code = LinearCode::new(field, k, rows).ok()?;
        }
        let mut m = BTreeMap::new();
        let targets = match mode {
            ReductionMode::Decoding => Target::all_messages(&code),
            ReductionMode::Correcting => Target::all_codeword(&code),
        };
        for t in targets {
            let v = t.vstar(&code);
            let n = code.n();
            let sets: Vec<Vec<usize>> = (0..n)
                .flat_map(|a| (a + 1..n).map(move |b| vec![a, b]))
                .filter(|s| code.in_span(&v, s).is_some())
                .collect();
            if sets.is_empty() {
                return None;
            }
            let pick: Vec<Vec<usize>> = sets.into_iter().filter(|_| rng.gen_bool(0.6)).collect();
            if pick.is_empty() {
                return None;
            }
            m.insert(t, QueryDistribution::uniform(pick).unwrap());
        }
        let d = NonadaptiveDecoder::new(&code, 2, DecodeRule::Canonical, m).unwrap();
        let delta = prob(rng.gen_range(1..=3), 4);
        Some((code, d, delta))
    }

    fn check_reduction(code: &LinearCode, d: &NonadaptiveDecoder, delta: &Prob, mode: ReductionMode) -> bool {
        let s = eval(d, code, Mode::Exact { budget: 1 << 24 }, &Exhaustive, delta)
            .unwrap()
            .soundness_error
            .exact()
            .unwrap();
        let r = match reduce(code, d, delta, mode) {
            Ok(r) => r,
            Err(ReductionError::NoHadamard(_)) => {
                // only possible for a useless decoder
                assert_eq!(s, prob(1, 1));
                return false;
            }
            Err(ReductionError::Empty) => return false,
            Err(e) => panic!("{e}"),
        };
        let bound = (prob(2, 1) / delta).floor().to_integer() as usize;
        if mode == ReductionMode::Decoding {
            assert!(r.removed.len() <= bound);
        }
        assert!(r.k_prime + bound >= r.k);
        let rep = eval(&r.decoder, &r.code, Mode::Exact { budget: 1 << 24 }, &Exhaustive, &r.delta).unwrap();
        assert_eq!(rep.completeness.exact(), Some(prob(1, 1)));
        assert!(rep.strict_error.exact().unwrap() <= s, "reduced error above {s}");
        // never ⊥, on any word at all
        for t in r.decoder.targets() {
            for y in all_vectors(r.code.field(), r.code.n()) {
                assert_eq!(r.decoder.distribution(t, &y).prob(Outcome::Bottom), prob(0, 1));
            }
        }
        true
    }

    #[test]
    fn random_decoding_reductions() {
        let mut done = 0;
        for seed in 0..400 {
            if let Some((c, d, delta)) = random_instance(seed, ReductionMode::Decoding) {
                if check_reduction(&c, &d, &delta, ReductionMode::Decoding) {
                    done += 1;
                }
            }
            if done == 25 {
                break;
            }
        }
        assert!(done >= 20, "{done} instances");
    }

    #[test]
    fn random_correcting_reductions() {
        let mut done = 0;
        for seed in 0..400 {
            if let Some((c, d, delta)) = random_instance(seed, ReductionMode::Correcting) {
                if check_reduction(&c, &d, &delta, ReductionMode::Correcting) {
                    done += 1;
                }
            }
            if done == 25 {
                break;
            }
        }
        assert!(done >= 20, "{done} instances");
    }

    #[test]
    fn fixed_sets_are_disjoint_across_messages() {
        for seed in 0..200 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let field = [Field::f2(), Field::prime(3).unwrap(), Field::binary(2).unwrap()][rng.gen_range(0..3)];
            let k = rng.gen_range(1..=4);
            let code = LinearCode::random(field, k, rng.gen_range(k..=8), &mut rng);
            assert!(fixed_classes(&code, ReductionMode::Decoding).is_ok());
            assert!(fixed_classes(&code, ReductionMode::Correcting).is_ok());
        }
    }
}
