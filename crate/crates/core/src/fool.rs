//! The fooling adversary: corruptions supported on heavy coordinates that
//! make a canonical decoder answer a chosen wrong value.

use num_traits::{One, Zero};
use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde_json::{json, Value};
use thiserror::Error;

use crate::codealg::{kernel, quotient_dim, solve, CodeError, LinearCode, Scalar, Subspace};
use crate::decoder::{DecoderError, LocalDecoder, NonadaptiveDecoder, Target};
use crate::report::{inv_pow, prob_json, trial_rng, Estimate, Prob, SCHEMA};
use crate::smooth::extract_smooth;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FoolError {
    #[error("decoding vector lies in the span of the light rows")]
    Hypothesis,
    #[error("heavy and light parts must partition the query set")]
    Partition,
    #[error("exact enumeration needs {needed} points, budget is {budget}")]
    Budget { needed: u128, budget: u128 },
    #[error(transparent)]
    Code(#[from] CodeError),
    #[error(transparent)]
    Decoder(#[from] DecoderError),
}

/// One query set split into heavy and light coordinates, plus the value the
/// adversary wants the decoder to report.
#[derive(Debug, Clone)]
pub struct FoolingInstance<'a> {
    pub code: &'a LinearCode,
    pub set: Vec<usize>,
    pub heavy: Vec<usize>,
    pub light: Vec<usize>,
    pub vstar: Vec<Scalar>,
    pub sigma: Scalar,
    pub base: Vec<Scalar>,
}

impl<'a> FoolingInstance<'a> {
    pub fn new(
        code: &'a LinearCode,
        heavy: Vec<usize>,
        light: Vec<usize>,
        vstar: Vec<Scalar>,
        sigma: Scalar,
        base: Vec<Scalar>,
    ) -> Result<Self, FoolError> {
        let mut set: Vec<usize> = heavy.iter().chain(&light).copied().collect();
        set.sort_unstable();
        if set.windows(2).any(|w| w[0] == w[1]) || set.last().is_some_and(|&j| j >= code.n()) {
            return Err(FoolError::Partition);
        }
        if vstar.len() != code.k() || base.len() != code.k() {
            return Err(CodeError::Length {
                got: vstar.len().min(base.len()),
                expected: code.k(),
            }
            .into());
        }
        if code.in_span(&vstar, &light).is_some() {
            return Err(FoolError::Hypothesis);
        }
        Ok(FoolingInstance {
            code,
            set,
            heavy,
            light,
            vstar,
            sigma,
            base,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoolingAnalysis {
    /// Subspace of `F^H`: restrictions of dual vectors of the zero-target codewords.
    pub v: Subspace,
    /// Same, for zero-target codewords that also vanish on the light part.
    pub w: Subspace,
    pub quotient: usize,
    /// A message agreeing with the base on the light part and carrying the target value.
    pub shift: Vec<Scalar>,
}

impl FoolingAnalysis {
    pub fn lower_bound(&self, field_size: u32) -> Prob {
        inv_pow(field_size as u64, self.quotient as u32)
    }
}

/// Codewords `C(b)` for `b` in the kernel of `constraints`, as a subspace of `F^n`.
fn codewords_in_kernel(code: &LinearCode, constraints: &[Vec<Scalar>]) -> Subspace {
    let ker = kernel(code.field(), constraints, code.k());
    Subspace::span(*code.field(), code.n(), ker.iter().map(|b| code.encode_unchecked(b)).collect())
}

pub fn analyze(inst: &FoolingInstance) -> Result<FoolingAnalysis, FoolError> {
    let code = inst.code;
    let f = code.field();
    let v0 = codewords_in_kernel(code, std::slice::from_ref(&inst.vstar));
    let mut cons = vec![inst.vstar.clone()];
    cons.extend(inst.light.iter().map(|&j| code.row(j).to_vec()));
    let w0 = codewords_in_kernel(code, &cons);
    let v = v0.dual().support_subcode(&inst.heavy).restrict(&inst.heavy);
    let w = w0.dual().support_subcode(&inst.heavy).restrict(&inst.heavy);
    let quotient = quotient_dim(&w, &v)?;
    assert!(
        quotient <= inst.heavy.len().min(inst.light.len()),
        "quotient dimension {quotient} exceeds min(|H|, |L|)"
    );
    let mut rows: Vec<Vec<Scalar>> = inst.light.iter().map(|&j| code.row(j).to_vec()).collect();
    let mut rhs = code.encode_at(&inst.base, &inst.light);
    rows.push(inst.vstar.clone());
    rhs.push(inst.sigma);
    let shift = solve(f, &rows, &rhs, code.k()).ok_or(FoolError::Hypothesis)?;
    Ok(FoolingAnalysis { v, w, quotient, shift })
}

/// `C(base)` with the coordinates in `heavy` replaced by `C(other)`.
pub fn splice(code: &LinearCode, base: &[Scalar], other: &[Scalar], heavy: &[usize]) -> Vec<Scalar> {
    let mut y = code.encode_unchecked(base);
    for &j in heavy {
        y[j] = code.field().dot(code.row(j), other);
    }
    y
}

/// Draws `b'` uniformly with `<v*, b'> = σ` and splices `C(b')` onto `heavy_global`.
pub fn sample_fooling_word(inst: &FoolingInstance, heavy_global: &[usize], rng: &mut dyn RngCore) -> Vec<Scalar> {
    let b2 = inst
        .code
        .random_codeword_constrained(&inst.vstar, inst.sigma, rng)
        .expect("nonzero decoding vector");
    splice(inst.code, &inst.base, &b2, heavy_global)
}

/// Whether some message with target value σ matches `y` on the query set.
pub fn fooled(inst: &FoolingInstance, y: &[Scalar]) -> bool {
    let mut rows: Vec<Vec<Scalar>> = inst.set.iter().map(|&j| inst.code.row(j).to_vec()).collect();
    let mut rhs: Vec<Scalar> = inst.set.iter().map(|&j| y[j]).collect();
    rows.push(inst.vstar.clone());
    rhs.push(inst.sigma);
    solve(inst.code.field(), &rows, &rhs, inst.code.k()).is_some()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SuccessMode {
    Exact { budget: u128 },
    LowerBound,
}

/// Probability over `b'` that the spliced word is consistent with σ on the query set.
pub fn success_probability(inst: &FoolingInstance, mode: SuccessMode) -> Result<Prob, FoolError> {
    match mode {
        SuccessMode::LowerBound => Ok(analyze(inst)?.lower_bound(inst.code.field().size())),
        SuccessMode::Exact { budget } => {
            let needed = (inst.code.field().size() as u128).saturating_pow(inst.code.k() as u32 - 1);
            if needed > budget {
                return Err(FoolError::Budget { needed, budget });
            }
            let points = inst.code.hyperplane_points(&inst.vstar, inst.sigma)?;
            let hits = points
                .iter()
                .filter(|b2| fooled(inst, &splice(inst.code, &inst.base, b2, &inst.heavy)))
                .count();
            Ok(Prob::new(hits as i128, points.len() as i128))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttackMode {
    Exact { budget: u128 },
    Sampled { trials: u64, seed: u64 },
}

/// Fooling analysis of one non-smoothable query set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BadSet {
    pub set: Vec<usize>,
    pub weight: Prob,
    pub heavy: Vec<usize>,
    pub light: Vec<usize>,
    pub quotient: usize,
    /// Canonical error of this set alone on the witness word.
    pub witness_error: Prob,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackReport {
    pub target: Target,
    pub heavy: Vec<usize>,
    /// `|F|^{-⌊q/2⌋}`.
    pub bound: Prob,
    /// Average error of the non-smoothable part over the corruption distribution.
    pub mean: AttackMean,
    /// Largest error of the non-smoothable part on a single word, and that word.
    pub best: Prob,
    pub witness: Vec<Scalar>,
    /// Error of the whole decoder on the witness.
    pub full_error: Prob,
    pub bad_sets: Vec<BadSet>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AttackMean {
    Exact(Prob),
    Sampled { mean: f64, half_width: f64, trials: u64 },
}

impl AttackReport {
    /// Whether the averaged error reaches the bound (within 3σ when sampled).
    pub fn meets_bound(&self) -> bool {
        match &self.mean {
            AttackMean::Exact(p) => *p >= self.bound,
            AttackMean::Sampled { mean, half_width, .. } => mean + half_width >= crate::report::to_f64(&self.bound),
        }
    }

    pub fn json(&self) -> Value {
        let mean = match &self.mean {
            AttackMean::Exact(p) => prob_json(p),
            AttackMean::Sampled { mean, half_width, trials } => {
                json!({ "mean": mean, "half_width": half_width, "trials": trials })
            }
        };
        json!({
            "schema": SCHEMA,
            "kind": "attack",
            "target": self.target.to_string(),
            "heavy": one_based(&self.heavy),
            "bound": prob_json(&self.bound),
            "mean": mean,
            "best": prob_json(&self.best),
            "witness": self.witness,
            "full_error": prob_json(&self.full_error),
            "meets_bound": self.meets_bound(),
        })
    }

    /// One line per non-smoothable set.
    pub fn set_lines(&self) -> Vec<Value> {
        self.bad_sets
            .iter()
            .map(|b| {
                json!({
                    "schema": SCHEMA,
                    "kind": "bad_set",
                    "target": self.target.to_string(),
                    "Q": one_based(&b.set),
                    "H": one_based(&b.heavy),
                    "L": one_based(&b.light),
                    "weight": prob_json(&b.weight),
                    "quotient": b.quotient,
                    "y": self.witness,
                    "exact_error": prob_json(&b.witness_error),
                })
            })
            .collect()
    }
}

fn one_based(v: &[usize]) -> Vec<usize> {
    v.iter().map(|j| j + 1).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum AttackOutcome {
    /// Every query set is smoothable; the decoder is already smooth.
    NoAttack { target: Target },
    Attack(Box<AttackReport>),
}

/// Runs the fooling distribution against the non-smoothable part of `decoder`
/// for `target`, starting from the codeword `C(base)`.
pub fn attack_rldc(
    decoder: &NonadaptiveDecoder,
    code: &LinearCode,
    target: Target,
    base: &[Scalar],
    delta: &Prob,
    mode: AttackMode,
) -> Result<AttackOutcome, FoolError> {
    let ex = extract_smooth(decoder, code, delta)?;
    let part = &ex.partitions[&target];
    let Some(_) = ex.rldc_part.query_distribution(target) else {
        return Ok(AttackOutcome::NoAttack { target });
    };
    let field = *code.field();
    let vstar = target.vstar(code);
    let truth = target.truth(code, base);
    let heavy = part.heavy.clone();
    let bad = &ex.rldc_part;
    let err_at = |y: &[Scalar]| bad.distribution(target, y).error(truth);
    let wrong: Vec<Scalar> = field.elements().filter(|&s| s != truth).collect();

    let (mean, best, witness) = match mode {
        AttackMode::Exact { budget } => {
            let per = (field.size() as u128).saturating_pow(code.k() as u32 - 1);
            let needed = per.saturating_mul(wrong.len() as u128);
            if needed > budget {
                return Err(FoolError::Budget { needed, budget });
            }
            let mut words = Vec::new();
            for &s in &wrong {
                for b2 in code.hyperplane_points(&vstar, s)? {
                    words.push(splice(code, base, &b2, &heavy));
                }
            }
            let errs: Vec<Prob> = words.par_iter().map(|y| err_at(y)).collect();
            let total = errs.iter().fold(Prob::zero(), |a, e| a + e);
            let (best, witness) = pick_best(words.into_iter().zip(errs));
            (AttackMean::Exact(total / Prob::from_integer(needed as i128)), best, witness)
        }
        AttackMode::Sampled { trials, seed } => {
            let draws: Vec<(Vec<Scalar>, Prob)> = (0..trials)
                .into_par_iter()
                .map(|i| {
                    let mut rng = trial_rng(seed, i);
                    let s = wrong[rng.gen_range(0..wrong.len())];
                    let b2 = code.random_codeword_constrained(&vstar, s, &mut rng).expect("nonzero");
                    let y = splice(code, base, &b2, &heavy);
                    let e = err_at(&y);
                    (y, e)
                })
                .collect();
            let sum: f64 = draws.iter().map(|(_, e)| crate::report::to_f64(e)).sum();
            let sq: f64 = draws.iter().map(|(_, e)| crate::report::to_f64(e).powi(2)).sum();
            let n = trials.max(1) as f64;
            let mean = sum / n;
            let var = (sq / n - mean * mean).max(0.0);
            let (best, witness) = pick_best(draws.into_iter());
            (
                AttackMean::Sampled {
                    mean,
                    half_width: 3.0 * (var / n).sqrt(),
                    trials,
                },
                best,
                witness,
            )
        }
    };

    let bad_sets = bad
        .branches(target)
        .iter()
        .map(|br| {
            let (h, l): (Vec<usize>, Vec<usize>) = br.set.iter().partition(|j| heavy.contains(j));
            let inst = FoolingInstance::new(code, h.clone(), l.clone(), vstar.clone(), wrong[0], base.to_vec())?;
            let a = analyze(&inst)?;
            let out = bad.decode_branch(br, &witness);
            let werr = match out {
                crate::decoder::Outcome::Value(v) if v != truth => Prob::one(),
                _ => Prob::zero(),
            };
            Ok(BadSet {
                set: br.set.clone(),
                weight: br.weight,
                heavy: h,
                light: l,
                quotient: a.quotient,
                witness_error: werr,
            })
        })
        .collect::<Result<Vec<_>, FoolError>>()?;

    let full_error = decoder.distribution(target, &witness).error(truth);
    Ok(AttackOutcome::Attack(Box::new(AttackReport {
        target,
        heavy,
        bound: inv_pow(field.size() as u64, (decoder.q() / 2) as u32),
        mean,
        best,
        witness,
        full_error,
        bad_sets,
    })))
}

/// Maximum error, lexicographically smallest word on ties.
fn pick_best(it: impl Iterator<Item = (Vec<Scalar>, Prob)>) -> (Prob, Vec<Scalar>) {
    let mut best: Option<(Prob, Vec<Scalar>)> = None;
    for (y, e) in it {
        let better = match &best {
            None => true,
            Some((be, by)) => e > *be || (e == *be && y < *by),
        };
        if better {
            best = Some((e, y));
        }
    }
    let (e, y) = best.expect("at least one corrupted word");
    (e, y)
}

/// Exact success probability for a sampled estimate's sanity check.
pub fn estimate_success(inst: &FoolingInstance, trials: u64, seed: u64) -> Estimate {
    let hits = (0..trials)
        .into_par_iter()
        .filter(|&i| {
            let mut rng = trial_rng(seed, i);
            fooled(inst, &sample_fooling_word(inst, &inst.heavy, &mut rng))
        })
        .count() as u64;
    Estimate { hits, trials }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codealg::{distance, Field};
    use crate::decoder::{DecodeRule, QueryDistribution};
    use crate::report::prob;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;

    fn toy() -> LinearCode {
        LinearCode::new(Field::f2(), 2, vec![vec![1, 0], vec![0, 1], vec![1, 1]]).unwrap()
    }

    fn inst(code: &LinearCode, heavy: Vec<usize>, light: Vec<usize>) -> Result<FoolingInstance<'_>, FoolError> {
        FoolingInstance::new(code, heavy, light, vec![1, 0], 1, vec![0, 0])
    }

    #[test]
    fn analyze_examples() {
        let c = toy();
        let i = inst(&c, vec![0, 2], vec![1]).unwrap();
        let a = analyze(&i).unwrap();
        assert_eq!(a.v, Subspace::span(Field::f2(), 2, vec![vec![1, 0]]));
        assert_eq!(a.w, Subspace::full(Field::f2(), 2));
        assert_eq!(a.quotient, 1);
        let i = inst(&c, vec![0, 1, 2], vec![]).unwrap();
        assert_eq!(analyze(&i).unwrap().quotient, 0);
        assert_eq!(success_probability(&i, SuccessMode::Exact { budget: 100 }).unwrap(), prob(1, 1));
        assert!(matches!(inst(&c, vec![1], vec![0, 2]), Err(FoolError::Hypothesis)));
        assert!(matches!(inst(&c, vec![0, 1], vec![1]), Err(FoolError::Partition)));
    }

    #[test]
    fn splice_examples() {
        let c = toy();
        assert_eq!(splice(&c, &[0, 0], &[1, 0], &[0, 2]), vec![1, 0, 1]);
        assert_eq!(splice(&c, &[0, 0], &[1, 1], &[0, 2]), vec![1, 0, 0]);
        let i = inst(&c, vec![0, 2], vec![1]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let y = sample_fooling_word(&i, &[0, 2], &mut rng);
            assert!(y == vec![1, 0, 1] || y == vec![1, 0, 0]);
        }
    }

    #[test]
    fn success_examples() {
        let c = toy();
        let i = inst(&c, vec![0, 2], vec![1]).unwrap();
        assert_eq!(success_probability(&i, SuccessMode::Exact { budget: 100 }).unwrap(), prob(1, 2));
        assert_eq!(success_probability(&i, SuccessMode::LowerBound).unwrap(), prob(1, 2));
        assert!(fooled(&i, &[1, 0, 1]));
        assert!(!fooled(&i, &[1, 0, 0]));
        let est = estimate_success(&i, 4000, 9);
        assert!((est.mean() - 0.5).abs() <= est.half_width());
    }

    fn decoder(code: &LinearCode, q: usize, sets: Vec<(Vec<usize>, Prob)>) -> NonadaptiveDecoder {
        let mut m = BTreeMap::new();
        m.insert(Target::Message(0), QueryDistribution::new(sets).unwrap());
        NonadaptiveDecoder::new(code, q, DecodeRule::Canonical, m).unwrap()
    }

    fn run(d: &NonadaptiveDecoder, c: &LinearCode, delta: Prob) -> AttackReport {
        match attack_rldc(d, c, Target::Message(0), &vec![0; c.k()], &delta, AttackMode::Exact { budget: 1 << 16 }).unwrap() {
            AttackOutcome::Attack(r) => *r,
            AttackOutcome::NoAttack { .. } => panic!("expected an attack"),
        }
    }

    #[test]
    fn attack_examples() {
        let c = toy();
        // both coordinates read with probability 1 > 2/3 are heavy
        let d = decoder(&c, 2, vec![(vec![0, 1], prob(1, 1))]);
        let r = run(&d, &c, prob(1, 1));
        assert_eq!(r.heavy, vec![0, 1]);
        assert_eq!(r.mean, AttackMean::Exact(prob(1, 1)));
        assert!(r.meets_bound());
        assert_eq!(r.best, prob(1, 1));
        assert!(distance(&r.witness, &c.encode_unchecked(&[0, 0])) <= r.heavy.len());
        let smooth = decoder(&c, 2, vec![(vec![1, 2], prob(1, 1))]);
        assert!(matches!(
            attack_rldc(&smooth, &c, Target::Message(0), &[0, 0], &prob(1, 3), AttackMode::Exact { budget: 100 }).unwrap(),
            AttackOutcome::NoAttack { .. }
        ));
    }

    #[test]
    fn sum_casework() {
        // heavy (1,1) plus one light copy of e2: only their sum gives e1
        let mut rows = vec![vec![1, 1]];
        rows.extend(std::iter::repeat(vec![0, 1]).take(4));
        let c = LinearCode::new(Field::f2(), 2, rows).unwrap();
        let d = decoder(&c, 2, (1..5).map(|j| (vec![0, j], prob(1, 4))).collect());
        let r = run(&d, &c, prob(1, 2));
        assert_eq!(r.heavy, vec![0]);
        assert_eq!(r.mean, AttackMean::Exact(prob(1, 2)));
        assert!(r.bad_sets.iter().all(|b| b.quotient == 1));
    }

    #[test]
    fn sampled_attack_is_deterministic() {
        let c = toy();
        let d = decoder(&c, 2, vec![(vec![0, 1], prob(1, 1))]);
        let mode = AttackMode::Sampled { trials: 50, seed: 4 };
        let a = attack_rldc(&d, &c, Target::Message(0), &[1, 1], &prob(1, 1), mode).unwrap();
        let b = attack_rldc(&d, &c, Target::Message(0), &[1, 1], &prob(1, 1), mode).unwrap();
        assert_eq!(a, b);
    }

    pub(crate) fn random_instance(seed: u64) -> Option<(LinearCode, Vec<usize>, Vec<usize>, Vec<Scalar>, Scalar, Vec<Scalar>)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let field = [Field::f2(), Field::prime(3).unwrap(), Field::binary(2).unwrap()][rng.gen_range(0..3)];
        let k = rng.gen_range(1..=4);
        let n = rng.gen_range(k..=7);
        let code = LinearCode::random(field, k, n, &mut rng);
        let size = rng.gen_range(1..=n.min(5));
        let mut coords: Vec<usize> = (0..n).collect();
        rand::seq::SliceRandom::shuffle(coords.as_mut_slice(), &mut rng);
        let set = &coords[..size];
        let split = rng.gen_range(0..=size);
        let heavy = set[..split].to_vec();
        let light = set[split..].to_vec();
        let mut vstar = field.random_vector(k, &mut rng);
        if vstar.iter().all(|&x| x == 0) {
            vstar[0] = 1;
        }
        if code.in_span(&vstar, &light).is_some() {
            return None;
        }
        let sigma = field.sample(&mut rng);
        let base = field.random_vector(k, &mut rng);
        Some((code, heavy, light, vstar, sigma, base))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn fooling_bounds(seed in any::<u64>()) {
            let Some((code, heavy, light, vstar, sigma, base)) = random_instance(seed) else { return Ok(()); };
            let i = FoolingInstance::new(&code, heavy.clone(), light.clone(), vstar.clone(), sigma, base.clone()).unwrap();
            let a = analyze(&i).unwrap();
            prop_assert!(a.v.is_subspace_of(&a.w));
            prop_assert!(a.quotient <= heavy.len().min(light.len()));
            prop_assert_eq!(code.encode_at(&a.shift, &light), code.encode_at(&base, &light));
            prop_assert_eq!(code.field().dot(&vstar, &a.shift), sigma);
            let exact = success_probability(&i, SuccessMode::Exact { budget: 1 << 16 }).unwrap();
            // the bound is attained exactly
            prop_assert_eq!(exact, a.lower_bound(code.field().size()));
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
            let y = sample_fooling_word(&i, &heavy, &mut rng);
            prop_assert!(distance(&y, &code.encode_unchecked(&base)) <= heavy.len());
        }
    }
}
