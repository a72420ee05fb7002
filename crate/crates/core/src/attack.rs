//! Erasure attack on the line code viewed as a plain locally decodable code.
//!
//! Erasing every line through `x*` leaves a decoder that reads whole lines
//! with at most `d` useful answers. Those answers are unchanged when `f` is
//! shifted by any multiple of a degree-`≤ d` polynomial vanishing on the
//! queried lines and equal to 1 at `x*`, while the target bit of the shift
//! is balanced. So every such decoder is right with probability exactly 1/2
//! over a uniform `f`.

use std::collections::BTreeSet;

use rand::Rng;
use rayon::prelude::*;
use serde_json::{json, Value};
use thiserror::Error;

use crate::gf::FieldElement;
use crate::linecode::{LineCodeError, LineCodeParams, LineCodeword, Poly};
use crate::report::{prob, prob_json, trial_rng, Estimate, Prob};

/// Largest polynomial space the exact experiment and the consistency-based
/// decoders enumerate.
pub const MAX_POLYS: u64 = 1 << 16;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AttackError {
    #[error("point {point:#x} lies on line {line}")]
    OnLine { point: u64, line: usize },
    #[error("{got} lines given, degree budget is {d}")]
    TooManyLines { got: usize, d: u32 },
    #[error("decoder {name} made {got} line queries, budget is {budget}")]
    QueryBudget { name: String, got: usize, budget: usize },
    #[error("{0} polynomials exceed the enumeration budget")]
    Budget(u128),
    #[error("target coefficient must be nonzero")]
    ZeroAlpha,
    #[error(transparent)]
    LineCode(#[from] LineCodeError),
}

/// A set of erased lines.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ErasurePattern {
    pub lines: BTreeSet<usize>,
    total: usize,
}

impl ErasurePattern {
    pub fn none(params: &LineCodeParams) -> Self {
        ErasurePattern { lines: BTreeSet::new(), total: params.lines().len() }
    }

    /// Fraction of lines (equivalently of codeword bits) erased.
    pub fn fraction(&self) -> Prob {
        prob(self.lines.len() as i128, self.total as i128)
    }

    pub fn apply(&self, word: &LineCodeword) -> LineCodeword {
        let mut out = word.clone();
        out.erased.extend(self.lines.iter().copied());
        out
    }
}

/// All lines through `x`.
pub fn erase_through(params: &LineCodeParams, x: u64) -> Result<ErasurePattern, AttackError> {
    if x >= params.point_count() {
        return Err(LineCodeError::Point(x).into());
    }
    let pat = ErasurePattern {
        lines: params.lines_through(x).iter().copied().collect(),
        total: params.lines().len(),
    };
    // (2^{tn} - 1)/(2^t - 1) of the lines, i.e. a 2^{-t(n-1)} fraction
    let expected = prob(1, 1i128 << (params.t() * (params.n() - 1)));
    assert_eq!(pat.fraction(), expected, "through-point erasure fraction");
    Ok(pat)
}

fn dot(params: &LineCodeParams, a: u64, b: u64) -> FieldElement {
    let f = params.field();
    (0..params.n()).fold(FieldElement::ZERO, |acc, i| f.add(acc, f.mul(params.coord(a, i), params.coord(b, i))))
}

/// Polynomial of degree `lines.len()` equal to 1 at `x` and vanishing on
/// every given line. Each factor uses the least `v` orthogonal to the line
/// direction but not to `x - base`.
pub fn separating_poly(params: &LineCodeParams, x: u64, lines: &[usize]) -> Result<Poly, AttackError> {
    if x >= params.point_count() {
        return Err(LineCodeError::Point(x).into());
    }
    if lines.len() > params.d() as usize {
        return Err(AttackError::TooManyLines { got: lines.len(), d: params.d() });
    }
    if lines.is_empty() {
        return Ok(Poly::constant(params, FieldElement::ONE));
    }
    let field = params.field();
    let linear_pos: Vec<usize> = (0..params.n() as usize)
        .map(|i| {
            params
                .monomials()
                .iter()
                .position(|m| m.iter().enumerate().all(|(j, &e)| e == (i == j) as u32))
                .expect("degree-one monomials exist when d >= 1")
        })
        .collect();
    let mut g = Poly::constant(params, FieldElement::ONE);
    for &idx in lines {
        let l = params.lines().get(idx).ok_or(LineCodeError::Index { got: idx, limit: params.lines().len() })?;
        if params.contains(l, x) {
            return Err(AttackError::OnLine { point: x, line: idx });
        }
        let off = x ^ l.base;
        let v = (1..params.point_count())
            .find(|&v| dot(params, l.dir, v).is_zero() && !dot(params, off, v).is_zero())
            .expect("x off the line is separated by some functional");
        let c = field.inv(dot(params, off, v)).map_err(LineCodeError::from)?;
        let mut factor = Poly::constant(params, field.mul(dot(params, l.base, v), c));
        for (i, &pos) in linear_pos.iter().enumerate() {
            factor.coeffs[pos] = field.mul(params.coord(v, i as u32), c);
        }
        g = g.mul(params, &factor).expect("degree stays within d");
    }
    Ok(g)
}

/// The bit a decoder is asked for: `π(α f(x))_i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BitTarget {
    pub x: u64,
    pub alpha: FieldElement,
    pub i: usize,
}

impl BitTarget {
    pub fn truth(&self, params: &LineCodeParams, f: &Poly) -> u8 {
        (params.field().mul(self.alpha, f.eval(params, self.x)).0 >> self.i) as u8 & 1
    }
}

/// Answer to a line query: `f` on the whole line in parameter order, or
/// `None` when the line is erased.
pub type LineAnswer = Option<Vec<FieldElement>>;

/// A line-query decoder given as a strategy: the next line to read from the
/// transcript so far, and the output once it stops. A randomized decoder
/// is a uniform mixture over `coins()` deterministic trees.
pub trait LineQueryDecoder: Sync {
    fn name(&self) -> String;

    fn coins(&self) -> u64 {
        1
    }

    fn next_query(
        &self,
        params: &LineCodeParams,
        target: &BitTarget,
        coin: u64,
        transcript: &[(usize, LineAnswer)],
    ) -> Option<usize>;

    fn output(&self, params: &LineCodeParams, target: &BitTarget, coin: u64, transcript: &[(usize, LineAnswer)]) -> u8;
}

/// Transcript and output of one run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineRun {
    pub transcript: Vec<(usize, LineAnswer)>,
    pub output: u8,
}

pub fn answer(params: &LineCodeParams, f: &Poly, erased: &ErasurePattern, line: usize) -> LineAnswer {
    if erased.lines.contains(&line) {
        return None;
    }
    Some(params.points(&params.line(line)).into_iter().map(|z| f.eval(params, z)).collect())
}

/// Runs one tree; a path longer than `d` line queries is rejected.
pub fn run_decoder(
    decoder: &dyn LineQueryDecoder,
    params: &LineCodeParams,
    f: &Poly,
    erased: &ErasurePattern,
    target: &BitTarget,
    coin: u64,
) -> Result<LineRun, AttackError> {
    let budget = params.d() as usize;
    let mut transcript = Vec::new();
    while let Some(line) = decoder.next_query(params, target, coin, &transcript) {
        if transcript.len() == budget {
            return Err(AttackError::QueryBudget { name: decoder.name(), got: budget + 1, budget });
        }
        if line >= params.lines().len() {
            return Err(LineCodeError::Index { got: line, limit: params.lines().len() }.into());
        }
        transcript.push((line, answer(params, f, erased, line)));
    }
    let output = decoder.output(params, target, coin, &transcript);
    Ok(LineRun { transcript, output })
}

/// Always outputs the same bit.
pub struct ConstantDecoder(pub u8);

impl LineQueryDecoder for ConstantDecoder {
    fn name(&self) -> String {
        format!("constant-{}", self.0)
    }
    fn next_query(&self, _: &LineCodeParams, _: &BitTarget, _: u64, _: &[(usize, LineAnswer)]) -> Option<usize> {
        None
    }
    fn output(&self, _: &LineCodeParams, _: &BitTarget, _: u64, _: &[(usize, LineAnswer)]) -> u8 {
        self.0
    }
}

fn all_polys(params: &LineCodeParams) -> Vec<Poly> {
    let count = Poly::count(params).filter(|&c| c <= MAX_POLYS).expect("polynomial space checked by caller");
    (0..count).map(|i| Poly::nth(params, i)).collect()
}

fn consistent<'a>(
    params: &LineCodeParams,
    polys: &'a [Poly],
    transcript: &[(usize, LineAnswer)],
) -> Vec<&'a Poly> {
    polys
        .iter()
        .filter(|p| {
            transcript.iter().all(|(l, ans)| match ans {
                None => true,
                Some(vals) => params.points(&params.line(*l)).into_iter().zip(vals).all(|(z, v)| p.eval(params, z) == *v),
            })
        })
        .collect()
}

fn check_enumerable(params: &LineCodeParams) -> Result<(), AttackError> {
    match Poly::count(params) {
        Some(c) if c <= MAX_POLYS => Ok(()),
        _ => Err(AttackError::Budget(
            (params.field_size() as u128).saturating_pow(params.monomials().len() as u32),
        )),
    }
}

/// Reads the first `d` lines avoiding `x*` and outputs the target bit of
/// the least polynomial agreeing with every answer.
pub struct InterpolatingDecoder {
    polys: Vec<Poly>,
}

impl InterpolatingDecoder {
    pub fn new(params: &LineCodeParams) -> Result<Self, AttackError> {
        check_enumerable(params)?;
        Ok(InterpolatingDecoder { polys: all_polys(params) })
    }
}

impl LineQueryDecoder for InterpolatingDecoder {
    fn name(&self) -> String {
        "interpolating".into()
    }
    fn next_query(&self, params: &LineCodeParams, target: &BitTarget, _: u64, transcript: &[(usize, LineAnswer)]) -> Option<usize> {
        if transcript.len() >= params.d() as usize {
            return None;
        }
        (0..params.lines().len())
            .filter(|&l| !params.contains(&params.line(l), target.x))
            .nth(transcript.len())
    }
    fn output(&self, params: &LineCodeParams, target: &BitTarget, _: u64, transcript: &[(usize, LineAnswer)]) -> u8 {
        consistent(params, &self.polys, transcript).first().map_or(0, |p| target.truth(params, p))
    }
}

/// Adaptive: each step reads the unread line that splits the surviving
/// polynomials into the most distinct answers, then outputs the majority
/// target bit among survivors (0 on ties). A random coin picks among lines
/// through `x*` as the first query, so it also wastes queries on erasures.
pub struct GreedyDecoder {
    polys: Vec<Poly>,
}

impl GreedyDecoder {
    pub fn new(params: &LineCodeParams) -> Result<Self, AttackError> {
        check_enumerable(params)?;
        Ok(GreedyDecoder { polys: all_polys(params) })
    }
}

impl LineQueryDecoder for GreedyDecoder {
    fn name(&self) -> String {
        "greedy-consistency".into()
    }
    fn coins(&self) -> u64 {
        2
    }
    fn next_query(&self, params: &LineCodeParams, target: &BitTarget, coin: u64, transcript: &[(usize, LineAnswer)]) -> Option<usize> {
        if transcript.len() >= params.d() as usize {
            return None;
        }
        if coin == 1 && transcript.is_empty() {
            return params.lines_through(target.x).first().copied();
        }
        let alive = consistent(params, &self.polys, transcript);
        let asked: BTreeSet<usize> = transcript.iter().map(|e| e.0).collect();
        (0..params.lines().len())
            .filter(|l| !asked.contains(l))
            .max_by_key(|&l| {
                let pts = params.points(&params.line(l));
                let answers: BTreeSet<Vec<FieldElement>> =
                    alive.iter().map(|p| pts.iter().map(|&z| p.eval(params, z)).collect()).collect();
                // max_by_key keeps the last maximum; prefer the lowest index
                (answers.len(), std::cmp::Reverse(l))
            })
    }
    fn output(&self, params: &LineCodeParams, target: &BitTarget, _: u64, transcript: &[(usize, LineAnswer)]) -> u8 {
        let alive = consistent(params, &self.polys, transcript);
        let ones = alive.iter().filter(|p| target.truth(params, p) == 1).count();
        (2 * ones > alive.len()) as u8
    }
}

/// Reads one line through `x*` and interpolates; outputs 0 on ⊥.
pub struct ThroughPointDecoder;

impl LineQueryDecoder for ThroughPointDecoder {
    fn name(&self) -> String {
        "through-point".into()
    }
    fn next_query(&self, params: &LineCodeParams, target: &BitTarget, _: u64, transcript: &[(usize, LineAnswer)]) -> Option<usize> {
        if !transcript.is_empty() || params.d() == 0 {
            return None;
        }
        params.lines_through(target.x).first().copied()
    }
    fn output(&self, params: &LineCodeParams, target: &BitTarget, _: u64, transcript: &[(usize, LineAnswer)]) -> u8 {
        let Some((l, Some(vals))) = transcript.first() else { return 0 };
        let mu = params.param_of(&params.line(*l), target.x).expect("line passes through x");
        let v = vals[mu.0 as usize];
        (params.field().mul(target.alpha, v).0 >> target.i) as u8 & 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentMode {
    Exact,
    MonteCarlo { trials: u64, seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Success {
    Exact(Prob),
    Estimate(Estimate),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub decoder: String,
    pub erased: bool,
    pub success: Success,
}

impl ExperimentReport {
    pub fn json(&self, params: &LineCodeParams) -> Value {
        let (mode, success) = match &self.success {
            Success::Exact(p) => ("exact", prob_json(p)),
            Success::Estimate(e) => ("monte_carlo", e.json()),
        };
        json!({
            "t": params.t(),
            "n": params.n(),
            "d": params.d(),
            "decoder_name": self.decoder,
            "erased": self.erased,
            "mode": mode,
            "success": success,
        })
    }
}

/// Success probability of `decoder` over uniform `f` and its coins, with
/// every line through `x*` erased when `erase` is set.
pub fn attack_experiment(
    decoder: &dyn LineQueryDecoder,
    params: &LineCodeParams,
    target: BitTarget,
    erase: bool,
    mode: ExperimentMode,
) -> Result<ExperimentReport, AttackError> {
    if target.alpha.is_zero() {
        return Err(AttackError::ZeroAlpha);
    }
    if target.i >= params.t() as usize {
        return Err(LineCodeError::Index { got: target.i, limit: params.t() as usize }.into());
    }
    let pattern = if erase { erase_through(params, target.x)? } else { ErasurePattern::none(params) };
    let coins = decoder.coins();
    let success = match mode {
        ExperimentMode::Exact => {
            check_enumerable(params)?;
            let count = Poly::count(params).expect("checked");
            let hits: Vec<u64> = (0..count)
                .into_par_iter()
                .map(|idx| {
                    let f = Poly::nth(params, idx);
                    let truth = target.truth(params, &f);
                    (0..coins)
                        .map(|c| run_decoder(decoder, params, &f, &pattern, &target, c).map(|r| (r.output == truth) as u64))
                        .sum::<Result<u64, _>>()
                })
                .collect::<Result<_, _>>()?;
            Success::Exact(prob(hits.iter().sum::<u64>() as i128, (count * coins) as i128))
        }
        ExperimentMode::MonteCarlo { trials, seed } => {
            let hits: Vec<u64> = (0..trials)
                .into_par_iter()
                .map(|trial| {
                    let mut rng = trial_rng(seed, trial);
                    let f = Poly::random(params, &mut rng);
                    let coin = rng.gen_range(0..coins);
                    run_decoder(decoder, params, &f, &pattern, &target, coin).map(|r| (r.output == target.truth(params, &f)) as u64)
                })
                .collect::<Result<_, _>>()?;
            Success::Estimate(Estimate { hits: hits.iter().sum(), trials })
        }
    };
    Ok(ExperimentReport { decoder: decoder.name(), erased: erase, success })
}

/// Outcome of the coset check for one `f`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CosetCheck {
    /// Every shift followed the same path to the same output.
    pub same_path: bool,
    /// Number of shifts whose target bit is 1, out of `|F|`.
    pub ones: u64,
}

/// Runs the decoder on every `f + β g` where `g` separates `x*` from the
/// unerased lines it read on `f`.
pub fn coset_check(
    decoder: &dyn LineQueryDecoder,
    params: &LineCodeParams,
    f: &Poly,
    target: &BitTarget,
    coin: u64,
) -> Result<CosetCheck, AttackError> {
    let pattern = erase_through(params, target.x)?;
    let base = run_decoder(decoder, params, f, &pattern, target, coin)?;
    let read: Vec<usize> = base.transcript.iter().filter(|e| e.1.is_some()).map(|e| e.0).collect();
    let g = separating_poly(params, target.x, &read)?;
    let mut same_path = true;
    let mut ones = 0;
    for beta in params.field().elements() {
        let h = f.add(&g.scale(params, beta));
        ones += target.truth(params, &h) as u64;
        same_path &= run_decoder(decoder, params, &h, &pattern, target, coin)? == base;
    }
    Ok(CosetCheck { same_path, ones })
}

/// The built-in decoders, for sweeps.
pub fn standard_decoders(params: &LineCodeParams) -> Result<Vec<Box<dyn LineQueryDecoder>>, AttackError> {
    Ok(vec![
        Box::new(ConstantDecoder(0)),
        Box::new(ConstantDecoder(1)),
        Box::new(InterpolatingDecoder::new(params)?),
        Box::new(GreedyDecoder::new(params)?),
        Box::new(ThroughPointDecoder),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linecode::mk_params;

    #[test]
    fn erasure_counts() {
        let p = mk_params(2, 2, 1).unwrap();
        let e = erase_through(&p, 6).unwrap();
        assert_eq!(e.lines.len(), 5);
        assert_eq!(e.fraction(), prob(1, 4));
        let p = mk_params(1, 2, 0).unwrap();
        let e = erase_through(&p, 1).unwrap();
        assert_eq!((e.lines.len(), p.lines().len()), (3, 6));
        assert_eq!(e.fraction(), prob(1, 2));
        for (t, n) in [(1, 3), (2, 3), (3, 2)] {
            let p = mk_params(t, n, 0).unwrap();
            assert_eq!(erase_through(&p, 0).unwrap().fraction(), prob(1, 1 << (t * (n - 1))));
        }
    }

    #[test]
    fn patterns_share_at_most_one_line() {
        let p = mk_params(2, 2, 1).unwrap();
        for a in 0..16 {
            for b in a + 1..16 {
                let (ea, eb) = (erase_through(&p, a).unwrap(), erase_through(&p, b).unwrap());
                assert_eq!(ea.lines.intersection(&eb.lines).count(), 1);
            }
        }
    }

    fn check_separating(p: &LineCodeParams, x: u64, lines: &[usize]) {
        let g = separating_poly(p, x, lines).unwrap();
        assert_eq!(g.eval(p, x), FieldElement::ONE);
        assert_eq!(g.degree(p).unwrap(), lines.len() as u32);
        for &l in lines {
            for z in p.points(&p.line(l)) {
                assert!(g.eval(p, z).is_zero());
            }
        }
    }

    #[test]
    fn separating_examples() {
        let p = mk_params(2, 2, 2).unwrap();
        assert_eq!(separating_poly(&p, 5, &[]).unwrap(), Poly::constant(&p, FieldElement::ONE));
        let p0 = mk_params(2, 2, 0).unwrap();
        assert_eq!(separating_poly(&p0, 5, &[]).unwrap(), Poly::constant(&p0, FieldElement::ONE));
        for x in 0..16 {
            let avoid: Vec<usize> = (0..p.lines().len()).filter(|&l| !p.contains(&p.line(l), x)).collect();
            for &l in &avoid {
                check_separating(&p, x, &[l]);
            }
            for (k, &a) in avoid.iter().enumerate() {
                for &b in &avoid[k + 1..] {
                    check_separating(&p, x, &[a, b]);
                }
            }
        }
        let on = p.lines_through(5)[0];
        assert!(matches!(separating_poly(&p, 5, &[on]), Err(AttackError::OnLine { .. })));
        assert!(matches!(separating_poly(&p, 5, &[0, 1, 2]), Err(AttackError::TooManyLines { .. })));
    }

    #[test]
    fn every_decoder_gets_one_half() {
        let p = mk_params(2, 2, 1).unwrap();
        let target = BitTarget { x: 9, alpha: FieldElement(3), i: 1 };
        for dec in standard_decoders(&p).unwrap() {
            let r = attack_experiment(dec.as_ref(), &p, target, true, ExperimentMode::Exact).unwrap();
            assert_eq!(r.success, Success::Exact(prob(1, 2)), "{}", dec.name());
        }
    }

    #[test]
    fn through_point_without_erasure_is_perfect() {
        let p = mk_params(2, 2, 1).unwrap();
        let target = BitTarget { x: 9, alpha: FieldElement(2), i: 0 };
        let r = attack_experiment(&ThroughPointDecoder, &p, target, false, ExperimentMode::Exact).unwrap();
        assert_eq!(r.success, Success::Exact(prob(1, 1)));
    }

    #[test]
    fn coset_symmetry_exhaustive() {
        let p = mk_params(2, 2, 1).unwrap();
        let target = BitTarget { x: 6, alpha: FieldElement(1), i: 0 };
        for dec in standard_decoders(&p).unwrap() {
            for idx in 0..Poly::count(&p).unwrap() {
                for coin in 0..dec.coins() {
                    let c = coset_check(dec.as_ref(), &p, &Poly::nth(&p, idx), &target, coin).unwrap();
                    assert!(c.same_path);
                    assert_eq!(c.ones, 2);
                }
            }
        }
    }

    struct Greedy3;
    impl LineQueryDecoder for Greedy3 {
        fn name(&self) -> String {
            "overreach".into()
        }
        fn next_query(&self, _: &LineCodeParams, _: &BitTarget, _: u64, t: &[(usize, LineAnswer)]) -> Option<usize> {
            (t.len() < 3).then_some(t.len())
        }
        fn output(&self, _: &LineCodeParams, _: &BitTarget, _: u64, _: &[(usize, LineAnswer)]) -> u8 {
            0
        }
    }

    #[test]
    fn query_budget_enforced() {
        let p = mk_params(2, 2, 1).unwrap();
        let target = BitTarget { x: 9, alpha: FieldElement(1), i: 0 };
        let err = attack_experiment(&Greedy3, &p, target, true, ExperimentMode::Exact).unwrap_err();
        assert!(matches!(err, AttackError::QueryBudget { .. }));
        let zero = BitTarget { alpha: FieldElement(0), ..target };
        assert_eq!(attack_experiment(&ConstantDecoder(0), &p, zero, true, ExperimentMode::Exact).unwrap_err(), AttackError::ZeroAlpha);
    }

    #[test]
    fn monte_carlo_near_half() {
        let p = mk_params(2, 2, 1).unwrap();
        let target = BitTarget { x: 3, alpha: FieldElement(1), i: 1 };
        let dec = GreedyDecoder::new(&p).unwrap();
        let r = attack_experiment(&dec, &p, target, true, ExperimentMode::MonteCarlo { trials: 4000, seed: 2 }).unwrap();
        let Success::Estimate(e) = r.success else { panic!() };
        assert!((e.mean() - 0.5).abs() <= e.half_width());
    }
}
