//! Self checks, the line code and the line-erasure attack.

use clap::{Args, Subcommand, ValueEnum};
use locus_core::attack::{attack_experiment, coset_check, standard_decoders, BitTarget, ExperimentMode, Success};
use locus_core::codealg::{kernel, rank, rref, solve, Field, LinearCode};
use locus_core::gf::{FieldElement, FieldParams};
use locus_core::linecode::{
    corruption_sweep, encode, encode_message, eta_sup, lines_by_direction, mk_params, overwrite_catch_rate,
    overwrite_sweep, params_json, rldc_decode, rlcc_decode, CorrectConfig, DecodeConfig, LineCodeParams, Poly,
    SweepDecoder,
};
use locus_core::report::{prob, prob_json, to_f64, trial_rng};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::output::{lib_err, Failure, Report};
use crate::{ModeArgs, RunMode};

#[derive(Args, Debug)]
pub struct SelftestArgs {
    /// Check GF(2^s) for every s up to this.
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u32).range(1..=8))]
    t: u32,
    #[command(flatten)]
    run: ModeArgs,
}

#[derive(Default)]
struct Tally {
    checks: u64,
    failures: Vec<String>,
}

impl Tally {
    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok && self.failures.len() < 8 {
            self.failures.push(what());
        }
    }

    fn line(&self, suite: &str, field: String) -> Value {
        json!({ "kind": "suite", "suite": suite, "field": field, "checks": self.checks, "failures": self.failures })
    }
}

fn gf_suite(t: u32, run: &ModeArgs) -> Result<Tally, Failure> {
    let f = FieldParams::new(t, None).map_err(lib_err)?;
    let els: Vec<FieldElement> = f.elements().collect();
    let mut c = Tally::default();
    for &a in &els {
        c.check(f.pi_inv(&f.pi(a)).ok() == Some(a), || format!("pi round trip at {}", a.0));
        c.check(f.mul(a, FieldElement::ONE) == a, || format!("unit at {}", a.0));
        if a.is_zero() {
            c.check(f.inv(a).is_err(), || "zero has an inverse".into());
        } else {
            let inv = f.inv(a).map_err(lib_err)?;
            c.check(f.mul(a, inv) == FieldElement::ONE, || format!("inverse of {}", a.0));
            c.check(f.pow(a, (f.order() - 1) as u64) == FieldElement::ONE, || format!("order of {}", a.0));
        }
        let m = f.mul_matrix(a);
        for &b in &els {
            c.check(f.add(a, b) == f.add(b, a) && f.mul(a, b) == f.mul(b, a), || format!("commutativity at {}, {}", a.0, b.0));
            c.check(f.add(a, a).is_zero(), || format!("characteristic at {}", a.0));
            c.check(m.apply(b.0) == f.mul(a, b).0, || format!("multiplication matrix at {}, {}", a.0, b.0));
        }
    }
    let mut triple = |a: FieldElement, b: FieldElement, x: FieldElement| {
        c.check(f.mul(f.mul(a, b), x) == f.mul(a, f.mul(b, x)), || format!("associativity at {}, {}, {}", a.0, b.0, x.0));
        c.check(f.mul(a, f.add(b, x)) == f.add(f.mul(a, b), f.mul(a, x)), || format!("distributivity at {}, {}, {}", a.0, b.0, x.0));
    };
    match run.mode {
        RunMode::Exact => {
            for &a in &els {
                for &b in &els {
                    for &x in &els {
                        triple(a, b, x);
                    }
                }
            }
        }
        RunMode::Sampled => {
            let size = f.order() as u64;
            for i in 0..run.trials {
                let mut rng = trial_rng(run.seed, i);
                let mut pick = || FieldElement(rng.gen_range(0..size));
                triple(pick(), pick(), pick());
            }
        }
    }
    Ok(c)
}

fn code_suite(field: Field, seed: u64) -> Tally {
    let mut c = Tally::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..16 {
        let k = rng.gen_range(1..=3);
        let n = rng.gen_range(k..=6);
        let code = LinearCode::random(field, k, n, &mut rng);
        let rows = code.rows().to_vec();
        let r = rank(&field, &rows, k);
        let ker = kernel(&field, &rows, k);
        c.check(ker.len() + r == k, || format!("rank {r} plus nullity {} != {k}", ker.len()));
        for v in &ker {
            c.check(rows.iter().all(|row| field.dot(row, v) == 0), || "kernel vector not annihilated".into());
        }
        let (_, pivots) = rref(&field, rows.clone(), k);
        c.check(pivots.len() == r, || "pivot count differs from rank".into());
        let dual = code.dual();
        c.check(dual.dim() + r == n, || format!("dual dimension {} with rank {r}, length {n}", dual.dim()));
        for b in code.messages() {
            let w = code.encode_unchecked(&b);
            c.check(dual.basis().iter().all(|u| field.dot(u, &w) == 0), || "dual vector meets a codeword".into());
        }
        let x = field.random_vector(k, &mut rng);
        let rhs: Vec<_> = rows.iter().map(|row| field.dot(row, &x)).collect();
        let y = solve(&field, &rows, &rhs, k);
        c.check(
            y.is_some_and(|y| rows.iter().zip(&rhs).all(|(row, &h)| field.dot(row, &y) == h)),
            || "consistent system not solved".into(),
        );
        let (b1, b2) = (field.random_vector(k, &mut rng), field.random_vector(k, &mut rng));
        let sum = code.encode_unchecked(&field.vec_add(&b1, &b2));
        c.check(
            sum == field.vec_add(&code.encode_unchecked(&b1), &code.encode_unchecked(&b2)),
            || "encoding is not additive".into(),
        );
    }
    c
}

pub fn selftest(a: &SelftestArgs, report: &mut Report) -> Result<(), Failure> {
    for t in 1..=a.t {
        let c = gf_suite(t, &a.run)?;
        report.push(c.line("gf", format!("GF2^{t}")));
        report.check(c.failures.is_empty(), || format!("GF(2^{t}): {}", c.failures.join("; ")));
    }
    let mut fields = vec![Field::f2(), Field::prime(3).map_err(lib_err)?, Field::prime(5).map_err(lib_err)?];
    if a.t > 1 {
        fields.push(Field::binary(a.t).map_err(lib_err)?);
    }
    for (i, field) in fields.into_iter().enumerate() {
        let c = code_suite(field, a.run.seed.wrapping_add(i as u64));
        report.push(c.line("codealg", field.to_string()));
        report.check(c.failures.is_empty(), || format!("{field}: {}", c.failures.join("; ")));
    }
    Ok(())
}

#[derive(Args, Debug, Clone, Copy)]
pub struct LineArgs {
    /// Field GF(2^t).
    #[arg(long, default_value_t = 2)]
    t: u32,
    /// Number of variables.
    #[arg(long, default_value_t = 2)]
    n: u32,
    /// Total degree.
    #[arg(long, default_value_t = 1)]
    d: u32,
}

impl LineArgs {
    fn params(&self) -> Result<LineCodeParams, Failure> {
        mk_params(self.t, self.n, self.d).map_err(|e| Failure::Usage(e.to_string()))
    }
}

#[derive(Args, Debug, Clone, Copy)]
pub struct RoundArgs {
    /// Linearity-test rounds.
    #[arg(long, default_value_t = 2)]
    r1: usize,
    /// Consistency rounds.
    #[arg(long, default_value_t = 2)]
    r2: usize,
    /// Read a fresh sixth point instead of reusing one.
    #[arg(long)]
    no_reuse: bool,
}

impl RoundArgs {
    fn point(&self) -> DecodeConfig {
        DecodeConfig {
            r1: self.r1,
            r2: self.r2,
            reuse: !self.no_reuse,
        }
    }

    /// The block decoder runs its own rounds around a default point decoder.
    fn block(&self) -> CorrectConfig {
        CorrectConfig {
            r1: self.r1,
            r2: self.r2,
            inner: DecodeConfig {
                reuse: !self.no_reuse,
                ..DecodeConfig::default()
            },
        }
    }
}

#[derive(Subcommand, Debug)]
pub enum LinecodeCommand {
    /// Code dimensions.
    Params(LineArgs),
    /// Preset (δ, d/n) and the resulting soundness envelope.
    Presets(PresetArgs),
    /// Encode a message.
    Encode(EncodeArgs),
    /// Decoder soundness under random bit flips, or exhaustive completeness.
    Decode(DecodeArgs),
    /// One line block replaced by another polynomial's values.
    Overwrite(OverwriteArgs),
}

#[derive(Args, Debug)]
pub struct PresetArgs {
    /// Corrupted fraction the envelope is computed for.
    #[arg(long, default_value_t = 1e-8)]
    delta: f64,
    /// Degree over field size.
    #[arg(long, default_value_t = 0.01)]
    dn: f64,
    #[command(flatten)]
    rounds: RoundArgs,
    /// Grid size for the supremum over the linearity distance.
    #[arg(long, default_value_t = 10_000)]
    steps: u32,
}

#[derive(Args, Debug)]
pub struct EncodeArgs {
    #[command(flatten)]
    line: LineArgs,
    /// Message bits as a 0/1 string. A seeded random message otherwise.
    #[arg(long)]
    message: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Include the full hex dump of every block.
    #[arg(long)]
    dense: bool,
}

#[derive(Args, Debug)]
pub struct DecodeArgs {
    #[command(flatten)]
    line: LineArgs,
    #[command(flatten)]
    rounds: RoundArgs,
    /// Decode codeword bits instead of message bits.
    #[arg(long)]
    correct: bool,
    /// Fraction of bits flipped per trial.
    #[arg(long, default_value_t = 0.005)]
    rho: f64,
    #[arg(long, value_enum, default_value_t = RunMode::Sampled)]
    mode: RunMode,
    #[arg(long, default_value_t = 10_000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Messages checked in exact mode.
    #[arg(long, default_value_t = 4)]
    messages: u64,
    #[arg(long, default_value_t = 1 << 24)]
    budget: u128,
}

#[derive(Args, Debug)]
pub struct OverwriteArgs {
    #[command(flatten)]
    line: LineArgs,
    #[command(flatten)]
    rounds: RoundArgs,
    /// Index of the overwritten line.
    #[arg(long, default_value_t = 0)]
    block: usize,
    /// Target point on that line; its least point by default.
    #[arg(long)]
    x: Option<u64>,
    #[command(flatten)]
    run: ModeArgs,
}

pub fn linecode(cmd: &LinecodeCommand, report: &mut Report) -> Result<(), Failure> {
    match cmd {
        LinecodeCommand::Params(l) => {
            let p = l.params()?;
            let mut v = params_json(&p);
            v["kind"] = json!("params");
            v["directions"] = json!(lines_by_direction(&p).len());
            v["monomials"] = json!(p.monomials().len());
            report.push(v);
        }
        LinecodeCommand::Presets(a) => {
            let bound = eta_sup(a.delta, a.dn, a.rounds.r1 as u32, a.rounds.r2 as u32, a.steps);
            report.push(json!({
                "kind": "presets",
                "delta": a.delta,
                "d_over_n": a.dn,
                "r1": a.rounds.r1,
                "r2": a.rounds.r2,
                "eta_sup": bound,
                "below_one_third": bound < 1.0 / 3.0,
            }));
        }
        LinecodeCommand::Encode(a) => {
            let p = a.line.params()?;
            let word = match &a.message {
                Some(bits) => {
                    let bits: Vec<u8> = bits
                        .chars()
                        .map(|c| match c {
                            '0' => Ok(0),
                            '1' => Ok(1),
                            _ => Err(Failure::Usage(format!("message must be a 0/1 string, got {c:?}"))),
                        })
                        .collect::<Result<_, _>>()?;
                    encode_message(&p, &bits).map_err(|e| Failure::Usage(e.to_string()))?
                }
                None => encode(&p, &Poly::random(&p, &mut ChaCha8Rng::seed_from_u64(a.seed))),
            };
            report.push(json!({ "kind": "word", "word": word.to_json(&p, a.dense) }));
        }
        LinecodeCommand::Decode(a) => decode(a, report)?,
        LinecodeCommand::Overwrite(a) => overwrite(a, report)?,
    }
    Ok(())
}

fn decode(a: &DecodeArgs, report: &mut Report) -> Result<(), Failure> {
    let p = a.line.params()?;
    if !(0.0..=1.0).contains(&a.rho) {
        return Err(Failure::Usage(format!("--rho {} is outside [0, 1]", a.rho)));
    }
    let (sweep, expected) = if a.correct {
        (SweepDecoder::Block(a.rounds.block()), a.rounds.block().queries())
    } else {
        (SweepDecoder::Point(a.rounds.point()), a.rounds.point().queries())
    };
    let name = if a.correct { "block" } else { "point" };
    match a.mode {
        RunMode::Sampled => {
            let rep = corruption_sweep(&p, a.rho, sweep, a.trials, a.seed).map_err(|e| Failure::Usage(e.to_string()))?;
            let mut v = rep.json();
            v["kind"] = json!("sweep");
            v["decoder"] = json!(name);
            v["expected_queries"] = json!(expected);
            report.push(v);
            report.check(rep.max_queries == expected, || format!("{} queries, expected {expected}", rep.max_queries));
            let (m, hw) = (rep.error.mean(), rep.error.half_width());
            report.check(m - hw <= 1.0 / 3.0, || format!("error rate {m:.4} above 1/3"));
        }
        RunMode::Exact => {
            let per = if a.correct {
                p.lines().len() as u128 * p.block_len() as u128
            } else {
                p.point_count() as u128 * p.field_size() as u128 * p.t() as u128
            };
            let polys = Poly::count(&p).map_or(a.messages, |c| c.min(a.messages));
            let needed = per.saturating_mul(polys as u128);
            if needed > a.budget {
                return Err(Failure::Budget(format!("{needed} decodes, budget is {}", a.budget)));
            }
            let (mut total, mut correct, mut max_q) = (0u64, 0u64, 0usize);
            for idx in 0..polys {
                let f = Poly::nth(&p, idx);
                let word = encode(&p, &f);
                let mut rng = trial_rng(a.seed, idx);
                if a.correct {
                    for line in 0..p.lines().len() {
                        for v in 0..p.block_len() {
                            let o = rlcc_decode(&p, &word, line, v, a.rounds.block(), &mut rng).map_err(lib_err)?;
                            total += 1;
                            correct += (o.output == word.symbol(line, v)) as u64;
                            max_q = max_q.max(o.queries);
                        }
                    }
                } else {
                    for x in 0..p.point_count() {
                        for alpha in p.field().elements() {
                            for i in 0..p.t() as usize {
                                let truth = (p.field().mul(alpha, f.eval(&p, x)).0 >> i) as u8 & 1;
                                let o = rldc_decode(&p, &word, x, alpha, i, a.rounds.point(), &mut rng).map_err(lib_err)?;
                                total += 1;
                                correct += (o.output == Some(truth)) as u64;
                                max_q = max_q.max(o.queries);
                            }
                        }
                    }
                }
            }
            report.push(json!({
                "kind": "completeness",
                "decoder": name,
                "messages": polys,
                "targets": total,
                "completeness": prob_json(&prob(correct as i128, total.max(1) as i128)),
                "queries": max_q,
                "expected_queries": expected,
            }));
            report.check(correct == total, || format!("{} of {total} uncorrupted targets decoded wrongly", total - correct));
            report.check(max_q == expected, || format!("{max_q} queries, expected {expected}"));
        }
    }
    Ok(())
}

fn overwrite(a: &OverwriteArgs, report: &mut Report) -> Result<(), Failure> {
    let p = a.line.params()?;
    if a.block >= p.lines().len() {
        return Err(Failure::Usage(format!("--block {} but the code has {} lines", a.block, p.lines().len())));
    }
    let pts = p.points(&p.line(a.block));
    let x = a.x.unwrap_or(pts[0]);
    if !pts.contains(&x) {
        return Err(Failure::Usage(format!("point {x} is not on line {}", a.block)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(a.run.seed);
    let f = Poly::random(&p, &mut rng);
    let g = loop {
        let g = Poly::random(&p, &mut rng);
        if g != f {
            break g;
        }
    };
    let cfg = a.rounds.point();
    let pred = overwrite_catch_rate(&p, &f, &g, a.block, x, cfg.r2);
    let mut v = json!({
        "kind": "overwrite",
        "block": a.block,
        "x": x,
        "f": f.json(),
        "g": g.json(),
        "predicted": prob_json(&pred),
    });
    match a.run.mode {
        RunMode::Exact => report.push(v),
        RunMode::Sampled => {
            let est = overwrite_sweep(&p, &f, &g, a.block, x, cfg, a.run.trials, a.run.seed).map_err(lib_err)?;
            let pf = to_f64(&pred);
            let sigma = (pf * (1.0 - pf) / a.run.trials as f64).sqrt();
            v["measured"] = est.json();
            report.push(v);
            report.check((est.mean() - pf).abs() <= 3.0 * sigma + 1e-12, || {
                format!("caught {:.4}, predicted {pf:.4}", est.mean())
            });
        }
    }
    Ok(())
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum DecoderChoice {
    All,
    #[value(name = "constant-0")]
    Constant0,
    #[value(name = "constant-1")]
    Constant1,
    Interpolating,
    Greedy,
    ThroughPoint,
}

#[derive(Args, Debug)]
pub struct AttackArgs {
    #[command(flatten)]
    line: LineArgs,
    /// Target point.
    #[arg(long, default_value_t = 0)]
    x: u64,
    /// Nonzero field element scaling the target value.
    #[arg(long, default_value_t = 1)]
    alpha: u64,
    /// Bit of the scaled value.
    #[arg(long, default_value_t = 0)]
    i: usize,
    #[arg(long, value_enum, default_value_t = DecoderChoice::All)]
    decoder: DecoderChoice,
    /// Keep the lines through the target readable.
    #[arg(long)]
    no_erase: bool,
    /// Also check that every decoder run is blind to a coset of polynomials.
    #[arg(long)]
    coset: bool,
    #[command(flatten)]
    run: ModeArgs,
}

pub fn attack(a: &AttackArgs, report: &mut Report) -> Result<(), Failure> {
    let p = a.line.params()?;
    if a.alpha == 0 || a.alpha >= p.field_size() {
        return Err(Failure::Usage(format!("--alpha must be a nonzero element below {}", p.field_size())));
    }
    let target = BitTarget {
        x: a.x,
        alpha: FieldElement(a.alpha),
        i: a.i,
    };
    let all = standard_decoders(&p).map_err(lib_err)?;
    let pick = match a.decoder {
        DecoderChoice::All => None,
        DecoderChoice::Constant0 => Some(0),
        DecoderChoice::Constant1 => Some(1),
        DecoderChoice::Interpolating => Some(2),
        DecoderChoice::Greedy => Some(3),
        DecoderChoice::ThroughPoint => Some(4),
    };
    let mode = match a.run.mode {
        RunMode::Exact => ExperimentMode::Exact,
        RunMode::Sampled => ExperimentMode::MonteCarlo {
            trials: a.run.trials,
            seed: a.run.seed,
        },
    };
    let erase = !a.no_erase;
    for (idx, dec) in all.iter().enumerate() {
        if pick.is_some_and(|k| k != idx) {
            continue;
        }
        let rep = attack_experiment(dec.as_ref(), &p, target, erase, mode).map_err(|e| match e {
            locus_core::attack::AttackError::LineCode(e) => Failure::Usage(e.to_string()),
            e => lib_err(e),
        })?;
        let mut v = rep.json(&p);
        v["kind"] = json!("experiment");
        v["target"] = json!({ "x": a.x, "alpha": a.alpha, "i": a.i });
        report.push(v);
        if erase {
            match &rep.success {
                Success::Exact(s) => {
                    report.check(*s == prob(1, 2), || format!("{} succeeds with {s} under erasure", rep.decoder));
                }
                Success::Estimate(e) => {
                    report.check((e.mean() - 0.5).abs() <= e.half_width(), || {
                        format!("{} succeeds with {:.4} under erasure", rep.decoder, e.mean())
                    });
                }
            }
        }
        if a.coset && erase {
            let count = Poly::count(&p).unwrap_or(u64::MAX);
            let needed = (count as u128).saturating_mul(dec.coins() as u128);
            if needed > a.run.budget {
                return Err(Failure::Budget(format!("{needed} coset runs, budget is {}", a.run.budget)));
            }
            let mut asym = 0u64;
            for idx in 0..count {
                let f = Poly::nth(&p, idx);
                for coin in 0..dec.coins() {
                    let c = coset_check(dec.as_ref(), &p, &f, &target, coin).map_err(lib_err)?;
                    asym += !(c.same_path && 2 * c.ones == p.field_size()) as u64;
                }
            }
            report.push(json!({ "kind": "coset", "decoder_name": rep.decoder, "checked": needed.to_string(), "asymmetric": asym }));
            report.check(asym == 0, || format!("{}: {asym} asymmetric cosets", rep.decoder));
        }
    }
    Ok(())
}
