//! Subcommands that work on a linear code and a decoder loaded from files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{ArgGroup, Args, ValueEnum};
use locus_core::codealg::{all_vectors, LinearCode, Scalar};
use locus_core::decoder::{
    combinations, eval, repeat_decoder, AdaptiveDecoder, DecodeRule, EvalReport, Exhaustive, LocalDecoder, Mode,
    NonadaptiveDecoder, Outcome, QueryDistribution, RandomPositions, Target,
};
use locus_core::fool::{attack_rldc, AttackMode, AttackOutcome};
use locus_core::goldberg::goldberg_pipeline;
use locus_core::report::{pow, prob_json, to_f64, Prob};
use locus_core::smooth::{extract_smooth, smooth_to_ldc, smoothness, verify_ldc};
use locus_core::twoquery::{reduce, ReductionMode};
use serde_json::{json, Value};

use crate::output::{lib_err, Failure, Report};
use crate::{parse_prob, ModeArgs, RunMode};

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn load_code(path: &Path) -> Result<LinearCode, Failure> {
    LinearCode::from_text(&read(path)?).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn load_decoder(path: &Path, code: &LinearCode) -> Result<NonadaptiveDecoder, Failure> {
    NonadaptiveDecoder::from_text(&read(path)?, code).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn load_adaptive(path: &Path, code: &LinearCode) -> Result<AdaptiveDecoder, Failure> {
    AdaptiveDecoder::from_text(&read(path)?, code).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

/// Uniform over every query set of size at most `q` that recovers the target.
pub fn spanning_decoder(code: &LinearCode, targets: &[Target], q: usize) -> Result<NonadaptiveDecoder, Failure> {
    let mut m = BTreeMap::new();
    for &t in targets {
        let v = t.vstar(code);
        let sets: Vec<Vec<usize>> = (1..=q.min(code.n()))
            .flat_map(|k| combinations(code.n(), k))
            .filter(|s| code.in_span(&v, s).is_some())
            .collect();
        if sets.is_empty() {
            return Err(Failure::Input(format!("no set of at most {q} coordinates recovers {t}")));
        }
        m.insert(t, QueryDistribution::uniform(sets).map_err(lib_err)?);
    }
    NonadaptiveDecoder::new(code, q, DecodeRule::Canonical, m).map_err(lib_err)
}

fn eval_mode(run: &ModeArgs) -> Mode {
    match run.mode {
        RunMode::Exact => Mode::Exact { budget: run.budget },
        RunMode::Sampled => Mode::MonteCarlo {
            trials: run.trials,
            seed: run.seed,
        },
    }
}

fn tagged(kind: &str, mut v: Value) -> Value {
    v["kind"] = json!(kind);
    v
}

fn eval_line(kind: &str, r: &EvalReport) -> Value {
    tagged(kind, r.json())
}

fn parse_target(s: &str) -> Result<Target, String> {
    s.parse().map_err(|e: locus_core::decoder::DecoderError| e.to_string())
}

fn check_target(code: &LinearCode, dec: &dyn LocalDecoder, t: Target) -> Result<(), Failure> {
    t.check(code).map_err(|e| Failure::Usage(e.to_string()))?;
    if !dec.targets().contains(&t) {
        return Err(Failure::Usage(format!("the decoder has no branches for {t}")));
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct FoolArgs {
    #[arg(long, value_name = "FILE")]
    code: PathBuf,
    /// Decoder file. Without one, every set of at most `q` coordinates that
    /// recovers the target is used, uniformly.
    #[arg(long, value_name = "FILE")]
    decoder: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    q: usize,
    #[arg(long, default_value = "m1", value_parser = parse_target)]
    target: Target,
    #[arg(long, value_parser = parse_prob)]
    delta: Prob,
    /// Message the corruption starts from, comma separated. Zero by default.
    #[arg(long, value_delimiter = ',')]
    base: Vec<Scalar>,
    #[command(flatten)]
    run: ModeArgs,
}

fn message(code: &LinearCode, given: &[Scalar]) -> Result<Vec<Scalar>, Failure> {
    if given.is_empty() {
        return Ok(vec![0; code.k()]);
    }
    if given.len() != code.k() || given.iter().any(|&s| !code.field().contains(s)) {
        return Err(Failure::Usage(format!("--base needs {} field elements", code.k())));
    }
    Ok(given.to_vec())
}

pub fn fool(a: &FoolArgs, report: &mut Report) -> Result<(), Failure> {
    let code = load_code(&a.code)?;
    let dec = match &a.decoder {
        Some(p) => load_decoder(p, &code)?,
        None => {
            a.target.check(&code).map_err(|e| Failure::Usage(e.to_string()))?;
            spanning_decoder(&code, &[a.target], a.q)?
        }
    };
    check_target(&code, &dec, a.target)?;
    let base = message(&code, &a.base)?;
    let mode = match a.run.mode {
        RunMode::Exact => AttackMode::Exact { budget: a.run.budget },
        RunMode::Sampled => AttackMode::Sampled {
            trials: a.run.trials,
            seed: a.run.seed,
        },
    };
    match attack_rldc(&dec, &code, a.target, &base, &a.delta, mode).map_err(lib_err)? {
        AttackOutcome::NoAttack { target } => {
            report.push(json!({ "kind": "no_attack", "target": target.to_string(), "reason": "every query set is smoothable" }));
        }
        AttackOutcome::Attack(r) => {
            report.push(r.json());
            for l in r.set_lines() {
                report.push(l);
            }
            report.check(r.meets_bound(), || format!("attack error stays below {}", r.bound));
        }
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct ExtractArgs {
    #[arg(long, value_name = "FILE")]
    code: PathBuf,
    #[arg(long, value_name = "FILE")]
    decoder: PathBuf,
    #[arg(long, value_parser = parse_prob)]
    delta: Prob,
    /// Also certify the smooth part as a decoder with this error and check it.
    #[arg(long, value_parser = parse_prob)]
    epsilon: Option<Prob>,
    #[command(flatten)]
    run: ModeArgs,
}

pub fn extract(a: &ExtractArgs, report: &mut Report) -> Result<(), Failure> {
    let code = load_code(&a.code)?;
    let dec = load_decoder(&a.decoder, &code)?;
    let ex = extract_smooth(&dec, &code, &a.delta).map_err(lib_err)?;
    for l in ex.report(&code) {
        report.push(tagged("target", l));
    }
    let Some(eps) = a.epsilon else { return Ok(()) };
    let ldc = &ex.ldc_part;
    let n = code.n();
    let s = smoothness(ldc, n);
    if ldc.targets().is_empty() || s == Prob::from_integer(0) {
        report.push(json!({ "kind": "certificate", "skipped": "no smooth part" }));
        return Ok(());
    }
    let eta = Prob::from_integer(1) / (s * Prob::from_integer(n as i128));
    let cert = smooth_to_ldc(ldc, n, &eta, &eps).map_err(lib_err)?;
    let mut line = json!({
        "kind": "certificate",
        "q": cert.q,
        "delta": prob_json(&cert.delta),
        "completeness": prob_json(&cert.completeness),
        "soundness": prob_json(&cert.soundness),
    });
    match a.run.mode {
        RunMode::Exact => {
            let (r, ok) = verify_ldc(ldc, &code, &cert, a.run.budget).map_err(lib_err)?;
            line["measured"] = r.json();
            report.push(line);
            report.check(ok, || format!("smooth part misses its certificate: {}", r.strict_error.as_f64()));
        }
        RunMode::Sampled => {
            let mode = eval_mode(&a.run);
            let r = eval(ldc, &code, mode, &RandomPositions, &cert.delta).map_err(lib_err)?;
            line["measured"] = r.json();
            report.push(line);
            let (err, hw) = match &r.strict_error {
                locus_core::decoder::Measure::Estimate(e) => (e.mean(), e.half_width()),
                m => (m.as_f64(), 0.0),
            };
            report.check(r.completeness.as_f64() == 1.0, || "smooth part is not perfectly complete".into());
            report.check(err - hw <= to_f64(&eps), || format!("sampled error {err} above {}", to_f64(&eps)));
        }
    }
    Ok(())
}

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("source").required(true).args(["adaptive", "decoder"])))]
pub struct GoldbergArgs {
    #[arg(long, value_name = "FILE")]
    code: PathBuf,
    /// Adaptive decoder file.
    #[arg(long, value_name = "FILE")]
    adaptive: Option<PathBuf>,
    /// Nonadaptive decoder file, read as complete trees.
    #[arg(long, value_name = "FILE")]
    decoder: Option<PathBuf>,
    #[arg(long, value_parser = parse_prob)]
    delta: Prob,
    /// Write the resulting nonadaptive decoder here.
    #[arg(long, value_name = "FILE")]
    emit: Option<PathBuf>,
    #[command(flatten)]
    run: ModeArgs,
}

fn adaptive_source(code: &LinearCode, adaptive: &Option<PathBuf>, decoder: &Option<PathBuf>) -> Result<AdaptiveDecoder, Failure> {
    match (adaptive, decoder) {
        (Some(p), _) => load_adaptive(p, code),
        (None, Some(p)) => AdaptiveDecoder::from_nonadaptive(code, &load_decoder(p, code)?).map_err(lib_err),
        (None, None) => Err(Failure::Usage("give --adaptive or --decoder".into())),
    }
}

pub fn goldberg(a: &GoldbergArgs, report: &mut Report) -> Result<(), Failure> {
    if a.run.mode != RunMode::Exact {
        return Err(Failure::Usage("goldberg evaluates exactly; use --mode exact".into()));
    }
    let code = load_code(&a.code)?;
    let ad = adaptive_source(&code, &a.adaptive, &a.decoder)?;
    let rep = goldberg_pipeline(&ad, &a.delta, a.run.budget).map_err(lib_err)?;
    for l in rep.json_lines() {
        report.push(tagged("stage", l));
    }
    for v in rep.violations(ad.q(), code.field().size()) {
        report.check(false, || v);
    }
    if let Some(p) = &a.emit {
        std::fs::write(p, rep.output.to_text()).map_err(|e| Failure::Input(format!("{}: {e}", p.display())))?;
    }
    Ok(())
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Variant {
    /// Message targets.
    Rldc,
    /// Codeword targets.
    Rlcc,
}

#[derive(Args, Debug)]
pub struct TwoqueryArgs {
    #[arg(long, value_name = "FILE")]
    code: PathBuf,
    #[arg(long, value_name = "FILE")]
    decoder: PathBuf,
    #[arg(long, value_parser = parse_prob)]
    delta: Prob,
    #[arg(long, value_enum, default_value_t = Variant::Rldc)]
    variant: Variant,
    #[command(flatten)]
    run: ModeArgs,
}

pub fn twoquery(a: &TwoqueryArgs, report: &mut Report) -> Result<(), Failure> {
    if a.delta == Prob::from_integer(0) {
        return Err(Failure::Usage("--delta must be positive".into()));
    }
    let code = load_code(&a.code)?;
    let dec = load_decoder(&a.decoder, &code)?;
    let mode = match a.variant {
        Variant::Rldc => ReductionMode::Decoding,
        Variant::Rlcc => ReductionMode::Correcting,
    };
    let r = reduce(&code, &dec, &a.delta, mode).map_err(lib_err)?;
    report.push(tagged("reduction", r.json()));
    let cap = (Prob::from_integer(2) / a.delta).floor().to_integer() as usize;
    report.check(r.removed_classes <= cap, || format!("{} removed classes exceed {cap}", r.removed_classes));
    if mode == ReductionMode::Decoding {
        report.check(r.removed.len() <= cap, || format!("{} removed targets exceed {cap}", r.removed.len()));
    }
    report.check(r.k_prime + cap >= r.k, || format!("k' = {} below {} - {cap}", r.k_prime, r.k));

    let em = eval_mode(&a.run);
    match a.run.mode {
        RunMode::Exact => {
            let base = eval(&dec, &code, em, &Exhaustive, &a.delta).map_err(lib_err)?;
            let s = base.soundness_error.exact().expect("exact mode");
            report.push(eval_line("input", &base));
            let words = (code.field().size() as u128).saturating_pow(r.code.n() as u32);
            let needed = words.saturating_mul(r.decoder.targets().len() as u128);
            if needed > a.run.budget {
                return Err(Failure::Budget(format!("{needed} words to scan, budget is {}", a.run.budget)));
            }
            let mut bottom = 0u64;
            for t in r.decoder.targets() {
                for y in all_vectors(r.code.field(), r.code.n()) {
                    bottom += (r.decoder.distribution(t, &y).prob(Outcome::Bottom) != Prob::from_integer(0)) as u64;
                }
            }
            report.check(bottom == 0, || format!("reduced decoder outputs bottom on {bottom} words"));
            let red = eval(&r.decoder, &r.code, em, &Exhaustive, &r.delta).map_err(lib_err)?;
            report.push(eval_line("reduced", &red));
            let err = red.strict_error.exact().expect("exact mode");
            report.check(err <= s, || format!("reduced error {err} above input soundness {s}"));
            report.check(red.completeness.exact() == Some(Prob::from_integer(1)), || "reduced decoder is incomplete".into());
        }
        RunMode::Sampled => {
            let base = eval(&dec, &code, em, &RandomPositions, &a.delta).map_err(lib_err)?;
            report.push(eval_line("input", &base));
            let red = eval(&r.decoder, &r.code, em, &RandomPositions, &r.delta).map_err(lib_err)?;
            report.push(eval_line("reduced", &red));
        }
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct RepeatArgs {
    #[arg(long, value_name = "FILE")]
    code: PathBuf,
    #[arg(long, value_name = "FILE")]
    decoder: PathBuf,
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u32).range(1..=8))]
    times: u32,
    #[arg(long, value_parser = parse_prob)]
    delta: Prob,
    #[command(flatten)]
    run: ModeArgs,
}

pub fn repeat(a: &RepeatArgs, report: &mut Report) -> Result<(), Failure> {
    let code = load_code(&a.code)?;
    let dec = load_decoder(&a.decoder, &code)?;
    let em = eval_mode(&a.run);
    let rep = repeat_decoder(dec.clone(), a.times);
    match a.run.mode {
        RunMode::Exact => {
            let base = eval(&dec, &code, em, &Exhaustive, &a.delta).map_err(lib_err)?;
            let r = eval(&rep, &code, em, &Exhaustive, &a.delta).map_err(lib_err)?;
            let s = base.soundness_error.exact().expect("exact mode");
            let st = r.soundness_error.exact().expect("exact mode");
            let want = pow(&s, a.times);
            report.push(eval_line("base", &base));
            let mut line = eval_line("repeated", &r);
            line["times"] = json!(a.times);
            line["predicted"] = prob_json(&want);
            report.push(line);
            // one wrong value over F_2, so agreeing wrong runs are exactly s^t there
            if code.field().size() == 2 {
                report.check(st == want, || format!("repeated soundness {st} != {want}"));
            } else {
                report.check(st <= want, || format!("repeated soundness {st} > {want}"));
            }
            if base.completeness.exact() == Some(Prob::from_integer(1)) {
                report.check(r.completeness.exact() == Some(Prob::from_integer(1)), || "repetition lost completeness".into());
            }
        }
        RunMode::Sampled => {
            let base = eval(&dec, &code, em, &RandomPositions, &a.delta).map_err(lib_err)?;
            let r = eval(&rep, &code, em, &RandomPositions, &a.delta).map_err(lib_err)?;
            report.push(eval_line("base", &base));
            let mut line = eval_line("repeated", &r);
            line["times"] = json!(a.times);
            report.push(line);
        }
    }
    Ok(())
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum AdversaryKind {
    /// Every word within the radius.
    Exhaustive,
    /// Uniformly placed nonzero shifts.
    Random,
}

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("source").required(true).args(["adaptive", "decoder"])))]
pub struct ReportArgs {
    #[arg(long, value_name = "FILE")]
    code: PathBuf,
    #[arg(long, value_name = "FILE")]
    decoder: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    adaptive: Option<PathBuf>,
    #[arg(long, value_parser = parse_prob)]
    delta: Prob,
    #[arg(long, value_enum, default_value_t = AdversaryKind::Exhaustive)]
    adversary: AdversaryKind,
    #[command(flatten)]
    run: ModeArgs,
}

pub fn report(a: &ReportArgs, report: &mut Report) -> Result<(), Failure> {
    let code = load_code(&a.code)?;
    let em = eval_mode(&a.run);
    let nonadaptive;
    let adaptive;
    let dec: &dyn LocalDecoder = match (&a.decoder, &a.adaptive) {
        (Some(p), _) => {
            nonadaptive = load_decoder(p, &code)?;
            &nonadaptive
        }
        (None, Some(p)) => {
            adaptive = load_adaptive(p, &code)?;
            &adaptive
        }
        (None, None) => return Err(Failure::Usage("give --decoder or --adaptive".into())),
    };
    let r = match a.adversary {
        AdversaryKind::Exhaustive => eval(dec, &code, em, &Exhaustive, &a.delta),
        AdversaryKind::Random => eval(dec, &code, em, &RandomPositions, &a.delta),
    }
    .map_err(lib_err)?;
    report.push(eval_line("eval", &r));
    Ok(())
}
