//! Query-preserving conversion of adaptive relaxed decoders into
//! nonadaptive ones with perfect completeness.
//!
//! The input is shifted by a uniform codeword, leaves are relabeled with
//! the value their view forces, leaves whose view does not determine the
//! target fall back to global decoding, and finally the query set is drawn
//! by running the tree on a random codeword with those fallback leaves
//! pruned.

use std::collections::BTreeMap;

use num_traits::{One, Zero};
use serde_json::{json, Value};
use thiserror::Error;

use crate::codealg::{LinearCode, Scalar};
use crate::decoder::{
    canonical_decode, eval, AdaptiveDecoder, DecisionTree, DecodeRule, DecoderError, EvalReport, Exhaustive, Leaf,
    LocalDecoder, Mode, NonadaptiveDecoder, Outcome, OutcomeDist, QueryDistribution, Target,
};
use crate::report::{prob_json, Prob, SCHEMA};

/// Rerandomization enumerates every message; keep it to toy sizes.
pub const MAX_MESSAGES: u64 = 1 << 12;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GoldbergError {
    #[error("{0} messages is too many to rerandomize exactly")]
    TooLarge(u64),
    #[error("every leaf reached on codewords is toxic for target {0}")]
    AllToxic(Target),
    #[error(transparent)]
    Decoder(#[from] DecoderError),
}

/// The adaptive decoder run on `y + C(b̃)` for uniform `b̃`, its answer shifted back.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rerandomized {
    inner: AdaptiveDecoder,
    messages: Vec<Vec<Scalar>>,
    codewords: Vec<Vec<Scalar>>,
}

pub fn rerandomize(decoder: &AdaptiveDecoder) -> Result<Rerandomized, GoldbergError> {
    let code = decoder.code();
    let count = code.message_count().filter(|&m| m <= MAX_MESSAGES).ok_or(GoldbergError::TooLarge(
        code.message_count().unwrap_or(u64::MAX),
    ))?;
    let messages: Vec<Vec<Scalar>> = code.messages().collect();
    debug_assert_eq!(messages.len() as u64, count);
    let codewords = messages.iter().map(|b| code.encode_unchecked(b)).collect();
    Ok(Rerandomized {
        inner: decoder.clone(),
        messages,
        codewords,
    })
}

impl Rerandomized {
    pub fn inner(&self) -> &AdaptiveDecoder {
        &self.inner
    }

    /// The same decoder for a single target.
    pub fn only(&self, target: Target) -> Self {
        let mut m = BTreeMap::new();
        m.insert(target, self.inner.trees(target).to_vec());
        self.with_inner(self.inner.with_trees(m))
    }

    fn with_inner(&self, inner: AdaptiveDecoder) -> Self {
        Rerandomized {
            inner,
            messages: self.messages.clone(),
            codewords: self.codewords.clone(),
        }
    }
}

impl LocalDecoder for Rerandomized {
    fn targets(&self) -> Vec<Target> {
        self.inner.targets()
    }

    fn max_queries(&self) -> usize {
        self.inner.max_queries()
    }

    fn distribution(&self, target: Target, y: &[Scalar]) -> OutcomeDist {
        let code = self.inner.code();
        let f = code.field();
        let w = Prob::new(1, self.messages.len() as i128);
        let mut out = OutcomeDist::default();
        for (b, c) in self.messages.iter().zip(&self.codewords) {
            let shifted = f.vec_add(y, c);
            let t = target.truth(code, b);
            for (o, p) in self.inner.distribution(target, &shifted).iter() {
                let o = match *o {
                    Outcome::Value(v) => Outcome::Value(f.sub(v, t)),
                    Outcome::Bottom => Outcome::Bottom,
                };
                out.add(o, p * w);
            }
        }
        out
    }
}

/// What a leaf's view says about the target.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LeafClass {
    /// Consistent with codewords that disagree on the target.
    Toxic,
    /// Consistent, and every consistent codeword has this target value.
    Determined(Scalar),
    /// No codeword matches the view.
    Inconsistent,
}

impl LeafClass {
    pub fn is_toxic(self) -> bool {
        self == LeafClass::Toxic
    }
}

pub fn classify_leaf(code: &LinearCode, target: Target, queries: &[usize], view: &[Scalar]) -> LeafClass {
    let rows: Vec<Vec<Scalar>> = queries.iter().map(|&j| code.row(j).to_vec()).collect();
    if crate::codealg::solve(code.field(), &rows, view, code.k()).is_none() {
        return LeafClass::Inconsistent;
    }
    if code.in_span(&target.vstar(code), queries).is_none() {
        return LeafClass::Toxic;
    }
    match canonical_decode(code, target, queries, view) {
        Ok(Outcome::Value(v)) => LeafClass::Determined(v),
        _ => unreachable!("consistent view with the target in span"),
    }
}

/// New label of one leaf, or `None` if it keeps its label.
fn relabeled(code: &LinearCode, target: Target, queries: &[usize], view: &[Scalar], old: Leaf) -> Option<Leaf> {
    let new = match classify_leaf(code, target, queries, view) {
        LeafClass::Determined(v) => Leaf::Value(v),
        LeafClass::Toxic => Leaf::Global,
        LeafClass::Inconsistent => return None,
    };
    (new != old).then_some(new)
}

/// Relabels every leaf at once: forced value on determined views, global
/// decoding on toxic views, inconsistent views untouched.
pub fn relabel(decoder: &Rerandomized) -> Rerandomized {
    let code = decoder.inner.code();
    let trees = decoder
        .inner
        .all_trees()
        .iter()
        .map(|(&t, list)| {
            let list = list
                .iter()
                .map(|(tree, w)| {
                    let tree = tree.map_leaves(&mut |q, v, old| relabeled(code, t, q, v, old).unwrap_or(old));
                    (tree, *w)
                })
                .collect();
            (t, list)
        })
        .collect();
    decoder.with_inner(decoder.inner.with_trees(trees))
}

/// The sequence of decoders obtained by relabeling one leaf at a time, in
/// (target, tree, leaf) order; the last entry equals `relabel(decoder)`.
pub fn relabel_steps(decoder: &Rerandomized) -> Vec<Rerandomized> {
    let code = decoder.inner.code().clone();
    let mut current = decoder.inner.all_trees().clone();
    let mut out = Vec::new();
    let keys: Vec<Target> = current.keys().copied().collect();
    for t in keys {
        for i in 0..current[&t].len() {
            let leaves = current[&t][i].0.leaves();
            for (li, leaf) in leaves.iter().enumerate() {
                let Some(new) = relabeled(&code, t, &leaf.queries, &leaf.view, leaf.leaf) else {
                    continue;
                };
                let mut idx = 0;
                let tree = current[&t][i].0.map_leaves(&mut |_, _, old| {
                    let r = if idx == li { new } else { old };
                    idx += 1;
                    r
                });
                current.get_mut(&t).expect("key")[i].0 = tree;
                out.push(decoder.with_inner(decoder.inner.with_trees(current.clone())));
            }
        }
    }
    out
}

/// Per target, the probability of ending on a toxic leaf when run on a
/// uniformly random codeword.
pub fn toxic_rate(decoder: &AdaptiveDecoder) -> Result<BTreeMap<Target, Prob>, GoldbergError> {
    let code = decoder.code();
    let rr = rerandomize(decoder)?;
    let per = Prob::new(1, rr.codewords.len() as i128);
    let mut out = BTreeMap::new();
    for (&t, trees) in decoder.all_trees() {
        let mut rate = Prob::zero();
        for (tree, w) in trees {
            for c in &rr.codewords {
                let run = tree.run(c);
                if classify_leaf(code, t, &run.queries, &run.view).is_toxic() {
                    rate += w * per;
                }
            }
        }
        out.insert(t, rate);
    }
    Ok(out)
}

/// `|F|ε/(|F|-1)`.
pub fn toxic_bound(field_size: u32, epsilon: &Prob) -> Prob {
    let f = Prob::from_integer(field_size as i128);
    f * epsilon / (f - Prob::one())
}

/// `s + (2 + 1/(|F|-1))ε`.
pub fn certified_soundness(field_size: u32, s: &Prob, epsilon: &Prob) -> Prob {
    let extra = Prob::from_integer(2) + Prob::new(1, field_size as i128 - 1);
    s + extra * epsilon
}

/// Query-set distribution of each tree run on a uniform codeword, toxic
/// paths dropped and the rest renormalized, decoded canonically.
pub fn to_nonadaptive(decoder: &AdaptiveDecoder) -> Result<NonadaptiveDecoder, GoldbergError> {
    let code = decoder.code();
    let rr = rerandomize(decoder)?;
    let per = Prob::new(1, rr.codewords.len() as i128);
    let mut dists = BTreeMap::new();
    for (&t, trees) in decoder.all_trees() {
        let mut sets: BTreeMap<Vec<usize>, Prob> = BTreeMap::new();
        for (tree, w) in trees {
            for c in &rr.codewords {
                let run = tree.run(c);
                if classify_leaf(code, t, &run.queries, &run.view).is_toxic() {
                    continue;
                }
                let mut q = run.queries;
                q.sort_unstable();
                *sets.entry(q).or_insert_with(Prob::zero) += w * per;
            }
        }
        let total = sets.values().fold(Prob::zero(), |a, b| a + b);
        if total.is_zero() {
            return Err(GoldbergError::AllToxic(t));
        }
        let entries = sets.into_iter().map(|(s, w)| (s, w / total)).collect();
        dists.insert(t, QueryDistribution::new(entries)?);
    }
    Ok(NonadaptiveDecoder::new(code, decoder.q(), DecodeRule::Canonical, dists)?)
}

/// Exact completeness error and soundness error of a decoder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Params {
    pub epsilon: Prob,
    pub soundness: Prob,
    pub q_max: usize,
}

pub fn exact_params(decoder: &dyn LocalDecoder, code: &LinearCode, delta: &Prob, budget: u128) -> Result<(Params, EvalReport), GoldbergError> {
    let r = eval(decoder, code, Mode::Exact { budget }, &Exhaustive, delta)?;
    let c = r.completeness.exact().expect("exact mode");
    let s = r.soundness_error.exact().expect("exact mode");
    Ok((
        Params {
            epsilon: Prob::one() - c,
            soundness: s,
            q_max: r.q_max,
        },
        r,
    ))
}

#[derive(Debug, Clone)]
pub struct PipelineReport {
    pub input: Params,
    pub rerandomized: Params,
    pub relabeled: Params,
    /// Largest per-target toxic rate.
    pub toxic_rate: Prob,
    pub output: NonadaptiveDecoder,
    pub output_params: Params,
    pub certificate: Prob,
}

impl PipelineReport {
    /// Checks every bound the transformation promises.
    pub fn violations(&self, q: usize, field_size: u32) -> Vec<String> {
        let mut v = Vec::new();
        if self.output_params.epsilon != Prob::zero() {
            v.push(format!("output completeness error {}", self.output_params.epsilon));
        }
        if self.output_params.q_max > q {
            v.push(format!("output reads {} > {q} symbols", self.output_params.q_max));
        }
        if self.output_params.soundness > self.certificate {
            v.push(format!("soundness {} above certificate {}", self.output_params.soundness, self.certificate));
        }
        if self.toxic_rate > toxic_bound(field_size, &self.input.epsilon) {
            v.push(format!("toxic rate {} above bound", self.toxic_rate));
        }
        v
    }

    pub fn json_lines(&self) -> Vec<Value> {
        let stage = |name: &str, p: &Params, toxic: Option<&Prob>| {
            json!({
                "schema": SCHEMA,
                "stage": name,
                "completeness": prob_json(&(Prob::one() - p.epsilon)),
                "soundness": prob_json(&p.soundness),
                "toxic_rate": toxic.map(prob_json),
                "q_max": p.q_max,
            })
        };
        let mut out = vec![
            stage("input", &self.input, None),
            stage("rerandomized", &self.rerandomized, None),
            stage("relabeled", &self.relabeled, Some(&self.toxic_rate)),
            stage("nonadaptive", &self.output_params, None),
        ];
        out.push(json!({ "schema": SCHEMA, "stage": "certificate", "soundness_bound": prob_json(&self.certificate) }));
        out
    }
}

pub fn goldberg_pipeline(decoder: &AdaptiveDecoder, delta: &Prob, budget: u128) -> Result<PipelineReport, GoldbergError> {
    let code = decoder.code();
    let (input, _) = exact_params(decoder, code, delta, budget)?;
    let rr = rerandomize(decoder)?;
    let (rerandomized, _) = exact_params(&rr, code, delta, budget)?;
    let relab = relabel(&rr);
    let (relabeled, _) = exact_params(&relab, code, delta, budget)?;
    let toxic_rate = toxic_rate(decoder)?.into_values().max().unwrap_or_else(Prob::zero);
    let output = to_nonadaptive(relab.inner())?;
    let (output_params, _) = exact_params(&output, code, delta, budget)?;
    let certificate = certified_soundness(code.field().size(), &input.soundness, &input.epsilon);
    Ok(PipelineReport {
        input,
        rerandomized,
        relabeled,
        toxic_rate,
        output,
        output_params,
        certificate,
    })
}

/// Random adaptive decoders with trees of depth at most `depth`, for tests.
pub fn random_adaptive<R: rand::Rng + ?Sized>(code: &LinearCode, depth: usize, rng: &mut R) -> AdaptiveDecoder {
    use crate::decoder::Node;
    fn node<R: rand::Rng + ?Sized>(code: &LinearCode, depth: usize, path: &mut Vec<usize>, rng: &mut R) -> Node {
        let f = code.field().size();
        if depth == 0 || path.len() == code.n() || rng.gen_bool(0.2) {
            return Node::Leaf(if rng.gen_bool(0.15) {
                Leaf::Bottom
            } else {
                Leaf::Value(rng.gen_range(0..f))
            });
        }
        let free: Vec<usize> = (0..code.n()).filter(|j| !path.contains(j)).collect();
        let index = free[rng.gen_range(0..free.len())];
        path.push(index);
        let children = (0..f).map(|_| node(code, depth - 1, path, rng)).collect();
        path.pop();
        Node::Query { index, children }
    }
    let mut targets = BTreeMap::new();
    for t in Target::all_messages(code) {
        let count = rng.gen_range(1..=3usize);
        let raw: Vec<i128> = (0..count).map(|_| rng.gen_range(1..=4)).collect();
        let total: i128 = raw.iter().sum();
        let trees = raw
            .iter()
            .map(|&w| {
                let root = node(code, depth, &mut Vec::new(), rng);
                let tree = DecisionTree::new(root, code.field().size(), code.n()).expect("valid by construction");
                (tree, Prob::new(w, total))
            })
            .collect();
        targets.insert(t, trees);
    }
    AdaptiveDecoder::new(code, depth, targets).expect("valid by construction")
}
