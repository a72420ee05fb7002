//! Decoder models and their exact or sampled evaluation.
//!
//! A nonadaptive decoder is a per-target distribution over query sets plus a
//! decoding rule; adaptive decoders are distributions over decision trees.
//! Both expose their exact output distribution on any received word through
//! [`LocalDecoder`], which is what [`eval`] enumerates.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_traits::{One, Zero};
use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde_json::{json, Value};
use thiserror::Error;

use crate::codealg::{all_vectors, distance, tuples, CodeError, Field, LinearCode, Scalar, Subspace};
use crate::report::{prob_json, to_f64, trial_rng, Estimate, Prob};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecoderError {
    #[error("target {target} cannot be decoded from query set {set:?} (completeness violation)")]
    Completeness { target: Target, set: Vec<usize> },
    #[error("query set {set:?} exceeds the query bound {q}")]
    QueryBound { set: Vec<usize>, q: usize },
    #[error("invalid weights: {0}")]
    Weights(String),
    #[error("target {0} is out of range for this code")]
    TargetRange(Target),
    #[error("decoder has no distribution for target {0}")]
    UnknownTarget(Target),
    #[error("enumeration needs {needed} evaluations, budget is {budget}")]
    Budget { needed: u128, budget: u128 },
    #[error("adversary {0} cannot be enumerated")]
    NotEnumerable(String),
    #[error("adversary word at distance {dist} exceeds radius {radius}")]
    Radius { dist: usize, radius: usize },
    #[error("invalid decision tree: {0}")]
    Tree(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Code(#[from] CodeError),
}

/// What a decoder is asked to recover: a message symbol or a codeword symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Target {
    Message(usize),
    Codeword(usize),
}

impl Target {
    pub fn check(&self, code: &LinearCode) -> Result<(), DecoderError> {
        let ok = match *self {
            Target::Message(i) => i < code.k(),
            Target::Codeword(u) => u < code.n(),
        };
        if ok {
            Ok(())
        } else {
            Err(DecoderError::TargetRange(*self))
        }
    }

    /// The decoding vector: `e_i` for a message symbol, `v_u` for a codeword symbol.
    pub fn vstar(&self, code: &LinearCode) -> Vec<Scalar> {
        match *self {
            Target::Message(i) => crate::codealg::unit(code.k(), i),
            Target::Codeword(u) => code.row(u).to_vec(),
        }
    }

    /// Correct answer on the codeword `C(b)`.
    pub fn truth(&self, code: &LinearCode, b: &[Scalar]) -> Scalar {
        match *self {
            Target::Message(i) => b[i],
            Target::Codeword(u) => code.field().dot(code.row(u), b),
        }
    }

    pub fn all_messages(code: &LinearCode) -> Vec<Target> {
        (0..code.k()).map(Target::Message).collect()
    }

    pub fn all_codeword(code: &LinearCode) -> Vec<Target> {
        (0..code.n()).map(Target::Codeword).collect()
    }
}

impl fmt::Display for Target {
    /// One-based: `m1` is the first message symbol, `c1` the first codeword symbol.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Message(i) => write!(f, "m{}", i + 1),
            Target::Codeword(u) => write!(f, "c{}", u + 1),
        }
    }
}

impl FromStr for Target {
    type Err = DecoderError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || DecoderError::Parse(format!("bad target {s:?}"));
        let (kind, idx) = s.split_at(1.min(s.len()));
        let idx: usize = idx.parse().map_err(|_| bad())?;
        if idx == 0 {
            return Err(bad());
        }
        match kind {
            "m" => Ok(Target::Message(idx - 1)),
            "c" => Ok(Target::Codeword(idx - 1)),
            _ => Err(bad()),
        }
    }
}

/// A decoder output: a field symbol or the abort symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Outcome {
    Value(Scalar),
    Bottom,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Value(v) => write!(f, "{v}"),
            Outcome::Bottom => write!(f, "bottom"),
        }
    }
}

/// Exact distribution over outcomes.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct OutcomeDist(BTreeMap<Outcome, Prob>);

impl OutcomeDist {
    pub fn point(o: Outcome) -> Self {
        let mut d = OutcomeDist::default();
        d.add(o, Prob::one());
        d
    }

    pub fn add(&mut self, o: Outcome, p: Prob) {
        if p.is_zero() {
            return;
        }
        *self.0.entry(o).or_insert_with(Prob::zero) += p;
    }

    pub fn add_scaled(&mut self, other: &OutcomeDist, w: &Prob) {
        for (o, p) in &other.0 {
            self.add(*o, p * w);
        }
    }

    pub fn prob(&self, o: Outcome) -> Prob {
        self.0.get(&o).cloned().unwrap_or_else(Prob::zero)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Outcome, &Prob)> {
        self.0.iter()
    }

    pub fn total(&self) -> Prob {
        self.0.values().fold(Prob::zero(), |a, p| a + p)
    }

    /// `Pr[output ∉ {truth, ⊥}]`.
    pub fn error(&self, truth: Scalar) -> Prob {
        self.0
            .iter()
            .filter(|(o, _)| matches!(o, Outcome::Value(v) if *v != truth))
            .fold(Prob::zero(), |a, (_, p)| a + p)
    }

    /// `Pr[output ≠ truth]`, counting ⊥ as an error.
    pub fn strict_error(&self, truth: Scalar) -> Prob {
        Prob::one() - self.prob(Outcome::Value(truth))
    }

    /// Draws one outcome; floating point is fine for sampling.
    pub fn sample(&self, rng: &mut dyn RngCore) -> Outcome {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut last = Outcome::Bottom;
        for (o, p) in &self.0 {
            acc += to_f64(p);
            last = *o;
            if u < acc {
                return *o;
            }
        }
        last
    }
}

/// Common interface of every decoder model.
pub trait LocalDecoder: Sync {
    fn targets(&self) -> Vec<Target>;

    /// Largest number of symbols read on any execution.
    fn max_queries(&self) -> usize;

    /// Exact output distribution on the received word `y`.
    fn distribution(&self, target: Target, y: &[Scalar]) -> OutcomeDist;

    fn sample(&self, target: Target, y: &[Scalar], rng: &mut dyn RngCore) -> Outcome {
        self.distribution(target, y).sample(rng)
    }
}

/// Per-target distribution over query sets with exact weights.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryDistribution {
    entries: Vec<(Vec<usize>, Prob)>,
}

impl QueryDistribution {
    /// Sorts each set, merges duplicates and checks that weights sum to one.
    pub fn new(entries: Vec<(Vec<usize>, Prob)>) -> Result<Self, DecoderError> {
        let mut merged: BTreeMap<Vec<usize>, Prob> = BTreeMap::new();
        for (mut set, w) in entries {
            if w <= Prob::zero() {
                return Err(DecoderError::Weights(format!("nonpositive weight {w}")));
            }
            set.sort_unstable();
            if set.windows(2).any(|p| p[0] == p[1]) {
                return Err(DecoderError::Weights(format!("repeated index in {set:?}")));
            }
            *merged.entry(set).or_insert_with(Prob::zero) += w;
        }
        let total = merged.values().fold(Prob::zero(), |a, w| a + w);
        if total != Prob::one() {
            return Err(DecoderError::Weights(format!("weights sum to {total}")));
        }
        Ok(QueryDistribution {
            entries: merged.into_iter().collect(),
        })
    }

    pub fn point(set: Vec<usize>) -> Self {
        QueryDistribution::new(vec![(set, Prob::one())]).expect("point mass")
    }

    pub fn uniform(sets: Vec<Vec<usize>>) -> Result<Self, DecoderError> {
        let w = Prob::new(1, sets.len() as i128);
        QueryDistribution::new(sets.into_iter().map(|s| (s, w)).collect())
    }

    pub fn entries(&self) -> &[(Vec<usize>, Prob)] {
        &self.entries
    }

    /// `Pr[j ∈ Q]`.
    pub fn coordinate_prob(&self, j: usize) -> Prob {
        self.entries
            .iter()
            .filter(|(s, _)| s.binary_search(&j).is_ok())
            .fold(Prob::zero(), |a, (_, w)| a + w)
    }

    pub fn max_set_size(&self) -> usize {
        self.entries.iter().map(|(s, _)| s.len()).max().unwrap_or(0)
    }
}

/// How a nonadaptive decoder turns its view into an answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodeRule {
    /// ⊥ when the view is inconsistent with every codeword, else the forced value.
    Canonical,
    /// A fixed linear combination of the view; never ⊥.
    Linear,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Branch {
    pub set: Vec<usize>,
    pub weight: Prob,
    /// `Σ coeffs[m]·v_{set[m]} = v*`.
    pub coeffs: Vec<Scalar>,
    local: Subspace,
}

/// A nonadaptive decoder: per target, a distribution over query sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NonadaptiveDecoder {
    field: Field,
    q: usize,
    rule: DecodeRule,
    targets: BTreeMap<Target, Vec<Branch>>,
}

/// Decodes a single view with the canonical rule, checking completeness.
pub fn canonical_decode(
    code: &LinearCode,
    target: Target,
    set: &[usize],
    z: &[Scalar],
) -> Result<Outcome, DecoderError> {
    let coeffs = code
        .in_span(&target.vstar(code), set)
        .ok_or_else(|| DecoderError::Completeness {
            target,
            set: set.to_vec(),
        })?;
    if !code.restrict(set).contains(z) {
        return Ok(Outcome::Bottom);
    }
    Ok(Outcome::Value(code.field().dot(&coeffs, z)))
}

impl NonadaptiveDecoder {
    /// Builds a decoder, rejecting any support set that cannot determine the target.
    pub fn new(
        code: &LinearCode,
        q: usize,
        rule: DecodeRule,
        dists: BTreeMap<Target, QueryDistribution>,
    ) -> Result<Self, DecoderError> {
        let mut targets = BTreeMap::new();
        for (target, dist) in dists {
            target.check(code)?;
            let vstar = target.vstar(code);
            let mut branches = Vec::new();
            for (set, w) in dist.entries {
                if set.len() > q {
                    return Err(DecoderError::QueryBound { set, q });
                }
                if let Some(&j) = set.iter().find(|&&j| j >= code.n()) {
                    return Err(CodeError::Index { index: j, bound: code.n() }.into());
                }
                let coeffs = code
                    .in_span(&vstar, &set)
                    .ok_or_else(|| DecoderError::Completeness {
                        target,
                        set: set.clone(),
                    })?;
                let local = code.restrict(&set);
                branches.push(Branch {
                    set,
                    weight: w,
                    coeffs,
                    local,
                });
            }
            targets.insert(target, branches);
        }
        Ok(NonadaptiveDecoder {
            field: *code.field(),
            q,
            rule,
            targets,
        })
    }

    /// Linear-rule decoder with caller-supplied combinations, each checked to
    /// decode the target on every codeword of `code`.
    pub fn with_coefficients(
        code: &LinearCode,
        q: usize,
        branches: BTreeMap<Target, Vec<(Vec<usize>, Prob, Vec<Scalar>)>>,
    ) -> Result<Self, DecoderError> {
        let mut targets = BTreeMap::new();
        for (target, list) in branches {
            target.check(code)?;
            let vstar = target.vstar(code);
            let total = list.iter().fold(Prob::zero(), |a, (_, w, _)| a + w);
            if total != Prob::one() {
                return Err(DecoderError::Weights(format!("weights sum to {total}")));
            }
            let mut out = Vec::new();
            for (set, w, coeffs) in list {
                if set.len() > q {
                    return Err(DecoderError::QueryBound { set, q });
                }
                let mut combo = vec![0; code.k()];
                for (&j, &c) in set.iter().zip(&coeffs) {
                    code.field().axpy(&mut combo, c, code.row(j));
                }
                if combo != vstar || coeffs.len() != set.len() {
                    return Err(DecoderError::Completeness { target, set });
                }
                let local = code.restrict(&set);
                out.push(Branch {
                    set,
                    weight: w,
                    coeffs,
                    local,
                });
            }
            targets.insert(target, out);
        }
        Ok(NonadaptiveDecoder {
            field: *code.field(),
            q,
            rule: DecodeRule::Linear,
            targets,
        })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn rule(&self) -> DecodeRule {
        self.rule
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn branches(&self, target: Target) -> &[Branch] {
        self.targets.get(&target).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn query_distribution(&self, target: Target) -> Option<QueryDistribution> {
        let b = self.targets.get(&target)?;
        Some(QueryDistribution {
            entries: b.iter().map(|br| (br.set.clone(), br.weight)).collect(),
        })
    }

    pub fn distributions(&self) -> BTreeMap<Target, QueryDistribution> {
        self.targets
            .keys()
            .map(|&t| (t, self.query_distribution(t).expect("present")))
            .collect()
    }

    pub fn with_rule(&self, rule: DecodeRule) -> Self {
        let mut d = self.clone();
        d.rule = rule;
        d
    }

    /// Output of one branch on the word `y`.
    pub fn decode_branch(&self, branch: &Branch, y: &[Scalar]) -> Outcome {
        let z: Vec<Scalar> = branch.set.iter().map(|&j| y[j]).collect();
        if self.rule == DecodeRule::Canonical && !branch.local.contains(&z) {
            return Outcome::Bottom;
        }
        Outcome::Value(self.field.dot(&branch.coeffs, &z))
    }

    /// One line per branch: `num/den j1 j2 ... [: c1 c2 ...]`, indices one-based.
    pub fn to_text(&self) -> String {
        let rule = match self.rule {
            DecodeRule::Canonical => "canonical",
            DecodeRule::Linear => "linear",
        };
        let mut out = format!("decoder q {} rule {}\n", self.q, rule);
        for (target, branches) in &self.targets {
            out.push_str(&format!("target {target}\n"));
            for br in branches {
                let set: Vec<String> = br.set.iter().map(|j| (j + 1).to_string()).collect();
                let set = if set.is_empty() { "-".to_string() } else { set.join(" ") };
                out.push_str(&format!("{}/{} {}", br.weight.numer(), br.weight.denom(), set));
                if self.rule == DecodeRule::Linear {
                    let c: Vec<String> = br.coeffs.iter().map(|c| c.to_string()).collect();
                    out.push_str(&format!(" : {}", c.join(" ")));
                }
                out.push('\n');
            }
        }
        out
    }

    pub fn from_text(text: &str, code: &LinearCode) -> Result<Self, DecoderError> {
        let perr = |m: String| DecoderError::Parse(m);
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header: Vec<&str> = lines
            .next()
            .ok_or_else(|| perr("missing header".into()))?
            .split_whitespace()
            .collect();
        let (q, rule) = match header.as_slice() {
            ["decoder", "q", q, "rule", rule] => (
                q.parse::<usize>().map_err(|_| perr(format!("bad q {q:?}")))?,
                match *rule {
                    "canonical" => DecodeRule::Canonical,
                    "linear" => DecodeRule::Linear,
                    r => return Err(perr(format!("unknown rule {r:?}"))),
                },
            ),
            ["decoder", "q", q] => (
                q.parse::<usize>().map_err(|_| perr(format!("bad q {q:?}")))?,
                DecodeRule::Canonical,
            ),
            _ => return Err(perr("header must be `decoder q <q> [rule <rule>]`".into())),
        };
        let mut parsed: BTreeMap<Target, Vec<(Vec<usize>, Prob, Option<Vec<Scalar>>)>> = BTreeMap::new();
        let mut current = None;
        for line in lines {
            if let Some(t) = line.strip_prefix("target ") {
                let t: Target = t.trim().parse()?;
                parsed.entry(t).or_default();
                current = Some(t);
                continue;
            }
            let t = current.ok_or_else(|| perr("branch before any target".into()))?;
            let (lhs, coeffs) = match line.split_once(':') {
                Some((l, c)) => (
                    l,
                    Some(
                        c.split_whitespace()
                            .map(|x| x.parse::<Scalar>().map_err(|_| perr(format!("bad coefficient {x:?}"))))
                            .collect::<Result<Vec<_>, _>>()?,
                    ),
                ),
                None => (line, None),
            };
            let mut parts = lhs.split_whitespace();
            let w = parts.next().ok_or_else(|| perr("empty branch".into()))?;
            let (num, den) = w.split_once('/').unwrap_or((w, "1"));
            let num: i128 = num.parse().map_err(|_| perr(format!("bad weight {w:?}")))?;
            let den: i128 = den.parse().map_err(|_| perr(format!("bad weight {w:?}")))?;
            if den == 0 {
                return Err(perr(format!("bad weight {w:?}")));
            }
            let mut set = Vec::new();
            for p in parts {
                if p == "-" {
                    continue;
                }
                let j: usize = p.parse().map_err(|_| perr(format!("bad index {p:?}")))?;
                if j == 0 {
                    return Err(perr("indices are one-based".into()));
                }
                set.push(j - 1);
            }
            parsed.get_mut(&t).expect("inserted").push((set, Prob::new(num, den), coeffs));
        }
        let explicit = parsed.values().flatten().all(|(_, _, c)| c.is_some());
        if rule == DecodeRule::Linear && explicit {
            let branches = parsed
                .into_iter()
                .map(|(t, v)| (t, v.into_iter().map(|(s, w, c)| (s, w, c.expect("checked"))).collect()))
                .collect();
            return NonadaptiveDecoder::with_coefficients(code, q, branches);
        }
        let dists = parsed
            .into_iter()
            .map(|(t, v)| Ok((t, QueryDistribution::new(v.into_iter().map(|(s, w, _)| (s, w)).collect())?)))
            .collect::<Result<BTreeMap<_, _>, DecoderError>>()?;
        NonadaptiveDecoder::new(code, q, rule, dists)
    }
}

impl LocalDecoder for NonadaptiveDecoder {
    fn targets(&self) -> Vec<Target> {
        self.targets.keys().copied().collect()
    }

    fn max_queries(&self) -> usize {
        self.targets
            .values()
            .flatten()
            .map(|b| b.set.len())
            .max()
            .unwrap_or(0)
    }

    fn distribution(&self, target: Target, y: &[Scalar]) -> OutcomeDist {
        let mut d = OutcomeDist::default();
        for br in self.branches(target) {
            d.add(self.decode_branch(br, y), br.weight);
        }
        d
    }

    fn sample(&self, target: Target, y: &[Scalar], rng: &mut dyn RngCore) -> Outcome {
        let branches = self.branches(target);
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for br in branches {
            acc += to_f64(&br.weight);
            if u < acc {
                return self.decode_branch(br, y);
            }
        }
        self.decode_branch(branches.last().expect("nonempty"), y)
    }
}

/// `t` independent copies; outputs σ only when every copy says σ.
#[derive(Debug, Clone)]
pub struct Repeated<D> {
    inner: D,
    times: u32,
}

pub fn repeat_decoder<D: LocalDecoder>(inner: D, times: u32) -> Repeated<D> {
    assert!(times >= 1, "at least one repetition");
    Repeated { inner, times }
}

impl<D: LocalDecoder> Repeated<D> {
    pub fn inner(&self) -> &D {
        &self.inner
    }
}

impl<D: LocalDecoder> LocalDecoder for Repeated<D> {
    fn targets(&self) -> Vec<Target> {
        self.inner.targets()
    }

    fn max_queries(&self) -> usize {
        self.inner.max_queries() * self.times as usize
    }

    fn distribution(&self, target: Target, y: &[Scalar]) -> OutcomeDist {
        let base = self.inner.distribution(target, y);
        let mut d = OutcomeDist::default();
        let mut agree = Prob::zero();
        for (o, p) in base.iter() {
            if let Outcome::Value(_) = o {
                let pt = crate::report::pow(p, self.times);
                agree += pt;
                d.add(*o, pt);
            }
        }
        d.add(Outcome::Bottom, Prob::one() - agree);
        d
    }

    fn sample(&self, target: Target, y: &[Scalar], rng: &mut dyn RngCore) -> Outcome {
        let first = self.inner.sample(target, y, rng);
        let mut out = first;
        for _ in 1..self.times {
            if self.inner.sample(target, y, rng) != first {
                out = Outcome::Bottom;
            }
        }
        match first {
            Outcome::Bottom => Outcome::Bottom,
            _ => out,
        }
    }
}

/// Label of a decision-tree leaf.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Leaf {
    Value(Scalar),
    Bottom,
    /// Read the whole word and decode it if it is a codeword, else ⊥.
    Global,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Node {
    Leaf(Leaf),
    Query { index: usize, children: Vec<Node> },
}

/// A query decision tree with one child per field symbol.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DecisionTree {
    root: Node,
}

/// Result of walking a tree on a word.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeRun {
    pub queries: Vec<usize>,
    pub view: Vec<Scalar>,
    pub leaf: Leaf,
}

/// A leaf together with the path that reaches it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LeafPath {
    pub queries: Vec<usize>,
    pub view: Vec<Scalar>,
    pub leaf: Leaf,
}

impl DecisionTree {
    /// Validates fan-out, index range and that no path repeats an index.
    pub fn new(root: Node, field_size: u32, n: usize) -> Result<Self, DecoderError> {
        fn check(node: &Node, q: u32, n: usize, path: &mut Vec<usize>) -> Result<(), DecoderError> {
            match node {
                Node::Leaf(_) => Ok(()),
                Node::Query { index, children } => {
                    if *index >= n {
                        return Err(DecoderError::Tree(format!("index {index} out of range")));
                    }
                    if path.contains(index) {
                        return Err(DecoderError::Tree(format!("index {index} repeated on a path")));
                    }
                    if children.len() != q as usize {
                        return Err(DecoderError::Tree(format!(
                            "node on {index} has {} children, expected {q}",
                            children.len()
                        )));
                    }
                    path.push(*index);
                    for c in children {
                        check(c, q, n, path)?;
                    }
                    path.pop();
                    Ok(())
                }
            }
        }
        check(&root, field_size, n, &mut Vec::new())?;
        Ok(DecisionTree { root })
    }

    pub fn leaf(label: Leaf) -> Self {
        DecisionTree {
            root: Node::Leaf(label),
        }
    }

    /// Tree reading `set` in order and labeling each view with `label`.
    pub fn complete(set: &[usize], field_size: u32, label: &dyn Fn(&[Scalar]) -> Leaf) -> Self {
        fn build(set: &[usize], q: u32, view: &mut Vec<Scalar>, label: &dyn Fn(&[Scalar]) -> Leaf) -> Node {
            match set.split_first() {
                None => Node::Leaf(label(view)),
                Some((&j, rest)) => {
                    let children = (0..q)
                        .map(|s| {
                            view.push(s);
                            let c = build(rest, q, view, label);
                            view.pop();
                            c
                        })
                        .collect();
                    Node::Query { index: j, children }
                }
            }
        }
        DecisionTree {
            root: build(set, field_size, &mut Vec::new(), label),
        }
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    /// Number of query layers on the deepest path (global leaves not counted).
    pub fn depth(&self) -> usize {
        fn d(n: &Node) -> usize {
            match n {
                Node::Leaf(_) => 0,
                Node::Query { children, .. } => 1 + children.iter().map(d).max().unwrap_or(0),
            }
        }
        d(&self.root)
    }

    pub fn has_global(&self) -> bool {
        self.leaves().iter().any(|l| l.leaf == Leaf::Global)
    }

    pub fn run(&self, y: &[Scalar]) -> TreeRun {
        let mut node = &self.root;
        let mut queries = Vec::new();
        let mut view = Vec::new();
        loop {
            match node {
                Node::Leaf(l) => {
                    return TreeRun {
                        queries,
                        view,
                        leaf: *l,
                    }
                }
                Node::Query { index, children } => {
                    queries.push(*index);
                    view.push(y[*index]);
                    node = &children[y[*index] as usize];
                }
            }
        }
    }

    pub fn leaves(&self) -> Vec<LeafPath> {
        fn walk(n: &Node, q: &mut Vec<usize>, v: &mut Vec<Scalar>, out: &mut Vec<LeafPath>) {
            match n {
                Node::Leaf(l) => out.push(LeafPath {
                    queries: q.clone(),
                    view: v.clone(),
                    leaf: *l,
                }),
                Node::Query { index, children } => {
                    q.push(*index);
                    for (s, c) in children.iter().enumerate() {
                        v.push(s as Scalar);
                        walk(c, q, v, out);
                        v.pop();
                    }
                    q.pop();
                }
            }
        }
        let mut out = Vec::new();
        walk(&self.root, &mut Vec::new(), &mut Vec::new(), &mut out);
        out
    }

    /// Replaces every leaf label via `f(queries, view, old)`.
    pub fn map_leaves(&self, f: &mut dyn FnMut(&[usize], &[Scalar], Leaf) -> Leaf) -> Self {
        fn walk(
            n: &Node,
            q: &mut Vec<usize>,
            v: &mut Vec<Scalar>,
            f: &mut dyn FnMut(&[usize], &[Scalar], Leaf) -> Leaf,
        ) -> Node {
            match n {
                Node::Leaf(l) => Node::Leaf(f(q, v, *l)),
                Node::Query { index, children } => {
                    q.push(*index);
                    let children = children
                        .iter()
                        .enumerate()
                        .map(|(s, c)| {
                            v.push(s as Scalar);
                            let r = walk(c, q, v, f);
                            v.pop();
                            r
                        })
                        .collect();
                    q.pop();
                    Node::Query {
                        index: *index,
                        children,
                    }
                }
            }
        }
        DecisionTree {
            root: walk(&self.root, &mut Vec::new(), &mut Vec::new(), f),
        }
    }

    /// Prefix text form: `q<j> [child] [child] ...`, leaves `v<σ>`, `_` (⊥) and `*` (global).
    /// Indices are one-based.
    pub fn to_text(&self) -> String {
        fn w(n: &Node, out: &mut String) {
            match n {
                Node::Leaf(Leaf::Value(v)) => out.push_str(&format!("v{v}")),
                Node::Leaf(Leaf::Bottom) => out.push('_'),
                Node::Leaf(Leaf::Global) => out.push('*'),
                Node::Query { index, children } => {
                    out.push_str(&format!("q{}", index + 1));
                    for c in children {
                        out.push_str(" [");
                        w(c, out);
                        out.push(']');
                    }
                }
            }
        }
        let mut s = String::new();
        w(&self.root, &mut s);
        s
    }

    pub fn from_text(text: &str, field_size: u32, n: usize) -> Result<Self, DecoderError> {
        let tokens: Vec<String> = text
            .replace('[', " [ ")
            .replace(']', " ] ")
            .split_whitespace()
            .map(String::from)
            .collect();
        fn parse(tokens: &[String], pos: &mut usize) -> Result<Node, DecoderError> {
            let perr = |m: String| DecoderError::Parse(m);
            let tok = tokens.get(*pos).ok_or_else(|| perr("unexpected end of tree".into()))?;
            *pos += 1;
            if tok == "_" {
                return Ok(Node::Leaf(Leaf::Bottom));
            }
            if tok == "*" {
                return Ok(Node::Leaf(Leaf::Global));
            }
            if let Some(v) = tok.strip_prefix('v') {
                return Ok(Node::Leaf(Leaf::Value(
                    v.parse().map_err(|_| perr(format!("bad leaf {tok:?}")))?,
                )));
            }
            if let Some(j) = tok.strip_prefix('q') {
                let j: usize = j.parse().map_err(|_| perr(format!("bad query {tok:?}")))?;
                if j == 0 {
                    return Err(perr("indices are one-based".into()));
                }
                let mut children = Vec::new();
                while tokens.get(*pos).map(String::as_str) == Some("[") {
                    *pos += 1;
                    children.push(parse(tokens, pos)?);
                    if tokens.get(*pos).map(String::as_str) != Some("]") {
                        return Err(perr("missing ]".into()));
                    }
                    *pos += 1;
                }
                return Ok(Node::Query {
                    index: j - 1,
                    children,
                });
            }
            Err(perr(format!("unexpected token {tok:?}")))
        }
        let mut pos = 0;
        let root = parse(&tokens, &mut pos)?;
        if pos != tokens.len() {
            return Err(DecoderError::Parse("trailing tokens after tree".into()));
        }
        DecisionTree::new(root, field_size, n)
    }
}

/// Decodes the target from the whole word, or ⊥ if it is not a codeword.
pub fn global_decode(code: &LinearCode, target: Target, y: &[Scalar]) -> Outcome {
    let eqs: Vec<Vec<Scalar>> = code.rows().to_vec();
    match crate::codealg::solve(code.field(), &eqs, y, code.k()) {
        Some(b) => Outcome::Value(target.truth(code, &b)),
        None => Outcome::Bottom,
    }
}

/// An adaptive decoder: per target, a distribution over decision trees.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdaptiveDecoder {
    code: LinearCode,
    q: usize,
    targets: BTreeMap<Target, Vec<(DecisionTree, Prob)>>,
}

impl AdaptiveDecoder {
    pub fn new(
        code: &LinearCode,
        q: usize,
        targets: BTreeMap<Target, Vec<(DecisionTree, Prob)>>,
    ) -> Result<Self, DecoderError> {
        for (t, trees) in &targets {
            t.check(code)?;
            let total = trees.iter().fold(Prob::zero(), |a, (_, w)| a + w);
            if total != Prob::one() || trees.iter().any(|(_, w)| *w <= Prob::zero()) {
                return Err(DecoderError::Weights(format!("target {t}: weights sum to {total}")));
            }
            for (tree, _) in trees {
                if tree.depth() > q {
                    return Err(DecoderError::Tree(format!("depth {} exceeds q = {q}", tree.depth())));
                }
                // revalidate against this code's field and length
                DecisionTree::new(tree.root.clone(), code.field().size(), code.n())?;
            }
        }
        Ok(AdaptiveDecoder {
            code: code.clone(),
            q,
            targets,
        })
    }

    /// The same decoder written as complete trees over each support set.
    pub fn from_nonadaptive(code: &LinearCode, d: &NonadaptiveDecoder) -> Result<Self, DecoderError> {
        let q = code.field().size();
        let mut targets = BTreeMap::new();
        for t in d.targets() {
            let trees = d
                .branches(t)
                .iter()
                .map(|br| {
                    let label = |view: &[Scalar]| {
                        let mut y = vec![0; code.n()];
                        for (&j, &s) in br.set.iter().zip(view) {
                            y[j] = s;
                        }
                        match d.decode_branch(br, &y) {
                            Outcome::Value(v) => Leaf::Value(v),
                            Outcome::Bottom => Leaf::Bottom,
                        }
                    };
                    (DecisionTree::complete(&br.set, q, &label), br.weight)
                })
                .collect();
            targets.insert(t, trees);
        }
        AdaptiveDecoder::new(code, d.q(), targets)
    }

    pub fn code(&self) -> &LinearCode {
        &self.code
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn trees(&self, target: Target) -> &[(DecisionTree, Prob)] {
        self.targets.get(&target).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn all_trees(&self) -> &BTreeMap<Target, Vec<(DecisionTree, Prob)>> {
        &self.targets
    }

    /// Same code and weights, new trees.
    pub fn with_trees(&self, targets: BTreeMap<Target, Vec<(DecisionTree, Prob)>>) -> Self {
        AdaptiveDecoder {
            code: self.code.clone(),
            q: self.q,
            targets,
        }
    }

    pub fn leaf_outcome(&self, target: Target, leaf: Leaf, y: &[Scalar]) -> Outcome {
        match leaf {
            Leaf::Value(v) => Outcome::Value(v),
            Leaf::Bottom => Outcome::Bottom,
            Leaf::Global => global_decode(&self.code, target, y),
        }
    }

    /// Header `adaptive q <q>`, then `target <t>` blocks of `num/den <tree>` lines.
    pub fn to_text(&self) -> String {
        let mut out = format!("adaptive q {}\n", self.q);
        for (target, trees) in &self.targets {
            out.push_str(&format!("target {target}\n"));
            for (tree, w) in trees {
                out.push_str(&format!("{}/{} {}\n", w.numer(), w.denom(), tree.to_text()));
            }
        }
        out
    }

    pub fn from_text(text: &str, code: &LinearCode) -> Result<Self, DecoderError> {
        let perr = |m: String| DecoderError::Parse(m);
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header: Vec<&str> = lines
            .next()
            .ok_or_else(|| perr("missing header".into()))?
            .split_whitespace()
            .collect();
        let q = match header.as_slice() {
            ["adaptive", "q", q] => q.parse::<usize>().map_err(|_| perr(format!("bad q {q:?}")))?,
            _ => return Err(perr("header must be `adaptive q <q>`".into())),
        };
        let mut targets: BTreeMap<Target, Vec<(DecisionTree, Prob)>> = BTreeMap::new();
        let mut current = None;
        for line in lines {
            if let Some(t) = line.strip_prefix("target ") {
                let t: Target = t.trim().parse()?;
                targets.entry(t).or_default();
                current = Some(t);
                continue;
            }
            let t = current.ok_or_else(|| perr("tree before any target".into()))?;
            let (w, tree) = line
                .split_once(char::is_whitespace)
                .ok_or_else(|| perr(format!("expected `<weight> <tree>`, got {line:?}")))?;
            let (num, den) = w.split_once('/').unwrap_or((w, "1"));
            let num: i128 = num.parse().map_err(|_| perr(format!("bad weight {w:?}")))?;
            let den: i128 = den.parse().map_err(|_| perr(format!("bad weight {w:?}")))?;
            if den == 0 {
                return Err(perr(format!("bad weight {w:?}")));
            }
            let tree = DecisionTree::from_text(tree, code.field().size(), code.n())?;
            targets.get_mut(&t).expect("inserted").push((tree, Prob::new(num, den)));
        }
        AdaptiveDecoder::new(code, q, targets)
    }
}

impl LocalDecoder for AdaptiveDecoder {
    fn targets(&self) -> Vec<Target> {
        self.targets.keys().copied().collect()
    }

    fn max_queries(&self) -> usize {
        let n = self.code.n();
        self.targets
            .values()
            .flatten()
            .map(|(t, _)| if t.has_global() { n } else { t.depth() })
            .max()
            .unwrap_or(0)
    }

    fn distribution(&self, target: Target, y: &[Scalar]) -> OutcomeDist {
        let mut d = OutcomeDist::default();
        for (tree, w) in self.trees(target) {
            let run = tree.run(y);
            d.add(self.leaf_outcome(target, run.leaf, y), *w);
        }
        d
    }
}

/// Corruption radius `⌊δn⌋`.
pub fn radius(delta: &Prob, n: usize) -> usize {
    let r = delta * Prob::from_integer(n as i128);
    r.floor().to_integer().max(0) as usize
}

/// A corruption strategy.
pub trait Adversary: Sync {
    fn name(&self) -> String;

    /// Number of words produced per codeword in exact mode, if enumerable.
    fn pattern_count(&self, code: &LinearCode, radius: usize) -> Option<u128>;

    /// Every corrupted word for `C(b)`, in a fixed order.
    fn enumerate(&self, code: &LinearCode, codeword: &[Scalar], target: Target, radius: usize) -> Option<Vec<Vec<Scalar>>>;

    fn sample(
        &self,
        code: &LinearCode,
        codeword: &[Scalar],
        target: Target,
        radius: usize,
        rng: &mut dyn RngCore,
    ) -> Vec<Scalar>;
}

fn binom(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// All k-subsets of 0..n in lexicographic order.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for j in start..n {
            if n - j < k - cur.len() {
                break;
            }
            cur.push(j);
            rec(j + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// Every word within Hamming distance `radius`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Exhaustive;

impl Adversary for Exhaustive {
    fn name(&self) -> String {
        "exhaustive".into()
    }

    fn pattern_count(&self, code: &LinearCode, radius: usize) -> Option<u128> {
        let q1 = code.field().size() as u128 - 1;
        let mut total = 0u128;
        for w in 0..=radius.min(code.n()) {
            total = total.checked_add(binom(code.n(), w).checked_mul(q1.checked_pow(w as u32)?)?)?;
        }
        Some(total)
    }

    fn enumerate(&self, code: &LinearCode, cw: &[Scalar], _t: Target, radius: usize) -> Option<Vec<Vec<Scalar>>> {
        let f = code.field();
        let mut out = Vec::new();
        for w in 0..=radius.min(code.n()) {
            for set in combinations(code.n(), w) {
                // shifts in 1..q, enumerated as digits over q-1 symbols
                for shift in tuples(f.size() - 1, w) {
                    let mut y = cw.to_vec();
                    for (&j, &s) in set.iter().zip(&shift) {
                        y[j] = f.add(y[j], s + 1);
                    }
                    out.push(y);
                }
            }
        }
        Some(out)
    }

    fn sample(&self, code: &LinearCode, cw: &[Scalar], t: Target, radius: usize, rng: &mut dyn RngCore) -> Vec<Scalar> {
        RandomPositions.sample(code, cw, t, radius, rng)
    }
}

/// Shifts `radius` uniformly chosen positions by uniform nonzero amounts.
#[derive(Debug, Clone, Copy, Default)]
pub struct RandomPositions;

impl Adversary for RandomPositions {
    fn name(&self) -> String {
        "random-positions".into()
    }

    fn pattern_count(&self, _code: &LinearCode, _radius: usize) -> Option<u128> {
        None
    }

    fn enumerate(&self, _: &LinearCode, _: &[Scalar], _: Target, _: usize) -> Option<Vec<Vec<Scalar>>> {
        None
    }

    fn sample(&self, code: &LinearCode, cw: &[Scalar], _t: Target, radius: usize, rng: &mut dyn RngCore) -> Vec<Scalar> {
        let f = code.field();
        let picked = rand::seq::index::sample(rng, code.n(), radius.min(code.n()));
        let mut y = cw.to_vec();
        for j in picked.iter() {
            let s = rng.gen_range(1..f.size());
            y[j] = f.add(y[j], s);
        }
        y
    }
}

/// Overrides a fixed set of positions with every possible assignment.
#[derive(Debug, Clone, Default)]
pub struct FixedSet {
    pub positions: Vec<usize>,
}

impl Adversary for FixedSet {
    fn name(&self) -> String {
        format!("fixed-set{:?}", self.positions)
    }

    fn pattern_count(&self, code: &LinearCode, _radius: usize) -> Option<u128> {
        (code.field().size() as u128).checked_pow(self.positions.len() as u32)
    }

    fn enumerate(&self, code: &LinearCode, cw: &[Scalar], _t: Target, _radius: usize) -> Option<Vec<Vec<Scalar>>> {
        Some(
            all_vectors(code.field(), self.positions.len())
                .map(|vals| {
                    let mut y = cw.to_vec();
                    for (&j, &v) in self.positions.iter().zip(&vals) {
                        y[j] = v;
                    }
                    y
                })
                .collect(),
        )
    }

    fn sample(&self, code: &LinearCode, cw: &[Scalar], _t: Target, _radius: usize, rng: &mut dyn RngCore) -> Vec<Scalar> {
        let mut y = cw.to_vec();
        for &j in &self.positions {
            y[j] = code.field().sample(rng);
        }
        y
    }
}

/// Adds a fixed shift (by default 1) at a fixed set of positions.
#[derive(Debug, Clone)]
pub struct Shift {
    pub positions: Vec<usize>,
    pub amount: Scalar,
}

impl Adversary for Shift {
    fn name(&self) -> String {
        format!("shift{:?}+{}", self.positions, self.amount)
    }

    fn pattern_count(&self, _code: &LinearCode, _radius: usize) -> Option<u128> {
        Some(1)
    }

    fn enumerate(&self, code: &LinearCode, cw: &[Scalar], t: Target, r: usize) -> Option<Vec<Vec<Scalar>>> {
        Some(vec![self.sample(code, cw, t, r, &mut rand::rngs::mock::StepRng::new(0, 0))])
    }

    fn sample(&self, code: &LinearCode, cw: &[Scalar], _t: Target, _r: usize, _rng: &mut dyn RngCore) -> Vec<Scalar> {
        let mut y = cw.to_vec();
        for &j in &self.positions {
            y[j] = code.field().add(y[j], self.amount);
        }
        y
    }
}

/// Evaluation mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Exact { budget: u128 },
    MonteCarlo { trials: u64, seed: u64 },
}

/// An exact value or a sampled estimate.
#[derive(Debug, Clone, PartialEq)]
pub enum Measure {
    Exact(Prob),
    Estimate(Estimate),
}

impl Measure {
    pub fn exact(&self) -> Option<Prob> {
        match self {
            Measure::Exact(p) => Some(*p),
            Measure::Estimate(_) => None,
        }
    }

    pub fn as_f64(&self) -> f64 {
        match self {
            Measure::Exact(p) => to_f64(p),
            Measure::Estimate(e) => e.mean(),
        }
    }

    pub fn json(&self) -> Value {
        match self {
            Measure::Exact(p) => prob_json(p),
            Measure::Estimate(e) => e.json(),
        }
    }
}

/// A (target, message, received word) triple reproducing a reported maximum.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Witness {
    pub target: Target,
    pub message: Vec<Scalar>,
    pub word: Vec<Scalar>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// Minimum probability of the correct answer on uncorrupted codewords.
    pub completeness: Measure,
    /// Maximum probability of a wrong non-⊥ answer on corrupted words.
    pub soundness_error: Measure,
    /// Maximum probability of any answer other than the truth, ⊥ included.
    pub strict_error: Measure,
    pub q_max: usize,
    pub trials: u64,
    pub seed: Option<u64>,
    pub witness: Option<Witness>,
}

impl EvalReport {
    pub fn json(&self) -> Value {
        json!({
            "schema": crate::report::SCHEMA,
            "completeness": self.completeness.json(),
            "soundness_error": self.soundness_error.json(),
            "strict_error": self.strict_error.json(),
            "q_max": self.q_max,
            "trials": self.trials,
            "seed": self.seed,
            "witness": self.witness.as_ref().map(|w| json!({
                "target": w.target.to_string(),
                "message": w.message,
                "word": w.word,
            })),
        })
    }
}

#[derive(Clone)]
struct Best {
    value: Prob,
    witness: Option<Witness>,
}

impl Best {
    fn new() -> Self {
        Best {
            value: Prob::zero(),
            witness: None,
        }
    }

    fn offer(&mut self, value: Prob, w: impl FnOnce() -> Witness) {
        if self.witness.is_none() || value > self.value {
            self.value = value;
            self.witness = Some(w());
        }
    }
}

/// Evaluates completeness and soundness of `decoder` against `adversary`
/// at corruption radius `⌊δn⌋`.
pub fn eval(
    decoder: &dyn LocalDecoder,
    code: &LinearCode,
    mode: Mode,
    adversary: &dyn Adversary,
    delta: &Prob,
) -> Result<EvalReport, DecoderError> {
    let r = radius(delta, code.n());
    let targets = decoder.targets();
    match mode {
        Mode::Exact { budget } => {
            let patterns = adversary
                .pattern_count(code, r)
                .ok_or_else(|| DecoderError::NotEnumerable(adversary.name()))?;
            let messages = code.message_count().map(u128::from).unwrap_or(u128::MAX);
            let needed = messages
                .saturating_mul(patterns.saturating_add(1))
                .saturating_mul(targets.len() as u128);
            if needed > budget {
                return Err(DecoderError::Budget { needed, budget });
            }
            let msgs: Vec<Vec<Scalar>> = code.messages().collect();
            type PerMessage = Result<(Prob, Best, Best), DecoderError>;
            let per: Vec<PerMessage> = msgs
                .par_iter()
                .map(|b| {
                    let cw = code.encode_unchecked(b);
                    let mut comp = Prob::one();
                    let mut sound = Best::new();
                    let mut strict = Best::new();
                    for &t in &targets {
                        let truth = t.truth(code, b);
                        comp = comp.min(decoder.distribution(t, &cw).prob(Outcome::Value(truth)));
                        let words = adversary
                            .enumerate(code, &cw, t, r)
                            .ok_or_else(|| DecoderError::NotEnumerable(adversary.name()))?;
                        for y in words {
                            let dist = distance(&y, &cw);
                            if dist > r {
                                return Err(DecoderError::Radius { dist, radius: r });
                            }
                            let d = decoder.distribution(t, &y);
                            let wit = || Witness {
                                target: t,
                                message: b.clone(),
                                word: y.clone(),
                            };
                            sound.offer(d.error(truth), wit);
                            strict.offer(d.strict_error(truth), wit);
                        }
                    }
                    Ok((comp, sound, strict))
                })
                .collect();
            let mut comp = Prob::one();
            let mut sound = Best::new();
            let mut strict = Best::new();
            for item in per {
                let (c, s, st) = item?;
                comp = comp.min(c);
                if let Some(w) = s.witness {
                    sound.offer(s.value, || w);
                }
                if let Some(w) = st.witness {
                    strict.offer(st.value, || w);
                }
            }
            Ok(EvalReport {
                completeness: Measure::Exact(comp),
                soundness_error: Measure::Exact(sound.value),
                strict_error: Measure::Exact(strict.value),
                q_max: decoder.max_queries(),
                trials: 0,
                seed: None,
                witness: sound.witness,
            })
        }
        Mode::MonteCarlo { trials, seed } => {
            if targets.is_empty() {
                return Err(DecoderError::Weights("decoder has no targets".into()));
            }
            let results: Vec<(bool, bool, bool, Option<Witness>)> = (0..trials)
                .into_par_iter()
                .map(|i| {
                    let mut rng = trial_rng(seed, i);
                    let t = targets[(i % targets.len() as u64) as usize];
                    let b = code.field().random_vector(code.k(), &mut rng);
                    let cw = code.encode_unchecked(&b);
                    let truth = t.truth(code, &b);
                    let ok = decoder.sample(t, &cw, &mut rng) == Outcome::Value(truth);
                    let y = adversary.sample(code, &cw, t, r, &mut rng);
                    assert!(distance(&y, &cw) <= r, "adversary exceeded its radius");
                    let out = decoder.sample(t, &y, &mut rng);
                    let wrong = matches!(out, Outcome::Value(v) if v != truth);
                    let strict = out != Outcome::Value(truth);
                    let w = wrong.then(|| Witness {
                        target: t,
                        message: b.clone(),
                        word: y.clone(),
                    });
                    (ok, wrong, strict, w)
                })
                .collect();
            let count = |f: &dyn Fn(&(bool, bool, bool, Option<Witness>)) -> bool| {
                results.iter().filter(|r| f(r)).count() as u64
            };
            let witness = results.iter().find_map(|r| r.3.clone());
            Ok(EvalReport {
                completeness: Measure::Estimate(Estimate {
                    hits: count(&|r| r.0),
                    trials,
                }),
                soundness_error: Measure::Estimate(Estimate {
                    hits: count(&|r| r.1),
                    trials,
                }),
                strict_error: Measure::Estimate(Estimate {
                    hits: count(&|r| r.2),
                    trials,
                }),
                q_max: decoder.max_queries(),
                trials,
                seed: Some(seed),
                witness,
            })
        }
    }
}

/// Exact error `Pr[output ∉ {truth, ⊥}]` on one fixed (message, word) pair.
pub fn error_on(decoder: &dyn LocalDecoder, code: &LinearCode, target: Target, b: &[Scalar], y: &[Scalar]) -> Prob {
    decoder.distribution(target, y).error(target.truth(code, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::prob;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy() -> LinearCode {
        LinearCode::new(Field::f2(), 2, vec![vec![1, 0], vec![0, 1], vec![1, 1]]).unwrap()
    }

    fn dec(code: &LinearCode, sets: Vec<(Vec<usize>, Prob)>) -> NonadaptiveDecoder {
        let mut m = BTreeMap::new();
        m.insert(Target::Message(0), QueryDistribution::new(sets).unwrap());
        NonadaptiveDecoder::new(code, 3, DecodeRule::Canonical, m).unwrap()
    }

    const BIG: Mode = Mode::Exact { budget: 1 << 30 };

    #[test]
    fn canonical_examples() {
        let c = toy();
        let t = Target::Message(0);
        assert_eq!(canonical_decode(&c, t, &[1, 2], &[0, 1]).unwrap(), Outcome::Value(1));
        assert_eq!(canonical_decode(&c, t, &[0, 1, 2], &[1, 1, 1]).unwrap(), Outcome::Bottom);
        assert_eq!(canonical_decode(&c, t, &[0], &[0]).unwrap(), Outcome::Value(0));
        assert!(matches!(
            canonical_decode(&c, t, &[1], &[0]),
            Err(DecoderError::Completeness { .. })
        ));
    }

    #[test]
    fn construction_rejects_incomplete_sets() {
        let c = toy();
        let mut m = BTreeMap::new();
        m.insert(Target::Message(0), QueryDistribution::point(vec![1]));
        assert!(matches!(
            NonadaptiveDecoder::new(&c, 2, DecodeRule::Canonical, m),
            Err(DecoderError::Completeness { .. })
        ));
        assert!(QueryDistribution::new(vec![(vec![0], prob(1, 3))]).is_err());
    }

    #[test]
    fn eval_examples() {
        let c = toy();
        let d = dec(&c, vec![(vec![1, 2], prob(1, 1))]);
        let none = eval(&d, &c, BIG, &Exhaustive, &prob(0, 1)).unwrap();
        assert_eq!(none.completeness, Measure::Exact(prob(1, 1)));
        assert_eq!(none.soundness_error, Measure::Exact(prob(0, 1)));
        let flip = Shift {
            positions: vec![1],
            amount: 1,
        };
        let r = eval(&d, &c, BIG, &flip, &prob(1, 3)).unwrap();
        assert_eq!(r.soundness_error, Measure::Exact(prob(1, 1)));
        let mixed = dec(&c, vec![(vec![0], prob(1, 2)), (vec![1, 2], prob(1, 2))]);
        let r = eval(&mixed, &c, BIG, &flip, &prob(1, 3)).unwrap();
        assert_eq!(r.soundness_error, Measure::Exact(prob(1, 2)));
        let fixed = FixedSet { positions: vec![1] };
        let r = eval(&mixed, &c, BIG, &fixed, &prob(1, 3)).unwrap();
        assert_eq!(r.soundness_error, Measure::Exact(prob(1, 2)));
        assert!(matches!(
            eval(&mixed, &c, Mode::Exact { budget: 3 }, &Exhaustive, &prob(1, 3)),
            Err(DecoderError::Budget { .. })
        ));
    }

    #[test]
    fn exhaustive_word_count() {
        let c = LinearCode::new(Field::prime(3).unwrap(), 1, vec![vec![1]; 4]).unwrap();
        let words = Exhaustive.enumerate(&c, &[0; 4], Target::Message(0), 2).unwrap();
        assert_eq!(words.len() as u128, Exhaustive.pattern_count(&c, 2).unwrap());
        assert_eq!(words.len(), 1 + 4 * 2 + 6 * 4);
        let set: std::collections::BTreeSet<_> = words.iter().collect();
        assert_eq!(set.len(), words.len());
    }

    #[test]
    fn repetition_is_exact_power() {
        let c = toy();
        let mixed = dec(&c, vec![(vec![0], prob(1, 2)), (vec![1, 2], prob(1, 2))]);
        let b = [0, 0];
        let y = [0, 1, 0];
        let base = error_on(&mixed, &c, Target::Message(0), &b, &y);
        assert_eq!(base, prob(1, 2));
        for t in 1..=3 {
            let rep = repeat_decoder(mixed.clone(), t);
            assert_eq!(error_on(&rep, &c, Target::Message(0), &b, &y), crate::report::pow(&base, t));
            assert_eq!(rep.max_queries(), 2 * t as usize);
        }
        let rep = repeat_decoder(mixed.clone(), 1);
        assert_eq!(rep.distribution(Target::Message(0), &y), mixed.distribution(Target::Message(0), &y));
        // sampled version of the same quantity
        let rep = repeat_decoder(mixed, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let hits = (0..10_000)
            .filter(|_| rep.sample(Target::Message(0), &y, &mut rng) == Outcome::Value(1))
            .count();
        assert!((hits as f64 / 10_000.0 - 0.25).abs() < 0.02);
    }

    #[test]
    fn tree_walks() {
        let t = DecisionTree::leaf(Leaf::Value(1));
        let run = t.run(&[0, 1, 0]);
        assert!(run.queries.is_empty());
        assert_eq!(run.leaf, Leaf::Value(1));
        let tree = DecisionTree::from_text("q2 [v0] [q1 [_] [v1]]", 2, 3).unwrap();
        let run = tree.run(&[0, 1, 0]);
        assert_eq!(run.queries, vec![1, 0]);
        assert_eq!(run.view, vec![1, 0]);
        assert_eq!(run.leaf, Leaf::Bottom);
        assert_eq!(DecisionTree::from_text(&tree.to_text(), 2, 3).unwrap(), tree);
        assert!(DecisionTree::from_text("q2 [v0] [q2 [v0] [v1]]", 2, 3).is_err());
        assert!(DecisionTree::from_text("q2 [v0]", 2, 3).is_err());
        assert!(DecisionTree::from_text("q4 [v0] [v1]", 2, 3).is_err());
    }

    #[test]
    fn random_trees_never_repeat() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let n = 5;
            let tree = random_tree(&mut rng, n, 3, 3);
            let tree = DecisionTree::new(tree.root, 3, n).unwrap();
            for leaf in tree.leaves() {
                let mut q = leaf.queries.clone();
                q.sort_unstable();
                q.dedup();
                assert_eq!(q.len(), leaf.queries.len());
            }
        }
    }

    fn random_tree(rng: &mut ChaCha8Rng, n: usize, q: u32, depth: usize) -> DecisionTree {
        fn build(rng: &mut ChaCha8Rng, n: usize, q: u32, depth: usize, used: &mut Vec<usize>) -> Node {
            if depth == 0 || rng.gen_bool(0.3) {
                return Node::Leaf(if rng.gen_bool(0.2) {
                    Leaf::Bottom
                } else {
                    Leaf::Value(rng.gen_range(0..q))
                });
            }
            let free: Vec<usize> = (0..n).filter(|j| !used.contains(j)).collect();
            let j = free[rng.gen_range(0..free.len())];
            used.push(j);
            let children = (0..q).map(|_| build(rng, n, q, depth - 1, used)).collect();
            used.pop();
            Node::Query { index: j, children }
        }
        DecisionTree {
            root: build(rng, n, q, depth, &mut Vec::new()),
        }
    }

    #[test]
    fn canonicalization_never_hurts() {
        // hand-written leaf functions over the toy code, compared with the canonical rule;
        // they may only differ from it on views no codeword produces
        let c = toy();
        let t = Target::Message(0);
        let sets: Vec<Vec<usize>> = vec![vec![0], vec![1, 2], vec![0, 1, 2], vec![0, 2]];
        let rules: Vec<Box<dyn Fn(&[Scalar]) -> Leaf>> = vec![
            Box::new(|v: &[Scalar]| Leaf::Value(v[0])),
            Box::new(|v: &[Scalar]| Leaf::Value((v[0] + v[v.len() - 1]) % 2)),
            Box::new(|_: &[Scalar]| Leaf::Value(1)),
            Box::new(|v: &[Scalar]| if v[0] == 1 { Leaf::Value(0) } else { Leaf::Bottom }),
        ];
        for set in &sets {
            for rule in &rules {
                // perfectly complete: canonical on consistent views, arbitrary elsewhere
                let hand_label = |view: &[Scalar]| match canonical_decode(&c, t, set, view).unwrap() {
                    Outcome::Value(v) => Leaf::Value(v),
                    Outcome::Bottom => rule(view),
                };
                let tree = DecisionTree::complete(set, 2, &hand_label);
                let canon = tree.map_leaves(&mut |q, view, _| match canonical_decode(&c, t, q, view).unwrap() {
                    Outcome::Value(v) => Leaf::Value(v),
                    Outcome::Bottom => Leaf::Bottom,
                });
                let mk = |tr: DecisionTree| {
                    let mut m = BTreeMap::new();
                    m.insert(t, vec![(tr, prob(1, 1))]);
                    AdaptiveDecoder::new(&c, 3, m).unwrap()
                };
                let hand = mk(tree);
                let canon = mk(canon);
                for b in c.messages() {
                    for y in all_vectors(&Field::f2(), 3) {
                        assert!(error_on(&canon, &c, t, &b, &y) <= error_on(&hand, &c, t, &b, &y));
                    }
                }
            }
        }
    }

    #[test]
    fn monte_carlo_is_deterministic() {
        let c = toy();
        let mixed = dec(&c, vec![(vec![0], prob(1, 2)), (vec![1, 2], prob(1, 2))]);
        let mode = Mode::MonteCarlo { trials: 2000, seed: 9 };
        let a = eval(&mixed, &c, mode, &RandomPositions, &prob(1, 3)).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| eval(&mixed, &c, mode, &RandomPositions, &prob(1, 3)).unwrap());
        assert_eq!(a, b);
        assert_eq!(a.completeness.as_f64(), 1.0);
    }

    #[test]
    fn decoder_text_round_trip() {
        let c = toy();
        let d = dec(&c, vec![(vec![0], prob(1, 2)), (vec![1, 2], prob(1, 2))]);
        let text = d.to_text();
        assert_eq!(text, "decoder q 3 rule canonical\ntarget m1\n1/2 1\n1/2 2 3\n");
        assert_eq!(NonadaptiveDecoder::from_text(&text, &c).unwrap(), d);
        let lin = d.with_rule(DecodeRule::Linear);
        assert_eq!(NonadaptiveDecoder::from_text(&lin.to_text(), &c).unwrap(), lin);
        assert_eq!("c3".parse::<Target>().unwrap(), Target::Codeword(2));
        assert!("m0".parse::<Target>().is_err());
    }

    #[test]
    fn adaptive_text_round_trip() {
        let c = toy();
        let d = dec(&c, vec![(vec![0], prob(1, 3)), (vec![1, 2], prob(2, 3))]);
        let a = AdaptiveDecoder::from_nonadaptive(&c, &d).unwrap();
        let text = a.to_text();
        assert!(text.starts_with("adaptive q 3\ntarget m1\n1/3 q1 [v0] [v1]\n"));
        assert_eq!(AdaptiveDecoder::from_text(&text, &c).unwrap(), a);
        assert!(AdaptiveDecoder::from_text("adaptive q 1\ntarget m1\n1/1 q1 [q2 [v0] [v1]] [v1]\n", &c).is_err());
        assert!(AdaptiveDecoder::from_text("adaptive q 1\n1/1 v0\n", &c).is_err());
    }

    #[test]
    fn completeness_holds_on_all_codewords() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..30 {
            let field = Field::prime(3).unwrap();
            let code = LinearCode::random(field, 2, 4, &mut rng);
            let all: Vec<usize> = (0..4).collect();
            let mut m = BTreeMap::new();
            for t in Target::all_messages(&code) {
                let sets: Vec<Vec<usize>> = (1..16u32)
                    .map(|mask| all.iter().copied().filter(|j| (mask >> j) & 1 == 1).collect::<Vec<_>>())
                    .filter(|s| code.in_span(&t.vstar(&code), s).is_some())
                    .collect();
                m.insert(t, QueryDistribution::uniform(sets).unwrap());
            }
            let d = NonadaptiveDecoder::new(&code, 4, DecodeRule::Canonical, m).unwrap();
            let r = eval(&d, &code, BIG, &Exhaustive, &prob(0, 1)).unwrap();
            assert_eq!(r.completeness, Measure::Exact(prob(1, 1)));
        }
    }
}
