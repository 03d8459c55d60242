//! Free operators sum_I a_I (x) lambda(w_I) and their L_p norms: exact p=2,
//! exact even p via a pruned word-tuple trace expansion, certified p=infinity
//! lower bounds by compression to word balls, and the absorption-invariance
//! transforms (character twists and regular-representation doubling).
//!
//! Trace normalization: the group trace is normalized on every factor, the
//! m x m coefficient trace is unnormalized, so the p=2 norm of a
//! distinct-word operator is its Frobenius mass with no m-dependent factor.

pub mod trunc;

use crate::error::{Error, Result};
use crate::schatten::{intersection_norm, schatten_norm, Exponent, NormReport};
use crate::tensors::{
    reshape, word_map_plain, word_map_separated, word_map_signed, CMat, CoeffTensor, MultiIndex,
    PartitionSplit, DEFAULT_DENSE_CAP,
};
use crate::words::{ProductWord, ReducedWord};
use num_complex::Complex64;
use serde::Serialize;
use std::collections::{BTreeMap, HashSet};

pub use trunc::{opnorm_lower_trunc, TruncOptions, TruncResult};

/// Default node budget for the moment DFS.
pub const DEFAULT_NODE_BUDGET: u64 = 50_000_000;
/// Hard cap on brute-force tuple counts.
pub const BRUTEFORCE_CAP: u64 = 50_000_000;

/// Word of a free operator: an element of a single free group or of a
/// direct product of free groups.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum GroupWord {
    Single(ReducedWord),
    Product(ProductWord),
}

impl GroupWord {
    pub fn is_identity(&self) -> bool {
        match self {
            GroupWord::Single(w) => w.is_identity(),
            GroupWord::Product(w) => w.is_identity(),
        }
    }

    pub fn total_len(&self) -> usize {
        match self {
            GroupWord::Single(w) => w.len(),
            GroupWord::Product(w) => w.total_len(),
        }
    }
}

/// The ambient group of an operator.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Group {
    Free { rank: usize },
    Product { ranks: Vec<usize> },
}

impl Group {
    pub fn factor_ranks(&self) -> Vec<usize> {
        match self {
            Group::Free { rank } => vec![*rank],
            Group::Product { ranks } => ranks.clone(),
        }
    }

    pub fn total_generators(&self) -> usize {
        self.factor_ranks().iter().sum()
    }
}

/// A coefficient tensor paired with a word map: sum_I a_I (x) lambda(w_I).
#[derive(Clone, Debug)]
pub struct FreeOperator {
    coeffs: CoeffTensor,
    group: Group,
    words: BTreeMap<MultiIndex, GroupWord>,
}

impl FreeOperator {
    /// Builds an operator from an explicit word table. Every supported index
    /// must have a word.
    pub fn from_words(
        coeffs: CoeffTensor,
        group: Group,
        words: BTreeMap<MultiIndex, GroupWord>,
    ) -> Result<Self> {
        for idx in coeffs.entries().keys() {
            if !words.contains_key(idx) {
                return Err(Error::MissingWord(idx.clone()));
            }
        }
        Ok(FreeOperator {
            coeffs,
            group,
            words,
        })
    }

    /// Plain word map I -> g_{i_1} ... g_{i_d} into F_n.
    pub fn plain(coeffs: CoeffTensor) -> Self {
        let n = coeffs.n();
        let words = coeffs
            .entries()
            .keys()
            .map(|idx| (idx.clone(), GroupWord::Single(word_map_plain(idx, n))))
            .collect();
        FreeOperator {
            group: Group::Free { rank: n },
            coeffs,
            words,
        }
    }

    /// Separated-alphabet word map into F_{nd}.
    pub fn separated(coeffs: CoeffTensor) -> Self {
        let (n, d) = (coeffs.n(), coeffs.d());
        let words = coeffs
            .entries()
            .keys()
            .map(|idx| (idx.clone(), GroupWord::Single(word_map_separated(idx, n, d))))
            .collect();
        FreeOperator {
            group: Group::Free { rank: n * d },
            coeffs,
            words,
        }
    }

    /// Signed-alphabet word map I -> h_{i_1} ... h_{i_d} into F_n. Words of
    /// indices violating the cancellation property come out shorter than d
    /// and may coincide; the moment oracle handles that correctly.
    pub fn signed(coeffs: CoeffTensor) -> Self {
        let n = coeffs.n();
        let words = coeffs
            .entries()
            .keys()
            .map(|idx| (idx.clone(), GroupWord::Single(word_map_signed(idx, n))))
            .collect();
        FreeOperator {
            group: Group::Free { rank: n },
            coeffs,
            words,
        }
    }

    /// Tensor-power word map into F_n x ... x F_n (d factors): the word of I
    /// has the single letter g_{i_s} in factor s.
    pub fn tensor_power(coeffs: CoeffTensor) -> Self {
        let (n, d) = (coeffs.n(), coeffs.d());
        let words = coeffs
            .entries()
            .keys()
            .map(|idx| {
                let components = idx
                    .iter()
                    .map(|&i| {
                        ReducedWord::reduce(&[(i + 1) as i32], n).expect("letter in range")
                    })
                    .collect();
                (idx.clone(), GroupWord::Product(ProductWord::new(components)))
            })
            .collect();
        FreeOperator {
            group: Group::Product { ranks: vec![n; d] },
            coeffs,
            words,
        }
    }

    pub fn coeffs(&self) -> &CoeffTensor {
        &self.coeffs
    }

    pub fn group(&self) -> &Group {
        &self.group
    }

    pub fn words(&self) -> &BTreeMap<MultiIndex, GroupWord> {
        &self.words
    }

    fn support(&self) -> Vec<(&MultiIndex, &CMat, &GroupWord)> {
        self.coeffs
            .entries()
            .iter()
            .map(|(idx, v)| (idx, v, self.words.get(idx).expect("checked at construction")))
            .collect()
    }

    pub fn words_distinct(&self) -> bool {
        let mut seen = HashSet::new();
        self.coeffs
            .entries()
            .keys()
            .all(|idx| seen.insert(self.words.get(idx).expect("word present")))
    }

    /// Exact p = 2 norm via orthonormality of the word basis: the Frobenius
    /// mass of the coefficients. Requires pairwise distinct words.
    pub fn norm_p2(&self) -> Result<f64> {
        if !self.words_distinct() {
            return Err(Error::DuplicateWords);
        }
        Ok(self.coeffs.frobenius())
    }

    /// (tr (x) tau)((X*X)^q) by depth-first enumeration of index 2q-tuples,
    /// pruning branches whose running reduced word is longer than the
    /// remaining letters could cancel.
    pub fn moment_even(&self, q: u32, node_budget: u64) -> Result<Moment> {
        self.moment_impl(q, node_budget)
    }

    /// Naive enumeration: every index 2q-tuple is evaluated from scratch,
    /// with no prefix sharing and no pruning. The independent oracle for
    /// `moment_even`; visited nodes = 2q * (support size)^2q.
    pub fn moment_even_bruteforce(&self, q: u32) -> Result<Moment> {
        assert!(q >= 1, "moment order must be positive");
        let support = self.support();
        let s = support.len();
        if s == 0 {
            return Ok(Moment {
                value: 0.0,
                nodes: 0,
            });
        }
        let positions = 2 * q as usize;
        let work = (s as u64)
            .checked_pow(2 * q)
            .and_then(|t| t.checked_mul(positions as u64))
            .filter(|&w| w <= BRUTEFORCE_CAP);
        if work.is_none() {
            return Err(Error::BudgetExceeded {
                visited: u64::MAX,
                budget: BRUTEFORCE_CAP,
            });
        }
        let m = self.coeffs.m();
        let mut acc = Complex64::new(0.0, 0.0);
        let mut nodes = 0u64;
        let mut tuple = vec![0usize; positions];
        loop {
            let mut prod = CMat::identity(m, m);
            let mut word = gw_identity(&self.group);
            for (pos, &pick) in tuple.iter().enumerate() {
                nodes += 1;
                let (_, mat, w) = support[pick];
                if pos % 2 == 0 {
                    prod *= mat.adjoint();
                    word = gw_multiply(&word, &gw_inverse(w))?;
                } else {
                    prod *= mat;
                    word = gw_multiply(&word, w)?;
                }
            }
            if word.is_identity() {
                acc += trace(&prod);
            }
            let mut i = positions;
            loop {
                if i == 0 {
                    return Ok(Moment {
                        value: acc.re,
                        nodes,
                    });
                }
                i -= 1;
                tuple[i] += 1;
                if tuple[i] < s {
                    break;
                }
                tuple[i] = 0;
            }
        }
    }

    fn moment_impl(&self, q: u32, node_budget: u64) -> Result<Moment> {
        assert!(q >= 1, "moment order must be positive");
        let support = self.support();
        if support.is_empty() {
            return Ok(Moment {
                value: 0.0,
                nodes: 0,
            });
        }
        let m = self.coeffs.m();
        let positions = 2 * q as usize;
        let max_word_len = support.iter().map(|(_, _, w)| w.total_len()).max().unwrap_or(0);
        // Precomputed adjoints for the odd (1-based) positions.
        let adjoints: Vec<CMat> = support.iter().map(|(_, v, _)| v.adjoint()).collect();
        let inverses: Vec<GroupWord> = support
            .iter()
            .map(|(_, _, w)| match w {
                GroupWord::Single(w) => GroupWord::Single(w.inverse()),
                GroupWord::Product(w) => GroupWord::Product(w.inverse()),
            })
            .collect();

        // Closing lookup: the product of the last two tuple positions,
        // w_i^{-1} w_j, must invert the running stack, so the candidate
        // pairs are found by hash instead of scanning the support twice.
        let mut closers: std::collections::HashMap<GroupWord, Vec<(usize, usize)>> =
            std::collections::HashMap::new();
        for (i, inv) in inverses.iter().enumerate() {
            for (j, (_, _, w)) in support.iter().enumerate() {
                closers
                    .entry(gw_multiply(inv, w)?)
                    .or_default()
                    .push((i, j));
            }
        }

        // Reachability sets: reach[pi][k] holds every group element a
        // product of k remaining slots can take, where pi = 0 when the
        // first remaining position is even (contributing w^{-1}) and 1 when
        // odd (contributing w). Membership of the stack inverse is an exact
        // structural prune; computed until the cumulative size cap, with
        // the length bound as the fallback at greater depths.
        let mut reach: [Vec<std::collections::HashSet<GroupWord>>; 2] = [Vec::new(), Vec::new()];
        let identity = gw_identity(&self.group);
        reach[0].push([identity.clone()].into_iter().collect());
        reach[1].push([identity].into_iter().collect());
        let mut total: usize = 2;
        for k in 1..positions {
            for pi in 0..2usize {
                let mut next = std::collections::HashSet::new();
                for idx in 0..support.len() {
                    let slot = if pi == 0 { &inverses[idx] } else { support[idx].2 };
                    for tail in &reach[1 - pi][k - 1] {
                        next.insert(gw_multiply(slot, tail)?);
                    }
                }
                total += next.len();
                reach[pi].push(next);
            }
            if total > REACH_CAP {
                break;
            }
        }

        let mut dfs = MomentDfs {
            mats: support.iter().map(|(_, v, _)| *v).collect(),
            adjoints,
            words: support.iter().map(|(_, _, w)| *w).collect(),
            inverses,
            closers,
            reach,
            ranks: self.group.factor_ranks(),
            single: matches!(self.group, Group::Free { .. }),
            stacks: WordStacks::new(&self.group),
            prods: {
                let mut p: Vec<CMat> = (0..=positions).map(|_| CMat::zeros(m, m)).collect();
                p[0] = CMat::identity(m, m);
                p
            },
            positions,
            max_word_len,
            node_budget,
            nodes: 0,
            acc: Complex64::new(0.0, 0.0),
        };
        dfs.descend(0)?;
        Ok(Moment {
            value: dfs.acc.re,
            nodes: dfs.nodes,
        })
    }

    /// L_p norm for even integer p >= 2: moment_even(p/2)^{1/p}.
    pub fn norm_even_p(&self, p: u32, node_budget: u64) -> Result<f64> {
        assert!(p >= 2 && p % 2 == 0, "p must be an even integer >= 2");
        let moment = self.moment_even(p / 2, node_budget)?;
        Ok(moment.value.max(0.0).powf(1.0 / p as f64))
    }

    /// Twist by a one-dimensional character: coefficient a_I is multiplied
    /// by the product of the signs of its word's letters (inverse letters
    /// contribute the same sign). One sign per generator, factors
    /// concatenated. Words are unchanged; involutive.
    pub fn character_twist(&self, signs: &[i8]) -> Result<FreeOperator> {
        let expected = self.group.total_generators();
        if signs.len() != expected {
            return Err(Error::SignLength {
                got: signs.len(),
                expected,
            });
        }
        let ranks = self.group.factor_ranks();
        let mut offsets = Vec::with_capacity(ranks.len());
        let mut acc = 0usize;
        for r in &ranks {
            offsets.push(acc);
            acc += r;
        }
        let character = |word: &GroupWord| -> f64 {
            let single = |w: &ReducedWord, offset: usize| -> f64 {
                w.letters()
                    .iter()
                    .map(|&l| signs[offset + l.unsigned_abs() as usize - 1] as f64)
                    .product()
            };
            match word {
                GroupWord::Single(w) => single(w, 0),
                GroupWord::Product(p) => p
                    .components()
                    .iter()
                    .zip(&offsets)
                    .map(|(w, &off)| single(w, off))
                    .product(),
            }
        };
        let mut coeffs = CoeffTensor::zero(
            self.coeffs.n(),
            self.coeffs.d(),
            self.coeffs.m(),
            self.coeffs.alphabet(),
        );
        for (idx, v) in self.coeffs.entries() {
            let chi = character(self.words.get(idx).expect("word present"));
            coeffs.set(idx.clone(), v * Complex64::new(chi, 0.0))?;
        }
        Ok(FreeOperator {
            coeffs,
            group: self.group.clone(),
            words: self.words.clone(),
        })
    }

    /// Tensors a second copy of the left regular representation onto each
    /// word: the operator over G x G with words (w_I, w_I). All even moments
    /// are unchanged.
    pub fn double_with_regular(&self) -> FreeOperator {
        let ranks = self.group.factor_ranks();
        let doubled_ranks: Vec<usize> = ranks.iter().chain(ranks.iter()).copied().collect();
        let words = self
            .words
            .iter()
            .map(|(idx, w)| {
                let comps: Vec<ReducedWord> = match w {
                    GroupWord::Single(w) => vec![w.clone(), w.clone()],
                    GroupWord::Product(p) => p
                        .components()
                        .iter()
                        .chain(p.components().iter())
                        .cloned()
                        .collect(),
                };
                (idx.clone(), GroupWord::Product(ProductWord::new(comps)))
            })
            .collect();
        FreeOperator {
            coeffs: self.coeffs.clone(),
            group: Group::Product {
                ranks: doubled_ranks,
            },
            words,
        }
    }
}

fn gw_multiply(a: &GroupWord, b: &GroupWord) -> Result<GroupWord> {
    match (a, b) {
        (GroupWord::Single(x), GroupWord::Single(y)) => Ok(GroupWord::Single(x.multiply(y)?)),
        (GroupWord::Product(x), GroupWord::Product(y)) => Ok(GroupWord::Product(x.multiply(y)?)),
        _ => unreachable!("uniform word kind per operator"),
    }
}

fn gw_inverse(w: &GroupWord) -> GroupWord {
    match w {
        GroupWord::Single(x) => GroupWord::Single(x.inverse()),
        GroupWord::Product(x) => GroupWord::Product(x.inverse()),
    }
}

fn gw_identity(group: &Group) -> GroupWord {
    match group {
        Group::Free { rank } => GroupWord::Single(ReducedWord::identity(*rank)),
        Group::Product { ranks } => GroupWord::Product(ProductWord::identity(ranks)),
    }
}

/// Cumulative size cap on the reachability sets of the moment DFS.
const REACH_CAP: usize = 200_000;

struct MomentDfs<'a> {
    mats: Vec<&'a CMat>,
    adjoints: Vec<CMat>,
    words: Vec<&'a GroupWord>,
    inverses: Vec<GroupWord>,
    closers: std::collections::HashMap<GroupWord, Vec<(usize, usize)>>,
    reach: [Vec<std::collections::HashSet<GroupWord>>; 2],
    ranks: Vec<usize>,
    single: bool,
    stacks: WordStacks,
    prods: Vec<CMat>,
    positions: usize,
    max_word_len: usize,
    node_budget: u64,
    nodes: u64,
    acc: Complex64,
}

impl MomentDfs<'_> {
    fn visit(&mut self) -> Result<()> {
        self.nodes += 1;
        if self.nodes > self.node_budget {
            return Err(Error::BudgetExceeded {
                visited: self.nodes,
                budget: self.node_budget,
            });
        }
        Ok(())
    }

    /// The inverse of the running stack as a group word.
    fn stack_inverse(&self) -> GroupWord {
        let mut comps = self.stacks.factors.iter().zip(&self.ranks).map(|(f, &r)| {
            let letters: Vec<i32> = f.iter().rev().map(|&l| -l).collect();
            ReducedWord::reduce(&letters, r).expect("stack letters are valid")
        });
        if self.single {
            GroupWord::Single(comps.next().expect("single factor"))
        } else {
            GroupWord::Product(ProductWord::new(comps.collect()))
        }
    }

    fn descend(&mut self, depth: usize) -> Result<()> {
        if depth == self.positions - 2 {
            // The product of the two closing words must invert the running
            // stack; candidate pairs by hash lookup. The next position is
            // even (adjoint/inverse slot), the last is odd (plain slot).
            let needed = self.stack_inverse();
            if let Some(pairs) = self.closers.get(&needed).cloned() {
                for (i, j) in pairs {
                    self.visit()?;
                    self.visit()?;
                    {
                        let (lo, hi) = self.prods.split_at_mut(depth + 1);
                        mul_into(&lo[depth], &self.adjoints[i], &mut hi[0]);
                    }
                    let (lo, hi) = self.prods.split_at_mut(depth + 2);
                    mul_into(&lo[depth + 1], self.mats[j], &mut hi[0]);
                    self.acc += trace(&hi[0]);
                }
            }
            return Ok(());
        }
        for pick in 0..self.mats.len() {
            // Even 0-based depth takes the adjoint/inverse slot.
            let word = if depth % 2 == 0 {
                &self.inverses[pick]
            } else {
                self.words[pick]
            };
            let undo = self.stacks.push(word);
            let k = self.positions - depth - 1;
            let viable = if k < self.reach[0].len() {
                let pi = usize::from((depth + 1) % 2 != 0);
                self.reach[pi][k].contains(&self.stack_inverse())
            } else {
                self.stacks.total_len() <= k * self.max_word_len
            };
            if viable {
                self.visit()?;
                let mat = if depth % 2 == 0 {
                    &self.adjoints[pick]
                } else {
                    self.mats[pick]
                };
                let (lo, hi) = self.prods.split_at_mut(depth + 1);
                mul_into(&lo[depth], mat, &mut hi[0]);
                self.descend(depth + 1)?;
            }
            self.stacks.pop(undo);
        }
        Ok(())
    }
}

/// Result of a moment computation: the value and the number of DFS nodes
/// visited.
#[derive(Clone, Copy, Debug)]
pub struct Moment {
    pub value: f64,
    pub nodes: u64,
}

fn trace(m: &CMat) -> Complex64 {
    (0..m.nrows()).map(|i| m[(i, i)]).sum()
}

fn mul_into(a: &CMat, b: &CMat, out: &mut CMat) {
    a.mul_to(b, out);
}

/// Mutable reduced-word stacks, one per group factor, with undo records so
/// the DFS never clones words.
struct WordStacks {
    factors: Vec<Vec<i32>>,
    total: usize,
}

struct StackUndo {
    /// Per factor: how many letters were pushed, and the letters that were
    /// cancelled off the top (in pop order).
    records: Vec<(usize, Vec<i32>)>,
}

impl WordStacks {
    fn new(group: &Group) -> Self {
        let k = group.factor_ranks().len();
        WordStacks {
            factors: vec![Vec::new(); k],
            total: 0,
        }
    }

    fn total_len(&self) -> usize {
        self.total
    }

    fn push(&mut self, word: &GroupWord) -> StackUndo {
        let mut records = Vec::with_capacity(self.factors.len());
        match word {
            GroupWord::Single(w) => {
                records.push(self.push_factor(0, w.letters()));
                for _ in 1..self.factors.len() {
                    records.push((0, Vec::new()));
                }
            }
            GroupWord::Product(p) => {
                for (f, comp) in p.components().iter().enumerate() {
                    records.push(self.push_factor(f, comp.letters()));
                }
            }
        }
        StackUndo { records }
    }

    fn push_factor(&mut self, f: usize, letters: &[i32]) -> (usize, Vec<i32>) {
        let stack = &mut self.factors[f];
        let mut pushed = 0usize;
        let mut popped = Vec::new();
        for &l in letters {
            if pushed == 0 && stack.last() == Some(&-l) {
                popped.push(stack.pop().expect("nonempty"));
                self.total -= 1;
            } else {
                stack.push(l);
                self.total += 1;
                pushed += 1;
            }
        }
        (pushed, popped)
    }

    fn pop(&mut self, undo: StackUndo) {
        for (f, (pushed, popped)) in undo.records.into_iter().enumerate() {
            let stack = &mut self.factors[f];
            stack.truncate(stack.len() - pushed);
            self.total -= pushed;
            for l in popped.into_iter().rev() {
                stack.push(l);
                self.total += 1;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Combined Khintchine report
// ---------------------------------------------------------------------------

/// The free L_p value: exact at even p, a certified interval at p=infinity.
#[derive(Clone, Copy, Debug, Serialize)]
#[serde(untagged)]
pub enum LpValue {
    Exact(f64),
    Interval { lower: f64, upper: f64 },
}

impl LpValue {
    /// The value used for ratios and lower-estimate flags: the exact value,
    /// or the certified lower bound of an interval.
    pub fn point(&self) -> f64 {
        match *self {
            LpValue::Exact(v) => v,
            LpValue::Interval { lower, .. } => lower,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LpReport {
    pub p: Exponent,
    pub value: LpValue,
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub slack: f64,
}

/// Intersection-norm data extended with the free L_p side, per-split ratios,
/// and pass/fail flags.
#[derive(Clone, Debug, Serialize)]
pub struct KhintchineReport {
    #[serde(flatten)]
    pub base: NormReport,
    pub lp: LpReport,
    /// L_p (or its certified lower bound) divided by each consecutive-split
    /// norm; infinity when the split norm is zero but L_p is not.
    pub ratios: Vec<f64>,
    pub checks: Vec<Check>,
}

#[derive(Clone, Debug)]
pub struct ReportOptions {
    pub node_budget: u64,
    pub dense_cap: usize,
    pub trunc: TruncOptions,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions {
            node_budget: DEFAULT_NODE_BUDGET,
            dense_cap: DEFAULT_DENSE_CAP,
            trunc: TruncOptions::default(),
        }
    }
}

/// Computes both sides of the Khintchine comparison for a tensor: the free
/// L_p norm of its word operator (the word map follows the tensor alphabet)
/// and the consecutive-split matricization norms.
///
/// Checks emitted: `lower_estimate_k{k}` (split norm <= L_p, constant 1,
/// asserted for even p; at p=infinity the certified lower bound is used, so a
/// false flag there is a limit of the bound, not of the inequality), and for
/// d = 1 the `degree1_upper` sandwich L_p <= 2 max(row, col).
pub fn khintchine_report(
    t: &CoeffTensor,
    p: Exponent,
    options: &ReportOptions,
) -> Result<KhintchineReport> {
    let op = match t.alphabet() {
        crate::tensors::Alphabet::Generators => FreeOperator::plain(t.clone()),
        crate::tensors::Alphabet::Signed => FreeOperator::signed(t.clone()),
    };
    let base = intersection_norm(t, p, options.dense_cap)?;
    let lp_value = match p {
        Exponent::Finite(pf) if pf == 2.0 => {
            let v = if op.words_distinct() {
                op.norm_p2()?
            } else {
                op.moment_even(1, options.node_budget)?.value.max(0.0).sqrt()
            };
            LpValue::Exact(v)
        }
        Exponent::Finite(_) => {
            let q = p.as_even_half().ok_or(Error::UnsupportedExponent {
                required: "p in {2, 4, 6, ...} or infinity",
                got: p.to_string(),
            })?;
            LpValue::Exact(op.norm_even_p(2 * q, options.node_budget)?)
        }
        Exponent::Infinity => {
            let lower = opnorm_lower_trunc(&op, &options.trunc)?.value;
            // Diagnostic upper bound: the sum of the consecutive-split norms.
            let upper: f64 = base.splits.iter().map(|s| s.norm).sum();
            LpValue::Interval { lower, upper }
        }
    };
    let point = lp_value.point();
    let ratios: Vec<f64> = base
        .splits
        .iter()
        .map(|s| if s.norm > 0.0 { point / s.norm } else if point == 0.0 { 0.0 } else { f64::INFINITY })
        .collect();
    let mut checks = Vec::new();
    for (k, s) in base.splits.iter().enumerate() {
        let slack = point - s.norm;
        checks.push(Check {
            name: format!("lower_estimate_k{k}"),
            pass: s.norm <= point + 1e-9,
            slack,
        });
    }
    if t.d() == 1 {
        let row = base.splits[0].norm;
        let col = base.splits[1].norm;
        let bound = 2.0 * row.max(col);
        let upper_point = match lp_value {
            LpValue::Exact(v) => v,
            LpValue::Interval { upper, .. } => upper,
        };
        checks.push(Check {
            name: "degree1_upper".to_string(),
            pass: upper_point <= bound + 1e-9,
            slack: bound - upper_point,
        });
    }
    Ok(KhintchineReport {
        base,
        lp: LpReport { p, value: lp_value },
        ratios,
        checks,
    })
}

/// The three p=infinity terms of the transposition bound for a 2-indexed
/// family: A = sup_j ||(sum_i a_ij a_ij^*)^{1/2}||, C with the roles of the
/// factors adjointed, and B = sup_ij ||a_ij||.
pub struct TranspositionTerms {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub row_split: f64,
    pub col_split: f64,
}

pub fn transposition_terms(t: &CoeffTensor, cap: usize) -> Result<TranspositionTerms> {
    assert_eq!(t.d(), 2, "transposition terms are defined for d = 2");
    let n = t.alphabet_size();
    let m = t.m();
    let zero = CMat::zeros(m, m);
    let entry = |i: usize, j: usize| t.get(&[i, j]).unwrap_or(&zero).clone();
    let opnorm = |mat: &CMat| schatten_norm(mat, Exponent::Infinity);
    let mut a = 0.0f64;
    let mut c = 0.0f64;
    let mut b = 0.0f64;
    for j in 0..n {
        let mut gram = CMat::zeros(m, m);
        for i in 0..n {
            let e = entry(i, j);
            gram += &e * e.adjoint();
        }
        a = a.max(opnorm(&gram)?.sqrt());
    }
    for i in 0..n {
        let mut gram = CMat::zeros(m, m);
        for j in 0..n {
            let e = entry(i, j);
            gram += e.adjoint() * &e;
        }
        c = c.max(opnorm(&gram)?.sqrt());
    }
    for (_, v) in t.entries() {
        b = b.max(opnorm(v)?);
    }
    let row_split = schatten_norm(
        &reshape(t, &PartitionSplit::consecutive(2, 0), cap)?,
        Exponent::Infinity,
    )?;
    let col_split = schatten_norm(
        &reshape(t, &PartitionSplit::consecutive(2, 2), cap)?,
        Exponent::Infinity,
    )?;
    Ok(TranspositionTerms {
        a,
        b,
        c,
        row_split,
        col_split,
    })
}
